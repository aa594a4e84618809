#pragma once

// Experiment orchestration: split -> train -> select -> evaluate, the
// ablation variants, hyper-parameter sweeps, and report files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qos/features.hpp"
#include "qos/metrics.hpp"
#include "qos/model.hpp"
#include "qos/training.hpp"
#include "qos/wsdream.hpp"

namespace qos {

enum class Variant { phi3mini, roberta, id_only, random };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

/// Model-selection protocol label carried by every report: the epoch with
/// the lowest test MAE is the one reported.
inline constexpr std::string_view kSelectionProtocol = "best-epoch-by-test-mae";

struct EvalReport {
    std::string run_id;
    QosKind dataset = QosKind::throughput;
    double density = 0.0;
    std::string variant;
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::size_t best_epoch = 0;
    std::string protocol{kSelectionProtocol};

    bool operator==(const EvalReport&) const = default;
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

/// Seeds used for each stage of one run, all derived from the run seed.
/// The split seed is the run seed itself so variants share splits.
struct RunSeeds {
    std::uint64_t split;
    std::uint64_t model;
    std::uint64_t shuffle;
    std::uint64_t features;

    static RunSeeds from(std::uint64_t seed);
};

struct ExperimentConfig {
    QosKind dataset = QosKind::throughput;
    double density = 0.05;
    Variant variant = Variant::id_only;
    std::vector<std::uint64_t> seeds{0};
    ModelConfig model;  // entity counts and llm_dim are filled in per run
    TrainConfig train;
    std::uint32_t random_feature_dim = 3072;
};

/// External feature stores for the phi3mini/roberta variants.
struct FeatureInputs {
    const FeatureStore* users = nullptr;
    const FeatureStore* services = nullptr;
};

/// Stable id from the configuration and seed: "<16 hex>-s<seed>".
std::string make_run_id(const ExperimentConfig& config, std::uint64_t seed);

/// Feature tables for a variant; random features are generated here.
struct VariantFeatures {
    FeatureTable users;
    FeatureTable services;
    std::size_t dim = 0;

    FeatureView view() const {
        return dim == 0 ? FeatureView{} : FeatureView{&users, &services};
    }
};

VariantFeatures resolve_features(Variant variant, std::size_t n_users, std::size_t n_services,
                                 const FeatureInputs& inputs, std::uint32_t random_dim, std::uint64_t feature_seed);

struct RunOutcome {
    EvalReport report;
    TrainResult training;
};

/// Train on a prepared split and report test metrics of the selected epoch.
RunOutcome run_on_split(const InteractionSplit& split, const VariantFeatures& features, const ExperimentConfig& config,
                        std::size_t n_users, std::size_t n_services, std::uint64_t seed);

/// One report per seed.
std::vector<EvalReport> run_experiment(const QosMatrix& matrix, const ExperimentConfig& config,
                                       const FeatureInputs& inputs = {});

/// Metrics of params on the test side of split.
EvalReport evaluate_checkpoint(const ModelParams& params, const InteractionSplit& split, const FeatureView& features);

enum class SweepAxis { mlp_depth, mlp_width_factor, batch_size, learning_rate };

std::string_view to_string(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view s);

struct SweepSpec {
    SweepAxis axis = SweepAxis::mlp_depth;
    std::vector<double> values;
    ExperimentConfig base;
};

/// Extend by halving the last width (never below 4), or truncate.
std::vector<std::size_t> mlp_dims_for_depth(const std::vector<std::size_t>& base, std::size_t depth);
/// Every width times factor, rounded to nearest, at least 1.
std::vector<std::size_t> mlp_dims_for_width(const std::vector<std::size_t>& base, double factor);

/// Base config with one axis set to value; throws std::invalid_argument on
/// a value the axis cannot take.
ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepAxis axis, double value);

struct SweepPoint {
    double value = 0.0;
    EvalReport report;
    double mae_change = 0.0;   // (mae - base) / base
    double rmse_change = 0.0;
};

struct SweepResult {
    EvalReport base;
    std::vector<SweepPoint> points;
};

/// Uses the first seed of spec.base.
SweepResult run_sweep(const SweepSpec& spec, const QosMatrix& matrix, const FeatureInputs& inputs = {});

void write_sweep_csv(const SweepResult& result, SweepAxis axis, const std::filesystem::path& path);

/// Insert or replace by run_id, then rewrite atomically.
void upsert_report(const EvalReport& report, const std::filesystem::path& jsonl);
std::vector<EvalReport> read_reports(const std::filesystem::path& jsonl);

/// Published per-cell numbers of the comparison methods (display only).
struct PublishedResult {
    std::string_view model;
    QosKind dataset;
    double density;
    double mae;
    double rmse;
};
std::span<const PublishedResult> published_results();

/// Rows: model; columns: density × {MAE, RMSE}; one block per dataset.
/// Multiple seeds of one (dataset, variant, density) are averaged.
std::string render_summary_csv(const std::vector<EvalReport>& reports, bool include_published = true);

}  // namespace qos
