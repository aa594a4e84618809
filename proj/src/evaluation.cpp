#include "qos/evaluation.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "qos/errors.hpp"
#include "qos/rng.hpp"

namespace qos {

Metrics evaluate_metrics(std::span<const double> truth, std::span<const double> predicted) {
    if (truth.empty()) throw std::invalid_argument("evaluate_metrics: empty input");
    if (truth.size() != predicted.size()) throw std::invalid_argument("evaluate_metrics: length mismatch");
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double r = truth[i] - predicted[i];
        abs_sum += std::abs(r);
        sq_sum += r * r;
    }
    const auto n = static_cast<double>(truth.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::phi3mini: return "phi3mini";
        case Variant::roberta: return "roberta";
        case Variant::id_only: return "id_only";
        case Variant::random: return "random";
    }
    return "id_only";
}

Variant parse_variant(std::string_view s) {
    if (s == "phi3mini") return Variant::phi3mini;
    if (s == "roberta") return Variant::roberta;
    if (s == "id_only") return Variant::id_only;
    if (s == "random" || s == "random_feature") return Variant::random;
    throw ConfigError("unknown variant '" + std::string(s) + "'");
}

void to_json(nlohmann::json& j, const EvalReport& r) {
    j = nlohmann::json{{"run_id", r.run_id},   {"dataset", to_string(r.dataset)},
                       {"density", r.density}, {"variant", r.variant},
                       {"mae", r.mae},         {"rmse", r.rmse},
                       {"count", r.count},     {"seed", r.seed},
                       {"best_epoch", r.best_epoch}, {"protocol", r.protocol}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
    r.run_id = j.at("run_id").get<std::string>();
    r.dataset = parse_qos_kind(j.at("dataset").get<std::string>());
    r.density = j.at("density").get<double>();
    r.variant = j.at("variant").get<std::string>();
    r.mae = j.at("mae").get<double>();
    r.rmse = j.at("rmse").get<double>();
    r.count = j.at("count").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.best_epoch = j.at("best_epoch").get<std::size_t>();
    r.protocol = j.value("protocol", std::string(kSelectionProtocol));
}

RunSeeds RunSeeds::from(std::uint64_t seed) {
    return {seed, mix_seed(seed, 1), mix_seed(seed, 2), mix_seed(seed, 3)};
}

std::string make_run_id(const ExperimentConfig& c, std::uint64_t seed) {
    std::ostringstream os;
    os << to_string(c.dataset) << '|' << format_value(c.density) << '|' << to_string(c.variant) << '|'
       << c.model.embed_dim << '|' << c.model.proj_dim << '|';
    for (auto d : c.model.mlp_dims) os << d << ',';
    os << '|' << format_value(c.train.huber_delta) << '|' << format_value(c.train.learning_rate) << '|'
       << c.train.batch_size << '|' << c.train.max_epochs << '|' << format_value(c.train.adam_beta1) << '|'
       << format_value(c.train.adam_beta2) << '|' << format_value(c.train.adam_epsilon) << '|'
       << c.train.eval_every << '|' << c.random_feature_dim;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(os.str())));
    return std::string(buf) + "-s" + std::to_string(seed);
}

VariantFeatures resolve_features(Variant variant, std::size_t n_users, std::size_t n_services,
                                 const FeatureInputs& inputs, std::uint32_t random_dim, std::uint64_t feature_seed) {
    VariantFeatures out;
    switch (variant) {
        case Variant::id_only: return out;
        case Variant::random: {
            std::vector<std::uint32_t> uids(n_users), sids(n_services);
            std::iota(uids.begin(), uids.end(), 0U);
            std::iota(sids.begin(), sids.end(), 0U);
            out.users = FeatureTable(random_features(EntityKind::user, uids, random_dim, feature_seed), n_users);
            out.services =
                FeatureTable(random_features(EntityKind::service, sids, random_dim, feature_seed), n_services);
            out.dim = random_dim;
            return out;
        }
        case Variant::phi3mini:
        case Variant::roberta: {
            if (!inputs.users || !inputs.services) {
                throw ConfigError("variant " + std::string(to_string(variant)) + " needs user and service feature stores");
            }
            if (inputs.users->dim != inputs.services->dim) {
                throw FormatError("user and service feature stores differ in dim");
            }
            if (inputs.users->entity_kind != EntityKind::user || inputs.services->entity_kind != EntityKind::service) {
                throw FormatError("feature stores have the wrong entity kinds");
            }
            out.users = FeatureTable(*inputs.users, n_users);
            out.services = FeatureTable(*inputs.services, n_services);
            out.dim = inputs.users->dim;
            return out;
        }
    }
    return out;
}

EvalReport evaluate_checkpoint(const ModelParams& params, const InteractionSplit& split, const FeatureView& features) {
    const auto pred = predict_parallel(params, split.test, features);
    std::vector<double> truth(split.test.size());
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = split.test[i].value;
    const auto m = evaluate_metrics(truth, pred);
    EvalReport r;
    r.density = split.density;
    r.seed = split.seed;
    r.mae = m.mae;
    r.rmse = m.rmse;
    r.count = split.test.size();
    return r;
}

RunOutcome run_on_split(const InteractionSplit& split, const VariantFeatures& features, const ExperimentConfig& config,
                        std::size_t n_users, std::size_t n_services, std::uint64_t seed) {
    const auto seeds = RunSeeds::from(seed);
    ModelConfig mc = config.model;
    mc.n_users = n_users;
    mc.n_services = n_services;
    mc.llm_dim = features.dim;
    mc.seed = seeds.model;
    TrainConfig tc = config.train;
    tc.shuffle_seed = seeds.shuffle;

    RunOutcome out{{}, train(split, features.view(), mc, tc)};
    if (out.training.curve.empty()) {
        out.report = evaluate_checkpoint(out.training.best, split, features.view());
    } else {
        const auto& best = *std::find_if(out.training.curve.begin(), out.training.curve.end(),
                                         [&](const EpochRecord& r) { return r.epoch == out.training.best_epoch; });
        out.report.mae = best.mae;
        out.report.rmse = best.rmse;
        out.report.count = split.test.size();
    }
    out.report.run_id = make_run_id(config, seed);
    out.report.dataset = config.dataset;
    out.report.density = config.density;
    out.report.variant = std::string(to_string(config.variant));
    out.report.seed = seed;
    out.report.best_epoch = out.training.best_epoch;
    return out;
}

std::vector<EvalReport> run_experiment(const QosMatrix& matrix, const ExperimentConfig& config,
                                       const FeatureInputs& inputs) {
    if (config.seeds.empty()) throw std::invalid_argument("run_experiment: no seeds");
    std::vector<EvalReport> reports;
    for (auto seed : config.seeds) {
        const auto seeds = RunSeeds::from(seed);
        const auto split = split_by_density(matrix, config.density, seeds.split);
        const auto features = resolve_features(config.variant, matrix.n_users, matrix.n_services, inputs,
                                                config.random_feature_dim, seeds.features);
        reports.push_back(run_on_split(split, features, config, matrix.n_users, matrix.n_services, seed).report);
    }
    return reports;
}

std::string_view to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::mlp_depth: return "mlp_depth";
        case SweepAxis::mlp_width_factor: return "mlp_width_factor";
        case SweepAxis::batch_size: return "batch_size";
        case SweepAxis::learning_rate: return "learning_rate";
    }
    return "mlp_depth";
}

SweepAxis parse_sweep_axis(std::string_view s) {
    if (s == "mlp_depth" || s == "depth") return SweepAxis::mlp_depth;
    if (s == "mlp_width_factor" || s == "width") return SweepAxis::mlp_width_factor;
    if (s == "batch_size") return SweepAxis::batch_size;
    if (s == "learning_rate" || s == "lr") return SweepAxis::learning_rate;
    throw ConfigError("unknown sweep axis '" + std::string(s) + "'");
}

std::vector<std::size_t> mlp_dims_for_depth(const std::vector<std::size_t>& base, std::size_t depth) {
    if (depth == 0) throw std::invalid_argument("MLP depth must be at least 1");
    if (base.empty()) throw std::invalid_argument("base MLP dims are empty");
    std::vector<std::size_t> dims(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(std::min(depth, base.size())));
    while (dims.size() < depth) dims.push_back(std::max<std::size_t>(4, dims.back() / 2));
    return dims;
}

std::vector<std::size_t> mlp_dims_for_width(const std::vector<std::size_t>& base, double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw std::invalid_argument("width factor must be positive");
    std::vector<std::size_t> dims;
    for (auto d : base) {
        dims.push_back(static_cast<std::size_t>(std::max(1.0, std::round(static_cast<double>(d) * factor))));
    }
    return dims;
}

namespace {

bool is_positive_integer(double v) { return v >= 1.0 && std::floor(v) == v && v < 1e9; }

}  // namespace

ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepAxis axis, double value) {
    ExperimentConfig c = base;
    switch (axis) {
        case SweepAxis::mlp_depth:
            if (!is_positive_integer(value)) throw std::invalid_argument("depth must be a positive integer");
            c.model.mlp_dims = mlp_dims_for_depth(base.model.mlp_dims, static_cast<std::size_t>(value));
            break;
        case SweepAxis::mlp_width_factor:
            c.model.mlp_dims = mlp_dims_for_width(base.model.mlp_dims, value);
            break;
        case SweepAxis::batch_size:
            if (!is_positive_integer(value)) throw std::invalid_argument("batch size must be a positive integer");
            c.train.batch_size = static_cast<std::size_t>(value);
            break;
        case SweepAxis::learning_rate:
            if (!(value > 0.0) || !std::isfinite(value)) throw std::invalid_argument("learning rate must be positive");
            c.train.learning_rate = value;
            break;
    }
    return c;
}

SweepResult run_sweep(const SweepSpec& spec, const QosMatrix& matrix, const FeatureInputs& inputs) {
    if (spec.values.empty()) throw std::invalid_argument("sweep has no values");
    if (spec.base.seeds.empty()) throw std::invalid_argument("sweep needs a seed");
    // Validate every point before spending time on training.
    std::vector<ExperimentConfig> configs;
    for (double v : spec.values) configs.push_back(apply_sweep_value(spec.base, spec.axis, v));

    const auto seed = spec.base.seeds.front();
    const auto seeds = RunSeeds::from(seed);
    const auto split = split_by_density(matrix, spec.base.density, seeds.split);
    const auto features = resolve_features(spec.base.variant, matrix.n_users, matrix.n_services, inputs,
                                           spec.base.random_feature_dim, seeds.features);

    std::map<std::string, EvalReport> done;
    auto run = [&](const ExperimentConfig& c) {
        const auto id = make_run_id(c, seed);
        if (auto it = done.find(id); it != done.end()) return it->second;
        auto report = run_on_split(split, features, c, matrix.n_users, matrix.n_services, seed).report;
        done.emplace(id, report);
        return report;
    };

    SweepResult result;
    result.base = run(spec.base);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        SweepPoint p;
        p.value = spec.values[i];
        p.report = run(configs[i]);
        p.mae_change = (p.report.mae - result.base.mae) / result.base.mae;
        p.rmse_change = (p.report.rmse - result.base.rmse) / result.base.rmse;
        result.points.push_back(p);
    }
    return result;
}

void write_sweep_csv(const SweepResult& result, SweepAxis axis, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_string(axis) << ",mae,rmse,mae_change,rmse_change,best_epoch,run_id\n";
    for (const auto& p : result.points) {
        out << format_value(p.value) << ',' << format_value(p.report.mae) << ',' << format_value(p.report.rmse) << ','
            << format_value(p.mae_change) << ',' << format_value(p.rmse_change) << ',' << p.report.best_epoch << ','
            << p.report.run_id << '\n';
    }
}

void upsert_report(const EvalReport& report, const std::filesystem::path& jsonl) {
    std::vector<std::string> lines;
    bool replaced = false;
    const std::string mine = nlohmann::json(report).dump();
    if (std::ifstream in(jsonl); in) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            if (j.value("run_id", std::string{}) == report.run_id) {
                if (!replaced) lines.push_back(mine);
                replaced = true;
            } else {
                lines.push_back(line);
            }
        }
    }
    if (!replaced) lines.push_back(mine);
    if (jsonl.has_parent_path()) std::filesystem::create_directories(jsonl.parent_path());
    const auto tmp = std::filesystem::path(jsonl.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        for (const auto& l : lines) out << l << '\n';
    }
    std::filesystem::rename(tmp, jsonl);
}

std::vector<EvalReport> read_reports(const std::filesystem::path& jsonl) {
    std::ifstream in(jsonl);
    if (!in) throw std::runtime_error("cannot open " + jsonl.string());
    std::vector<EvalReport> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<EvalReport>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(jsonl.string(), line_no, e.what());
        }
    }
    return out;
}

namespace {

using enum QosKind;

// MAE / RMSE per density (5, 10, 15, 20 %) as published for the comparison table.
constexpr std::array<PublishedResult, 64> kPublished{{
    {"UIPCC", throughput, 0.05, 20.757, 60.799},     {"UIPCC", throughput, 0.10, 22.370, 54.456},
    {"UIPCC", throughput, 0.15, 20.219, 50.704},     {"UIPCC", throughput, 0.20, 18.928, 48.295},
    {"RegionKNN", throughput, 0.05, 25.632, 67.868}, {"RegionKNN", throughput, 0.10, 24.838, 67.551},
    {"RegionKNN", throughput, 0.15, 24.584, 67.314}, {"RegionKNN", throughput, 0.20, 24.036, 66.176},
    {"LACF", throughput, 0.05, 23.169, 58.967},      {"LACF", throughput, 0.10, 19.626, 53.105},
    {"LACF", throughput, 0.15, 17.795, 49.766},      {"LACF", throughput, 0.20, 16.667, 47.625},
    {"PMF", throughput, 0.05, 19.082, 57.883},       {"PMF", throughput, 0.10, 15.994, 48.071},
    {"PMF", throughput, 0.15, 14.670, 44.013},       {"PMF", throughput, 0.20, 13.924, 41.714},
    {"BGCL", throughput, 0.05, 20.655, 61.297},      {"BGCL", throughput, 0.10, 19.318, 59.134},
    {"BGCL", throughput, 0.15, 18.134, 58.804},      {"BGCL", throughput, 0.20, 18.017, 58.689},
    {"LMF-PP", throughput, 0.05, 18.301, 51.777},    {"LMF-PP", throughput, 0.10, 15.913, 46.142},
    {"LMF-PP", throughput, 0.15, 14.745, 42.993},    {"LMF-PP", throughput, 0.20, 14.103, 41.408},
    {"DCALF", throughput, 0.05, 17.658, 51.632},     {"DCALF", throughput, 0.10, 15.360, 46.428},
    {"DCALF", throughput, 0.15, 14.384, 43.402},     {"DCALF", throughput, 0.20, 13.670, 41.624},
    {"llmQoS", throughput, 0.05, 13.714, 46.635},    {"llmQoS", throughput, 0.10, 12.022, 42.947},
    {"llmQoS", throughput, 0.15, 11.156, 39.567},    {"llmQoS", throughput, 0.20, 10.760, 38.365},
    {"UIPCC", response_time, 0.05, 0.625, 1.388},    {"UIPCC", response_time, 0.10, 0.582, 1.330},
    {"UIPCC", response_time, 0.15, 0.501, 1.250},    {"UIPCC", response_time, 0.20, 0.450, 1.197},
    {"RegionKNN", response_time, 0.05, 0.588, 1.543}, {"RegionKNN", response_time, 0.10, 0.548, 1.513},
    {"RegionKNN", response_time, 0.15, 0.526, 1.513}, {"RegionKNN", response_time, 0.20, 0.516, 1.521},
    {"LACF", response_time, 0.05, 0.637, 1.444},     {"LACF", response_time, 0.10, 0.566, 1.342},
    {"LACF", response_time, 0.15, 0.516, 1.276},     {"LACF", response_time, 0.20, 0.483, 1.230},
    {"PMF", response_time, 0.05, 0.569, 1.537},      {"PMF", response_time, 0.10, 0.487, 1.316},
    {"PMF", response_time, 0.15, 0.452, 1.221},      {"PMF", response_time, 0.20, 0.431, 1.169},
    {"BGCL", response_time, 0.05, 0.461, 1.407},     {"BGCL", response_time, 0.10, 0.433, 1.374},
    {"BGCL", response_time, 0.15, 0.424, 1.334},     {"BGCL", response_time, 0.20, 0.416, 1.320},
    {"LMF-PP", response_time, 0.05, 0.529, 1.341},   {"LMF-PP", response_time, 0.10, 0.473, 1.242},
    {"LMF-PP", response_time, 0.15, 0.447, 1.210},   {"LMF-PP", response_time, 0.20, 0.426, 1.161},
    {"DCALF", response_time, 0.05, 0.546, 1.402},    {"DCALF", response_time, 0.10, 0.486, 1.265},
    {"DCALF", response_time, 0.15, 0.464, 1.210},    {"DCALF", response_time, 0.20, 0.452, 1.176},
    {"llmQoS", response_time, 0.05, 0.409, 1.290},   {"llmQoS", response_time, 0.10, 0.360, 1.224},
    {"llmQoS", response_time, 0.15, 0.344, 1.186},   {"llmQoS", response_time, 0.20, 0.327, 1.159},
}};

std::string density_label(double d) {
    const double pct = d * 100.0;
    return std::abs(pct - std::round(pct)) < 1e-9 ? std::to_string(static_cast<long>(std::round(pct))) + "%"
                                                   : format_value(pct) + "%";
}

}  // namespace

std::span<const PublishedResult> published_results() { return kPublished; }

std::string render_summary_csv(const std::vector<EvalReport>& reports, bool include_published) {
    struct Cell {
        double mae = 0.0, rmse = 0.0;
        std::size_t n = 0;
    };
    // dataset -> model -> density -> cell
    std::map<int, std::map<std::string, std::map<double, Cell>>> table;
    std::map<int, std::set<double>> densities;
    std::map<int, std::vector<std::string>> row_order;
    auto add = [&](QosKind ds, const std::string& model, double d, double mae, double rmse) {
        const int k = static_cast<int>(ds);
        auto& rows = table[k];
        if (!rows.count(model)) row_order[k].push_back(model);
        auto& c = rows[model][d];
        c.mae += mae;
        c.rmse += rmse;
        c.n += 1;
        densities[k].insert(d);
    };
    if (include_published) {
        for (const auto& p : kPublished) add(p.dataset, std::string(p.model) + " (published)", p.density, p.mae, p.rmse);
    }
    for (const auto& r : reports) add(r.dataset, r.variant, r.density, r.mae, r.rmse);

    std::ostringstream os;
    for (const auto& [k, rows] : table) {
        os << "dataset,model";
        for (double d : densities[k]) os << ",D=" << density_label(d) << " MAE,D=" << density_label(d) << " RMSE";
        os << '\n';
        for (const auto& model : row_order[k]) {
            os << to_string(static_cast<QosKind>(k)) << ',' << model;
            const auto& cells = rows.at(model);
            for (double d : densities[k]) {
                const auto it = cells.find(d);
                if (it == cells.end()) {
                    os << ",,";
                    continue;
                }
                char buf[64];
                const auto n = static_cast<double>(it->second.n);
                std::snprintf(buf, sizeof(buf), ",%.3f,%.3f", it->second.mae / n, it->second.rmse / n);
                os << buf;
            }
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace qos
