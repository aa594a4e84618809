#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qos/features.hpp"
#include "qos/kernels.hpp"
#include "qos/model.hpp"
#include "qos/wsdream.hpp"

namespace qos {

double huber_loss(double y, double yhat, double delta);
/// d loss / d yhat.
double huber_grad(double y, double yhat, double delta);

struct TrainConfig {
    double huber_delta = 1.0;
    double learning_rate = 1e-4;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 1500;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t shuffle_seed = 0;
    std::size_t eval_every = 1;
    bool parallel = true;

    void validate() const;
    /// 1500 epochs for throughput, 600 for response time.
    static TrainConfig defaults_for(QosKind kind);
};

struct AdamState {
    Matrix m_user, v_user;
    Matrix m_service, v_service;
    DenseStack m, v;
    std::uint64_t t = 0;

    static AdamState zeros_like(const ModelConfig& config);
};

/// Bias-corrected Adam. Embedding rows absent from grads, and their
/// moments, are left untouched. Throws TrainingError on a non-finite
/// gradient before modifying anything.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const TrainConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    double mae = 0.0;
    double rmse = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

using TrainingCurve = std::vector<EpochRecord>;

/// Argmin test MAE, earliest epoch on ties. Returns the epoch number.
std::size_t select_best_epoch(const TrainingCurve& curve);

/// CSV with header "epoch,loss,mae,rmse".
void write_curve_csv(const TrainingCurve& curve, const std::filesystem::path& path);
TrainingCurve read_curve_csv(const std::filesystem::path& path);

struct TrainResult {
    ModelParams best;
    TrainingCurve curve;
    std::size_t best_epoch = 0;  // 0 when no epoch ran
};

/// Called after each evaluated epoch.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Tables must cover every id in the split when the model uses features.
TrainResult train(const InteractionSplit& split, const FeatureView& features, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

}  // namespace qos
