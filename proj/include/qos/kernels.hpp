#pragma once

// Batch kernels. Each comes as a serial reference and an OpenMP version;
// the two produce bitwise-identical results for any thread count because
// every reduction runs in sample order.

#include <span>
#include <vector>

#include "qos/features.hpp"
#include "qos/model.hpp"
#include "qos/wsdream.hpp"

namespace qos {

/// Feature tables for both sides; both null for the ID-only variant. Ids
/// without a vector yield an empty span, which forward rejects.
struct FeatureView {
    const FeatureTable* users = nullptr;
    const FeatureTable* services = nullptr;

    std::span<const double> user(std::uint32_t id) const {
        return users && users->has(id) ? users->row(id) : std::span<const double>{};
    }
    std::span<const double> service(std::uint32_t id) const {
        return services && services->has(id) ? services->row(id) : std::span<const double>{};
    }
};

struct BatchGradient {
    double mean_loss = 0.0;
    Gradients grads;
};

/// Mean Huber loss over the batch and its gradient.
BatchGradient batch_gradient_serial(const ModelParams& params, std::span<const Interaction> batch,
                                    const FeatureView& features, double huber_delta);
BatchGradient batch_gradient_parallel(const ModelParams& params, std::span<const Interaction> batch,
                                      const FeatureView& features, double huber_delta);

std::vector<double> predict_serial(const ModelParams& params, std::span<const Interaction> rows,
                                   const FeatureView& features);
std::vector<double> predict_parallel(const ModelParams& params, std::span<const Interaction> rows,
                                     const FeatureView& features);

}  // namespace qos
