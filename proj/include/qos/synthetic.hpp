#pragma once

// Deterministic desk-scale data: a low-rank QoS matrix with noise plus
// entity features derived from the generating factors.

#include <cstdint>
#include <filesystem>

#include "qos/features.hpp"
#include "qos/wsdream.hpp"

namespace qos {

struct SyntheticSpec {
    std::size_t n_users = 100;
    std::size_t n_services = 500;
    std::size_t rank = 3;
    double offset = 5.0;
    double scale = 2.0;
    double noise_std = 0.3;
    double missing_fraction = 0.0;
    std::uint32_t feature_dim = 32;
    double feature_noise = 0.05;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    QosMatrix matrix;
    FeatureStore user_features;     // linear image of the user factors
    FeatureStore service_features;  // linear image of the service factors
};

/// y(u, s) = max(0, offset + scale * <a_u, b_s> / sqrt(rank) + noise), with
/// factor entries uniform on [-sqrt(3), sqrt(3)] (unit variance) and
/// Gaussian noise. Features are M a_u (resp. M b_s) plus small uniform
/// noise, M a fixed random (feature_dim × rank) map.
SyntheticData make_synthetic(const SyntheticSpec& spec);

/// Writes userlist.txt, wslist.txt, tpMatrix.txt and rtMatrix.txt in the
/// released dataset's layout, with synthetic attribute text.
void write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace qos
