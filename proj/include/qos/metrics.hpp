#pragma once

#include <span>

namespace qos {

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
};

/// MAE = sum|y - yhat| / N, RMSE = sqrt(sum (y - yhat)^2 / N). Sums run in
/// index order. Throws std::invalid_argument on empty or mismatched input.
Metrics evaluate_metrics(std::span<const double> truth, std::span<const double> predicted);

}  // namespace qos
