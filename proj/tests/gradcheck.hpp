#pragma once

// Finite-difference reference for the model gradients, shared by the unit
// and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "qos/model.hpp"
#include "qos/rng.hpp"

namespace qos {

inline void randomize(ModelParams& p, Pcg32& rng, double scale) {
    for (auto t : p.all_tensors()) {
        for (auto& x : t) x = rng.uniform(-scale, scale);
    }
}

struct GradCheckResult {
    std::size_t checked = 0;
    double max_rel_error = 0.0;
};

// Compares backward() against central differences of the prediction for
// every parameter. Draws whose ReLU pre-activations sit near a kink are
// redrawn, since the prediction is not differentiable there.
inline GradCheckResult gradient_check(const ModelConfig& config, Pcg32& rng, double step = 1e-5) {
    ModelParams p = init_model(config);
    std::vector<double> xu(config.llm_dim), xs(config.llm_dim);
    std::uint32_t u = 0, s = 0;
    Trace tr;
    for (int attempt = 0;; ++attempt) {
        randomize(p, rng, 0.5);
        for (auto& v : xu) v = rng.uniform(-1, 1);
        for (auto& v : xs) v = rng.uniform(-1, 1);
        u = rng.bounded(static_cast<std::uint32_t>(config.n_users));
        s = rng.bounded(static_cast<std::uint32_t>(config.n_services));
        forward(p, u, s, xu, xs, tr);
        bool near_kink = false;
        bool all_dead = true;
        for (const auto& layer : tr.pre) {
            for (double z : layer) {
                near_kink |= std::abs(z) < 1e-3;
                all_dead &= z <= 0.0;
            }
        }
        if ((!near_kink && !all_dead) || attempt > 1000) break;
    }

    const Gradients g = backward(p, tr, 1.0);
    std::vector<std::vector<double>> analytic;
    {
        std::vector<double> ue(p.user_embedding.data.size(), 0.0), se(p.service_embedding.data.size(), 0.0);
        const auto ur = g.user_embedding.find(u);
        std::copy(ur.begin(), ur.end(), ue.begin() + u * config.embed_dim);
        const auto sr = g.service_embedding.find(s);
        std::copy(sr.begin(), sr.end(), se.begin() + s * config.embed_dim);
        analytic.push_back(ue);
        analytic.push_back(se);
        for (auto t : g.dense.tensors()) analytic.emplace_back(t.begin(), t.end());
    }

    GradCheckResult r;
    auto tensors = p.all_tensors();
    Trace scratch;
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        for (std::size_t j = 0; j < tensors[ti].size(); ++j) {
            double& x = tensors[ti][j];
            const double saved = x;
            x = saved + step;
            const double up = forward(p, u, s, xu, xs, scratch);
            x = saved - step;
            const double down = forward(p, u, s, xu, xs, scratch);
            x = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[ti][j];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-7});
            r.max_rel_error = std::max(r.max_rel_error, std::abs(a - numeric) / denom);
            ++r.checked;
        }
    }
    return r;
}

}  // namespace qos
