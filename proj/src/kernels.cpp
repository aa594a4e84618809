#include "qos/kernels.hpp"

#include <algorithm>
#include <cstddef>

#include "qos/training.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qos {

BatchGradient batch_gradient_serial(const ModelParams& params, std::span<const Interaction> batch,
                                    const FeatureView& features, double huber_delta) {
    BatchGradient out{0.0, Gradients::zeros_like(params.config)};
    if (batch.empty()) return out;
    const double scale = 1.0 / static_cast<double>(batch.size());
    Trace trace;
    double loss_sum = 0.0;
    for (const auto& r : batch) {
        const double yhat = forward(params, r.user, r.service, features.user(r.user), features.service(r.service), trace);
        loss_sum += huber_loss(r.value, yhat, huber_delta);
        const auto deltas = backprop_deltas(params, trace, huber_grad(r.value, yhat, huber_delta) * scale);
        accumulate_gradients(params, trace, deltas, out.grads);
    }
    out.mean_loss = loss_sum * scale;
    return out;
}

BatchGradient batch_gradient_parallel(const ModelParams& params, std::span<const Interaction> batch,
                                      const FeatureView& features, double huber_delta) {
    BatchGradient out{0.0, Gradients::zeros_like(params.config)};
    if (batch.empty()) return out;
    const auto n = static_cast<std::ptrdiff_t>(batch.size());
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<Trace> traces(batch.size());
    std::vector<Deltas> deltas(batch.size());
    std::vector<double> losses(batch.size());

    // Per-sample forward and error signals; forward throws on bad input, so
    // capture rather than let an exception escape the parallel region.
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        try {
            const auto& r = batch[static_cast<std::size_t>(k)];
            auto& tr = traces[static_cast<std::size_t>(k)];
            const double yhat =
                forward(params, r.user, r.service, features.user(r.user), features.service(r.service), tr);
            losses[static_cast<std::size_t>(k)] = huber_loss(r.value, yhat, huber_delta);
            deltas[static_cast<std::size_t>(k)] =
                backprop_deltas(params, tr, huber_grad(r.value, yhat, huber_delta) * scale);
        } catch (...) {
#pragma omp critical(qos_kernel_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    double loss_sum = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        loss_sum += losses[k];
        accumulate_vectors(traces[k], deltas[k], out.grads);
    }
    out.mean_loss = loss_sum * scale;

    // Weight rows are independent; each row sums samples in order. Rows go
    // in blocks so a block's slice of every sample stays in cache.
    constexpr std::ptrdiff_t kBlock = 64;
    const auto& cfg = params.config;
    const auto proj_rows = static_cast<std::ptrdiff_t>(cfg.id_only() ? 0 : cfg.llm_dim);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t lo = 0; lo < proj_rows; lo += kBlock) {
        const auto hi = std::min(lo + kBlock, proj_rows);
        for (std::size_t k = 0; k < batch.size(); ++k) {
            for (auto i = lo; i < hi; ++i) {
                accumulate_projection_row(traces[k], deltas[k], static_cast<std::size_t>(i), out.grads);
            }
        }
    }
    for (std::size_t l = 0; l < params.dense.mlp.size(); ++l) {
        const auto rows = static_cast<std::ptrdiff_t>(params.dense.mlp[l].in());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t lo = 0; lo < rows; lo += kBlock) {
            const auto hi = std::min(lo + kBlock, rows);
            for (std::size_t k = 0; k < batch.size(); ++k) {
                for (auto i = lo; i < hi; ++i) {
                    accumulate_mlp_row(traces[k], deltas[k], l, static_cast<std::size_t>(i), out.grads);
                }
            }
        }
    }
    return out;
}

namespace {

// Projected features for every entity referenced by rows.
struct ProjectionCache {
    std::size_t width = 0;
    std::vector<double> users;
    std::vector<double> services;

    std::span<const double> user(std::uint32_t id) const { return {users.data() + id * width, width}; }
    std::span<const double> service(std::uint32_t id) const { return {services.data() + id * width, width}; }
};

std::vector<std::uint32_t> referenced(std::span<const Interaction> rows, std::size_t n, bool users) {
    std::vector<char> seen(n, 0);
    std::vector<std::uint32_t> ids;
    for (const auto& r : rows) {
        const auto id = users ? r.user : r.service;
        if (id >= n) throw std::out_of_range((users ? "user id " : "service id ") + std::to_string(id) + " out of range");
        if (!seen[id]) {
            seen[id] = 1;
            ids.push_back(id);
        }
    }
    return ids;
}

ProjectionCache build_cache(const ModelParams& params, std::span<const Interaction> rows, const FeatureView& features,
                            bool parallel) {
    const auto& cfg = params.config;
    ProjectionCache cache;
    const auto user_ids = referenced(rows, cfg.n_users, true);
    const auto service_ids = referenced(rows, cfg.n_services, false);
    if (cfg.id_only()) return cache;
    cache.width = cfg.proj_dim;
    cache.users.assign(cfg.n_users * cfg.proj_dim, 0.0);
    cache.services.assign(cfg.n_services * cfg.proj_dim, 0.0);

    std::vector<std::pair<bool, std::uint32_t>> jobs;
    for (auto id : user_ids) jobs.emplace_back(true, id);
    for (auto id : service_ids) jobs.emplace_back(false, id);
    const auto n = static_cast<std::ptrdiff_t>(jobs.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        try {
            const auto [is_user, id] = jobs[static_cast<std::size_t>(k)];
            auto& dst = is_user ? cache.users : cache.services;
            project_feature(params, is_user ? features.user(id) : features.service(id),
                            std::span<double>(dst.data() + id * cache.width, cache.width));
        } catch (...) {
#pragma omp critical(qos_kernel_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return cache;
}

}  // namespace

std::vector<double> predict_serial(const ModelParams& params, std::span<const Interaction> rows,
                                   const FeatureView& features) {
    const auto cache = build_cache(params, rows, features, false);
    std::vector<double> out(rows.size());
    Trace trace;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        out[k] = forward_projected(params, r.user, r.service, cache.user(r.user), cache.service(r.service), trace);
    }
    return out;
}

std::vector<double> predict_parallel(const ModelParams& params, std::span<const Interaction> rows,
                                     const FeatureView& features) {
    const auto cache = build_cache(params, rows, features, true);
    std::vector<double> out(rows.size());
    const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel
    {
        Trace trace;
#pragma omp for schedule(static)
        for (std::ptrdiff_t k = 0; k < n; ++k) {
            const auto& r = rows[static_cast<std::size_t>(k)];
            out[static_cast<std::size_t>(k)] =
                forward_projected(params, r.user, r.service, cache.user(r.user), cache.service(r.service), trace);
        }
    }
    return out;
}

}  // namespace qos
