#include <doctest.h>

#include <cstring>

#include <omp.h>

#include "qos/kernels.hpp"
#include "qos/rng.hpp"
#include "qos/training.hpp"
#include "gradcheck.hpp"

using namespace qos;

namespace {

struct Fixture {
    ModelConfig config;
    FeatureStore user_store, service_store;
    FeatureTable users, services;
    std::vector<Interaction> rows;
    ModelParams params;

    explicit Fixture(std::size_t llm_dim, std::size_t n_rows = 300) {
        config.n_users = 13;
        config.n_services = 29;
        config.llm_dim = llm_dim;
        config.seed = 4;
        std::vector<std::uint32_t> uid(13), sid(29);
        for (std::uint32_t i = 0; i < 13; ++i) uid[i] = i;
        for (std::uint32_t i = 0; i < 29; ++i) sid[i] = i;
        if (llm_dim > 0) {
            user_store = random_features(EntityKind::user, uid, static_cast<std::uint32_t>(llm_dim), 1);
            service_store = random_features(EntityKind::service, sid, static_cast<std::uint32_t>(llm_dim), 1);
            users = FeatureTable(user_store, 13);
            services = FeatureTable(service_store, 29);
        }
        Pcg32 rng(77);
        for (std::size_t i = 0; i < n_rows; ++i) {
            rows.push_back({rng.bounded(13), rng.bounded(29), rng.uniform(0.0, 4.0)});
        }
        params = init_model(config);
        randomize(params, rng, 0.3);
    }

    FeatureView view() const { return config.id_only() ? FeatureView{} : FeatureView{&users, &services}; }
};

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool bitwise_equal(const Gradients& a, const Gradients& b) {
    const auto ta = a.dense.tensors();
    const auto tb = b.dense.tensors();
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (!bitwise_equal(ta[i], tb[i])) return false;
    }
    for (const auto* pair : {&a.user_embedding, &a.service_embedding}) {
        const auto& other = pair == &a.user_embedding ? b.user_embedding : b.service_embedding;
        if (pair->size() != other.size()) return false;
        for (std::size_t slot = 0; slot < pair->size(); ++slot) {
            if (pair->id_at(slot) != other.id_at(slot)) return false;
            if (!bitwise_equal(pair->row_at(slot), other.row_at(slot))) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("parallel batch gradient is bitwise equal to the serial reference") {
    for (std::size_t dim : {0, 24}) {
        Fixture f(dim);
        for (int threads : {1, 2, 4, 7}) {
            omp_set_num_threads(threads);
            const auto s = batch_gradient_serial(f.params, f.rows, f.view(), 1.0);
            const auto p = batch_gradient_parallel(f.params, f.rows, f.view(), 1.0);
            CHECK(s.mean_loss == p.mean_loss);
            CHECK(bitwise_equal(s.grads, p.grads));
        }
    }
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
    Fixture f(6, 20);
    const auto bg = batch_gradient_serial(f.params, f.rows, f.view(), 1.0);
    auto sum = Gradients::zeros_like(f.config);
    double loss = 0.0;
    for (const auto& r : f.rows) {
        Trace tr;
        const double y = forward(f.params, r.user, r.service, f.view().user(r.user), f.view().service(r.service), tr);
        loss += huber_loss(r.value, y, 1.0);
        const auto g = backward(f.params, tr, huber_grad(r.value, y, 1.0) / static_cast<double>(f.rows.size()));
        auto dst = sum.dense.tensors();
        const auto src = g.dense.tensors();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            for (std::size_t j = 0; j < dst[i].size(); ++j) dst[i][j] += src[i][j];
        }
    }
    CHECK(bg.mean_loss == doctest::Approx(loss / 20.0).epsilon(1e-12));
    const auto a = bg.grads.dense.tensors();
    const auto b = sum.dense.tensors();
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a[i].size(); ++j) CHECK(a[i][j] == doctest::Approx(b[i][j]).epsilon(1e-10));
    }
}

TEST_CASE("predict kernels agree with forward") {
    for (std::size_t dim : {0, 24}) {
        Fixture f(dim);
        const auto s = predict_serial(f.params, f.rows, f.view());
        omp_set_num_threads(3);
        const auto p = predict_parallel(f.params, f.rows, f.view());
        CHECK(bitwise_equal(s, p));
        for (std::size_t i = 0; i < f.rows.size(); ++i) {
            Trace tr;
            const auto& r = f.rows[i];
            CHECK(s[i] == forward(f.params, r.user, r.service, f.view().user(r.user), f.view().service(r.service), tr));
        }
    }
}

TEST_CASE("kernels propagate errors") {
    Fixture f(8, 10);
    f.rows[5].user = 99;
    CHECK_THROWS_AS(batch_gradient_parallel(f.params, f.rows, f.view(), 1.0), std::out_of_range);
    CHECK_THROWS_AS(batch_gradient_serial(f.params, f.rows, f.view(), 1.0), std::out_of_range);
    CHECK_THROWS(predict_parallel(f.params, f.rows, f.view()));
    const auto empty = batch_gradient_serial(f.params, {}, f.view(), 1.0);
    CHECK(empty.mean_loss == 0.0);
    CHECK(empty.grads.user_embedding.size() == 0);
}
