#include <benchmark/benchmark.h>

#include <numeric>

#include "qos/kernels.hpp"
#include "qos/rng.hpp"

using namespace qos;

namespace {

struct Setup {
    ModelConfig config;
    FeatureStore user_store, service_store;
    FeatureTable users, services;
    std::vector<Interaction> rows;
    ModelParams params;

    Setup(std::size_t llm_dim, std::size_t n_rows) {
        config.n_users = 339;
        config.n_services = 5825;
        config.llm_dim = llm_dim;
        if (llm_dim > 0) {
            std::vector<std::uint32_t> uid(339), sid(5825);
            std::iota(uid.begin(), uid.end(), 0U);
            std::iota(sid.begin(), sid.end(), 0U);
            user_store = random_features(EntityKind::user, uid, static_cast<std::uint32_t>(llm_dim), 1);
            service_store = random_features(EntityKind::service, sid, static_cast<std::uint32_t>(llm_dim), 2);
            users = FeatureTable(user_store, 339);
            services = FeatureTable(service_store, 5825);
        }
        Pcg32 rng(3);
        for (std::size_t i = 0; i < n_rows; ++i) rows.push_back({rng.bounded(339), rng.bounded(5825), rng.uniform(0, 50)});
        params = init_model(config);
    }

    FeatureView view() const { return config.id_only() ? FeatureView{} : FeatureView{&users, &services}; }
};

Setup& setup(std::size_t llm_dim) {
    static Setup id_only(0, 4096), llm768(768, 4096), llm3072(3072, 4096);
    return llm_dim == 0 ? id_only : llm_dim == 768 ? llm768 : llm3072;
}

template <bool Parallel>
void BM_BatchGradient(benchmark::State& state) {
    auto& s = setup(static_cast<std::size_t>(state.range(0)));
    const std::span<const Interaction> batch(s.rows.data(), 256);
    for (auto _ : state) {
        auto g = Parallel ? batch_gradient_parallel(s.params, batch, s.view(), 1.0)
                          : batch_gradient_serial(s.params, batch, s.view(), 1.0);
        benchmark::DoNotOptimize(g.mean_loss);
    }
    state.SetItemsProcessed(state.iterations() * 256);
}

template <bool Parallel>
void BM_Predict(benchmark::State& state) {
    auto& s = setup(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto p = Parallel ? predict_parallel(s.params, s.rows, s.view()) : predict_serial(s.params, s.rows, s.view());
        benchmark::DoNotOptimize(p.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.rows.size()));
}

}  // namespace

BENCHMARK(BM_BatchGradient<false>)->Name("batch_gradient/serial")->Arg(0)->Arg(768)->Arg(3072)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradient<true>)->Name("batch_gradient/parallel")->Arg(0)->Arg(768)->Arg(3072)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Predict<false>)->Name("predict/serial")->Arg(0)->Arg(768)->Arg(3072)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Predict<true>)->Name("predict/parallel")->Arg(0)->Arg(768)->Arg(3072)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
