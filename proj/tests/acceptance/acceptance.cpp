// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qos/evaluation.hpp"
#include "qos/features.hpp"
#include "qos/metrics.hpp"
#include "qos/prompts.hpp"
#include "qos/rng.hpp"
#include "qos/synthetic.hpp"
#include "qos/training.hpp"
#include "qos/wsdream.hpp"
#include "gradcheck.hpp"

using namespace qos;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status;
    std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double rel(double got, double want) { return want == 0.0 ? std::abs(got) : std::abs(got - want) / std::abs(want); }

Outcome metric_oracle() {
    struct Fixture {
        std::vector<double> y, p;
        double mae, rmse;
    };
    const std::vector<Fixture> fixtures{
        {{1, 2}, {1, 2}, 0.0, 0.0},
        {{0, 2}, {1, 1}, 1.0, 1.0},
        {{0, 3}, {0, 0}, 1.5, 2.1213203435596424},
        {{1, 2, 3, 4}, {0, 4, 0, 8}, 2.5, 2.7386127875258306},
        {{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, 5.5, 6.2048368229954285},
        {{0.5}, {0.25}, 0.25, 0.25},
    };
    double worst = 0.0;
    for (const auto& f : fixtures) {
        const auto m = evaluate_metrics(f.y, f.p);
        worst = std::max({worst, rel(m.mae, f.mae), rel(m.rmse, f.rmse)});
    }
    return verdict(worst <= 1e-12,
                   std::to_string(fixtures.size()) + fmt(" fixtures, max relative error %.3g (tol 1e-12)", worst));
}

Outcome huber() {
    bool exact = huber_loss(1, 1, 1) == 0.0 && huber_loss(2, 1.5, 1) == 0.125 && huber_loss(3, 1, 1) == 1.5 &&
                 huber_grad(2, 1.5, 1) == -0.5 && huber_grad(3, 1, 1) == -1.0;
    Pcg32 rng(101);
    double worst_fd = 0.0;
    std::size_t n = 0;
    const double h = 1e-4;
    while (n < 10000) {
        const double delta = rng.uniform(0.1, 3.0);
        const double y = rng.uniform(-10, 10);
        const double yhat = rng.uniform(-10, 10);
        if (std::abs(std::abs(y - yhat) - delta) < 1e-3) continue;
        const double fd = (huber_loss(y, yhat + h, delta) - huber_loss(y, yhat - h, delta)) / (2 * h);
        worst_fd = std::max(worst_fd, std::abs(fd - huber_grad(y, yhat, delta)));
        ++n;
    }
    double jump = 0.0;
    for (double delta : {0.25, 1.0, 4.0}) {
        const double below = std::nextafter(delta, 0.0);
        jump = std::max({jump, std::abs(huber_loss(0, below, delta) - huber_loss(0, delta, delta)),
                         std::abs(huber_grad(0, below, delta) - huber_grad(0, delta, delta)),
                         std::abs(huber_loss(0, -below, delta) - huber_loss(0, -delta, delta)),
                         std::abs(huber_grad(0, -below, delta) - huber_grad(0, -delta, delta))});
    }
    return verdict(exact && worst_fd <= 1e-8 && jump < 1e-12,
                   std::string(exact ? "fixtures exact" : "fixture mismatch") +
                       fmt(", FD max abs error %.3g over 10000 points (tol 1e-8), jump at delta %.3g", worst_fd, jump));
}

Outcome gradient() {
    Pcg32 rng(202);
    double worst = 0.0;
    std::size_t checked = 0;
    const int draws = 120;
    for (int d = 0; d < draws; ++d) {
        ModelConfig c;
        c.n_users = 3;
        c.n_services = 4;
        c.embed_dim = 4;
        c.llm_dim = 8;
        c.proj_dim = 4;
        c.mlp_dims = {8, 4};
        c.seed = static_cast<std::uint64_t>(d);
        const auto r = gradient_check(c, rng);
        worst = std::max(worst, r.max_rel_error);
        checked += r.checked;
    }
    return verdict(worst <= 1e-4, fmt("%.0f draws, %.0f parameter checks, max relative error %.3g (tol 1e-4)", draws,
                                      static_cast<double>(checked), worst));
}

QosMatrix random_matrix(Pcg32& rng) {
    QosMatrix m;
    m.n_users = 1 + rng.bounded(30);
    m.n_services = 1 + rng.bounded(40);
    m.values.resize(m.n_users * m.n_services);
    const double missing = rng.uniform01() * 0.9;
    for (auto& v : m.values) v = rng.uniform01() < missing ? -1.0 : rng.uniform(0.0, 100.0);
    return m;
}

std::string split_bytes(const InteractionSplit& s) {
    std::ostringstream os;
    for (const auto* side : {&s.train, &s.test}) {
        for (const auto& r : *side) os << r.user << '\t' << r.service << '\t' << format_value(r.value) << '\n';
        os << "--\n";
    }
    return os.str();
}

Outcome split_properties() {
    Pcg32 rng(303);
    std::size_t bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto m = random_matrix(rng);
        const auto permille = 1 + rng.bounded(1000);
        const double density = permille / 1000.0;
        const std::uint64_t seed = (std::uint64_t{rng.next_u32()} << 32) | rng.next_u32();
        const auto a = split_by_density(m, density, seed);
        const auto b = split_by_density(m, density, seed);

        std::set<std::pair<std::uint32_t, std::uint32_t>> train_cells, test_cells, observed;
        for (std::uint32_t u = 0; u < m.n_users; ++u) {
            for (std::uint32_t s = 0; s < m.n_services; ++s) {
                if (m.at(u, s) >= 0) observed.insert({u, s});
            }
        }
        for (const auto& r : a.train) train_cells.insert({r.user, r.service});
        for (const auto& r : a.test) test_cells.insert({r.user, r.service});
        bool ok = train_cells.size() == a.train.size() && test_cells.size() == a.test.size();
        for (const auto& c : train_cells) ok &= !test_cells.count(c) && observed.count(c);
        for (const auto& c : test_cells) ok &= observed.count(c) != 0;
        ok &= train_cells.size() + test_cells.size() == observed.size();
        ok &= a.train.size() == permille * observed.size() / 1000;
        for (const auto& r : a.train) ok &= r.value == m.at(r.user, r.service);
        ok &= split_bytes(a) == split_bytes(b);
        if (!ok) ++bad;
    }

    // Synthetic stand-in with the published shape and observed count.
    QosMatrix big;
    big.n_users = 339;
    big.n_services = 5825;
    big.values.assign(big.n_users * big.n_services, -1.0);
    const std::size_t size = big.values.size();
    const std::size_t observed = 1831265;
    for (std::size_t i = 0; i < observed; ++i) big.values[(i * 7919) % size] = static_cast<double>(i % 997) / 10.0;
    const auto s = split_by_density(big, 0.05, 0);
    const bool big_ok = big.observed_count() == observed && s.train.size() == 91563 && s.test.size() == observed - 91563;

    std::string real = "real matrix not available (QOS_WSDREAM_DIR unset)";
    bool real_ok = true;
    if (const char* dir = std::getenv("QOS_WSDREAM_DIR"); dir && fs::exists(fs::path(dir) / "tpMatrix.txt")) {
        const auto tp = ingest_matrix(fs::path(dir) / "tpMatrix.txt", QosKind::throughput, 339, 5825);
        const auto rs = split_by_density(tp, 0.05, 0);
        real_ok = tp.observed_count() == observed && rs.train.size() == 91563;
        real = "real throughput matrix: observed " + std::to_string(tp.observed_count()) + ", train " +
               std::to_string(rs.train.size());
    }
    return verdict(bad == 0 && big_ok && real_ok,
                   std::to_string(1000 - bad) + "/1000 random cases hold; 339x5825 synthetic with 1831265 observed -> " +
                       std::to_string(s.train.size()) + " train (want 91563); " + real);
}

Outcome prompt_goldens() {
    const UserRecord u{0, "131.247.1.1", "United States", "2214002945", "AS5661 USF - UNIVERSITY OF SOUTH FLORIDA",
                       "28.0587", "-82.4139"};
    const ServiceRecord s{0, "http://biomoby.org/services/wsdl/ualberta.ca/DrugBankByName", "ualberta.ca", "129.128.1.1",
                          "Canada", "2172649729", "AS3359 University of Alberta", "53.55", "-113.5"};
    const bool goldens =
        build_user_sentence(u).text ==
            "web user, located in United States, in autonomous system AS5661 USF - UNIVERSITY OF SOUTH FLORIDA." &&
        build_service_sentence(s).text ==
            "web service, at url http://biomoby.org/services/wsdl/ualberta.ca/DrugBankByName, hosted by ualberta.ca, "
            "located in Canada, in autonomous system AS3359 University of Alberta.";

    Pcg32 rng(404);
    std::size_t leaks = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        auto num = [&] { return std::to_string(rng.bounded(1000000)) + "." + std::to_string(rng.bounded(10000)); };
        auto ip = [&] {
            return std::to_string(rng.bounded(256)) + "." + std::to_string(rng.bounded(256)) + "." +
                   std::to_string(rng.bounded(256)) + "." + std::to_string(rng.bounded(256));
        };
        const UserRecord ur{static_cast<std::uint32_t>(i), ip(), "Country" + std::to_string(i % 31), std::to_string(rng.next_u32()),
                            "AS" + std::to_string(i) + " Net", num(), "-" + num()};
        const ServiceRecord sr{static_cast<std::uint32_t>(i), "http://svc" + std::to_string(i) + ".example/ws", "p.example",
                               ip(), "Country", std::to_string(rng.next_u32()), "AS1 X", num(), "-" + num()};
        const auto ut = build_user_sentence(ur).text;
        const auto st = build_service_sentence(sr).text;
        for (const auto& tok : {ur.ip_address, ur.ip_number, ur.latitude, ur.longitude}) leaks += ut.find(tok) != std::string::npos;
        for (const auto& tok : {sr.ip_address, sr.ip_number, sr.latitude, sr.longitude}) leaks += st.find(tok) != std::string::npos;
    }
    return verdict(goldens && leaks == 0, std::string(goldens ? "both example sentences byte-exact" : "golden mismatch") +
                                              "; " + std::to_string(leaks) + " numeric-token leaks in " +
                                              std::to_string(2 * n) + " generated sentences");
}

Outcome qfv1_roundtrip() {
    const auto dir = fs::temp_directory_path() / "qos_acceptance_qfv1";
    fs::create_directories(dir);
    Pcg32 rng(505);
    std::size_t ok = 0, total = 0;
    for (std::uint32_t dim : {1U, 7U, 64U, 768U, 3072U}) {
        for (int rep = 0; rep < 4; ++rep) {
            FeatureStore s;
            s.entity_kind = rep % 2 ? EntityKind::service : EntityKind::user;
            s.dim = dim;
            s.provenance = {"model-" + std::to_string(rep), rep % 2 ? Pooling::first_token : Pooling::last_token, "h"};
            const auto count = 1 + rng.bounded(40);
            for (std::uint32_t i = 0; i < count; ++i) {
                std::vector<float> v(dim);
                for (auto& x : v) {
                    std::uint32_t bits = rng.next_u32();
                    if ((bits & 0x7F800000U) == 0x7F800000U) bits &= 0xBFFFFFFFU;
                    std::memcpy(&x, &bits, 4);
                }
                s.vectors.emplace(rng.next_u32(), std::move(v));
            }
            const auto path = dir / ("s" + std::to_string(total) + ".qfv");
            write_feature_file(s, path);
            const auto back = read_feature_file(path);
            bool same = back.dim == s.dim && back.entity_kind == s.entity_kind && back.provenance == s.provenance &&
                        back.vectors.size() == s.vectors.size();
            for (const auto& [id, v] : s.vectors) {
                const auto it = back.vectors.find(id);
                same = same && it != back.vectors.end() && std::memcmp(it->second.data(), v.data(), 4 * v.size()) == 0;
            }
            ok += same;
            ++total;
        }
    }
    return verdict(ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                                    " randomized stores bitwise identical (dims 1, 7, 64, 768, 3072)");
}

// Desk-scale settings for the training criteria.
ExperimentConfig desk_experiment() {
    ExperimentConfig c;
    c.density = 0.05;
    c.train.learning_rate = 1e-3;
    c.train.batch_size = 64;
    c.train.max_epochs = 60;
    c.random_feature_dim = 3072;
    return c;
}

struct DeskRuns {
    SyntheticData data = make_synthetic(SyntheticSpec{.seed = 1});
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<RunOutcome> id_only, random, informative;
};

DeskRuns& desk() {
    static DeskRuns runs = [] {
        DeskRuns r;
        const FeatureInputs inputs{&r.data.user_features, &r.data.service_features};
        for (auto seed : r.seeds) {
            const auto split = split_by_density(r.data.matrix, 0.05, RunSeeds::from(seed).split);
            for (auto [variant, out] : {std::pair{Variant::id_only, &r.id_only}, std::pair{Variant::random, &r.random},
                                        std::pair{Variant::phi3mini, &r.informative}}) {
                auto cfg = desk_experiment();
                cfg.variant = variant;
                const auto f = resolve_features(variant, 100, 500, inputs, cfg.random_feature_dim, RunSeeds::from(seed).features);
                out->push_back(run_on_split(split, f, cfg, 100, 500, seed));
            }
        }
        return r;
    }();
    return runs;
}

double mean_mae(const std::vector<RunOutcome>& runs) {
    double s = 0;
    for (const auto& r : runs) s += r.report.mae;
    return s / static_cast<double>(runs.size());
}

Outcome ablation() {
    auto& d = desk();
    const double id = mean_mae(d.id_only), rnd = mean_mae(d.random), inf = mean_mae(d.informative);
    std::string per_seed;
    for (std::size_t i = 0; i < d.seeds.size(); ++i) {
        per_seed += fmt(" [%.4f %.4f %.4f]", d.id_only[i].report.mae, d.random[i].report.mae, d.informative[i].report.mae);
    }
    return verdict(rnd >= 0.98 * id && inf <= 0.90 * id,
                   fmt("mean MAE id_only %.4f, random %.4f (ratio %.3f, need >= 0.98), informative %.4f", id, rnd, rnd / id, inf) +
                       fmt(" (ratio %.3f, need <= 0.90); per seed id/rand/inf:", inf / id) + per_seed);
}

Outcome determinism() {
    auto& d = desk();
    const auto split = split_by_density(d.data.matrix, 0.05, RunSeeds::from(0).split);
    auto cfg = desk_experiment();
    cfg.variant = Variant::phi3mini;
    const FeatureInputs inputs{&d.data.user_features, &d.data.service_features};
    const auto f = resolve_features(Variant::phi3mini, 100, 500, inputs, cfg.random_feature_dim, RunSeeds::from(0).features);
    const auto again = run_on_split(split, f, cfg, 100, 500, 0);
    const auto& first = d.informative.front();
    const bool curves = again.training.curve == first.training.curve;
    const bool ckpt = encode_checkpoint(again.training.best) == encode_checkpoint(first.training.best);

    cfg.variant = Variant::id_only;
    const auto id_again = run_on_split(split, {}, cfg, 100, 500, 0);
    const bool id_same = id_again.training.curve == d.id_only.front().training.curve &&
                         encode_checkpoint(id_again.training.best) == encode_checkpoint(d.id_only.front().training.best);
    return verdict(curves && ckpt && id_same,
                   std::string("informative: curve ") + (curves ? "identical" : "differs") + ", checkpoint " +
                       (ckpt ? "bitwise identical" : "differs") + "; id_only: " + (id_same ? "identical" : "differs") +
                       " (" + std::to_string(first.training.curve.size()) + " epochs each)");
}

Outcome best_epoch() {
    Pcg32 rng(606);
    std::size_t bad = 0;
    const int trials = 5000;
    for (int t = 0; t < trials; ++t) {
        TrainingCurve curve;
        const auto n = 1 + rng.bounded(60);
        const bool coarse = rng.bounded(2) == 0;
        for (std::uint32_t e = 1; e <= n; ++e) {
            const double mae = coarse ? static_cast<double>(rng.bounded(5)) : rng.uniform(0, 10);
            curve.push_back({e * 3, 0.0, mae, 0.0});
        }
        std::size_t expect = 0;
        for (std::size_t i = 0; i < curve.size(); ++i) {
            bool is_min = true;
            for (std::size_t j = 0; j < curve.size(); ++j) {
                if (curve[j].mae < curve[i].mae || (curve[j].mae == curve[i].mae && j < i)) is_min = false;
            }
            if (is_min) expect = curve[i].epoch;
        }
        bad += select_best_epoch(curve) != expect;
    }
    const bool fixtures = select_best_epoch({{1, 0, 5.0, 0}, {2, 0, 4.2, 0}, {3, 0, 4.4, 0}}) == 2 &&
                          select_best_epoch({{1, 0, 4.2, 0}, {2, 0, 4.2, 0}}) == 1;
    return verdict(bad == 0 && fixtures, std::to_string(trials - bad) + "/" + std::to_string(trials) +
                                             " random curves match the brute-force scan; fixtures " +
                                             (fixtures ? "ok" : "wrong"));
}

Outcome full_scale() {
    const char* data = std::getenv("QOS_WSDREAM_DIR");
    const char* feats = std::getenv("QOS_FEATURES_DIR");
    if (!data || !feats) return {Status::skip, "set QOS_WSDREAM_DIR and QOS_FEATURES_DIR (phi3mini/users.qfv, phi3mini/services.qfv) to run"};
    const fs::path fdir = fs::path(feats) / "phi3mini";
    for (const auto& p : {fs::path(data) / "tpMatrix.txt", fdir / "users.qfv", fdir / "services.qfv"}) {
        if (!fs::exists(p)) return {Status::skip, "missing " + p.string()};
    }
    const auto matrix = ingest_matrix(fs::path(data) / "tpMatrix.txt", QosKind::throughput, 339, 5825);
    const auto users = read_feature_file(fdir / "users.qfv");
    const auto services = read_feature_file(fdir / "services.qfv");
    ExperimentConfig cfg;
    cfg.train = TrainConfig::defaults_for(QosKind::throughput);
    cfg.train.eval_every = 10;
    cfg.variant = Variant::phi3mini;
    const auto llm = run_experiment(matrix, cfg, {&users, &services}).front();
    cfg.variant = Variant::id_only;
    const auto id = run_experiment(matrix, cfg).front();
    return verdict(llm.mae <= 16.0 && llm.mae <= 0.95 * id.mae,
                   fmt("phi3mini MAE %.3f RMSE %.3f (need <= 16.0), id_only MAE %.3f (need >= 5%% gain, got %.1f%%)",
                       llm.mae, llm.rmse, id.mae, 100.0 * (1.0 - llm.mae / id.mae)));
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"metric-oracle", metric_oracle},
        {"huber-correctness", huber},
        {"gradient-check", gradient},
        {"split-properties", split_properties},
        {"prompt-goldens", prompt_goldens},
        {"qfv1-roundtrip", qfv1_roundtrip},
        {"ablation-desk-scale", ablation},
        {"determinism", determinism},
        {"full-scale-reproduction", full_scale},
        {"best-epoch-selection", best_epoch},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {Status::fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
        std::printf("[%s] %s: %s (%.1fs)\n", tag, name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += o.status == Status::fail;
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
