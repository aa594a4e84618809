#include "qos/training.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qos/errors.hpp"
#include "qos/metrics.hpp"
#include "qos/rng.hpp"

namespace qos {

double huber_loss(double y, double yhat, double delta) {
    const double r = std::abs(y - yhat);
    return r < delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
}

double huber_grad(double y, double yhat, double delta) {
    const double r = yhat - y;
    if (std::abs(r) < delta) return r;
    return r > 0.0 ? delta : -delta;
}

void TrainConfig::validate() const {
    if (!(huber_delta > 0.0)) throw std::invalid_argument("huber_delta must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
    if (eval_every == 0) throw std::invalid_argument("eval_every must be at least 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw std::invalid_argument("adam betas must be in [0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw std::invalid_argument("adam_epsilon must be positive");
}

TrainConfig TrainConfig::defaults_for(QosKind kind) {
    TrainConfig c;
    c.max_epochs = kind == QosKind::throughput ? 1500 : 600;
    return c;
}

AdamState AdamState::zeros_like(const ModelConfig& config) {
    AdamState s;
    s.m_user = s.v_user = Matrix(config.n_users, config.embed_dim);
    s.m_service = s.v_service = Matrix(config.n_services, config.embed_dim);
    s.m = s.v = DenseStack::zeros_like(config);
    return s;
}

namespace {

struct AdamCoefficients {
    double b1, b2, eps, lr, c1, c2;

    void update(double& p, double& m, double& v, double g) const {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        p -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
};

void update_rows(const AdamCoefficients& k, Matrix& p, Matrix& m, Matrix& v, const SparseRows& g) {
    for (std::size_t slot = 0; slot < g.size(); ++slot) {
        const auto id = g.id_at(slot);
        auto grow = g.row_at(slot);
        auto prow = p.row(id);
        auto mrow = m.row(id);
        auto vrow = v.row(id);
        for (std::size_t j = 0; j < grow.size(); ++j) k.update(prow[j], mrow[j], vrow[j], grow[j]);
    }
}

}  // namespace

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const TrainConfig& config) {
    if (!grads.all_finite()) throw TrainingError("non-finite gradient");
    state.t += 1;
    const auto t = static_cast<double>(state.t);
    const AdamCoefficients k{config.adam_beta1,
                             config.adam_beta2,
                             config.adam_epsilon,
                             config.learning_rate,
                             1.0 - std::pow(config.adam_beta1, t),
                             1.0 - std::pow(config.adam_beta2, t)};

    update_rows(k, params.user_embedding, state.m_user, state.v_user, grads.user_embedding);
    update_rows(k, params.service_embedding, state.m_service, state.v_service, grads.service_embedding);

    auto ps = params.dense.tensors();
    auto ms = state.m.tensors();
    auto vs = state.v.tensors();
    const auto gs = grads.dense.tensors();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        for (std::size_t j = 0; j < ps[i].size(); ++j) k.update(ps[i][j], ms[i][j], vs[i][j], gs[i][j]);
    }
}

std::size_t select_best_epoch(const TrainingCurve& curve) {
    if (curve.empty()) throw std::invalid_argument("select_best_epoch: empty curve");
    const EpochRecord* best = &curve.front();
    for (const auto& r : curve) {
        if (r.mae < best->mae) best = &r;
    }
    return best->epoch;
}

void write_curve_csv(const TrainingCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,loss,mae,rmse\n";
    for (const auto& r : curve) {
        out << r.epoch << ',' << format_value(r.loss) << ',' << format_value(r.mae) << ',' << format_value(r.rmse)
            << '\n';
    }
}

TrainingCurve read_curve_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    TrainingCurve curve;
    std::string line;
    std::getline(in, line);
    if (line != "epoch,loss,mae,rmse") throw FormatError("curve CSV: unexpected header '" + line + "'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        EpochRecord r;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(is >> r.epoch >> c1 >> r.loss >> c2 >> r.mae >> c3 >> r.rmse) || c1 != ',' || c2 != ',' || c3 != ',') {
            throw FormatError("curve CSV: malformed row '" + line + "'");
        }
        curve.push_back(r);
    }
    return curve;
}

namespace {

void check_coverage(const InteractionSplit& split, const FeatureView& features, const ModelConfig& cfg) {
    auto check_ids = [&](const std::vector<Interaction>& rows) {
        for (const auto& r : rows) {
            if (r.user >= cfg.n_users || r.service >= cfg.n_services) {
                throw std::out_of_range("split references ids beyond the model's entity counts");
            }
            if (cfg.id_only()) continue;
            if (!features.users->has(r.user)) {
                throw std::invalid_argument("no feature vector for user " + std::to_string(r.user));
            }
            if (!features.services->has(r.service)) {
                throw std::invalid_argument("no feature vector for service " + std::to_string(r.service));
            }
        }
    };
    if (!cfg.id_only()) {
        if (!features.users || !features.services) throw std::invalid_argument("model needs user and service features");
        if (features.users->dim() != cfg.llm_dim || features.services->dim() != cfg.llm_dim) {
            throw std::invalid_argument("feature dim does not match llm_dim " + std::to_string(cfg.llm_dim));
        }
    }
    check_ids(split.train);
    check_ids(split.test);
}

}  // namespace

TrainResult train(const InteractionSplit& split, const FeatureView& features, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch) {
    model_config.validate();
    train_config.validate();
    if (split.train.empty()) throw TrainingError("empty training set");
    if (split.test.empty()) throw TrainingError("empty test set; epoch selection needs test pairs");
    const FeatureView view = model_config.id_only() ? FeatureView{} : features;
    check_coverage(split, view, model_config);

    TrainResult result{init_model(model_config), {}, 0};
    if (train_config.max_epochs == 0) return result;

    ModelParams params = result.best;
    AdamState state = AdamState::zeros_like(model_config);
    std::vector<Interaction> order = split.train;
    std::vector<double> truth(split.test.size());
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = split.test[i].value;

    Pcg32 rng(train_config.shuffle_seed);
    const auto step = train_config.parallel ? batch_gradient_parallel : batch_gradient_serial;
    const auto predict = train_config.parallel ? predict_parallel : predict_serial;
    double best_mae = 0.0;

    for (std::size_t epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.bounded(static_cast<std::uint32_t>(i))]);
        }
        double loss_sum = 0.0;
        for (std::size_t lo = 0; lo < order.size(); lo += train_config.batch_size) {
            const auto len = std::min(train_config.batch_size, order.size() - lo);
            const std::span<const Interaction> batch(order.data() + lo, len);
            auto bg = step(params, batch, view, train_config.huber_delta);
            if (!std::isfinite(bg.mean_loss)) throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
            adam_step(params, bg.grads, state, train_config);
            loss_sum += bg.mean_loss * static_cast<double>(len);
        }

        if (epoch % train_config.eval_every != 0 && epoch != train_config.max_epochs) continue;
        const auto pred = predict(params, split.test, view);
        const auto m = evaluate_metrics(truth, pred);
        const EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), m.mae, m.rmse};
        result.curve.push_back(rec);
        if (result.best_epoch == 0 || m.mae < best_mae) {
            best_mae = m.mae;
            result.best_epoch = epoch;
            result.best = params;
        }
        if (on_epoch) on_epoch(rec);
    }
    return result;
}

}  // namespace qos
