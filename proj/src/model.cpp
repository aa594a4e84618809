#include "qos/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "qos/errors.hpp"
#include "qos/rng.hpp"

namespace qos {

void ModelConfig::validate() const {
    if (n_users == 0 || n_services == 0) throw std::invalid_argument("model config: entity counts must be positive");
    if (embed_dim == 0) throw std::invalid_argument("model config: embed_dim must be positive");
    if (!id_only() && proj_dim == 0) throw std::invalid_argument("model config: proj_dim must be positive");
    if (mlp_dims.empty()) throw std::invalid_argument("model config: mlp_dims must be non-empty");
    if (std::find(mlp_dims.begin(), mlp_dims.end(), 0U) != mlp_dims.end()) {
        throw std::invalid_argument("model config: mlp widths must be positive");
    }
}

DenseStack DenseStack::zeros_like(const ModelConfig& config) {
    DenseStack s;
    if (!config.id_only()) s.projection = DenseLayer(config.llm_dim, config.proj_dim);
    std::size_t in = config.mlp_input_width();
    for (auto out : config.mlp_dims) {
        s.mlp.emplace_back(in, out);
        in = out;
    }
    s.head = DenseLayer(in, 1);
    return s;
}

std::vector<std::span<double>> DenseStack::tensors() {
    std::vector<std::span<double>> out;
    out.emplace_back(projection.weight.data);
    out.emplace_back(projection.bias);
    for (auto& l : mlp) {
        out.emplace_back(l.weight.data);
        out.emplace_back(l.bias);
    }
    out.emplace_back(head.weight.data);
    out.emplace_back(head.bias);
    return out;
}

std::vector<std::span<const double>> DenseStack::tensors() const {
    std::vector<std::span<const double>> out;
    for (auto t : const_cast<DenseStack*>(this)->tensors()) out.emplace_back(t);
    return out;
}

std::vector<std::span<double>> ModelParams::all_tensors() {
    std::vector<std::span<double>> out{user_embedding.data, service_embedding.data};
    for (auto t : dense.tensors()) out.push_back(t);
    return out;
}

std::vector<std::span<const double>> ModelParams::all_tensors() const {
    std::vector<std::span<const double>> out;
    for (auto t : const_cast<ModelParams*>(this)->all_tensors()) out.emplace_back(t);
    return out;
}

namespace {

bool finite(std::span<const double> xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

bool ModelParams::all_finite() const {
    const auto ts = all_tensors();
    return std::all_of(ts.begin(), ts.end(), finite);
}

std::span<double> SparseRows::row(std::uint32_t id) {
    auto [it, inserted] = slot_.try_emplace(id, ids_.size());
    if (inserted) {
        ids_.push_back(id);
        data_.resize(data_.size() + width_, 0.0);
    }
    return row_at(it->second);
}

std::span<const double> SparseRows::find(std::uint32_t id) const {
    const auto it = slot_.find(id);
    if (it == slot_.end()) return {};
    return row_at(it->second);
}

Gradients Gradients::zeros_like(const ModelConfig& config) {
    return {SparseRows(config.embed_dim), SparseRows(config.embed_dim), DenseStack::zeros_like(config)};
}

bool Gradients::all_finite() const {
    for (const auto* rows : {&user_embedding, &service_embedding}) {
        for (std::size_t i = 0; i < rows->size(); ++i) {
            if (!finite(rows->row_at(i))) return false;
        }
    }
    const auto ts = dense.tensors();
    return std::all_of(ts.begin(), ts.end(), finite);
}

ModelParams init_model(const ModelConfig& config) {
    config.validate();
    ModelParams p;
    p.config = config;
    p.user_embedding = Matrix(config.n_users, config.embed_dim);
    p.service_embedding = Matrix(config.n_services, config.embed_dim);
    p.dense = DenseStack::zeros_like(config);

    // One PRNG stream per tensor so shapes of one tensor do not shift others.
    std::uint64_t stream = 0;
    auto fill_uniform = [&](std::span<double> xs, double limit) {
        Pcg32 rng(mix_seed(config.seed, stream++));
        for (auto& x : xs) x = rng.uniform(-limit, limit);
    };
    fill_uniform(p.user_embedding.data, 0.05);
    fill_uniform(p.service_embedding.data, 0.05);
    auto glorot = [&](DenseLayer& l) {
        const double limit = std::sqrt(6.0 / static_cast<double>(l.in() + l.out()));
        fill_uniform(l.weight.data, limit);
    };
    if (!config.id_only()) glorot(p.dense.projection);
    for (auto& l : p.dense.mlp) glorot(l);
    glorot(p.dense.head);
    return p;
}

namespace {

// out[j] = b[j] + sum_i x[i] W[i][j], summing i in ascending order.
void affine(const DenseLayer& layer, std::span<const double> x, double* out) {
    const std::size_t n_out = layer.out();
    std::copy(layer.bias.begin(), layer.bias.end(), out);
    for (std::size_t i = 0; i < layer.in(); ++i) {
        const double xi = x[i];
        const double* w = layer.weight.data.data() + i * n_out;
        for (std::size_t j = 0; j < n_out; ++j) out[j] += xi * w[j];
    }
}

void check_ids(const ModelConfig& cfg, std::uint32_t user, std::uint32_t service) {
    if (user >= cfg.n_users) throw std::out_of_range("user id " + std::to_string(user) + " out of range");
    if (service >= cfg.n_services) {
        throw std::out_of_range("service id " + std::to_string(service) + " out of range");
    }
}

// trace.input is filled; runs the MLP and head.
double run_mlp(const ModelParams& params, Trace& trace) {
    const auto& mlp = params.dense.mlp;
    trace.pre.resize(mlp.size());
    trace.post.resize(mlp.size());
    std::span<const double> x = trace.input;
    for (std::size_t l = 0; l < mlp.size(); ++l) {
        trace.pre[l].resize(mlp[l].out());
        trace.post[l].resize(mlp[l].out());
        affine(mlp[l], x, trace.pre[l].data());
        for (std::size_t j = 0; j < mlp[l].out(); ++j) trace.post[l][j] = std::max(trace.pre[l][j], 0.0);
        x = trace.post[l];
    }
    double y = 0.0;
    affine(params.dense.head, x, &y);
    trace.prediction = y;
    return y;
}

void place_embeddings(const ModelParams& params, Trace& trace) {
    const std::size_t e = params.config.embed_dim;
    const std::size_t f = params.config.id_only() ? 0 : params.config.proj_dim;
    trace.input.resize(2 * e + 2 * f);
    auto eu = params.user_embedding.row(trace.user);
    auto es = params.service_embedding.row(trace.service);
    std::copy(eu.begin(), eu.end(), trace.input.begin());
    std::copy(es.begin(), es.end(), trace.input.begin() + static_cast<std::ptrdiff_t>(e + f));
}

}  // namespace

void project_feature(const ModelParams& params, std::span<const double> feature, std::span<double> out) {
    const auto& cfg = params.config;
    if (cfg.id_only()) throw std::invalid_argument("ID-only model has no projection");
    if (feature.size() != cfg.llm_dim || out.size() != cfg.proj_dim) {
        throw std::invalid_argument("feature dimension mismatch: expected " + std::to_string(cfg.llm_dim));
    }
    affine(params.dense.projection, feature, out.data());
}

double forward(const ModelParams& params, std::uint32_t user, std::uint32_t service,
               std::span<const double> user_feature, std::span<const double> service_feature, Trace& trace) {
    const auto& cfg = params.config;
    check_ids(cfg, user, service);
    if (cfg.id_only()) {
        if (!user_feature.empty() || !service_feature.empty()) {
            throw std::invalid_argument("ID-only model takes no features");
        }
    } else if (user_feature.size() != cfg.llm_dim || service_feature.size() != cfg.llm_dim) {
        throw std::invalid_argument("feature dimension mismatch: expected " + std::to_string(cfg.llm_dim));
    }
    trace.user = user;
    trace.service = service;
    trace.user_feature = user_feature;
    trace.service_feature = service_feature;
    place_embeddings(params, trace);
    if (!cfg.id_only()) {
        const std::size_t e = cfg.embed_dim;
        const std::size_t f = cfg.proj_dim;
        affine(params.dense.projection, user_feature, trace.input.data() + e);
        affine(params.dense.projection, service_feature, trace.input.data() + 2 * e + f);
    }
    return run_mlp(params, trace);
}

double forward_projected(const ModelParams& params, std::uint32_t user, std::uint32_t service,
                         std::span<const double> user_projected, std::span<const double> service_projected,
                         Trace& trace) {
    const auto& cfg = params.config;
    check_ids(cfg, user, service);
    const std::size_t f = cfg.id_only() ? 0 : cfg.proj_dim;
    if (user_projected.size() != f || service_projected.size() != f) {
        throw std::invalid_argument("projected feature dimension mismatch");
    }
    trace.user = user;
    trace.service = service;
    trace.user_feature = {};
    trace.service_feature = {};
    place_embeddings(params, trace);
    const std::size_t e = cfg.embed_dim;
    std::copy(user_projected.begin(), user_projected.end(), trace.input.begin() + static_cast<std::ptrdiff_t>(e));
    std::copy(service_projected.begin(), service_projected.end(),
              trace.input.begin() + static_cast<std::ptrdiff_t>(2 * e + f));
    return run_mlp(params, trace);
}

Deltas backprop_deltas(const ModelParams& params, const Trace& trace, double dloss_dpred) {
    const auto& mlp = params.dense.mlp;
    Deltas d;
    d.output = dloss_dpred;
    d.layer.resize(mlp.size());

    // Gradient w.r.t. the activation feeding the current layer.
    std::vector<double> g_act(params.dense.head.in());
    for (std::size_t i = 0; i < g_act.size(); ++i) g_act[i] = params.dense.head.weight(i, 0) * dloss_dpred;

    for (std::size_t l = mlp.size(); l-- > 0;) {
        auto& gz = d.layer[l];
        gz.resize(mlp[l].out());
        // ReLU'(0) = 0
        for (std::size_t j = 0; j < gz.size(); ++j) gz[j] = trace.pre[l][j] > 0.0 ? g_act[j] : 0.0;
        std::vector<double> g_prev(mlp[l].in(), 0.0);
        for (std::size_t i = 0; i < mlp[l].in(); ++i) {
            const double* w = mlp[l].weight.data.data() + i * mlp[l].out();
            double acc = 0.0;
            for (std::size_t j = 0; j < gz.size(); ++j) acc += w[j] * gz[j];
            g_prev[i] = acc;
        }
        g_act = std::move(g_prev);
    }
    d.input = std::move(g_act);
    return d;
}

void accumulate_vectors(const Trace& trace, const Deltas& deltas, Gradients& grads) {
    auto& dense = grads.dense;
    const std::size_t e = grads.user_embedding.width();
    const std::size_t f = dense.projection.out();

    auto gu = grads.user_embedding.row(trace.user);
    for (std::size_t k = 0; k < e; ++k) gu[k] += deltas.input[k];
    auto gs = grads.service_embedding.row(trace.service);
    for (std::size_t k = 0; k < e; ++k) gs[k] += deltas.input[e + f + k];

    for (std::size_t j = 0; j < f; ++j) dense.projection.bias[j] += deltas.input[e + j] + deltas.input[2 * e + f + j];

    for (std::size_t l = 0; l < dense.mlp.size(); ++l) {
        for (std::size_t j = 0; j < deltas.layer[l].size(); ++j) dense.mlp[l].bias[j] += deltas.layer[l][j];
    }
    const auto& last = trace.post.back();
    for (std::size_t i = 0; i < last.size(); ++i) dense.head.weight(i, 0) += last[i] * deltas.output;
    dense.head.bias[0] += deltas.output;
}

void accumulate_projection_row(const Trace& trace, const Deltas& deltas, std::size_t row, Gradients& grads) {
    auto& proj = grads.dense.projection;
    const std::size_t e = grads.user_embedding.width();
    const std::size_t f = proj.out();
    const double xu = trace.user_feature[row];
    const double xs = trace.service_feature[row];
    const double* gfu = deltas.input.data() + e;
    const double* gfs = deltas.input.data() + 2 * e + f;
    double* w = proj.weight.data.data() + row * f;
    for (std::size_t j = 0; j < f; ++j) w[j] += xu * gfu[j] + xs * gfs[j];
}

void accumulate_mlp_row(const Trace& trace, const Deltas& deltas, std::size_t layer, std::size_t row,
                        Gradients& grads) {
    auto& w = grads.dense.mlp[layer].weight;
    const double x = layer == 0 ? trace.input[row] : trace.post[layer - 1][row];
    const auto& gz = deltas.layer[layer];
    double* out = w.data.data() + row * w.cols;
    for (std::size_t j = 0; j < gz.size(); ++j) out[j] += x * gz[j];
}

void accumulate_gradients(const ModelParams& params, const Trace& trace, const Deltas& deltas, Gradients& grads) {
    accumulate_vectors(trace, deltas, grads);
    if (!params.config.id_only()) {
        for (std::size_t i = 0; i < params.config.llm_dim; ++i) accumulate_projection_row(trace, deltas, i, grads);
    }
    for (std::size_t l = 0; l < params.dense.mlp.size(); ++l) {
        for (std::size_t i = 0; i < params.dense.mlp[l].in(); ++i) accumulate_mlp_row(trace, deltas, l, i, grads);
    }
}

Gradients backward(const ModelParams& params, const Trace& trace, double dloss_dpred) {
    auto grads = Gradients::zeros_like(params.config);
    accumulate_gradients(params, trace, backprop_deltas(params, trace, dloss_dpred), grads);
    return grads;
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[at_ + i]) << (8 * i);
        at_ += 8;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[at_ + i]) << (8 * i);
        at_ += 4;
        return v;
    }
    double f64() {
        const auto bits = u64();
        double v = 0.0;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::size_t offset() const noexcept { return at_; }

private:
    void need(std::size_t n) const {
        if (at_ + n > b_.size()) throw FormatError("checkpoint truncated");
    }
    std::span<const std::uint8_t> b_;
    std::size_t at_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params) {
    const auto& c = params.config;
    std::vector<std::uint8_t> out{'Q', 'C', 'K', '1'};
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(kCheckpointVersion >> (8 * i)));
    for (auto v : {c.n_users, c.n_services, c.embed_dim, c.llm_dim, c.proj_dim, c.mlp_dims.size()}) put_u64(out, v);
    for (auto v : c.mlp_dims) put_u64(out, v);
    put_u64(out, c.seed);
    for (auto t : params.all_tensors()) {
        for (double x : t) {
            std::uint64_t bits = 0;
            std::memcpy(&bits, &x, sizeof bits);
            put_u64(out, bits);
        }
    }
    Fnv1a64 h;
    h.update(out.data(), out.size());
    put_u64(out, h.digest());
    return out;
}

ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "QCK1", 4) != 0) throw FormatError("checkpoint: bad magic");
    Fnv1a64 h;
    h.update(bytes.data(), bytes.size() - 8);
    Reader tail(bytes.subspan(bytes.size() - 8));
    if (tail.u64() != h.digest()) throw FormatError("checkpoint: checksum mismatch");

    Reader r(bytes.subspan(0, bytes.size() - 8));
    r.u32();  // magic
    if (const auto v = r.u32(); v != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(v));
    }
    ModelConfig c;
    c.n_users = r.u64();
    c.n_services = r.u64();
    c.embed_dim = r.u64();
    c.llm_dim = r.u64();
    c.proj_dim = r.u64();
    const auto n_mlp = r.u64();
    if (n_mlp > 1024) throw FormatError("checkpoint: implausible MLP depth");
    c.mlp_dims.assign(n_mlp, 0);
    for (auto& d : c.mlp_dims) d = r.u64();
    c.seed = r.u64();
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }

    ModelParams p;
    p.config = c;
    p.user_embedding = Matrix(c.n_users, c.embed_dim);
    p.service_embedding = Matrix(c.n_services, c.embed_dim);
    p.dense = DenseStack::zeros_like(c);
    for (auto t : p.all_tensors()) {
        for (auto& x : t) x = r.f64();
    }
    if (r.offset() != bytes.size() - 8) throw FormatError("checkpoint: trailing bytes");
    return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(params);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace qos
