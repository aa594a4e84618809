#pragma once

// The fused QoS network:
//   e_u, e_s  = ID embeddings
//   f_u, f_s  = one shared projection applied to each side's language-model features
//   y_hat     = head(MLP([e_u; f_u; e_s; f_s]))
// MLP layers are Dense+ReLU; the head is linear with no activation.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace qos {

struct ModelConfig {
    std::size_t n_users = 0;
    std::size_t n_services = 0;
    std::size_t embed_dim = 16;
    std::size_t llm_dim = 0;  // 0 selects the ID-only variant
    std::size_t proj_dim = 16;
    std::vector<std::size_t> mlp_dims{32, 16, 8};
    std::uint64_t seed = 0;

    bool id_only() const noexcept { return llm_dim == 0; }
    std::size_t mlp_input_width() const noexcept {
        return id_only() ? 2 * embed_dim : 2 * embed_dim + 2 * proj_dim;
    }
    /// Throws std::invalid_argument on an inconsistent config.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

/// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

/// y = x W + b, with W stored (in × out).
struct DenseLayer {
    Matrix weight;
    std::vector<double> bias;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out) : weight(in, out), bias(out, 0.0) {}
    std::size_t in() const noexcept { return weight.rows; }
    std::size_t out() const noexcept { return weight.cols; }

    bool operator==(const DenseLayer&) const = default;
};

/// Weights shared by parameters, gradients and optimizer moments. Dense
/// tensors are visited in a fixed canonical order.
struct DenseStack {
    DenseLayer projection;  // empty when ID-only
    std::vector<DenseLayer> mlp;
    DenseLayer head;

    static DenseStack zeros_like(const ModelConfig& config);
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;

    bool operator==(const DenseStack&) const = default;
};

struct ModelParams {
    ModelConfig config;
    Matrix user_embedding;
    Matrix service_embedding;
    DenseStack dense;

    /// Every trainable tensor: embeddings first, then the dense stack.
    std::vector<std::span<double>> all_tensors();
    std::vector<std::span<const double>> all_tensors() const;
    bool all_finite() const;

    bool operator==(const ModelParams&) const = default;
};

/// Accumulator for embedding gradients: only rows touched are stored,
/// kept in first-touch order.
class SparseRows {
public:
    SparseRows() = default;
    explicit SparseRows(std::size_t width) : width_(width) {}

    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return ids_.size(); }
    std::uint32_t id_at(std::size_t slot) const { return ids_[slot]; }
    std::span<const double> row_at(std::size_t slot) const { return {data_.data() + slot * width_, width_}; }
    std::span<double> row_at(std::size_t slot) { return {data_.data() + slot * width_, width_}; }

    /// Existing row for id, or a fresh zero row.
    std::span<double> row(std::uint32_t id);
    /// Empty span when id was not touched.
    std::span<const double> find(std::uint32_t id) const;

private:
    std::size_t width_ = 0;
    std::vector<std::uint32_t> ids_;
    std::vector<double> data_;
    std::unordered_map<std::uint32_t, std::size_t> slot_;
};

struct Gradients {
    SparseRows user_embedding;
    SparseRows service_embedding;
    DenseStack dense;

    static Gradients zeros_like(const ModelConfig& config);
    bool all_finite() const;
};

/// Activations retained by forward for the backward pass. Feature spans
/// borrow from the caller and must outlive the trace.
struct Trace {
    std::uint32_t user = 0;
    std::uint32_t service = 0;
    std::span<const double> user_feature;
    std::span<const double> service_feature;
    std::vector<double> input;                  // [e_u; f_u; e_s; f_s]
    std::vector<std::vector<double>> pre;       // per MLP layer, before ReLU
    std::vector<std::vector<double>> post;      // per MLP layer, after ReLU
    double prediction = 0.0;
};

/// Error signals at each layer for one sample.
struct Deltas {
    double output = 0.0;
    std::vector<std::vector<double>> layer;  // dL/dz per MLP layer
    std::vector<double> input;               // dL/d[e_u; f_u; e_s; f_s]
};

ModelParams init_model(const ModelConfig& config);

/// Throws std::out_of_range for bad ids and std::invalid_argument when the
/// features do not match the config.
double forward(const ModelParams& params, std::uint32_t user, std::uint32_t service,
               std::span<const double> user_feature, std::span<const double> service_feature, Trace& trace);

/// The shared projection applied to one feature vector; out has proj_dim entries.
void project_feature(const ModelParams& params, std::span<const double> feature, std::span<double> out);

/// forward() with features already projected. Bitwise equal to forward();
/// the trace carries no raw features, so it is not valid for backward.
double forward_projected(const ModelParams& params, std::uint32_t user, std::uint32_t service,
                         std::span<const double> user_projected, std::span<const double> service_projected,
                         Trace& trace);

Deltas backprop_deltas(const ModelParams& params, const Trace& trace, double dloss_dpred);

/// Adds this sample's parameter gradients into grads.
void accumulate_gradients(const ModelParams& params, const Trace& trace, const Deltas& deltas, Gradients& grads);

// Pieces of accumulate_gradients. Each gradient element is written by
// exactly one piece, so batch kernels can reduce rows in parallel while
// keeping per-element summation in sample order.
void accumulate_vectors(const Trace& trace, const Deltas& deltas, Gradients& grads);
void accumulate_projection_row(const Trace& trace, const Deltas& deltas, std::size_t row, Gradients& grads);
void accumulate_mlp_row(const Trace& trace, const Deltas& deltas, std::size_t layer, std::size_t row,
                        Gradients& grads);

Gradients backward(const ModelParams& params, const Trace& trace, double dloss_dpred);

// Checkpoint: "QCK1" | u32 version | config | tensors as row-major f64 LE
// in all_tensors() order | u64 FNV-1a 64 of every preceding byte.
std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace qos
