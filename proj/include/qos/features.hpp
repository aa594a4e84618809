#pragma once

// Per-entity feature vectors: QFV1 files, the /v1/embed client, and seeded
// random vectors for the ablation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qos/prompts.hpp"

namespace qos {

enum class Pooling { first_token, last_token, random };

std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view s);

struct FeatureProvenance {
    std::string model_name;
    Pooling pooling = Pooling::random;
    std::string template_hash;

    bool operator==(const FeatureProvenance&) const = default;
};

struct FeatureStore {
    EntityKind entity_kind = EntityKind::user;
    std::uint32_t dim = 0;
    std::map<std::uint32_t, std::vector<float>> vectors;
    FeatureProvenance provenance;

    /// Throws FormatError unless dim > 0, every vector has length dim and
    /// every entry is finite.
    void validate() const;
    bool contains(std::uint32_t id) const { return vectors.count(id) != 0; }
};

/// Entity features promoted to double, indexed densely by entity id.
class FeatureTable {
public:
    FeatureTable() = default;
    /// Rows for ids absent from the store are flagged missing.
    FeatureTable(const FeatureStore& store, std::size_t n_entities);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return present_.size(); }
    bool empty() const noexcept { return dim_ == 0; }
    bool has(std::size_t id) const noexcept { return id < present_.size() && present_[id]; }
    std::span<const double> row(std::size_t id) const { return {data_.data() + id * dim_, dim_}; }

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
    std::vector<bool> present_;
};

// QFV1 layout (little endian):
//   "QFV1" | u32 version=1 | u8 kind (0 user, 1 service) | u32 count | u32 dim
//   then count × (u32 id, dim × f32)
// Provenance goes to "<path>.meta" as key=value lines.
inline constexpr std::uint32_t kQfvVersion = 1;

void write_feature_file(const FeatureStore& store, const std::filesystem::path& path);
FeatureStore read_feature_file(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_qfv1(const FeatureStore& store);
FeatureStore decode_qfv1(std::span<const std::uint8_t> bytes);

/// Entries i.i.d. uniform on [-0.5, 0.5]; each vector depends only on
/// (seed, kind, id, dim).
FeatureStore random_features(EntityKind kind, std::span<const std::uint32_t> ids, std::uint32_t dim,
                             std::uint64_t seed);

struct FetchOptions {
    std::size_t batch_size = 64;
    std::size_t concurrency = 4;
    int max_attempts = 3;
    int timeout_seconds = 300;
};

/// POSTs {"model","pooling","texts"} batches to <endpoint>/v1/embed. All
/// prompts must be of one entity kind. Vectors come back in prompt order.
FeatureStore fetch_embeddings(const std::string& endpoint, const std::vector<PromptText>& prompts,
                              const std::string& model_name, Pooling pooling, const std::string& template_hash = {},
                              const FetchOptions& options = {});

}  // namespace qos
