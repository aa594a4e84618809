#include "qos/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <iterator>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "qos/errors.hpp"
#include "qos/rng.hpp"

namespace qos {

std::string_view to_string(Pooling p) {
    switch (p) {
        case Pooling::first_token: return "first_token";
        case Pooling::last_token: return "last_token";
        case Pooling::random: return "random";
    }
    return "random";
}

Pooling parse_pooling(std::string_view s) {
    if (s == "first_token" || s == "first") return Pooling::first_token;
    if (s == "last_token" || s == "last") return Pooling::last_token;
    if (s == "random") return Pooling::random;
    throw FormatError("unknown pooling '" + std::string(s) + "'");
}

void FeatureStore::validate() const {
    if (dim == 0) throw FormatError("feature store dim must be positive");
    for (const auto& [id, v] : vectors) {
        if (v.size() != dim) {
            throw FormatError("vector for id " + std::to_string(id) + " has length " + std::to_string(v.size()) +
                              ", expected " + std::to_string(dim));
        }
        for (float x : v) {
            if (!std::isfinite(x)) throw FormatError("non-finite value in vector for id " + std::to_string(id));
        }
    }
}

FeatureTable::FeatureTable(const FeatureStore& store, std::size_t n_entities)
    : dim_(store.dim), data_(n_entities * store.dim, 0.0), present_(n_entities, false) {
    for (const auto& [id, v] : store.vectors) {
        if (id >= n_entities) continue;
        present_[id] = true;
        for (std::size_t k = 0; k < dim_; ++k) data_[id * dim_ + k] = static_cast<double>(v[k]);
    }
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
    return v;
}

constexpr std::size_t kHeaderBytes = 4 + 4 + 1 + 4 + 4;

}  // namespace

std::vector<std::uint8_t> encode_qfv1(const FeatureStore& store) {
    store.validate();
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + store.vectors.size() * (4 + 4 * std::size_t{store.dim}));
    for (char c : std::string_view("QFV1")) out.push_back(static_cast<std::uint8_t>(c));
    put_u32(out, kQfvVersion);
    out.push_back(static_cast<std::uint8_t>(store.entity_kind));
    put_u32(out, static_cast<std::uint32_t>(store.vectors.size()));
    put_u32(out, store.dim);
    for (const auto& [id, v] : store.vectors) {
        put_u32(out, id);
        for (float x : v) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, &x, sizeof bits);
            put_u32(out, bits);
        }
    }
    return out;
}

FeatureStore decode_qfv1(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes) throw FormatError("QFV1: truncated header");
    if (std::memcmp(bytes.data(), "QFV1", 4) != 0) throw FormatError("QFV1: bad magic");
    const auto version = get_u32(bytes, 4);
    if (version != kQfvVersion) throw FormatError("QFV1: unsupported version " + std::to_string(version));
    const auto kind = bytes[8];
    if (kind > 1) throw FormatError("QFV1: bad entity kind " + std::to_string(kind));
    const auto count = get_u32(bytes, 9);
    const auto dim = get_u32(bytes, 13);
    if (dim == 0) throw FormatError("QFV1: dim must be positive");
    const std::size_t record = 4 + 4 * std::size_t{dim};
    const std::size_t expected = kHeaderBytes + std::size_t{count} * record;
    if (bytes.size() < expected) throw FormatError("QFV1: truncated records");
    if (bytes.size() > expected) throw FormatError("QFV1: record length does not match declared dim");

    FeatureStore store;
    store.entity_kind = static_cast<EntityKind>(kind);
    store.dim = dim;
    std::size_t at = kHeaderBytes;
    for (std::uint32_t r = 0; r < count; ++r) {
        const auto id = get_u32(bytes, at);
        at += 4;
        std::vector<float> v(dim);
        for (std::uint32_t k = 0; k < dim; ++k, at += 4) {
            const auto bits = get_u32(bytes, at);
            std::memcpy(&v[k], &bits, sizeof bits);
            if (!std::isfinite(v[k])) throw FormatError("QFV1: non-finite value for id " + std::to_string(id));
        }
        if (!store.vectors.emplace(id, std::move(v)).second) {
            throw FormatError("QFV1: duplicate id " + std::to_string(id));
        }
    }
    return store;
}

void write_feature_file(const FeatureStore& store, const std::filesystem::path& path) {
    const auto bytes = encode_qfv1(store);
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }
    std::ofstream meta(path.string() + ".meta", std::ios::binary);
    meta << "model=" << store.provenance.model_name << '\n'
         << "pooling=" << to_string(store.provenance.pooling) << '\n'
         << "template_hash=" << store.provenance.template_hash << '\n';
}

FeatureStore read_feature_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto store = decode_qfv1(bytes);
    std::ifstream meta(path.string() + ".meta");
    std::string line;
    while (meta && std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const auto key = line.substr(0, eq);
        const auto val = line.substr(eq + 1);
        if (key == "model") store.provenance.model_name = val;
        if (key == "pooling") store.provenance.pooling = parse_pooling(val);
        if (key == "template_hash") store.provenance.template_hash = val;
    }
    return store;
}

FeatureStore random_features(EntityKind kind, std::span<const std::uint32_t> ids, std::uint32_t dim,
                             std::uint64_t seed) {
    if (dim == 0) throw std::invalid_argument("random_features: dim must be positive");
    FeatureStore store;
    store.entity_kind = kind;
    store.dim = dim;
    store.provenance = {"random", Pooling::random, {}};
    for (auto id : ids) {
        const auto key = (static_cast<std::uint64_t>(kind) << 32U) | id;
        Pcg32 rng(mix_seed(mix_seed(seed, key), dim));
        std::vector<float> v(dim);
        for (auto& x : v) x = static_cast<float>(rng.uniform01() - 0.5);
        store.vectors.insert_or_assign(id, std::move(v));
    }
    return store;
}

namespace {

struct Endpoint {
    std::string origin;
    std::string base_path;
};

Endpoint parse_endpoint(const std::string& url) {
    static const std::regex re(R"(^(http://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw TransportError("unsupported endpoint URL '" + url + "'");
    std::string path = m[2].matched ? m[2].str() : "";
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {m[1].str(), path};
}

std::vector<std::vector<float>> fetch_batch(const Endpoint& ep, const std::string& body, std::size_t expected,
                                            const FetchOptions& options, std::uint32_t& dim_out) {
    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, options.max_attempts); ++attempt) {
        httplib::Client client(ep.origin);
        client.set_read_timeout(options.timeout_seconds, 0);
        client.set_connection_timeout(10, 0);
        auto res = client.Post(ep.base_path + "/v1/embed", body, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            // 4xx is a request problem and will not change on retry.
            const auto msg = "extractor returned HTTP " + std::to_string(res->status) + ": " + res->body;
            if (res->status >= 400 && res->status < 500) throw TransportError(msg);
            last_error = msg;
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("malformed extractor response: ") + e.what());
        }
        if (!j.contains("dim") || !j.contains("vectors") || !j["vectors"].is_array()) {
            throw TransportError("extractor response lacks dim/vectors");
        }
        const auto dim = j["dim"].get<std::int64_t>();
        if (dim <= 0) throw TransportError("extractor reported non-positive dim");
        const auto& vecs = j["vectors"];
        if (vecs.size() != expected) {
            throw TransportError("extractor returned " + std::to_string(vecs.size()) + " vectors for " +
                                 std::to_string(expected) + " texts");
        }
        std::vector<std::vector<float>> out;
        out.reserve(expected);
        for (const auto& v : vecs) {
            if (!v.is_array() || static_cast<std::int64_t>(v.size()) != dim) {
                throw FormatError("dimension mismatch in extractor batch");
            }
            std::vector<float> row;
            row.reserve(v.size());
            for (const auto& x : v) {
                if (!x.is_number()) throw FormatError("non-numeric vector entry from extractor");
                const auto f = static_cast<float>(x.get<double>());
                if (!std::isfinite(f)) throw FormatError("non-finite vector entry from extractor");
                row.push_back(f);
            }
            out.push_back(std::move(row));
        }
        dim_out = static_cast<std::uint32_t>(dim);
        return out;
    }
    throw TransportError(last_error);
}

}  // namespace

FeatureStore fetch_embeddings(const std::string& endpoint, const std::vector<PromptText>& prompts,
                              const std::string& model_name, Pooling pooling, const std::string& template_hash,
                              const FetchOptions& options) {
    if (prompts.empty()) throw std::invalid_argument("fetch_embeddings: no prompts");
    if (pooling == Pooling::random) throw std::invalid_argument("fetch_embeddings: pooling must be first or last");
    const auto kind = prompts.front().entity_kind;
    for (const auto& p : prompts) {
        if (p.entity_kind != kind) throw std::invalid_argument("fetch_embeddings: mixed entity kinds");
    }
    const auto ep = parse_endpoint(endpoint);
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    const std::size_t n_batches = (prompts.size() + batch - 1) / batch;

    std::vector<std::vector<std::vector<float>>> results(n_batches);
    std::vector<std::uint32_t> dims(n_batches, 0);
    const std::size_t wave = std::max<std::size_t>(1, options.concurrency);
    for (std::size_t first = 0; first < n_batches; first += wave) {
        std::vector<std::future<void>> pending;
        for (std::size_t b = first; b < std::min(n_batches, first + wave); ++b) {
            pending.push_back(std::async(std::launch::async, [&, b] {
                const auto lo = b * batch;
                const auto hi = std::min(prompts.size(), lo + batch);
                nlohmann::json req;
                req["model"] = model_name;
                req["pooling"] = pooling == Pooling::first_token ? "first" : "last";
                req["texts"] = nlohmann::json::array();
                for (auto i = lo; i < hi; ++i) req["texts"].push_back(prompts[i].text);
                results[b] = fetch_batch(ep, req.dump(), hi - lo, options, dims[b]);
            }));
        }
        for (auto& f : pending) f.get();
    }

    FeatureStore store;
    store.entity_kind = kind;
    store.dim = dims.front();
    store.provenance = {model_name, pooling, template_hash};
    std::size_t i = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
        if (dims[b] != store.dim) throw FormatError("dimension mismatch across extractor batches");
        for (auto& v : results[b]) store.vectors.insert_or_assign(prompts[i++].entity_id, std::move(v));
    }
    store.validate();
    return store;
}

}  // namespace qos
