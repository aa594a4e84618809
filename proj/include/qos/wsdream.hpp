#pragma once

// WSDream entity tables, dense QoS matrices, and density-based splits.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace qos {

struct UserRecord {
    std::uint32_t user_id = 0;
    std::string ip_address;
    std::string country;
    std::string ip_number;
    std::string autonomous_system;
    std::string latitude;
    std::string longitude;

    bool operator==(const UserRecord&) const = default;
};

struct ServiceRecord {
    std::uint32_t service_id = 0;
    std::string wsdl_address;
    std::string provider;
    std::string ip_address;
    std::string country;
    std::string ip_number;
    std::string autonomous_system;
    std::string latitude;
    std::string longitude;

    bool operator==(const ServiceRecord&) const = default;
};

enum class QosKind { throughput, response_time };

std::string_view to_string(QosKind kind);
QosKind parse_qos_kind(std::string_view s);

inline constexpr double kMissingSentinel = -1.0;

/// Any negative cell is unobserved.
inline constexpr bool is_observed(double v) noexcept { return v >= 0.0; }

struct QosMatrix {
    std::size_t n_users = 0;
    std::size_t n_services = 0;
    std::vector<double> values;  // row-major, user × service
    double missing_sentinel = kMissingSentinel;
    QosKind kind = QosKind::throughput;

    double at(std::size_t u, std::size_t s) const { return values[u * n_services + s]; }
    std::size_t observed_count() const;
};

struct Interaction {
    std::uint32_t user = 0;
    std::uint32_t service = 0;
    double value = 0.0;

    bool operator==(const Interaction&) const = default;
};

struct InteractionSplit {
    double density = 0.0;
    std::uint64_t seed = 0;
    std::vector<Interaction> train;
    std::vector<Interaction> test;
};

// Entity tables: tab separated, one header line. Text is kept verbatim.
std::vector<UserRecord> ingest_users(const std::filesystem::path& path);
std::vector<ServiceRecord> ingest_services(const std::filesystem::path& path);
std::vector<UserRecord> parse_users(std::istream& in, const std::string& name = "<stream>");
std::vector<ServiceRecord> parse_services(std::istream& in, const std::string& name = "<stream>");

/// Whitespace-separated dense matrix. When n_users/n_services are 0 the
/// shape is inferred from the file (rows must still be rectangular).
QosMatrix ingest_matrix(const std::filesystem::path& path, QosKind kind, std::size_t n_users = 0,
                        std::size_t n_services = 0);
QosMatrix parse_matrix(std::istream& in, QosKind kind, std::size_t n_users = 0, std::size_t n_services = 0,
                       const std::string& name = "<stream>");
void write_matrix(const QosMatrix& m, const std::filesystem::path& path);

/// Uniform selection of floor(density * observed) training cells without
/// replacement; deterministic in (matrix, density, seed).
InteractionSplit split_by_density(const QosMatrix& matrix, double density, std::uint64_t seed);

/// FNV-1a 64 over the serialized train and test records.
std::uint64_t split_checksum(const InteractionSplit& split);

// Split files: "user<TAB>service<TAB>value" per line; manifest is key=value.
void write_interactions(const std::vector<Interaction>& rows, const std::filesystem::path& path);
std::vector<Interaction> read_interactions(const std::filesystem::path& path);
void write_split(const InteractionSplit& split, std::size_t observed_count, const std::filesystem::path& dir);
InteractionSplit read_split(const std::filesystem::path& dir);

/// Shortest round-trip text for a double.
std::string format_value(double v);

}  // namespace qos
