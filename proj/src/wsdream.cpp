#include "qos/wsdream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "qos/errors.hpp"
#include "qos/rng.hpp"

namespace qos {

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            return out;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

void chomp(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

// The released tables put a row of '=' under the header.
bool is_decoration(const std::string& line) {
    return line.empty() || std::all_of(line.begin(), line.end(), [](char c) { return c == '=' || c == ' '; });
}

std::uint32_t parse_id(const std::string& tok, const std::string& name, std::size_t line_no) {
    std::uint32_t id = 0;
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, id);
    if (ec != std::errc{} || ptr != last) throw ParseError(name, line_no, "invalid id '" + tok + "'");
    return id;
}

template <typename Record, typename Fill>
std::vector<Record> parse_table(std::istream& in, const std::string& name, std::size_t n_cols, Fill fill) {
    std::vector<Record> rows;
    std::unordered_set<std::uint32_t> seen;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        chomp(line);
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        if (is_decoration(line)) continue;
        auto cols = split_tabs(line);
        if (cols.size() != n_cols) {
            throw ParseError(name, line_no,
                             "expected " + std::to_string(n_cols) + " columns, got " + std::to_string(cols.size()));
        }
        const auto id = parse_id(cols[0], name, line_no);
        if (!seen.insert(id).second) {
            throw IntegrityError(name + ":" + std::to_string(line_no) + ": duplicate id " + std::to_string(id));
        }
        rows.push_back(fill(id, cols));
    }
    return rows;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

}  // namespace

std::string_view to_string(QosKind kind) {
    return kind == QosKind::throughput ? "throughput" : "response_time";
}

QosKind parse_qos_kind(std::string_view s) {
    if (s == "throughput" || s == "tp") return QosKind::throughput;
    if (s == "response_time" || s == "rt") return QosKind::response_time;
    throw ConfigError("unknown dataset kind '" + std::string(s) + "'");
}

std::size_t QosMatrix::observed_count() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), is_observed));
}

std::vector<UserRecord> parse_users(std::istream& in, const std::string& name) {
    return parse_table<UserRecord>(in, name, 7, [](std::uint32_t id, std::vector<std::string>& c) {
        return UserRecord{id, std::move(c[1]), std::move(c[2]), std::move(c[3]),
                          std::move(c[4]), std::move(c[5]), std::move(c[6])};
    });
}

std::vector<ServiceRecord> parse_services(std::istream& in, const std::string& name) {
    return parse_table<ServiceRecord>(in, name, 9, [](std::uint32_t id, std::vector<std::string>& c) {
        return ServiceRecord{id,           std::move(c[1]), std::move(c[2]), std::move(c[3]), std::move(c[4]),
                             std::move(c[5]), std::move(c[6]), std::move(c[7]), std::move(c[8])};
    });
}

std::vector<UserRecord> ingest_users(const std::filesystem::path& path) {
    auto in = open_in(path);
    return parse_users(in, path.string());
}

std::vector<ServiceRecord> ingest_services(const std::filesystem::path& path) {
    auto in = open_in(path);
    return parse_services(in, path.string());
}

QosMatrix parse_matrix(std::istream& in, QosKind kind, std::size_t n_users, std::size_t n_services,
                       const std::string& name) {
    QosMatrix m;
    m.kind = kind;
    std::string line;
    std::size_t line_no = 0;
    std::size_t rows = 0;
    std::size_t cols = n_services;
    while (std::getline(in, line)) {
        ++line_no;
        chomp(line);
        const char* p = line.data();
        const char* end = line.data() + line.size();
        std::size_t count = 0;
        for (;;) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            if (p == end) break;
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{} || (next < end && *next != ' ' && *next != '\t') || !std::isfinite(v)) {
                const char* tok_end = p;
                while (tok_end < end && *tok_end != ' ' && *tok_end != '\t') ++tok_end;
                throw ParseError(name, line_no, "non-numeric token '" + std::string(p, tok_end) + "'");
            }
            m.values.push_back(v);
            ++count;
            p = next;
        }
        if (count == 0) continue;
        if (cols == 0) cols = count;
        if (count != cols) {
            throw ParseError(name, line_no,
                             "expected " + std::to_string(cols) + " values, got " + std::to_string(count));
        }
        ++rows;
    }
    if (n_users != 0 && rows != n_users) {
        throw ParseError(name, line_no, "expected " + std::to_string(n_users) + " rows, got " + std::to_string(rows));
    }
    m.n_users = rows;
    m.n_services = cols;
    return m;
}

QosMatrix ingest_matrix(const std::filesystem::path& path, QosKind kind, std::size_t n_users, std::size_t n_services) {
    auto in = open_in(path);
    return parse_matrix(in, kind, n_users, n_services, path.string());
}

std::string format_value(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void write_matrix(const QosMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t u = 0; u < m.n_users; ++u) {
        for (std::size_t s = 0; s < m.n_services; ++s) {
            if (s) out << '\t';
            out << format_value(m.at(u, s));
        }
        out << '\n';
    }
}

InteractionSplit split_by_density(const QosMatrix& matrix, double density, std::uint64_t seed) {
    if (!(density > 0.0 && density <= 1.0)) {
        throw std::invalid_argument("density must be in (0, 1], got " + format_value(density));
    }
    std::vector<std::uint32_t> cells;
    cells.reserve(matrix.values.size());
    for (std::size_t i = 0; i < matrix.values.size(); ++i) {
        if (is_observed(matrix.values[i])) cells.push_back(static_cast<std::uint32_t>(i));
    }
    const std::size_t n = cells.size();
    // floor(density * n), nudged so decimal densities whose product is an
    // integer are not lost to rounding (0.29 * 100 evaluates to 28.999...).
    auto n_train = static_cast<std::size_t>(std::floor(density * static_cast<double>(n)));
    if (static_cast<double>(n_train + 1) <= density * static_cast<double>(n) * (1.0 + 1e-15)) ++n_train;
    n_train = std::min(n_train, n);

    Pcg32 rng(seed);
    for (std::size_t i = 0; i < n_train; ++i) {
        const auto j = i + rng.bounded(static_cast<std::uint32_t>(n - i));
        std::swap(cells[i], cells[j]);
    }
    std::sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(cells.begin() + static_cast<std::ptrdiff_t>(n_train), cells.end());

    InteractionSplit split;
    split.density = density;
    split.seed = seed;
    auto to_interaction = [&](std::uint32_t cell) {
        return Interaction{static_cast<std::uint32_t>(cell / matrix.n_services),
                           static_cast<std::uint32_t>(cell % matrix.n_services), matrix.values[cell]};
    };
    split.train.reserve(n_train);
    split.test.reserve(n - n_train);
    for (std::size_t i = 0; i < n; ++i) {
        (i < n_train ? split.train : split.test).push_back(to_interaction(cells[i]));
    }
    return split;
}

namespace {

void write_rows(std::ostream& out, const std::vector<Interaction>& rows) {
    for (const auto& r : rows) out << r.user << '\t' << r.service << '\t' << format_value(r.value) << '\n';
}

std::string serialize_rows(const std::vector<Interaction>& rows) {
    std::ostringstream os;
    write_rows(os, rows);
    return os.str();
}

}  // namespace

std::uint64_t split_checksum(const InteractionSplit& split) {
    Fnv1a64 h;
    h.update(serialize_rows(split.train));
    h.update("--\n");
    h.update(serialize_rows(split.test));
    return h.digest();
}

void write_interactions(const std::vector<Interaction>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_rows(out, rows);
}

std::vector<Interaction> read_interactions(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<Interaction> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        chomp(line);
        if (line.empty()) continue;
        auto cols = split_tabs(line);
        if (cols.size() != 3) throw ParseError(path.string(), line_no, "expected 3 columns");
        Interaction r;
        r.user = parse_id(cols[0], path.string(), line_no);
        r.service = parse_id(cols[1], path.string(), line_no);
        auto [ptr, ec] = std::from_chars(cols[2].data(), cols[2].data() + cols[2].size(), r.value);
        if (ec != std::errc{} || ptr != cols[2].data() + cols[2].size()) {
            throw ParseError(path.string(), line_no, "invalid value '" + cols[2] + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

void write_split(const InteractionSplit& split, std::size_t observed_count, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_interactions(split.train, dir / "train.tsv");
    write_interactions(split.test, dir / "test.tsv");
    std::ofstream out(dir / "split.manifest", std::ios::binary);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(split_checksum(split)));
    out << "density=" << format_value(split.density) << '\n'
        << "seed=" << split.seed << '\n'
        << "observed=" << observed_count << '\n'
        << "train=" << split.train.size() << '\n'
        << "test=" << split.test.size() << '\n'
        << "checksum=fnv1a64:" << hex << '\n';
}

InteractionSplit read_split(const std::filesystem::path& dir) {
    InteractionSplit split;
    split.train = read_interactions(dir / "train.tsv");
    split.test = read_interactions(dir / "test.tsv");
    auto in = open_in(dir / "split.manifest");
    std::string line;
    std::string checksum;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const auto key = line.substr(0, eq);
        const auto val = line.substr(eq + 1);
        if (key == "density") split.density = std::stod(val);
        if (key == "seed") split.seed = std::stoull(val);
        if (key == "checksum") checksum = val;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(split_checksum(split)));
    if (!checksum.empty() && checksum != std::string("fnv1a64:") + hex) {
        throw IntegrityError("split checksum mismatch in " + dir.string());
    }
    return split;
}

}  // namespace qos
