#include "qos/synthetic.hpp"

#include <cmath>
#include <fstream>

#include "qos/rng.hpp"

namespace qos {

namespace {

double gaussian(Pcg32& rng) {
    // Box-Muller; u1 kept away from 0.
    const double u1 = 1.0 - rng.uniform01();
    const double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::vector<double> factors(std::size_t n, std::size_t rank, Pcg32& rng) {
    std::vector<double> f(n * rank);
    const double a = std::sqrt(3.0);
    for (auto& x : f) x = rng.uniform(-a, a);
    return f;
}

FeatureStore features_from(EntityKind kind, const std::vector<double>& f, std::size_t n, std::size_t rank,
                           const std::vector<double>& map, std::uint32_t dim, double noise, Pcg32& rng) {
    FeatureStore store;
    store.entity_kind = kind;
    store.dim = dim;
    store.provenance = {"synthetic", Pooling::random, {}};
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> v(dim);
        for (std::uint32_t k = 0; k < dim; ++k) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rank; ++r) acc += map[k * rank + r] * f[i * rank + r];
            v[k] = static_cast<float>(acc + noise * (rng.uniform01() - 0.5));
        }
        store.vectors.emplace(static_cast<std::uint32_t>(i), std::move(v));
    }
    return store;
}

}  // namespace

SyntheticData make_synthetic(const SyntheticSpec& spec) {
    Pcg32 rng(mix_seed(spec.seed, 0x5e7));
    const auto a = factors(spec.n_users, spec.rank, rng);
    const auto b = factors(spec.n_services, spec.rank, rng);

    SyntheticData data;
    auto& m = data.matrix;
    m.n_users = spec.n_users;
    m.n_services = spec.n_services;
    m.values.resize(spec.n_users * spec.n_services);
    const double norm = 1.0 / std::sqrt(static_cast<double>(spec.rank));
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        for (std::size_t s = 0; s < spec.n_services; ++s) {
            double dot = 0.0;
            for (std::size_t r = 0; r < spec.rank; ++r) dot += a[u * spec.rank + r] * b[s * spec.rank + r];
            double y = spec.offset + spec.scale * dot * norm + spec.noise_std * gaussian(rng);
            if (y < 0.0) y = 0.0;
            if (spec.missing_fraction > 0.0 && rng.uniform01() < spec.missing_fraction) y = kMissingSentinel;
            m.values[u * spec.n_services + s] = y;
        }
    }

    std::vector<double> map(std::size_t{spec.feature_dim} * spec.rank);
    for (auto& x : map) x = rng.uniform(-1.0, 1.0);
    data.user_features =
        features_from(EntityKind::user, a, spec.n_users, spec.rank, map, spec.feature_dim, spec.feature_noise, rng);
    data.service_features = features_from(EntityKind::service, b, spec.n_services, spec.rank, map, spec.feature_dim,
                                          spec.feature_noise, rng);
    return data;
}

void write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto data = make_synthetic(spec);
    static constexpr const char* kCountries[] = {"United States", "Germany", "Japan", "Brazil", "Canada"};
    {
        std::ofstream out(dir / "userlist.txt", std::ios::binary);
        out << "[User ID]\t[IP Address]\t[Country]\t[IP No.]\t[AS]\t[Latitude]\t[Longitude]\n";
        for (std::size_t u = 0; u < spec.n_users; ++u) {
            out << u << "\t10.0." << u / 256 << '.' << u % 256 << '\t' << kCountries[u % 5] << '\t' << 167772160 + u
                << "\tAS" << 64512 + u % 17 << " Synthetic Network " << u % 17 << '\t' << 10 + u % 50 << '\t'
                << -(static_cast<long>(u % 90)) << '\n';
        }
    }
    {
        std::ofstream out(dir / "wslist.txt", std::ios::binary);
        out << "[Service ID]\t[WSDL Address]\t[Service Provider]\t[IP Address]\t[Country]\t[IP No.]\t[AS]\t[Latitude]"
               "\t[Longitude]\n";
        for (std::size_t s = 0; s < spec.n_services; ++s) {
            out << s << "\thttp://provider" << s % 23 << ".example.org/service" << s << "?wsdl\tprovider" << s % 23
                << ".example.org\t10.1." << s / 256 << '.' << s % 256 << '\t' << kCountries[(s / 3) % 5] << '\t'
                << 167837696 + s << "\tAS" << 65000 + s % 29 << " Synthetic Hosting " << s % 29 << '\t' << s % 60
                << '\t' << static_cast<long>(s % 120) - 60 << '\n';
        }
    }
    write_matrix(data.matrix, dir / "tpMatrix.txt");
    // Response time: same structure on a smaller scale.
    QosMatrix rt = data.matrix;
    for (auto& v : rt.values) {
        if (is_observed(v)) v = v / 5.0;
    }
    write_matrix(rt, dir / "rtMatrix.txt");
}

}  // namespace qos
