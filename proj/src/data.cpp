#include "pgmpp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pgmpp/errors.hpp"

namespace pgmpp {

namespace {

constexpr double kTwo63 = 9223372036854775808.0;

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<char>(v >> (8 * i));
    }
    out.write(b, 8);
}

std::uint64_t decode_u64(const unsigned char* b) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

/// Maps x in [lo, hi] onto [0, 2^63), clamping outliers.
Key scale_to_key(double x, double lo, double hi) {
    const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    const double k = std::floor(t * kTwo63);
    return k >= kTwo63 ? (std::uint64_t{1} << 63) - 1 : static_cast<Key>(k);
}

} // namespace

std::string describe(const Distribution& dist) {
    std::ostringstream s;
    if (const auto* u = std::get_if<UniformDist>(&dist)) {
        s << "uniform(" << u->lo << "," << u->hi << ")";
    } else if (const auto* nd = std::get_if<NormalDist>(&dist)) {
        s << "normal(" << nd->mu << "," << nd->sd << ")";
    } else {
        const auto& ln = std::get<LogNormalDist>(dist);
        s << "lognormal(" << ln.mu << "," << ln.sd << ")";
    }
    return s.str();
}

KeySet generate_synthetic(const Distribution& dist, std::size_t n, std::uint64_t seed) {
    if (n < 2) {
        throw std::invalid_argument("need at least 2 keys");
    }
    std::mt19937_64 rng(seed);
    std::function<Key()> draw;
    if (const auto* u = std::get_if<UniformDist>(&dist)) {
        if (u->hi <= u->lo) {
            throw std::invalid_argument("uniform range needs hi > lo");
        }
        if (u->hi - u->lo < n - 1) {
            throw std::invalid_argument("uniform range too small for " + std::to_string(n) + " distinct keys");
        }
        std::uniform_int_distribution<Key> d(u->lo, u->hi);
        draw = [d, &rng]() mutable { return d(rng); };
    } else if (const auto* nd = std::get_if<NormalDist>(&dist)) {
        if (!(nd->sd > 0.0) || !std::isfinite(nd->mu)) {
            throw std::invalid_argument("normal distribution needs sd > 0");
        }
        std::normal_distribution<double> d(nd->mu, nd->sd);
        const double lo = nd->mu - 6.0 * nd->sd;
        const double hi = nd->mu + 6.0 * nd->sd;
        draw = [d, &rng, lo, hi]() mutable { return scale_to_key(d(rng), lo, hi); };
    } else {
        const auto& ln = std::get<LogNormalDist>(dist);
        if (!(ln.sd > 0.0) || !std::isfinite(ln.mu)) {
            throw std::invalid_argument("log-normal distribution needs sd > 0");
        }
        std::lognormal_distribution<double> d(ln.mu, ln.sd);
        const double hi = std::exp(ln.mu + 6.0 * ln.sd);
        if (!std::isfinite(hi)) {
            throw std::invalid_argument("log-normal parameters overflow");
        }
        draw = [d, &rng, hi]() mutable { return scale_to_key(d(rng), 0.0, hi); };
    }

    KeySet out;
    out.source = describe(dist) + " seed=" + std::to_string(seed);
    out.keys.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.keys.push_back(draw());
    }
    std::sort(out.keys.begin(), out.keys.end());
    out.keys.erase(std::unique(out.keys.begin(), out.keys.end()), out.keys.end());
    // Top up collisions one draw at a time so tight ranges still fill exactly.
    std::set<Key> extra;
    const std::size_t missing = n - out.keys.size();
    const std::size_t max_draws = 64 * n + 1'000'000;
    for (std::size_t draws = 0; extra.size() < missing; ++draws) {
        if (draws == max_draws) {
            throw std::invalid_argument("distribution cannot produce " + std::to_string(n) + " distinct keys");
        }
        const Key k = draw();
        if (!std::binary_search(out.keys.begin(), out.keys.end(), k)) {
            extra.insert(k);
        }
    }
    if (!extra.empty()) {
        const auto mid = static_cast<std::ptrdiff_t>(out.keys.size());
        out.keys.insert(out.keys.end(), extra.begin(), extra.end());
        std::inplace_merge(out.keys.begin(), out.keys.begin() + mid, out.keys.end());
    }
    return out;
}

void write_keyset(const std::filesystem::path& path, std::span<const Key> keys) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    put_u64(out, keys.size());
    for (const Key k : keys) {
        put_u64(out, k);
    }
    if (!out.flush()) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

std::vector<Key> read_raw_keys(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    const auto size = std::filesystem::file_size(path);
    if (size < 8) {
        throw FormatError(path.string() + ": missing key count");
    }
    unsigned char header[8];
    in.read(reinterpret_cast<char*>(header), 8);
    const std::uint64_t count = decode_u64(header);
    if (count != (size - 8) / 8 || (size - 8) % 8 != 0) {
        throw FormatError(path.string() + ": header declares " + std::to_string(count) + " keys but file holds " +
                          std::to_string((size - 8) / 8));
    }
    std::vector<unsigned char> bytes(count * 8);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != bytes.size()) {
        throw FormatError(path.string() + ": truncated");
    }
    std::vector<Key> keys(count);
    for (std::size_t i = 0; i < count; ++i) {
        keys[i] = decode_u64(bytes.data() + 8 * i);
    }
    return keys;
}

KeySet read_keyset(const std::filesystem::path& path) {
    KeySet out;
    out.keys = read_raw_keys(path);
    out.source = path.string();
    std::sort(out.keys.begin(), out.keys.end());
    const std::size_t before = out.keys.size();
    out.keys.erase(std::unique(out.keys.begin(), out.keys.end()), out.keys.end());
    out.duplicates_removed = before - out.keys.size();
    return out;
}

Workload generate_workload(std::span<const Key> keys, WorkloadKind kind, std::size_t size,
                           std::uint64_t seed, double alpha) {
    if (keys.empty() || size == 0) {
        throw std::invalid_argument("workload needs keys and size >= 1");
    }
    Workload w;
    w.kind = kind;
    w.queries.reserve(size);
    std::mt19937_64 rng(seed);
    if (kind == WorkloadKind::Uniform) {
        std::uniform_int_distribution<std::size_t> d(0, keys.size() - 1);
        for (std::size_t i = 0; i < size; ++i) {
            w.queries.push_back(keys[d(rng)]);
        }
        return w;
    }
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("Zipf exponent must be positive");
    }
    w.alpha = alpha;
    std::vector<double> cdf(keys.size());
    double total = 0.0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        total += std::pow(static_cast<double>(i + 1), -alpha);
        cdf[i] = total;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    for (std::size_t i = 0; i < size; ++i) {
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u(rng));
        const auto r = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), keys.size() - 1);
        w.queries.push_back(keys[r]);
    }
    return w;
}

double zipf_mass_up_to(std::size_t n, double alpha, std::size_t r) {
    double head = 0.0;
    double total = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        const double p = std::pow(static_cast<double>(i), -alpha);
        total += p;
        if (i <= r) {
            head += p;
        }
    }
    return head / total;
}

std::vector<Key> stretch_gap_bursts(std::span<const Key> keys, double fraction, std::size_t bursts,
                                    std::uint64_t factor) {
    if (keys.size() < 2 || bursts == 0 || !(fraction >= 0.0 && fraction <= 1.0) || factor == 0) {
        throw std::invalid_argument("invalid gap-burst parameters");
    }
    const std::size_t gaps = keys.size() - 1;
    const auto stretched = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(gaps)));
    const std::size_t burst_len = stretched / bursts;
    std::vector<char> in_burst(gaps, 0);
    for (std::size_t b = 0; b < bursts && burst_len > 0; ++b) {
        const std::size_t start = (2 * b + 1) * gaps / (2 * bursts) - burst_len / 2;
        std::fill_n(in_burst.begin() + static_cast<std::ptrdiff_t>(start), burst_len, 1);
    }
    std::vector<Key> out(keys.size());
    out[0] = keys[0];
    for (std::size_t i = 0; i < gaps; ++i) {
        Key g = keys[i + 1] - keys[i];
        if (in_burst[i] && __builtin_mul_overflow(g, factor, &g)) {
            throw std::overflow_error("stretched gap overflows 64 bits");
        }
        if (__builtin_add_overflow(out[i], g, &out[i + 1])) {
            throw std::overflow_error("stretched keys overflow 64 bits");
        }
    }
    return out;
}

} // namespace pgmpp
