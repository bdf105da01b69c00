#include "pgmpp/cost.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pgmpp/errors.hpp"
#include "pgmpp/search.hpp"
#include "pgmpp/timing.hpp"

namespace pgmpp {

namespace {

constexpr std::size_t kMiB = std::size_t{1} << 20;
constexpr std::size_t kMinChaseBytes = 64 * kMiB;
constexpr std::size_t kMaxChaseBytes = 2048 * kMiB;

double ceil_log2(double x) { return std::ceil(std::log2(x)); }

/// One latency probe: times a batch, stores the elapsed ns through the
/// out-parameter and returns the number of operations timed.
using Probe = std::function<double(double&)>;

/// Runs every probe once per repetition, round-robin, so that a shift in
/// host speed during calibration hits all probes alike. Returns the median
/// ns per operation of each probe.
std::vector<double> interleaved_medians(const std::vector<Probe>& probes, std::size_t reps, double min_interval_ns) {
    std::vector<std::vector<double>> samples(probes.size());
    for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t i = 0; i < probes.size(); ++i) {
            double ns = 0.0;
            const double ops = probes[i](ns);
            if (ns < min_interval_ns) {
                throw CalibrationFailure("probe interval " + std::to_string(ns) +
                                         " ns is too short for the clock resolution");
            }
            samples[i].push_back(ns / ops);
        }
    }
    std::vector<double> out;
    for (auto& s : samples) {
        out.push_back(median(std::move(s)));
    }
    return out;
}

std::vector<Key> probe_keys(std::size_t n, std::mt19937_64& rng) {
    std::vector<Key> keys(n);
    Key k = 0;
    std::uniform_int_distribution<Key> gap(1, 64);
    for (auto& x : keys) {
        k += gap(rng);
        x = k;
    }
    return keys;
}

std::vector<Key> probe_queries(std::span<const Key> keys, std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<Key> d(0, keys.back() + 1);
    std::vector<Key> q(n);
    for (auto& x : q) {
        x = d(rng);
    }
    return q;
}

/// ns per branchless search over `keys`.
double time_branchless(std::span<const Key> keys, std::span<const Key> queries, std::size_t rounds,
                       double& elapsed) {
    std::size_t sink = 0;
    Stopwatch sw;
    for (std::size_t r = 0; r < rounds; ++r) {
        for (const Key q : queries) {
            sink += branchless_lower_bound(keys, q);
        }
    }
    elapsed = sw.elapsed_ns();
    do_not_optimize(sink);
    return static_cast<double>(rounds * queries.size());
}

struct WindowSet {
    std::vector<Key> keys;
    std::vector<std::size_t> offsets;
    std::vector<Key> queries;
};

WindowSet window_set(std::size_t length, std::mt19937_64& rng) {
    WindowSet w;
    w.keys = probe_keys(4096, rng);
    std::uniform_int_distribution<std::size_t> off(0, w.keys.size() - length);
    for (int i = 0; i < 2048; ++i) {
        const std::size_t o = off(rng);
        w.offsets.push_back(o);
        std::uniform_int_distribution<Key> q(w.keys[o], w.keys[o + length - 1] + 1);
        w.queries.push_back(q(rng));
    }
    return w;
}

template <typename Search>
double time_windows(const WindowSet& w, std::size_t length, std::size_t rounds, double& elapsed, Search search) {
    std::size_t sink = 0;
    Stopwatch sw;
    for (std::size_t r = 0; r < rounds; ++r) {
        for (std::size_t i = 0; i < w.offsets.size(); ++i) {
            sink += search(std::span<const Key>(w.keys.data() + w.offsets[i], length), w.queries[i]);
        }
    }
    elapsed = sw.elapsed_ns();
    do_not_optimize(sink);
    return static_cast<double>(rounds * w.offsets.size());
}

struct alignas(64) ChaseNode {
    std::size_t next;
};

/// Random single-cycle permutation of 64-byte nodes.
std::unique_ptr<ChaseNode[]> chase_cycle(std::size_t n, std::mt19937_64& rng) {
    std::unique_ptr<ChaseNode[]> nodes(new ChaseNode[n]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin() + 1, order.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
        nodes[order[i]].next = order[(i + 1) % n];
    }
    return nodes;
}

} // namespace

void validate(const CostConstants& c) {
    if (!(c.c_hit > 0.0) || !(c.c_miss > c.c_hit) || !(c.c_segment > 0.0) || !(c.c_linear_fixed >= 0.0) ||
        !(c.c_linear_per_elem >= 0.0) || c.delta == 0) {
        throw std::invalid_argument("cost constants violate c_miss > c_hit > 0, c_segment > 0, delta >= 1");
    }
}

std::string format_constants(const CostConstants& c) {
    std::ostringstream s;
    s.precision(17);
    s << "c_miss=" << c.c_miss << "\n"
      << "c_hit=" << c.c_hit << "\n"
      << "c_segment=" << c.c_segment << "\n"
      << "c_linear_fixed=" << c.c_linear_fixed << "\n"
      << "c_linear_per_elem=" << c.c_linear_per_elem << "\n"
      << "delta=" << c.delta << "\n";
    return s.str();
}

CostConstants parse_constants(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("calibration line without '=': " + line);
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const auto number = [&](const std::string& key) {
        const auto it = kv.find(key);
        if (it == kv.end()) {
            throw FormatError("calibration file lacks " + key);
        }
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(it->second, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != it->second.size()) {
            throw FormatError("bad value for " + key + ": " + it->second);
        }
        kv.erase(it);
        return v;
    };
    CostConstants c;
    c.c_miss = number("c_miss");
    c.c_hit = number("c_hit");
    c.c_segment = number("c_segment");
    c.c_linear_fixed = number("c_linear_fixed");
    c.c_linear_per_elem = number("c_linear_per_elem");
    const double delta = number("delta");
    if (delta < 1 || delta != std::floor(delta)) {
        throw FormatError("delta must be a positive integer");
    }
    c.delta = static_cast<std::size_t>(delta);
    if (!kv.empty()) {
        throw FormatError("unknown calibration key " + kv.begin()->first);
    }
    try {
        validate(c);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    return c;
}

void save_constants(const std::filesystem::path& path, const CostConstants& c) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << format_constants(c);
}

CostConstants load_constants(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream s;
    s << in.rdbuf();
    return parse_constants(s.str());
}

std::size_t last_level_cache_bytes() {
    std::size_t best = 0;
    int best_level = 0;
    for (int i = 0; i < 8; ++i) {
        const std::string dir = "/sys/devices/system/cpu/cpu0/cache/index" + std::to_string(i) + "/";
        std::ifstream level_in(dir + "level");
        std::ifstream size_in(dir + "size");
        int level = 0;
        std::string size;
        if (!(level_in >> level) || !(size_in >> size) || size.empty()) {
            continue;
        }
        std::size_t bytes = std::stoull(size);
        if (size.back() == 'K') {
            bytes <<= 10;
        } else if (size.back() == 'M') {
            bytes <<= 20;
        }
        if (level >= best_level) {
            best_level = level;
            best = bytes;
        }
    }
    return best == 0 ? 32 * kMiB : best;
}

CostConstants calibrate_constants(const CalibrationOptions& options) {
    const std::size_t reps = std::max<std::size_t>(options.reps, 1);
    const double min_interval = 1000.0 * timer_resolution_ns();
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::vector<Probe> probes;

    // Cache-resident binary search steps (L1 and L2 sized arrays that stay
    // within the reach of the first-level TLB).
    constexpr std::size_t kHitSizes[] = {4096, 16384};
    std::vector<std::vector<Key>> hit_keys;
    std::vector<std::vector<Key>> hit_queries;
    for (const std::size_t n : kHitSizes) {
        hit_keys.push_back(probe_keys(n, rng));
        hit_queries.push_back(probe_queries(hit_keys.back(), 4096, rng));
    }
    for (std::size_t i = 0; i < hit_keys.size(); ++i) {
        probes.push_back([&, i](double& ns) { return time_branchless(hit_keys[i], hit_queries[i], 64, ns); });
    }

    // Dependent random accesses over an array well beyond the last-level cache.
    std::size_t chase = options.chase_bytes;
    if (chase == 0) {
        chase = std::clamp(4 * last_level_cache_bytes(), kMinChaseBytes, kMaxChaseBytes);
    }
    const std::size_t chase_nodes = chase / sizeof(ChaseNode);
    const auto nodes = chase_cycle(chase_nodes, rng);
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < std::min(chase_nodes, options.chase_steps); ++i) {
        cursor = nodes[cursor].next;
    }
    const std::size_t steps = options.chase_steps;
    probes.push_back([&](double& ns) {
        Stopwatch sw;
        for (std::size_t i = 0; i < steps; ++i) {
            cursor = nodes[cursor].next;
        }
        ns = sw.elapsed_ns();
        do_not_optimize(cursor);
        return static_cast<double>(steps);
    });

    // Chained segment evaluations, each feeding the next key.
    probes.push_back([](double& ns) {
        constexpr std::size_t kOps = 1u << 22;
        const Segment seg{12345, 0.000123, 17.5};
        double acc = 1.0;
        Stopwatch sw;
        for (std::size_t i = 0; i < kOps; ++i) {
            acc = eval_segment(seg, static_cast<Key>(acc) + i);
        }
        ns = sw.elapsed_ns();
        do_not_optimize(acc);
        return static_cast<double>(kOps);
    });

    // Linear scan vs branchless binary search on short cached windows.
    std::vector<std::size_t> lengths;
    std::vector<WindowSet> windows;
    for (std::size_t len = 4; len <= 64; len += 4) {
        lengths.push_back(len);
        windows.push_back(window_set(len, rng));
    }
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        probes.push_back([&, i](double& ns) {
            return time_windows(windows[i], lengths[i], 64, ns,
                                [](std::span<const Key> s, Key k) { return linear_lower_bound(s, k); });
        });
        probes.push_back([&, i](double& ns) {
            return time_windows(windows[i], lengths[i], 64, ns,
                                [](std::span<const Key> s, Key k) { return branchless_lower_bound(s, k); });
        });
    }

    const std::vector<double> m = interleaved_medians(probes, reps, min_interval);
    CostConstants c;
    c.c_hit = 0.5 * (m[0] / ceil_log2(static_cast<double>(kHitSizes[0])) +
                     m[1] / ceil_log2(static_cast<double>(kHitSizes[1])));
    c.c_miss = m[2];
    c.c_segment = m[3];

    std::vector<double> linear_ns;
    std::size_t delta = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const double lin = m[4 + 2 * i];
        const double bin = m[5 + 2 * i];
        linear_ns.push_back(lin);
        if (lin <= bin) {
            delta = lengths[i];
        }
    }
    const double n = static_cast<double>(lengths.size());
    const double mx = std::accumulate(lengths.begin(), lengths.end(), 0.0) / n;
    const double my = std::accumulate(linear_ns.begin(), linear_ns.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const double dx = static_cast<double>(lengths[i]) - mx;
        sxy += dx * (linear_ns[i] - my);
        sxx += dx * dx;
    }
    c.c_linear_per_elem = std::max(0.0, sxy / sxx);
    c.c_linear_fixed = std::max(0.0, my - c.c_linear_per_elem * mx);
    c.delta = std::clamp<std::size_t>(delta, 4, 64);

    try {
        validate(c);
    } catch (const std::invalid_argument& e) {
        throw CalibrationFailure(std::string("inconsistent calibration: ") + e.what());
    }
    return c;
}

double space_cost(const LeafEstimator& estimator, std::uint64_t eps_leaf, std::size_t seg_bytes) {
    return estimator.estimate(eps_leaf) * static_cast<double>(seg_bytes);
}

double internal_search_cost(const CostConstants& c, std::uint64_t eps) {
    const std::size_t range = 2 * eps + 1;
    if (range <= c.delta) {
        return c.c_linear(range);
    }
    return ceil_log2(static_cast<double>(range)) * c.c_hit;
}

TimeCost time_cost_breakdown(const CostConstants& c, const LeafEstimator& estimator, std::uint64_t eps_internal,
                             std::uint64_t eps_leaf, double c_h) {
    TimeCost t;
    t.last_mile = ceil_log2(static_cast<double>(2 * eps_leaf + 1)) * c.c_miss;
    const auto h = estimate_height(estimator, eps_internal, eps_leaf, c_h);
    if (h) {
        t.height = *h;
    } else {
        const double leaves = estimator.estimate(eps_leaf);
        t.height_fallback = true;
        t.height = leaves <= 1.0 ? 1
                                 : 1 + static_cast<std::size_t>(std::ceil(
                                           std::log(leaves) / std::log(static_cast<double>(2 * eps_internal + 1))));
    }
    t.internal = static_cast<double>(t.height - 1) * (internal_search_cost(c, eps_internal) + c.c_segment);
    return t;
}

double time_cost(const CostConstants& c, const LeafEstimator& estimator, std::uint64_t eps_internal,
                 std::uint64_t eps_leaf, double c_h) {
    return time_cost_breakdown(c, estimator, eps_internal, eps_leaf, c_h).total();
}

std::uint64_t tune_leaf(const LeafEstimator& estimator, TuningBudget budget, std::size_t seg_bytes) {
    if (seg_bytes == 0 || budget.bytes < seg_bytes) {
        throw std::invalid_argument("budget must hold at least one segment");
    }
    const double v = estimator.scale() * static_cast<double>(seg_bytes) * estimator.hardness_mass() /
                     static_cast<double>(budget.bytes);
    // The small slack absorbs rounding when v is a perfect square.
    const double eps = std::ceil(std::sqrt(v) - 1e-9);
    if (eps > static_cast<double>(kMaxLeafEpsilon)) {
        throw BudgetTooSmall("budget of " + std::to_string(budget.bytes) + " bytes needs eps_leaf " +
                             std::to_string(eps) + " > " + std::to_string(kMaxLeafEpsilon));
    }
    return std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::max(eps, 0.0)), kMinLeafEpsilon, kMaxLeafEpsilon);
}

std::uint64_t tune_internal(const CostConstants& c, const LeafEstimator& estimator, std::uint64_t eps_leaf,
                            std::span<const std::uint64_t> candidates, double c_h) {
    if (candidates.empty()) {
        throw std::invalid_argument("no internal error-bound candidates");
    }
    std::vector<std::uint64_t> sorted(candidates.begin(), candidates.end());
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t best = sorted.front();
    double best_cost = time_cost(c, estimator, best, eps_leaf, c_h);
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double cost = time_cost(c, estimator, sorted[i], eps_leaf, c_h);
        if (cost < best_cost) {
            best = sorted[i];
            best_cost = cost;
        }
    }
    return best;
}

TuningResult tune_parameters(const LeafEstimator& estimator, TuningBudget budget, const CostConstants& c,
                             std::span<const std::uint64_t> candidates, std::size_t seg_bytes, double c_h) {
    TuningResult r;
    r.eps_leaf = tune_leaf(estimator, budget, seg_bytes);
    r.eps_internal = tune_internal(c, estimator, r.eps_leaf, candidates, c_h);
    r.predicted_cost_ns = time_cost(c, estimator, r.eps_internal, r.eps_leaf, c_h);
    r.predicted_bytes = space_cost(estimator, r.eps_leaf, seg_bytes);
    return r;
}

} // namespace pgmpp
