#include "pgmpp/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pgmpp/errors.hpp"
#include "pgmpp/timing.hpp"

namespace pgmpp {

namespace {

constexpr std::size_t kBatch = 64;

/// Untimed passes before each timed pass. One pass is not enough for the
/// last-mile footprint of wide leaf windows to settle in cache.
constexpr std::size_t kWarmupPasses = 3;

double nearest_rank(std::vector<double> xs, double p) {
    std::sort(xs.begin(), xs.end());
    const auto r = static_cast<std::size_t>(std::ceil(p * static_cast<double>(xs.size())));
    return xs[std::clamp<std::size_t>(r, 1, xs.size()) - 1];
}

template <bool Branchy>
std::size_t run_pass(const PgmIndex& index, std::span<const Key> workload) {
    std::size_t sink = 0;
    for (const Key q : workload) {
        sink += Branchy ? index.lookup_branchy(q) : index.lookup(q);
    }
    return sink;
}

/// Warm-up passes and one timed pass; with `per_query`, also times the
/// workload in batches of kBatch queries.
template <bool Branchy>
void sample_lookups(const PgmIndex& index, std::span<const Key> workload, std::vector<double>& pass_means,
                    std::vector<double>* per_query) {
    for (std::size_t w = 0; w < kWarmupPasses; ++w) {
        do_not_optimize(run_pass<Branchy>(index, workload));
    }
    Stopwatch sw;
    do_not_optimize(run_pass<Branchy>(index, workload));
    pass_means.push_back(sw.elapsed_ns() / static_cast<double>(workload.size()));
    if (per_query == nullptr) {
        return;
    }
    for (std::size_t b = 0; b + kBatch <= workload.size(); b += kBatch) {
        Stopwatch bw;
        do_not_optimize(run_pass<Branchy>(index, workload.subspan(b, kBatch)));
        per_query->push_back(bw.elapsed_ns() / static_cast<double>(kBatch));
    }
}

LookupTiming summarize(const std::vector<double>& pass_means, std::vector<double> per_query) {
    LookupTiming t;
    t.mean_ns = median(pass_means);
    if (per_query.empty()) {
        per_query = pass_means;
    }
    t.median_ns = median(per_query);
    t.p99_ns = nearest_rank(std::move(per_query), 0.99);
    return t;
}

/// Every 10th workload query.
std::vector<Key> split_sample(std::span<const Key> workload) {
    std::vector<Key> sample;
    for (std::size_t i = 0; i < workload.size(); i += 10) {
        sample.push_back(workload[i]);
    }
    if (sample.empty()) {
        throw std::invalid_argument("cannot split an empty workload");
    }
    return sample;
}

/// One repetition of the descent-only and full-lookup passes.
void sample_split(const PgmIndex& index, std::span<const Key> sample, std::vector<double>& internal,
                  std::vector<double>& total) {
    const auto n = static_cast<double>(sample.size());
    std::size_t sink = 0;
    for (const Key q : sample) {
        sink += index.locate(q).lo;
    }
    Stopwatch sw;
    for (const Key q : sample) {
        sink += index.locate(q).lo;
    }
    internal.push_back(sw.elapsed_ns() / n);
    sw.restart();
    for (const Key q : sample) {
        sink += index.lookup(q);
    }
    total.push_back(sw.elapsed_ns() / n);
    do_not_optimize(sink);
}

PhaseSplit summarize_split(const std::vector<double>& internal, const std::vector<double>& total) {
    PhaseSplit split;
    split.internal_ns = median(internal);
    split.last_mile_ns = std::max(0.0, median(total) - split.internal_ns);
    return split;
}

nlohmann::json constants_to_json(const CostConstants& c) {
    return {{"c_miss", c.c_miss},
            {"c_hit", c.c_hit},
            {"c_segment", c.c_segment},
            {"c_linear_fixed", c.c_linear_fixed},
            {"c_linear_per_elem", c.c_linear_per_elem},
            {"delta", c.delta}};
}

CostConstants constants_from_json(const nlohmann::json& j) {
    CostConstants c;
    c.c_miss = j.at("c_miss").get<double>();
    c.c_hit = j.at("c_hit").get<double>();
    c.c_segment = j.at("c_segment").get<double>();
    c.c_linear_fixed = j.at("c_linear_fixed").get<double>();
    c.c_linear_per_elem = j.at("c_linear_per_elem").get<double>();
    c.delta = j.at("delta").get<std::size_t>();
    return c;
}

} // namespace

LookupTiming time_lookups(const PgmIndex& index, std::span<const Key> workload, std::size_t reps, bool branchy) {
    if (workload.empty()) {
        throw std::invalid_argument("cannot time an empty workload");
    }
    reps = std::max<std::size_t>(reps, 1);
    std::vector<double> pass_means;
    std::vector<double> per_query;
    for (std::size_t r = 0; r < reps; ++r) {
        if (branchy) {
            sample_lookups<true>(index, workload, pass_means, &per_query);
        } else {
            sample_lookups<false>(index, workload, pass_means, &per_query);
        }
    }
    return summarize(pass_means, std::move(per_query));
}

PhaseSplit measure_phase_split(const PgmIndex& index, std::span<const Key> workload, std::size_t reps) {
    const std::vector<Key> sample = split_sample(workload);
    reps = std::max<std::size_t>(reps, 1);
    std::vector<double> internal;
    std::vector<double> total;
    for (std::size_t r = 0; r < reps; ++r) {
        sample_split(index, sample, internal, total);
    }
    return summarize_split(internal, total);
}

RunReport run_cell(std::shared_ptr<const std::vector<Key>> keys, std::uint64_t eps_internal, std::uint64_t eps_leaf,
                   std::span<const Key> workload, const RunOptions& options) {
    const std::uint64_t ei[] = {eps_internal};
    const std::uint64_t el[] = {eps_leaf};
    return sweep(std::move(keys), ei, el, workload, options).front();
}

std::vector<RunReport> sweep(std::shared_ptr<const std::vector<Key>> keys, std::span<const std::uint64_t> eps_internal,
                             std::span<const std::uint64_t> eps_leaf, std::span<const Key> workload,
                             const RunOptions& options) {
    if (workload.empty()) {
        throw std::invalid_argument("cannot time an empty workload");
    }
    struct Cell {
        PgmIndex index;
        RunReport report;
        std::vector<double> pass_means, per_query, internal, total, branchy;
    };
    std::vector<Cell> cells;
    cells.reserve(eps_internal.size() * eps_leaf.size());
    for (const std::uint64_t el : eps_leaf) {
        for (const std::uint64_t ei : eps_internal) {
            RunReport report;
            report.config = {options.dataset, ei,           el, options.threshold.delta, options.seed,
                             options.workload, options.reps, options.constants};
            Stopwatch sw;
            PgmIndex index = PgmIndex::build(keys, ei, el, options.threshold);
            report.metrics.build_ms = sw.elapsed_ns() / 1e6;
            const IndexStats stats = stats_of(index, options.seg_bytes);
            report.metrics.height = stats.height;
            report.metrics.leaf_segments = stats.leaf_segments;
            report.metrics.internal_segments = stats.internal_segments;
            report.metrics.size_bytes = stats.size_bytes;
            cells.push_back({std::move(index), std::move(report), {}, {}, {}, {}, {}});
        }
    }

    // Repetitions run round-robin over the cells so that slow drifts of the
    // host affect every cell alike.
    const std::vector<Key> sample = split_sample(workload);
    const std::size_t reps = std::max<std::size_t>(options.reps, 1);
    for (std::size_t r = 0; r < reps; ++r) {
        for (Cell& c : cells) {
            sample_lookups<false>(c.index, workload, c.pass_means, &c.per_query);
            sample_split(c.index, sample, c.internal, c.total);
            if (options.compare_branchy) {
                sample_lookups<true>(c.index, workload, c.branchy, nullptr);
            }
        }
    }

    std::vector<RunReport> reports;
    reports.reserve(cells.size());
    for (Cell& c : cells) {
        RunMetrics& m = c.report.metrics;
        const LookupTiming t = summarize(c.pass_means, std::move(c.per_query));
        m.mean_ns = t.mean_ns;
        m.median_ns = t.median_ns;
        m.p99_ns = t.p99_ns;
        const PhaseSplit split = summarize_split(c.internal, c.total);
        m.internal_ns = split.internal_ns;
        m.last_mile_ns = split.last_mile_ns;
        if (options.compare_branchy) {
            m.branchy_mean_ns = median(c.branchy);
        }
        reports.push_back(std::move(c.report));
    }
    return reports;
}

std::size_t estimated_peak_bytes(std::size_t n) {
    // Key array, a sorted copy during ingestion, and a leaf level at the
    // smallest error bound (one 40-byte segment plus start key per 3 keys).
    return n * 8 * 2 + n / 3 * 40;
}

std::optional<std::size_t> available_memory_bytes() {
    std::ifstream in("/proc/meminfo");
    std::string name;
    std::size_t value = 0;
    std::string unit;
    while (in >> name >> value >> unit) {
        if (name == "MemAvailable:") {
            return value * 1024;
        }
    }
    return std::nullopt;
}

void check_memory(std::size_t n) {
    const std::size_t need = estimated_peak_bytes(n);
    const auto have = available_memory_bytes();
    if (have && need > *have) {
        std::ostringstream s;
        s << "refusing " << n << " keys: needs about " << need / (1u << 20) << " MiB, " << *have / (1u << 20)
          << " MiB available";
        throw std::runtime_error(s.str());
    }
}

namespace {

/// Quotes a field when it holds a separator, quote or newline.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string q = "\"";
    for (const char ch : s) {
        q += ch;
        if (ch == '"') {
            q += '"';
        }
    }
    return q + '"';
}

} // namespace

void write_csv(std::ostream& out, std::span<const RunReport> reports) {
    out << "dataset,eps_internal,eps_leaf,delta,seed,workload,reps,mean_ns,median_ns,p99_ns,build_ms,height,"
           "leaf_segments,internal_segments,size_bytes,internal_ns,last_mile_ns,branchy_mean_ns\n";
    for (const RunReport& r : reports) {
        const RunConfig& c = r.config;
        const RunMetrics& m = r.metrics;
        out << csv_field(c.dataset) << ',' << c.eps_internal << ',' << c.eps_leaf << ',' << c.delta << ',' << c.seed << ','
            << csv_field(c.workload) << ',' << c.reps << ',' << m.mean_ns << ',' << m.median_ns << ',' << m.p99_ns << ','
            << m.build_ms << ',' << m.height << ',' << m.leaf_segments << ',' << m.internal_segments << ','
            << m.size_bytes << ',' << m.internal_ns << ',' << m.last_mile_ns << ',' << m.branchy_mean_ns << '\n';
    }
}

void write_json(std::ostream& out, std::span<const RunReport> reports) {
    nlohmann::json runs = nlohmann::json::array();
    for (const RunReport& r : reports) {
        const RunConfig& c = r.config;
        const RunMetrics& m = r.metrics;
        nlohmann::json config = {{"dataset", c.dataset}, {"eps_internal", c.eps_internal},
                                 {"eps_leaf", c.eps_leaf}, {"delta", c.delta},
                                 {"seed", c.seed},         {"workload", c.workload},
                                 {"reps", c.reps}};
        config["constants"] = c.constants ? constants_to_json(*c.constants) : nlohmann::json(nullptr);
        runs.push_back({{"config", config},
                        {"metrics",
                         {{"mean_ns", m.mean_ns},
                          {"median_ns", m.median_ns},
                          {"p99_ns", m.p99_ns},
                          {"build_ms", m.build_ms},
                          {"height", m.height},
                          {"leaf_segments", m.leaf_segments},
                          {"internal_segments", m.internal_segments},
                          {"size_bytes", m.size_bytes},
                          {"internal_ns", m.internal_ns},
                          {"last_mile_ns", m.last_mile_ns},
                          {"branchy_mean_ns", m.branchy_mean_ns}}}});
    }
    out << nlohmann::json{{"schema", kReportSchema}, {"runs", runs}}.dump(2) << '\n';
}

std::vector<RunReport> read_json(std::istream& in) {
    std::vector<RunReport> reports;
    try {
        const nlohmann::json doc = nlohmann::json::parse(in);
        if (doc.at("schema").get<std::string>() != kReportSchema) {
            throw FormatError("unsupported report schema " + doc.at("schema").dump());
        }
        for (const auto& run : doc.at("runs")) {
            RunReport r;
            const auto& c = run.at("config");
            r.config.dataset = c.at("dataset").get<std::string>();
            r.config.eps_internal = c.at("eps_internal").get<std::uint64_t>();
            r.config.eps_leaf = c.at("eps_leaf").get<std::uint64_t>();
            r.config.delta = c.at("delta").get<std::size_t>();
            r.config.seed = c.at("seed").get<std::uint64_t>();
            r.config.workload = c.at("workload").get<std::string>();
            r.config.reps = c.at("reps").get<std::size_t>();
            if (!c.at("constants").is_null()) {
                r.config.constants = constants_from_json(c.at("constants"));
            }
            const auto& m = run.at("metrics");
            r.metrics.mean_ns = m.at("mean_ns").get<double>();
            r.metrics.median_ns = m.at("median_ns").get<double>();
            r.metrics.p99_ns = m.at("p99_ns").get<double>();
            r.metrics.build_ms = m.at("build_ms").get<double>();
            r.metrics.height = m.at("height").get<std::size_t>();
            r.metrics.leaf_segments = m.at("leaf_segments").get<std::size_t>();
            r.metrics.internal_segments = m.at("internal_segments").get<std::size_t>();
            r.metrics.size_bytes = m.at("size_bytes").get<std::size_t>();
            r.metrics.internal_ns = m.at("internal_ns").get<double>();
            r.metrics.last_mile_ns = m.at("last_mile_ns").get<double>();
            r.metrics.branchy_mean_ns = m.at("branchy_mean_ns").get<double>();
            reports.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed report JSON: ") + e.what());
    }
    return reports;
}

} // namespace pgmpp
