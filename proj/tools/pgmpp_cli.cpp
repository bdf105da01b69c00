// pgmpp command-line front end: dataset generation, calibration, builds,
// sweeps, estimator and tuner evaluation, and report conversion.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pgmpp/bench.hpp"
#include "pgmpp/cost.hpp"
#include "pgmpp/data.hpp"
#include "pgmpp/errors.hpp"
#include "pgmpp/index.hpp"
#include "pgmpp/oracle.hpp"
#include "pgmpp/search.hpp"
#include "pgmpp/stats.hpp"
#include "pgmpp/timing.hpp"

using namespace pgmpp;

namespace {

using KeysPtr = std::shared_ptr<const std::vector<Key>>;

KeysPtr load_keys(const std::string& path) {
    KeySet ks = read_keyset(path);
    if (ks.duplicates_removed > 0) {
        std::cerr << "note: removed " << ks.duplicates_removed << " duplicate keys\n";
    }
    return std::make_shared<const std::vector<Key>>(std::move(ks.keys));
}

/// Constants from --calibration, else $PGMPP_CALIBRATION, else a fresh
/// calibration (saved to the given path when one was named).
CostConstants resolve_constants(const std::string& flag) {
    std::string path = flag;
    if (path.empty()) {
        if (const char* env = std::getenv(kCalibrationEnv)) {
            path = env;
        }
    }
    if (!path.empty() && std::filesystem::exists(path)) {
        return load_constants(path);
    }
    std::cerr << "calibrating host constants...\n";
    const CostConstants c = calibrate_constants();
    if (!path.empty()) {
        save_constants(path, c);
        std::cerr << "saved calibration to " << path << "\n";
    }
    return c;
}

WorkloadKind parse_workload(const std::string& name) {
    if (name == "uniform") {
        return WorkloadKind::Uniform;
    }
    if (name == "zipfian" || name == "zipf") {
        return WorkloadKind::Zipfian;
    }
    throw std::invalid_argument("unknown workload '" + name + "' (uniform or zipfian)");
}

std::vector<Key> make_queries(std::span<const Key> keys, const std::string& workload, const std::string& file,
                              std::size_t size, std::uint64_t seed) {
    if (!file.empty()) {
        return read_raw_keys(file);
    }
    return generate_workload(keys, parse_workload(workload), size, seed).queries;
}

void print_stats(const IndexStats& s) {
    std::cout << "height " << s.height << "\nleaf_segments " << s.leaf_segments << "\ninternal_segments "
              << s.internal_segments << "\nsize_bytes " << s.size_bytes << "\n";
}

template <typename F>
double median_ns(std::size_t reps, F&& f) {
    std::vector<double> ns;
    for (std::size_t r = 0; r < reps; ++r) {
        Stopwatch sw;
        f();
        ns.push_back(sw.elapsed_ns());
    }
    return median(ns);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PGM-Index learned index with cost-model tuning"};
    app.require_subcommand(1);

    // Flags shared by several subcommands.
    std::string keys_path;
    std::string calibration;
    std::uint64_t eps_internal = 8;
    std::uint64_t eps_leaf = 32;
    std::size_t delta = 0;
    std::uint64_t seed = 42;
    std::string workload = "uniform";
    std::size_t workload_size = kDefaultWorkloadSize;
    std::string queries_path;
    std::size_t reps = 9;

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic key file");
    std::string dist = "uniform";
    std::size_t count = 1'000'000;
    Key lo = 0;
    Key hi = 1'000'000'000'000ull;
    double mu = 0.0;
    double sd = 1.0;
    double contaminate = 0.0;
    std::size_t bursts = 4;
    std::uint64_t factor = 1'000'000;
    std::string out_path;
    gen->add_option("--dist", dist, "uniform, normal or lognormal")->capture_default_str();
    gen->add_option("-n,--count", count, "Number of distinct keys")->capture_default_str();
    gen->add_option("--lo", lo, "Uniform lower bound")->capture_default_str();
    gen->add_option("--hi", hi, "Uniform upper bound")->capture_default_str();
    gen->add_option("--mu", mu, "Normal/log-normal location")->capture_default_str();
    gen->add_option("--sd", sd, "Normal/log-normal scale")->capture_default_str();
    gen->add_option("--seed", seed)->capture_default_str();
    gen->add_option("--contaminate", contaminate, "Fraction of gaps to stretch")->capture_default_str();
    gen->add_option("--bursts", bursts, "Number of stretched runs")->capture_default_str();
    gen->add_option("--factor", factor, "Stretch factor")->capture_default_str();
    gen->add_option("-o,--out", out_path, "Output key file")->required();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Sort and deduplicate a key file");
    std::string in_path;
    ingest->add_option("-i,--in", in_path, "Input key file")->required()->check(CLI::ExistingFile);
    ingest->add_option("-o,--out", out_path, "Output key file")->required();

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Measure host latency constants");
    calibrate->add_option("-o,--out", out_path, "Calibration file (default: $PGMPP_CALIBRATION)");

    // build
    auto* build = app.add_subcommand("build", "Build an index and print its structure");
    build->add_option("-k,--keys", keys_path, "Key file")->required()->check(CLI::ExistingFile);
    build->add_option("--epsilon-internal", eps_internal)->capture_default_str();
    build->add_option("--epsilon-leaf", eps_leaf)->capture_default_str();
    build->add_option("--delta", delta, "Hybrid threshold (default: calibrated)");
    build->add_option("--calibration", calibration, "Calibration file");
    build->add_option("-o,--out", out_path, "Write the model blob here");

    // lookup
    auto* lookup = app.add_subcommand("lookup", "Answer lower-bound queries");
    std::string model_path;
    std::vector<Key> lookup_keys;
    lookup->add_option("-k,--keys", keys_path, "Key file")->required()->check(CLI::ExistingFile);
    lookup->add_option("-m,--model", model_path, "Model blob from build")->check(CLI::ExistingFile);
    lookup->add_option("--epsilon-internal", eps_internal)->capture_default_str();
    lookup->add_option("--epsilon-leaf", eps_leaf)->capture_default_str();
    lookup->add_option("--delta", delta, "Hybrid threshold");
    lookup->add_option("-q,--query", lookup_keys, "Query keys");
    lookup->add_option("--queries", queries_path, "Query key file")->check(CLI::ExistingFile);
    bool verify = false;
    lookup->add_flag("--verify", verify, "Check every answer against a plain binary search");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Time every (eps_internal, eps_leaf) grid cell");
    std::vector<std::uint64_t> grid(kDefaultCandidates.begin(), kDefaultCandidates.end());
    std::string csv_path;
    std::string json_path;
    bool compare_branchy = false;
    sweep_cmd->add_option("-k,--keys", keys_path, "Key file")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--grid", grid, "Error bounds for both axes")->capture_default_str();
    sweep_cmd->add_option("--workload", workload, "uniform or zipfian")->capture_default_str();
    sweep_cmd->add_option("--workload-size", workload_size)->capture_default_str();
    sweep_cmd->add_option("--queries", queries_path, "Query key file instead of a generated workload");
    sweep_cmd->add_option("--reps", reps)->capture_default_str();
    sweep_cmd->add_option("--seed", seed)->capture_default_str();
    sweep_cmd->add_option("--calibration", calibration, "Calibration file");
    sweep_cmd->add_option("--csv", csv_path, "Write CSV here");
    sweep_cmd->add_option("--json", json_path, "Write JSON here");
    sweep_cmd->add_flag("--compare-branchy", compare_branchy, "Also time branchy search on each cell");

    // estimate
    auto* estimate = app.add_subcommand("estimate", "Leaf-segment estimators against true counts");
    std::string kind = "all";
    std::vector<std::uint64_t> epsilons(kDefaultCandidates.begin(), kDefaultCandidates.end());
    bool truth = false;
    estimate->add_option("-k,--keys", keys_path, "Key file")->required()->check(CLI::ExistingFile);
    estimate->add_option("--kind", kind, "simple, clip, adap or all")->capture_default_str();
    estimate->add_option("--epsilons", epsilons)->capture_default_str();
    estimate->add_flag("--truth", truth, "Fit each eps to report the true count");

    // tune
    auto* tune = app.add_subcommand("tune", "Pick (eps_internal, eps_leaf) for a space budget");
    std::uint64_t budget = 0;
    tune->add_option("-k,--keys", keys_path, "Key file")->required()->check(CLI::ExistingFile);
    tune->add_option("--budget-bytes", budget, "Space budget for all segments")->required();
    tune->add_option("--calibration", calibration, "Calibration file");

    // coverage
    auto* coverage = app.add_subcommand("coverage", "Per-level coverage of a build");
    coverage->add_option("-k,--keys", keys_path, "Key file")->required()->check(CLI::ExistingFile);
    coverage->add_option("--epsilon-internal", eps_internal)->capture_default_str();
    coverage->add_option("--epsilon-leaf", eps_leaf)->capture_default_str();

    // search-bench
    auto* search_bench = app.add_subcommand("search-bench", "Linear, branchless and branchy search on cached arrays");
    std::vector<std::size_t> sizes{8, 16, 32, 64, 128, 256, 512, 1024};
    search_bench->add_option("--sizes", sizes)->capture_default_str();
    search_bench->add_option("--reps", reps)->capture_default_str();
    search_bench->add_option("--seed", seed)->capture_default_str();

    // report
    auto* report = app.add_subcommand("report", "Convert a JSON report");
    std::string format = "csv";
    report->add_option("-i,--in", in_path, "JSON report")->required()->check(CLI::ExistingFile);
    report->add_option("--format", format, "csv or json")->capture_default_str();
    report->add_option("-o,--out", out_path, "Output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            Distribution d;
            if (dist == "uniform") {
                d = UniformDist{lo, hi};
            } else if (dist == "normal") {
                d = NormalDist{mu, sd};
            } else if (dist == "lognormal") {
                d = LogNormalDist{mu, sd};
            } else {
                throw std::invalid_argument("unknown distribution '" + dist + "'");
            }
            check_memory(count);
            KeySet ks = generate_synthetic(d, count, seed);
            if (contaminate > 0.0) {
                ks.keys = stretch_gap_bursts(ks.keys, contaminate, bursts, factor);
            }
            write_keyset(out_path, ks.keys);
            std::cout << "wrote " << ks.keys.size() << " keys (" << ks.source << ") to " << out_path << "\n";
        } else if (ingest->parsed()) {
            const KeySet ks = read_keyset(in_path);
            write_keyset(out_path, ks.keys);
            std::cout << "kept " << ks.keys.size() << " keys, removed " << ks.duplicates_removed << " duplicates\n";
        } else if (calibrate->parsed()) {
            const CostConstants c = calibrate_constants();
            std::string path = out_path;
            if (path.empty()) {
                if (const char* env = std::getenv(kCalibrationEnv)) {
                    path = env;
                }
            }
            if (!path.empty()) {
                save_constants(path, c);
            }
            std::cout << format_constants(c);
        } else if (build->parsed()) {
            const KeysPtr keys = load_keys(keys_path);
            const SearchThreshold t{delta > 0 ? delta : resolve_constants(calibration).delta};
            Stopwatch sw;
            const PgmIndex idx = PgmIndex::build(keys, eps_internal, eps_leaf, t);
            std::cout << "build_ms " << sw.elapsed_ns() / 1e6 << "\nentry_level " << idx.entry_level() << "\n";
            print_stats(stats_of(idx));
            if (!out_path.empty()) {
                std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
                idx.save(out);
                if (!out.flush()) {
                    throw std::runtime_error("failed writing " + out_path);
                }
            }
        } else if (lookup->parsed()) {
            const KeysPtr keys = load_keys(keys_path);
            PgmIndex idx;
            if (!model_path.empty()) {
                std::ifstream in(model_path, std::ios::binary);
                idx = PgmIndex::load(in, keys);
            } else {
                idx = PgmIndex::build(keys, eps_internal, eps_leaf, SearchThreshold{delta > 0 ? delta : 8});
            }
            std::vector<Key> queries = lookup_keys;
            if (!queries_path.empty()) {
                const auto more = read_raw_keys(queries_path);
                queries.insert(queries.end(), more.begin(), more.end());
            }
            std::size_t wrong = 0;
            for (const Key q : queries) {
                const std::size_t r = idx.lookup(q);
                if (verify) {
                    wrong += r != oracle::exact_rank(*keys, q);
                }
                if (queries.size() <= 100) {
                    std::cout << q << " " << r << "\n";
                }
            }
            if (verify) {
                std::cout << "verified " << queries.size() << " queries, " << wrong << " mismatches\n";
                return wrong == 0 ? 0 : 1;
            }
        } else if (sweep_cmd->parsed()) {
            const KeysPtr keys = load_keys(keys_path);
            check_memory(keys->size());
            const CostConstants c = resolve_constants(calibration);
            const auto queries = make_queries(*keys, workload, queries_path, workload_size, seed);
            RunOptions opts;
            opts.dataset = keys_path;
            opts.workload = queries_path.empty() ? workload : queries_path;
            opts.seed = seed;
            opts.reps = reps;
            opts.threshold = SearchThreshold{c.delta};
            opts.constants = c;
            opts.compare_branchy = compare_branchy;
            const auto reports = sweep(keys, grid, grid, queries, opts);
            if (!csv_path.empty()) {
                std::ofstream out(csv_path);
                write_csv(out, reports);
            }
            if (!json_path.empty()) {
                std::ofstream out(json_path);
                write_json(out, reports);
            }
            if (csv_path.empty() && json_path.empty()) {
                write_csv(std::cout, reports);
            }
        } else if (estimate->parsed()) {
            const KeysPtr keys = load_keys(keys_path);
            std::vector<EstimatorKind> kinds;
            if (kind == "all") {
                kinds = {EstimatorKind::Simple, EstimatorKind::Clip, EstimatorKind::Adap};
            } else {
                kinds = {parse_estimator_kind(kind)};
            }
            std::vector<LeafEstimator> ests;
            for (const EstimatorKind k : kinds) {
                ests.emplace_back(k, *keys);
                ests.back().calibrate(*keys);
            }
            std::cout << "eps";
            for (const auto& e : ests) {
                std::cout << "," << to_string(e.kind());
            }
            std::cout << (truth ? ",true\n" : "\n");
            for (const std::uint64_t eps : epsilons) {
                std::cout << eps;
                for (const auto& e : ests) {
                    std::cout << "," << e.estimate(eps);
                }
                if (truth) {
                    std::cout << "," << fit_epsilon_pla(*keys, eps).segments.size();
                }
                std::cout << "\n";
            }
        } else if (tune->parsed()) {
            const KeysPtr keys = load_keys(keys_path);
            const CostConstants c = resolve_constants(calibration);
            LeafEstimator est(EstimatorKind::Adap, *keys);
            est.calibrate(*keys);
            Stopwatch sw;
            const TuningResult r = tune_parameters(est, TuningBudget{budget}, c);
            const double ns = sw.elapsed_ns();
            std::cout << "eps_internal " << r.eps_internal << "\neps_leaf " << r.eps_leaf << "\npredicted_ns "
                      << r.predicted_cost_ns << "\npredicted_bytes " << r.predicted_bytes << "\ntuner_us "
                      << ns / 1e3 << "\n";
        } else if (coverage->parsed()) {
            const KeysPtr keys = load_keys(keys_path);
            const PgmIndex idx = PgmIndex::build(keys, eps_internal, eps_leaf);
            std::cout << "level,segments,mean,min,total\n";
            for (const auto& c : oracle::measure_coverage(idx).per_level) {
                std::cout << c.level << "," << c.segments << "," << c.mean << "," << c.min << "," << c.total << "\n";
            }
        } else if (search_bench->parsed()) {
            std::mt19937_64 rng(seed);
            std::cout << "size,linear_ns,branchless_ns,branchy_ns\n";
            for (const std::size_t n : sizes) {
                std::vector<Key> keys(n);
                Key k = 0;
                for (Key& x : keys) {
                    k += 1 + rng() % 1000;
                    x = k;
                }
                std::vector<Key> queries(4096);
                for (Key& q : queries) {
                    q = rng() % (k + 1);
                }
                const auto per_query = [&](auto search) {
                    std::size_t sink = 0;
                    const double ns = median_ns(reps, [&] {
                        for (const Key q : queries) {
                            sink += search(q);
                        }
                    });
                    do_not_optimize(sink);
                    return ns / static_cast<double>(queries.size());
                };
                const double lin = per_query([&](Key q) { return linear_lower_bound(keys, q); });
                const double bl = per_query([&](Key q) { return branchless_lower_bound(keys, q); });
                const double by = per_query([&](Key q) {
                    return static_cast<std::size_t>(std::lower_bound(keys.begin(), keys.end(), q) - keys.begin());
                });
                std::cout << n << "," << lin << "," << bl << "," << by << "\n";
            }
        } else if (report->parsed()) {
            std::ifstream in(in_path);
            const auto reports = read_json(in);
            std::ofstream file;
            if (!out_path.empty()) {
                file.open(out_path);
            }
            std::ostream& out = out_path.empty() ? std::cout : file;
            if (format == "csv") {
                write_csv(out, reports);
            } else if (format == "json") {
                write_json(out, reports);
            } else {
                throw std::invalid_argument("unknown format '" + format + "' (csv or json)");
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
