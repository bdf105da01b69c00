#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "pgmpp/cost.hpp"
#include "pgmpp/data.hpp"
#include "pgmpp/errors.hpp"
#include "pgmpp/timing.hpp"

using namespace pgmpp;

namespace {

CostConstants sample_constants() {
    CostConstants c;
    c.c_miss = 90.0;
    c.c_hit = 2.0;
    c.c_segment = 4.0;
    c.c_linear_fixed = 1.5;
    c.c_linear_per_elem = 0.5;
    c.delta = 16;
    return c;
}

/// Estimator over one partition of `count` gaps with hardness `h`.
LeafEstimator single_partition(double count, double h, double scale) {
    GapPartition p;
    p.stats.count = static_cast<std::size_t>(count);
    p.stats.mean = 1.0;
    p.stats.variance = h;
    LeafEstimator est(EstimatorKind::Adap, {p});
    est.set_scale(scale);
    return est;
}

double ceil_log2(double x) { return std::ceil(std::log2(x)); }

} // namespace

TEST_CASE("constants validate and round trip as text") {
    const CostConstants c = sample_constants();
    CHECK_NOTHROW(validate(c));
    const CostConstants back = parse_constants(format_constants(c));
    CHECK(back.c_miss == c.c_miss);
    CHECK(back.c_hit == c.c_hit);
    CHECK(back.c_segment == c.c_segment);
    CHECK(back.c_linear_fixed == c.c_linear_fixed);
    CHECK(back.c_linear_per_elem == c.c_linear_per_elem);
    CHECK(back.delta == c.delta);
    CHECK(c.c_linear(10) == doctest::Approx(6.5));

    const auto path = std::filesystem::temp_directory_path() / "pgmpp_constants_test.txt";
    save_constants(path, c);
    CHECK(load_constants(path).c_miss == c.c_miss);
    std::filesystem::remove(path);

    CostConstants bad = c;
    bad.c_hit = c.c_miss;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = c;
    bad.c_segment = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = c;
    bad.delta = 0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("constant parsing errors") {
    const std::string good = format_constants(sample_constants());
    CHECK_THROWS_AS(parse_constants(good + "c_extra=1\n"), FormatError);
    CHECK_THROWS_AS(parse_constants("c_miss=90\n"), FormatError);
    std::string bad_number = good;
    bad_number.replace(bad_number.find("c_hit=") + 6, 1, "x");
    CHECK_THROWS_AS(parse_constants(bad_number), FormatError);
    CHECK_THROWS_AS(parse_constants("garbage line\n" + good), FormatError);
    CHECK_NOTHROW(parse_constants("# cached\n" + good));
}

TEST_CASE("space cost") {
    // 10224 * 24 bytes for an estimate of exactly 10224 segments.
    const LeafEstimator est = single_partition(10'224, 1.0, 1.0);
    CHECK(est.estimate(1) == doctest::Approx(10'224.0));
    CHECK(space_cost(est, 1) == doctest::Approx(245'376.0));
    CHECK(space_cost(est, 1, 16) == doctest::Approx(10'224.0 * 16));
    for (std::uint64_t eps = 1; eps <= 512; eps *= 2) {
        CHECK(space_cost(est, eps) / space_cost(est, 2 * eps) == doctest::Approx(4.0));
    }
}

TEST_CASE("time cost composition") {
    const CostConstants c = sample_constants();
    SUBCASE("one level costs only the last mile") {
        const LeafEstimator est = single_partition(100, 1.0, 1.0);
        for (std::uint64_t eps_l : kDefaultCandidates) {
            // 100 / eps^2 <= 1 for every candidate eps >= 16.
            if (eps_l < 16) {
                continue;
            }
            const TimeCost t = time_cost_breakdown(c, est, 8, eps_l);
            CHECK(t.height == 1);
            CHECK(t.internal == 0.0);
            CHECK(t.total() == doctest::Approx(ceil_log2(2.0 * eps_l + 1) * c.c_miss));
        }
    }
    SUBCASE("matches the formula evaluated by hand") {
        const LeafEstimator est = single_partition(1e8, 1.0, 4.0);
        for (std::uint64_t eps_i : kDefaultCandidates) {
            for (std::uint64_t eps_l : kDefaultCandidates) {
                const auto h = estimate_height(est, eps_i, eps_l);
                REQUIRE(h.has_value());
                const double range = 2.0 * eps_i + 1;
                const double search =
                    range <= c.delta ? c.c_linear_fixed + c.c_linear_per_elem * range : ceil_log2(range) * c.c_hit;
                const double expected = ceil_log2(2.0 * eps_l + 1) * c.c_miss +
                                        static_cast<double>(*h - 1) * (search + c.c_segment);
                CHECK(time_cost(c, est, eps_i, eps_l) == doctest::Approx(expected));
                CHECK(internal_search_cost(c, eps_i) == doctest::Approx(search));
            }
        }
    }
    SUBCASE("falls back to the coverage floor when G <= 1") {
        // Hardness 100 makes G = eps_i^2 / 100 <= 1 at eps_i = 4 and 8.
        const LeafEstimator est = single_partition(1e6, 100.0, 1.0);
        const TimeCost t = time_cost_breakdown(c, est, 8, 16);
        CHECK(t.height_fallback);
        const double leaves = est.estimate(16);
        CHECK(t.height == 1 + static_cast<std::size_t>(std::ceil(std::log(leaves) / std::log(17.0))));
        CHECK_FALSE(time_cost_breakdown(c, est, 64, 16).height_fallback);
    }
}

TEST_CASE("time cost is non-decreasing in eps_leaf at fixed height") {
    const CostConstants c = sample_constants();
    const LeafEstimator est = single_partition(1e7, 1.0, 4.0);
    for (std::uint64_t eps_i : kDefaultCandidates) {
        for (std::size_t j = 1; j < kDefaultCandidates.size(); ++j) {
            const TimeCost a = time_cost_breakdown(c, est, eps_i, kDefaultCandidates[j - 1]);
            const TimeCost b = time_cost_breakdown(c, est, eps_i, kDefaultCandidates[j]);
            CHECK(b.last_mile >= a.last_mile);
            if (a.height == b.height) {
                CHECK(b.total() >= a.total());
            }
        }
    }
}

TEST_CASE("cost rises with eps_internal once the height bottoms out") {
    const CostConstants c = sample_constants();
    for (double keys : {1e6, 1e7, 1e9}) {
        const LeafEstimator est = single_partition(keys, 1.0, 0.26);
        for (std::uint64_t eps_l : kDefaultCandidates) {
            std::vector<double> cost;
            std::vector<std::size_t> height;
            for (std::uint64_t eps_i : kDefaultCandidates) {
                const TimeCost t = time_cost_breakdown(c, est, eps_i, eps_l);
                cost.push_back(t.total());
                height.push_back(t.height);
            }
            for (std::size_t i = 1; i < height.size(); ++i) {
                CHECK(height[i] <= height[i - 1]);
            }
            const auto floor = static_cast<std::size_t>(std::find(height.begin(), height.end(), height.back()) -
                                                        height.begin());
            for (std::size_t i = floor + 1; i < cost.size(); ++i) {
                CHECK(cost[i] >= cost[i - 1]);
            }
            if (height.back() > 1) {
                CHECK(cost.back() > cost[floor]);
            }
        }
    }
}

TEST_CASE("leaf tuning from a storage budget") {
    const LeafEstimator est = single_partition(1e6, 1.0, 1.0);
    CHECK(est.hardness_mass() == doctest::Approx(1e6));
    CHECK(tune_leaf(est, {93'750}) == 16);
    CHECK(tune_leaf(est, {4 * 93'750}) == 8);
    // Slightly less than the exact budget rounds up.
    CHECK(tune_leaf(est, {93'749}) == 17);
    // Huge budgets clamp to the smallest admissible bound.
    CHECK(tune_leaf(est, {1'000'000'000}) == kMinLeafEpsilon);
    // A mass of 1e10 needs eps_leaf above 4096 for any budget under 14305 bytes.
    CHECK_THROWS_AS(tune_leaf(single_partition(1e10, 1.0, 1.0), {1000}), BudgetTooSmall);
    CHECK_THROWS_AS(tune_leaf(est, {8}), std::invalid_argument);
}

TEST_CASE("internal tuning picks the cheapest candidate") {
    CostConstants c = sample_constants();
    const LeafEstimator deep = single_partition(1e9, 1.0, 0.26);
    const std::uint64_t chosen = tune_internal(c, deep, 8);
    for (std::uint64_t eps_i : kDefaultCandidates) {
        CHECK(time_cost(c, deep, chosen, 8) <= time_cost(c, deep, eps_i, 8));
    }
    // A single-segment index costs the same for every candidate.
    const LeafEstimator flat = single_partition(10, 1.0, 1.0);
    CHECK(tune_internal(c, flat, 64) == 4);
    const std::vector<std::uint64_t> unsorted{256, 32, 1024};
    CHECK(tune_internal(c, flat, 64, unsorted) == 32);
    CHECK_THROWS_AS(tune_internal(c, flat, 64, std::span<const std::uint64_t>{}), std::invalid_argument);
}

TEST_CASE("tuner is deterministic and fast") {
    const auto keys = generate_synthetic(LogNormalDist{0.0, 1.0}, 500'000, 3).keys;
    LeafEstimator est(EstimatorKind::Adap, keys);
    est.calibrate(keys);
    const CostConstants c = sample_constants();
    const TuningBudget budget{static_cast<std::uint64_t>(std::ceil(space_cost(est, 32)))};
    const TuningResult a = tune_parameters(est, budget, c);
    const TuningResult b = tune_parameters(est, budget, c);
    CHECK(a.eps_internal == b.eps_internal);
    CHECK(a.eps_leaf == b.eps_leaf);
    CHECK(a.predicted_cost_ns == b.predicted_cost_ns);
    CHECK(a.eps_leaf == 32);
    CHECK(a.predicted_bytes <= static_cast<double>(budget.bytes) + 1.0);
    CHECK(std::find(kDefaultCandidates.begin(), kDefaultCandidates.end(), a.eps_internal) != kDefaultCandidates.end());

    std::vector<double> ns;
    for (int i = 0; i < 101; ++i) {
        Stopwatch sw;
        const TuningResult r = tune_parameters(est, budget, c);
        ns.push_back(sw.elapsed_ns());
        do_not_optimize(r.eps_internal);
    }
    CHECK(median(ns) < 1e6);
}

TEST_CASE("host calibration") {
    // Run-to-run repeatability is reported by the acceptance binary; a
    // single run here checks the shape of the constants.
    const CostConstants c = calibrate_constants();
    CHECK(c.c_miss > 10.0 * c.c_hit);
    CHECK(c.c_hit > 0.0);
    CHECK(c.c_segment > 0.0);
    CHECK(c.c_segment < c.c_miss);
    CHECK(c.delta >= 4);
    CHECK(c.delta <= 64);
    CHECK(c.c_linear_per_elem > 0.0);
    CHECK(c.c_linear(64) > c.c_linear(8));
    CHECK(parse_constants(format_constants(c)) == c);
    for (std::size_t j = 1; j < kDefaultCandidates.size(); ++j) {
        CHECK(internal_search_cost(c, kDefaultCandidates[j]) >= internal_search_cost(c, kDefaultCandidates[j - 1]));
    }
}
