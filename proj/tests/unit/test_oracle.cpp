#include <doctest.h>

#include <algorithm>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "pgmpp/data.hpp"
#include "pgmpp/index.hpp"
#include "pgmpp/oracle.hpp"

using namespace pgmpp;

namespace {

std::vector<Point> points_of(const std::vector<Key>& keys) {
    std::vector<Point> pts;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        pts.push_back({keys[i], static_cast<std::int64_t>(i)});
    }
    return pts;
}

/// Brute-force feasibility over a dense grid of candidate lines through
/// pairs of shifted points; exact for the small instances used here.
bool feasible_by_pairs(const std::vector<Point>& pts, std::int64_t eps) {
    if (pts.size() <= 2) {
        return true;
    }
    const auto fits = [&](double a, double x0, double y0) {
        for (const Point& p : pts) {
            const double y = a * (static_cast<double>(p.key) - x0) + y0;
            if (std::abs(y - static_cast<double>(p.rank)) > static_cast<double>(eps) + 1e-9) {
                return false;
            }
        }
        return true;
    };
    // An optimal line can be taken through two points shifted by +-eps.
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            for (int si : {-1, 1}) {
                for (int sj : {-1, 1}) {
                    const double yi = static_cast<double>(pts[i].rank + si * eps);
                    const double yj = static_cast<double>(pts[j].rank + sj * eps);
                    const double a = (yj - yi) / static_cast<double>(pts[j].key - pts[i].key);
                    if (fits(a, static_cast<double>(pts[i].key), yi)) {
                        return true;
                    }
                }
            }
        }
    }
    return false;
}

} // namespace

TEST_CASE("exact_rank examples") {
    const std::vector<Key> keys{1, 3, 5};
    CHECK(oracle::exact_rank(keys, 4) == 2);
    CHECK(oracle::exact_rank(keys, 0) == 0);
    CHECK(oracle::exact_rank(keys, 5) == 2);
    CHECK(oracle::exact_rank(keys, 6) == 3);
    const std::vector<Key> empty;
    CHECK(oracle::exact_rank(empty, 123) == 0);

    std::mt19937_64 rng(1);
    auto big = generate_synthetic(UniformDist{0, 1'000'000}, 5000, 2).keys;
    for (int i = 0; i < 100'000; ++i) {
        const Key q = rng() % 1'000'010;
        REQUIRE(oracle::exact_rank(big, q) ==
                static_cast<std::size_t>(std::lower_bound(big.begin(), big.end(), q) - big.begin()));
    }
}

TEST_CASE("span feasibility") {
    std::vector<Point> line;
    for (int i = 0; i < 20; ++i) {
        line.push_back({static_cast<Key>(5 * i), i});
    }
    CHECK(oracle::span_feasible(line, 1));

    // Consecutive ranks: 2 eps + 2 points always fit, 2 eps + 3 need not.
    const std::vector<Point> stair{{1001, 0}, {1002, 1}, {1003, 2}, {1004, 3}, {2005, 4}};
    CHECK_FALSE(oracle::span_feasible(stair, 1));
    CHECK_FALSE(feasible_by_pairs(stair, 1));
    CHECK(oracle::span_feasible(std::span<const Point>(stair).first(4), 1));
    CHECK(oracle::span_feasible(std::span<const Point>(stair).last(4), 1));
    CHECK(feasible_by_pairs(std::vector<Point>(stair.begin() + 1, stair.end()), 1));

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 3000; ++trial) {
        const std::size_t n = 2 + rng() % 10;
        std::vector<Key> keys;
        Key k = rng() % 10;
        for (std::size_t i = 0; i < n; ++i) {
            k += 1 + rng() % 20;
            keys.push_back(k);
        }
        const auto pts = points_of(keys);
        const std::int64_t e = 1 + static_cast<std::int64_t>(rng() % 3);
        REQUIRE(oracle::span_feasible(pts, static_cast<std::uint64_t>(e)) == feasible_by_pairs(pts, e));
    }
}

TEST_CASE("optimal_pla_count examples") {
    std::vector<Point> line;
    for (int i = 0; i < 300; ++i) {
        line.push_back({static_cast<Key>(7 * i + 3), i});
    }
    for (std::uint64_t eps : {1u, 2u, 8u}) {
        CHECK(oracle::optimal_pla_count(line, eps) == 1);
    }

    // 2 eps + 1 points on a flat line reach at most eps + 1 above it one
    // step later, so a final point at 2 eps + 2 needs a second segment.
    for (std::uint64_t eps : {1u, 2u, 4u}) {
        std::vector<Point> pts;
        for (std::size_t i = 0; i <= 2 * eps; ++i) {
            pts.push_back({static_cast<Key>(i), 0});
        }
        pts.push_back({static_cast<Key>(2 * eps + 1), static_cast<std::int64_t>(2 * eps + 2)});
        REQUIRE(pts.size() == 2 * eps + 2);
        CHECK_FALSE(oracle::span_feasible(pts, eps));
        CHECK(oracle::optimal_pla_count(pts, eps) == 2);
        pts.back().rank -= 1;
        CHECK(oracle::span_feasible(pts, eps));
    }

    // Residuals alternating +-(eps + 1) around y = x at eps = 1.
    const std::vector<Point> zigzag{{0, 2}, {1, -1}, {2, 4}, {3, 1}};
    CHECK_FALSE(oracle::span_feasible(zigzag, 1));
    CHECK(oracle::optimal_pla_count(zigzag, 1) == 2);

    const std::vector<Point> none;
    CHECK_THROWS_AS(oracle::optimal_pla_count(none, 1), std::invalid_argument);
    CHECK_THROWS_AS(oracle::optimal_pla_count(line, 0), std::invalid_argument);
    std::vector<Point> huge;
    for (std::size_t i = 0; i <= oracle::kMaxDpPoints; ++i) {
        huge.push_back({static_cast<Key>(i), static_cast<std::int64_t>(i)});
    }
    CHECK_THROWS_AS(oracle::optimal_pla_count(huge, 1), std::invalid_argument);
}

TEST_CASE("coverage of a single segment index") {
    for (std::uint64_t eps : {1u, 8u, 32u}) {
        std::vector<Key> keys;
        for (std::size_t i = 0; i < 2 * eps + 1; ++i) {
            keys.push_back(i * i + 1);
        }
        const PgmIndex idx = PgmIndex::build(std::span<const Key>(keys), eps, eps);
        const auto report = oracle::measure_coverage(idx);
        REQUIRE(report.per_level.size() == 1);
        CHECK(report.per_level[0].segments == 1);
        CHECK(report.per_level[0].min == 2 * eps + 1);
        CHECK(report.per_level[0].mean == doctest::Approx(2.0 * eps + 1));
    }
}

TEST_CASE("coverage sums and growth on uniform builds") {
    // Growth is checked where the level below is large; near the root the
    // coverage is capped by the few entries left to cover.
    const auto keys = std::make_shared<const std::vector<Key>>(
        generate_synthetic(UniformDist{0, 1ull << 40}, 1'000'000, 4).keys);
    for (std::uint64_t eps : {2u, 4u, 8u}) {
        const PgmIndex idx = PgmIndex::build(keys, eps, eps);
        const auto report = oracle::measure_coverage(idx);
        REQUIRE(report.per_level.size() == idx.levels().size());
        CHECK(report.per_level[0].total == keys->size());
        REQUIRE(report.per_level.size() >= 2);
        CHECK(report.per_level[1].mean >= report.per_level[0].mean);
        for (std::size_t l = 0; l < report.per_level.size(); ++l) {
            const auto& c = report.per_level[l];
            CHECK(c.level == l);
            CHECK(c.segments == idx.levels()[l].segments.size());
            const std::size_t below = l == 0 ? keys->size() : idx.levels()[l - 1].segments.size();
            CHECK(c.total == below);
            CHECK(c.mean == doctest::Approx(static_cast<double>(below) / static_cast<double>(c.segments)));
            if (l > 0 && l + 1 < report.per_level.size()) {
                CHECK(c.mean >= report.per_level[0].mean);
            }
        }
    }
}

TEST_CASE("exhaustive tuning enumerates every candidate") {
    const auto keys = std::make_shared<const std::vector<Key>>(
        generate_synthetic(UniformDist{0, 1'000'000'000}, 200'000, 5).keys);
    const Workload w = generate_workload(*keys, WorkloadKind::Uniform, 2000, 6);
    const std::vector<std::uint64_t> candidates{4, 8, 16, 32, 64, 128, 256, 512, 1024};
    const auto result = oracle::exhaustive_tune(keys, 16, candidates, w.queries, 3);
    REQUIRE(result.measurements.size() == 9);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        CHECK(result.measurements[i].eps_internal == candidates[i]);
        CHECK(result.measurements[i].mean_ns > 0.0);
    }
    const auto best = std::min_element(result.measurements.begin(), result.measurements.end(),
                                       [](const auto& a, const auto& b) { return a.mean_ns < b.mean_ns; });
    CHECK(result.best_eps_internal == best->eps_internal);
    for (const auto& m : result.measurements) {
        CHECK(best->mean_ns <= m.mean_ns);
    }
}
