#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "pgmpp/errors.hpp"
#include "pgmpp/search.hpp"

using namespace pgmpp;

namespace {

/// Sorted window of `n` keys with deliberate runs of close values.
std::vector<Key> random_window(std::mt19937_64& rng, std::size_t n) {
    std::vector<Key> w(n);
    const Key range = 1 + rng() % (4 * n + 8);
    for (Key& k : w) {
        k = rng() % range;
    }
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
    return w;
}

std::size_t reference_lower_bound(const std::vector<Key>& w, Key key) {
    return static_cast<std::size_t>(std::lower_bound(w.begin(), w.end(), key) - w.begin());
}

std::size_t reference_upper_bound(const std::vector<Key>& w, Key key) {
    return static_cast<std::size_t>(std::upper_bound(w.begin(), w.end(), key) - w.begin());
}

} // namespace

TEST_CASE("linear lower bound examples") {
    const std::vector<Key> empty;
    CHECK(linear_lower_bound(empty, 7) == 0);
    const std::vector<Key> w{1, 3, 5};
    CHECK(linear_lower_bound(w, 3) == 1);
    CHECK(linear_lower_bound(w, 4) == 2);
    CHECK(linear_lower_bound(w, 9) == 3);
    CHECK(linear_upper_bound(w, 3) == 2);
}

TEST_CASE("branchless lower bound examples") {
    const std::vector<Key> w{2, 4, 6, 8};
    CHECK(branchless_lower_bound(w, 6) == 2);
    CHECK(branchless_lower_bound(w, 1) == 0);
    CHECK(branchless_lower_bound(w, 9) == 4);
    CHECK(branchless_upper_bound(w, 6) == 3);
    const std::vector<Key> empty;
    CHECK(branchless_lower_bound(empty, 3) == 0);
    CHECK(branchless_upper_bound(empty, 3) == 0);
}

TEST_CASE("hybrid dispatch boundary") {
    constexpr SearchThreshold t{8};
    static_assert(hybrid_uses_linear(8, t));
    static_assert(!hybrid_uses_linear(9, t));
    static_assert(hybrid_uses_linear(0, t));
    const std::vector<Key> w8{1, 2, 3, 4, 5, 6, 7, 8};
    CHECK(hybrid_lower_bound(w8, 5, t) == 4);
    const std::vector<Key> w9{1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK(hybrid_lower_bound(w9, 9, t) == 8);
}

TEST_CASE("differential test against std lower and upper bound") {
    std::mt19937_64 rng(42);
    std::size_t cases = 0;
    std::size_t mismatches = 0;
    while (cases < 1'000'000) {
        const auto w = random_window(rng, 1 + rng() % 4096);
        for (int q = 0; q < 64; ++q, ++cases) {
            const Key key = rng() % (w.back() + 2);
            const std::size_t lb = reference_lower_bound(w, key);
            const std::size_t ub = reference_upper_bound(w, key);
            const SearchThreshold t{1 + rng() % 64};
            mismatches += branchless_lower_bound(w, key) != lb;
            mismatches += hybrid_lower_bound(w, key, t) != lb;
            mismatches += branchless_upper_bound(w, key) != ub;
            mismatches += hybrid_upper_bound(w, key, t) != ub;
            if (w.size() <= 256) {
                mismatches += linear_lower_bound(w, key) != lb;
                mismatches += linear_upper_bound(w, key) != ub;
            }
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("hybrid agrees across lengths 0..1024") {
    std::mt19937_64 rng(8);
    for (std::size_t len = 0; len <= 1024; ++len) {
        std::vector<Key> w(len);
        for (std::size_t i = 0; i < len; ++i) {
            w[i] = 3 * i + 1;
        }
        for (Key key = 0; key < 3 * len + 3; key += 1 + rng() % 7) {
            REQUIRE(hybrid_lower_bound(w, key, {}) == reference_lower_bound(w, key));
        }
    }
}

TEST_CASE("predecessor_in_window examples") {
    const std::vector<Key> level{0, 10, 20, 30};
    CHECK(predecessor_in_window(level, 1, 1, 15) == 1);
    CHECK(predecessor_in_window(level, 100, 1, 35) == 3);
    CHECK(predecessor_in_window(level, 100, 2, 25) == 2);
    // Every window key exceeds the query: the left edge comes back.
    CHECK(predecessor_in_window(level, 3, 1, 5) == 2);
    const std::vector<Key> empty;
    CHECK_THROWS_AS(predecessor_in_window(empty, 0, 1, 5), InvalidState);
}

TEST_CASE("predecessor_in_window matches a full-scan predecessor") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200'000; ++trial) {
        auto level = random_window(rng, 1 + rng() % 2000);
        const Key key = level.front() + rng() % (level.back() - level.front() + 64);
        std::size_t truth = 0;
        for (std::size_t i = 0; i < level.size(); ++i) {
            if (level[i] <= key) {
                truth = i;
            }
        }
        const std::size_t radius = 1 + rng() % 64;
        const std::size_t offset = rng() % (2 * radius + 1);
        const std::size_t center = truth + offset >= radius ? truth + offset - radius : 0;
        const std::size_t j = predecessor_in_window(level, center, radius, key, {1 + rng() % 32});
        REQUIRE(j == truth);
        CHECK(level[j] <= key);
        if (j + 1 < level.size()) {
            CHECK(key < level[j + 1]);
        }
    }
}
