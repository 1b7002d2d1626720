#include <doctest.h>

#include <random>
#include <set>

#include "htp/stats.hpp"
#include "htp/error.hpp"
#include "support/oracles.hpp"

using namespace htp;

TEST_CASE("summary of [0.6, 0.7, 0.8]") {
    const std::vector<double> v{0.6, 0.7, 0.8};
    const auto s = summarize(v);
    CHECK(s.count == 3);
    CHECK(s.mean == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(s.median == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(s.q1 == doctest::Approx(0.65).epsilon(1e-12));
    CHECK(s.q3 == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s.min == 0.6);
    CHECK(s.max == 0.8);
    CHECK(s.sd == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("type-7 quartiles of [1, 2, 3, 4]") {
    const std::vector<double> v{4, 1, 3, 2};
    const auto s = summarize(v);
    CHECK(s.q1 == doctest::Approx(1.75));
    CHECK(s.median == doctest::Approx(2.5));
    CHECK(s.q3 == doctest::Approx(3.25));
}

TEST_CASE("single value has zero sd and empty input is an error") {
    const std::vector<double> one{0.42};
    const auto s = summarize(one);
    CHECK(s.sd == 0.0);
    CHECK(s.q1 == 0.42);
    CHECK(s.q3 == 0.42);
    CHECK_THROWS_AS(summarize(std::vector<double>{}), Error);
}

TEST_CASE("summaries match the brute-force oracle") {
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<int> size(1, 1000);
    std::uniform_real_distribution<double> value(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(size(rng)));
        for (auto& x : v) x = value(rng);
        const auto s = summarize(v);
        const auto o = oracle::brute_stats(v);
        REQUIRE(std::abs(s.mean - o.mean) <= 1e-12);
        REQUIRE(std::abs(s.median - o.median) <= 1e-12);
        REQUIRE(std::abs(s.q1 - o.q1) <= 1e-12);
        REQUIRE(std::abs(s.q3 - o.q3) <= 1e-12);
        REQUIRE(s.min == o.min);
        REQUIRE(s.max == o.max);
        REQUIRE(std::abs(s.sd - o.sd) <= 1e-12);
        REQUIRE(s.min <= s.q1);
        REQUIRE(s.q1 <= s.median);
        REQUIRE(s.median <= s.q3);
        REQUIRE(s.q3 <= s.max);
        REQUIRE(s.min <= s.mean);
        REQUIRE(s.mean <= s.max);
    }
}

TEST_CASE("threshold share is inclusive") {
    const std::vector<double> v{0.71, 0.69, 0.75, 0.80};
    CHECK(threshold_share(v, 0.70) == doctest::Approx(0.75));
    CHECK(threshold_share(std::vector<double>{0.70}, 0.70) == 1.0);
    CHECK(threshold_share(v, -1.0) == 1.0);
    CHECK_THROWS_AS(threshold_share(std::vector<double>{}, 0.5), Error);
}

TEST_CASE("histogram counting example") {
    const std::vector<double> v{0.61, 0.72, 0.78};
    const auto bins = histogram(v, 0.1, 0.6);
    REQUIRE(bins.size() == 2);
    CHECK(bins[0].lo == doctest::Approx(0.6));
    CHECK(bins[0].hi == doctest::Approx(0.7));
    CHECK(bins[0].count == 1);
    CHECK(bins[1].lo == doctest::Approx(0.7));
    CHECK(bins[1].hi == doctest::Approx(0.8));
    CHECK(bins[1].count == 2);
}

TEST_CASE("histogram edge rules") {
    SUBCASE("single value") {
        const auto bins = histogram(std::vector<double>{0.73}, 0.1, 0.6);
        REQUIRE(bins.size() == 1);
        CHECK(bins[0].count == 1);
    }
    SUBCASE("values on a bin edge go to the bin starting there") {
        const double edge = 0.6 + 1 * 0.1;
        const auto bins = histogram(std::vector<double>{edge, edge, edge}, 0.1, 0.6);
        REQUIRE(bins.size() == 1);
        CHECK(bins[0].lo == edge);
        CHECK(bins[0].count == 3);
    }
    SUBCASE("the last bin is closed") {
        const auto bins = histogram(std::vector<double>{0.5, 0.75, 1.0}, 0.25, 0.0);
        REQUIRE(bins.size() == 2);
        CHECK(bins.back().hi == 1.0);
        CHECK(bins.back().count == 2);
    }
    SUBCASE("values below the anchor extend the bins downward") {
        const auto bins = histogram(std::vector<double>{-0.15, 0.05}, 0.1, 0.0);
        REQUIRE(bins.size() == 3);
        CHECK(bins[0].lo == doctest::Approx(-0.2));
        CHECK(bins[0].count == 1);
        CHECK(bins[1].count == 0);
        CHECK(bins[2].count == 1);
    }
    SUBCASE("non-positive width") {
        CHECK_THROWS_AS(histogram(std::vector<double>{0.1}, 0.0, 0.0), Error);
        CHECK_THROWS_AS(histogram(std::vector<double>{0.1}, -0.1, 0.0), Error);
    }
}

TEST_CASE("histogram counts always sum to n and edges increase") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> value(-1.0, 1.0), width(0.005, 0.5), anchor(-1.0, 1.0);
    std::uniform_int_distribution<int> size(1, 400);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(size(rng)));
        for (auto& x : v) x = trial % 5 == 0 ? std::round(value(rng) * 20) / 20 : value(rng);
        const auto bins = histogram(v, width(rng), anchor(rng));
        std::size_t total = 0;
        for (std::size_t i = 0; i < bins.size(); ++i) {
            total += bins[i].count;
            REQUIRE(bins[i].lo < bins[i].hi);
            if (i > 0) REQUIRE(bins[i].lo == bins[i - 1].hi);
        }
        REQUIRE(total == v.size());
    }
}

TEST_CASE("density of {0, 1} is symmetric about 0.5") {
    const std::vector<double> v{0.0, 1.0};
    const auto curve = density_estimate(v, 101);
    REQUIRE(curve.size() == 101);
    CHECK(curve.front().x + curve.back().x == doctest::Approx(1.0));
    for (std::size_t i = 0; i < curve.size(); ++i) {
        REQUIRE(std::abs(curve[i].y - curve[curve.size() - 1 - i].y) <= 1e-9);
        REQUIRE(curve[i].y >= 0.0);
    }
}

TEST_CASE("density integrates to about one and peaks inside the data range") {
    std::mt19937_64 rng(2025);
    std::uniform_int_distribution<int> size(2, 300);
    std::normal_distribution<double> value(0.75, 0.06);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(size(rng)));
        for (auto& x : v) x = value(rng);
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        if (*lo == *hi) continue;
        const auto curve = density_estimate(v, 512);
        const double area = oracle::trapezoid(curve);
        REQUIRE(area >= 0.98);
        REQUIRE(area <= 1.02);
        const auto peak = std::max_element(curve.begin(), curve.end(), [](auto& a, auto& b) { return a.y < b.y; });
        REQUIRE(peak->x >= *lo);
        REQUIRE(peak->x <= *hi);
    }
}

TEST_CASE("density preconditions") {
    CHECK_THROWS_AS(density_estimate(std::vector<double>{0.5, 0.5, 0.5}, 64), Error);
    CHECK_THROWS_AS(density_estimate(std::vector<double>{0.1, 0.5}, 15), Error);
}

TEST_CASE("silverman bandwidth falls back to sd when the IQR collapses") {
    const std::vector<double> v{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0};
    const auto s = summarize(v);
    CHECK(s.q3 - s.q1 == 0.0);
    CHECK(silverman_bandwidth(v) == doctest::Approx(0.9 * s.sd * std::pow(8.0, -0.2)));
}
