#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "lorentz/stats.hpp"

using namespace lorentz;

TEST_CASE("wilson interval") {
    const Interval i = wilson_interval(5, 10);
    CHECK(i.lo == doctest::Approx(0.236593).epsilon(1e-5));
    CHECK(i.hi == doctest::Approx(0.763407).epsilon(1e-5));
    const Interval z = wilson_interval(0, 100);
    CHECK(z.lo == 0.0);
    CHECK(z.hi == doctest::Approx(0.036995).epsilon(1e-4));
}

TEST_CASE("chi-square quantiles") {
    CHECK(chi_square_quantile(10, 0.99) == doctest::Approx(23.2093).epsilon(1e-5));
    CHECK(chi_square_quantile(1, 0.95) == doctest::Approx(3.84146).epsilon(1e-5));
}

TEST_CASE("chi-square test pools sparse bins") {
    const std::vector<double> obs{10, 12, 9, 1, 0};
    const std::vector<double> exp{10, 10, 10, 0.5, 0.5};
    const auto r = chi_square_test(obs, exp, 0.99);
    CHECK(r.bins_used == 4);
    CHECK(r.statistic == doctest::Approx(0.4 + 0.1 + 0.0).epsilon(1e-12));
    CHECK(r.dof == 3);
    CHECK(r.pass);
}

TEST_CASE("moments") {
    Moments m;
    for (double x : {1.0, 2.0, 3.0, 4.0}) m.add(x);
    CHECK(m.mean() == 2.5);
    CHECK(m.variance() == doctest::Approx(5.0 / 3.0));
    CHECK(m.std_error() == doctest::Approx(std::sqrt(5.0 / 12.0)));
    Moments a, b;
    a.add(1.0);
    b.add(3.0);
    a += b;
    CHECK(a.mean() == 2.0);
}

TEST_CASE("kaplan-meier by hand") {
    const SurvivalCurve s({{1.0, false}, {2.0, true}, {3.0, false}, {4.0, false}});
    CHECK(s(0.5) == 1.0);
    CHECK(s(1.0) == doctest::Approx(0.75));
    CHECK(s(2.5) == doctest::Approx(0.75));
    CHECK(s(3.0) == doctest::Approx(0.375));
    CHECK(s(4.0) == doctest::Approx(0.0));
    CHECK(s.supported_until() == 2.0);
    CHECK(s.uncensored() == 3);
    CHECK(s.size() == 4);
}

TEST_CASE("kaplan-meier without censoring is the empirical survival") {
    std::vector<CensoredValue> v;
    for (int k = 1; k <= 100; ++k) v.push_back({static_cast<double>(k), false});
    const SurvivalCurve s(v);
    for (int k = 0; k <= 100; ++k) CHECK(s(k + 0.5) == doctest::Approx(1.0 - std::min(k, 100) / 100.0));
}

TEST_CASE("ks statistic of a step against a linear survival") {
    // uncensored points at 0.5 and 1.5 against the uniform law on [0, 2]
    const SurvivalCurve s({{0.5, false}, {1.5, false}});
    const auto r = ks_survival(s, [](double t) { return std::max(0.0, 1.0 - t / 2.0); }, 2.0);
    CHECK(r.statistic == doctest::Approx(0.25));
    CHECK(r.range_upper == 2.0);
}

TEST_CASE("ks range stops at the first censoring") {
    const SurvivalCurve s({{0.5, false}, {1.0, true}, {1.5, false}});
    const auto r = ks_survival(s, [](double) { return 1.0; }, 10.0);
    CHECK(r.range_upper == 1.0);
    CHECK(r.statistic == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("ks ignores mass below zero only through S(0)") {
    const SurvivalCurve s({{-1.0, false}, {1.0, false}});
    const auto r = ks_survival(s, [](double t) { return 1.0 / (1.0 + t); }, 5.0);
    CHECK(r.statistic == doctest::Approx(0.5));
    CHECK(r.at == 0.0);
}

TEST_CASE("simpson is exact for cubics") {
    const double v = simpson([](double x) { return x * x * x - 2 * x + 1; }, -1.0, 2.0, 3);
    CHECK(v == doctest::Approx(3.75).epsilon(1e-14));
    CHECK(simpson([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, 1000) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("linear fit") {
    const std::vector<double> x{0, 1, 2, 3};
    const std::vector<double> y{1, 3, 5, 7};
    const auto f = linear_fit(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.slope_std_error == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("median") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
}

TEST_CASE("joined intervals") {
    CHECK(joined_intervals_agree(1.0, 0.1, 1.15, 0.06));
    CHECK_FALSE(joined_intervals_agree(1.0, 0.1, 1.2, 0.05));
}
