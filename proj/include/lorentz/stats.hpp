#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace lorentz {

/// Two-sided 95% standard normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
    double lo{0.0};
    double hi{0.0};

    [[nodiscard]] double half_width() const { return 0.5 * (hi - lo); }
    [[nodiscard]] double center() const { return 0.5 * (hi + lo); }
    [[nodiscard]] bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::uint64_t hits, std::uint64_t trials, double z = kZ95);

/// Two estimates with symmetric half-widths agree when their intervals overlap.
inline bool joined_intervals_agree(double a, double hw_a, double b, double hw_b) {
    const double d = a > b ? a - b : b - a;
    return d <= hw_a + hw_b;
}

/// Running sums for means and second moments of a scalar; merging is exact
/// addition, so a fixed block order gives bit-identical results.
struct Moments {
    std::uint64_t n{0};
    double sum{0.0};
    double sum2{0.0};

    void add(double x) {
        ++n;
        sum += x;
        sum2 += x * x;
    }
    Moments& operator+=(const Moments& o) {
        n += o.n;
        sum += o.sum;
        sum2 += o.sum2;
        return *this;
    }
    [[nodiscard]] double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    /// Unbiased sample variance.
    [[nodiscard]] double variance() const;
    [[nodiscard]] double std_error() const;
    /// Normal-approximation confidence half-width of the mean.
    [[nodiscard]] double half_width(double z = kZ95) const { return z * std_error(); }
};

struct ChiSquareResult {
    double statistic{0.0};
    double dof{0.0};
    double critical{0.0};
    std::size_t bins_used{0};
    bool pass{false};
};

/// Pearson chi-square test of observed counts against expected counts.
/// Bins with expected count below `min_expected` are pooled into one bin.
/// The test passes when the statistic is below the `level` quantile.
ChiSquareResult chi_square_test(std::span<const double> observed, std::span<const double> expected, double level,
                                double min_expected = 5.0);

double chi_square_quantile(double dof, double p);

/// A right-censored observation: `value` is the observed time, or the cap
/// when `censored` is set.
struct CensoredValue {
    double value{0.0};
    bool censored{false};
};

/// Kaplan-Meier survival estimate.
class SurvivalCurve {
public:
    explicit SurvivalCurve(std::vector<CensoredValue> samples);

    /// S(t) = P(X > t).
    [[nodiscard]] double operator()(double t) const;
    /// Largest time up to which the estimate is supported (smallest censoring time).
    [[nodiscard]] double supported_until() const { return support_; }
    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] std::size_t uncensored() const { return events_; }
    /// Jump times with the survival value just after each jump.
    [[nodiscard]] const std::vector<std::pair<double, double>>& steps() const { return steps_; }

private:
    std::vector<std::pair<double, double>> steps_;
    double support_{0.0};
    std::size_t n_{0};
    std::size_t events_{0};
};

struct KsResult {
    double statistic{0.0};
    double at{0.0};            ///< location of the supremum
    double range_upper{0.0};   ///< evaluation range is [0, range_upper]
    std::size_t uncensored{0};
};

/// sup |S_emp - S_ref| over [0, upper], both one-sided limits at every jump.
KsResult ks_survival(const SurvivalCurve& curve, const std::function<double(double)>& reference, double upper);

/// Composite Simpson rule with `intervals` (rounded up to even) sub-intervals.
double simpson(const std::function<double(double)>& f, double a, double b, int intervals);

struct LinearFit {
    double slope{0.0};
    double intercept{0.0};
    double slope_std_error{0.0};
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Sample median (average of the two middle values for even sizes).
double median(std::vector<double> values);

}  // namespace lorentz
