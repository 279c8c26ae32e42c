#include "lorentz/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lorentz {

Interval wilson_interval(std::uint64_t hits, std::uint64_t trials, double z) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(hits) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {hits == 0 ? 0.0 : std::max(0.0, center - half), hits == trials ? 1.0 : std::min(1.0, center + half)};
}

double Moments::variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double v = (sum2 - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return v > 0.0 ? v : 0.0;
}

double Moments::std_error() const { return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }

double chi_square_quantile(double dof, double p) {
    boost::math::chi_squared dist(dof);
    return boost::math::quantile(dist, p);
}

ChiSquareResult chi_square_test(std::span<const double> observed, std::span<const double> expected, double level,
                                double min_expected) {
    if (observed.size() != expected.size()) throw std::invalid_argument("chi_square_test: size mismatch");
    ChiSquareResult out;
    double pooled_obs = 0.0;
    double pooled_exp = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] < min_expected) {
            pooled_obs += observed[i];
            pooled_exp += expected[i];
            continue;
        }
        const double d = observed[i] - expected[i];
        out.statistic += d * d / expected[i];
        ++out.bins_used;
    }
    if (pooled_exp > 0.0) {
        const double d = pooled_obs - pooled_exp;
        out.statistic += d * d / pooled_exp;
        ++out.bins_used;
    }
    out.dof = static_cast<double>(out.bins_used) - 1.0;
    out.critical = chi_square_quantile(out.dof, level);
    out.pass = out.statistic < out.critical;
    return out;
}

SurvivalCurve::SurvivalCurve(std::vector<CensoredValue> samples) : n_(samples.size()) {
    std::sort(samples.begin(), samples.end(), [](const CensoredValue& a, const CensoredValue& b) {
        if (a.value != b.value) return a.value < b.value;
        return !a.censored && b.censored;  // events before censorings at ties
    });
    support_ = std::numeric_limits<double>::infinity();
    double s = 1.0;
    std::size_t at_risk = samples.size();
    std::size_t i = 0;
    while (i < samples.size()) {
        const double t = samples[i].value;
        std::size_t deaths = 0;
        std::size_t removed = 0;
        while (i < samples.size() && samples[i].value == t) {
            if (samples[i].censored) support_ = std::min(support_, t);
            else ++deaths;
            ++removed;
            ++i;
        }
        if (deaths > 0) {
            s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
            steps_.emplace_back(t, s);
            events_ += deaths;
        }
        at_risk -= removed;
    }
}

double SurvivalCurve::operator()(double t) const {
    // value after the last jump at or before t
    auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                               [](double x, const std::pair<double, double>& step) { return x < step.first; });
    if (it == steps_.begin()) return 1.0;
    return std::prev(it)->second;
}

KsResult ks_survival(const SurvivalCurve& curve, const std::function<double(double)>& reference, double upper) {
    KsResult out;
    out.range_upper = std::min(upper, curve.supported_until());
    auto consider = [&](double t, double emp) {
        const double d = std::abs(emp - reference(t));
        if (d > out.statistic) {
            out.statistic = d;
            out.at = t;
        }
    };
    // mass at or below 0 only lowers S(0); the range starts at 0
    double before = 1.0;
    std::size_t i = 0;
    const auto& steps = curve.steps();
    for (; i < steps.size() && steps[i].first <= 0.0; ++i) before = steps[i].second;
    consider(0.0, before);
    for (; i < steps.size(); ++i) {
        const auto [t, s] = steps[i];
        if (t > out.range_upper) break;
        consider(t, before);
        consider(t, s);
        before = s;
        ++out.uncensored;
    }
    consider(out.range_upper, curve(out.range_upper));
    return out;
}

double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
    if (intervals < 2) intervals = 2;
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / intervals;
    double acc = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
    return acc * h / 3.0;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_std_error = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return fit;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace lorentz
