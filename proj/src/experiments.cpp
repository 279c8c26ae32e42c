#include "lorentz/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lorentz/errors.hpp"
#include "lorentz/parallel.hpp"

namespace lorentz {

namespace {

std::uint64_t sub_seed(std::uint64_t seed, std::string_view label) { return mix64(seed ^ mix64(tag_hash(label))); }

std::uint64_t sub_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
    return mix64(sub_seed(seed, label) + index);
}

Json to_json(const Sym2& s) { return Json{{"xx", s.xx}, {"xy", s.xy}, {"yy", s.yy}}; }

Json to_json(const KsResult& k, std::size_t samples) {
    return Json{{"statistic", k.statistic},
                {"at", k.at},
                {"range_upper", k.range_upper},
                {"uncensored", k.uncensored},
                {"samples", samples}};
}

Table return_table(std::string name = "samples") {
    return Table{std::move(name), {"seed", "epsilon", "kind", "outcome", "value", "collisions", "censored_cap"}, {}};
}

void add_return_row(Table& t, std::uint64_t seed, double eps, const std::string& kind, const ReturnOutcome& r,
                    double cap) {
    t.add({format_number(seed), format_number(eps), kind, r.hit() ? "hit" : "censored", format_number(r.value),
           format_number(r.collisions_traversed), format_number(cap)});
}

/// (t, empirical, reference) on an even grid of [0, upper].
Table curve_table(std::string name, const SurvivalCurve& curve, const std::function<double(double)>& reference,
                  double upper, int points = 200) {
    Table t{std::move(name), {"t", "empirical", "reference"}, {}};
    for (int i = 0; i <= points; ++i) {
        const double x = upper * i / points;
        t.add({format_number(x), format_number(curve(x)), format_number(reference(x))});
    }
    return t;
}

/// Raises InsufficientUncensored when more than half of the samples are
/// censored at transformed times below `horizon`.
void require_observable(const std::vector<CensoredValue>& values, double horizon, const std::string& what) {
    std::size_t early = 0;
    for (const auto& v : values)
        if (v.censored && v.value < horizon) ++early;
    if (2 * early > values.size()) {
        std::ostringstream os;
        os << "InsufficientUncensored: " << what << ": " << early << " of " << values.size()
           << " samples censored below t=" << horizon;
        throw InsufficientUncensored(os.str());
    }
}

double min_cap(const std::vector<double>& caps) { return *std::min_element(caps.begin(), caps.end()); }

/// Order-preserving concatenation of per-block result vectors.
template <class T>
struct Collected {
    std::vector<T> items;
    Collected& operator+=(const Collected& o) {
        items.insert(items.end(), o.items.begin(), o.items.end());
        return *this;
    }
};

template <class T, class Fn>
std::vector<T> collect(std::uint64_t count, int workers, Fn&& per_item) {
    return reduce_blocks<Collected<T>>(count, workers,
                                       [&](std::uint64_t begin, std::uint64_t end) {
                                           Collected<T> c;
                                           c.items.reserve(end - begin);
                                           for (std::uint64_t k = begin; k < end; ++k) c.items.push_back(per_item(k));
                                           return c;
                                       })
        .items;
}

struct Counts {
    std::vector<double> c;
    Counts& operator+=(const Counts& o) {
        if (c.empty()) c.assign(o.c.size(), 0.0);
        for (std::size_t i = 0; i < o.c.size(); ++i) c[i] += o.c[i];
        return *this;
    }
};

Json chi_json(const ChiSquareResult& r) {
    return Json{{"statistic", r.statistic},
                {"dof", r.dof},
                {"critical", r.critical},
                {"bins_used", r.bins_used},
                {"pass", r.pass}};
}

// Median with censored values counted at their cap; valid while fewer than
// half of the samples are censored.
double censored_median(const std::vector<CensoredValue>& v, std::size_t* censored = nullptr) {
    std::vector<double> x;
    x.reserve(v.size());
    std::size_t c = 0;
    for (const auto& s : v) {
        x.push_back(s.value);
        if (s.censored) ++c;
    }
    if (censored) *censored = c;
    return median(std::move(x));
}

/// Bracketing of a flow-level hit by the free-flight bounds.
bool bracketed(const ReturnOutcome& r, const ScattererConfig& config) {
    if (!r.hit()) return true;
    const double c = static_cast<double>(r.collisions_traversed);
    const double lo = config.tau_minus() * (c - 1.0) * (1.0 - 1e-9);
    const double hi = config.tau_plus() * (c + 1.0) * (1.0 + 1e-9);
    return lo <= r.value && r.value <= hi;
}

/// For eps < eps' on one trajectory: a hit for eps later than eps' forces a
/// hit for eps' no later than it.
bool monotone_pair(const ReturnOutcome& small, double eps_large, const ReturnOutcome& large) {
    if (!small.hit() || small.value <= eps_large) return true;
    return large.hit() && large.value <= small.value;
}

}  // namespace

double mixture_survival(double t, double gamma, int intervals) {
    const double rate = 4.0 * t / (2.0 * gamma);
    return simpson([&](double phi) { return 0.5 * std::cos(phi) * std::exp(-rate * std::cos(phi)); }, -0.5 * kPi,
                   0.5 * kPi, intervals);
}

double free_area(const ScattererConfig& config, double x0, double x1, double y0, double y1, int intervals) {
    struct Chord {
        Vec2 c;
        double r;
    };
    std::vector<Chord> disks;
    std::vector<double> breaks{x0, x1};
    for (int ly = -2; ly <= 2; ++ly)
        for (int lx = -2; lx <= 2; ++lx)
            for (const Disk& d : config.disks()) {
                const Vec2 c = d.center + Vec2(lx, ly);
                if (c.x + d.radius <= x0 || c.x - d.radius >= x1) continue;
                if (c.y + d.radius <= y0 || c.y - d.radius >= y1) continue;
                disks.push_back({c, d.radius});
                for (double b : {c.x - d.radius, c.x + d.radius})
                    if (b > x0 && b < x1) breaks.push_back(b);
            }
    auto free_length = [&](double x) {
        double blocked = 0.0;
        for (const auto& d : disks) {
            const double dx = x - d.c.x;
            if (std::abs(dx) >= d.r) continue;
            const double h = std::sqrt(d.r * d.r - dx * dx);
            blocked += std::max(0.0, std::min(y1, d.c.y + h) - std::max(y0, d.c.y - h));
        }
        return (y1 - y0) - blocked;
    };
    std::sort(breaks.begin(), breaks.end());
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double a = breaks[i], b = breaks[i + 1];
        if (b <= a) continue;
        const int n = std::max(16, static_cast<int>(intervals * (b - a) / (x1 - x0)));
        area += simpson(free_length, a, b, n);
    }
    return area;
}

PhasePoint sample_free_phase(Rng& rng, const ScattererConfig& config) {
    Vec2 q;
    do {
        q = {rng.uniform(), rng.uniform()};
    } while (config.distance_to_obstacles(q) <= 0.0);
    return {q, unit_from_angle(kTwoPi * rng.uniform())};
}

Verdict exp_invariance(const InvarianceParams& p, std::uint64_t seed, const ScattererConfig& config, int workers) {
    Verdict v;
    v.name = "invariance";
    v.parameters = {{"samples", p.samples},       {"map_steps", p.map_steps},   {"arc_bins", p.arc_bins},
                    {"sine_bins", p.sine_bins},   {"flow_time", p.flow_time},   {"spatial_bins", p.spatial_bins},
                    {"angle_bins", p.angle_bins}, {"level", p.level},           {"seed", seed}};

    // mu-bar under T-bar^k, binned by (obstacle, arc, sin phi)
    const std::size_t per_obstacle = static_cast<std::size_t>(p.arc_bins * p.sine_bins);
    const std::size_t map_bins = per_obstacle * config.size();
    const Counts map_counts = reduce_blocks<Counts>(p.samples, workers, [&](std::uint64_t begin, std::uint64_t end) {
        Counts c;
        c.c.assign(map_bins, 0.0);
        for (std::uint64_t k = begin; k < end; ++k) {
            Rng rng = sample_rng(seed, "invariance_map", k);
            MapWalker w(sample_mu_bar_one(rng, config), config);
            for (std::uint64_t s = 0; s < p.map_steps; ++s) w.step();
            const MapPoint m = w.point();
            const auto i = static_cast<std::size_t>(m.obstacle);
            const int a = std::min(p.arc_bins - 1, static_cast<int>(m.r / config.perimeter(i) * p.arc_bins));
            const int b = std::clamp(static_cast<int>((std::sin(m.phi) + 1.0) * 0.5 * p.sine_bins), 0, p.sine_bins - 1);
            c.c[i * per_obstacle + static_cast<std::size_t>(a * p.sine_bins + b)] += 1.0;
        }
        return c;
    });
    std::vector<double> map_expected(map_bins);
    for (std::size_t i = 0; i < config.size(); ++i)
        for (std::size_t j = 0; j < per_obstacle; ++j)
            map_expected[i * per_obstacle + j] = static_cast<double>(p.samples) * config.perimeter(i) /
                                                 config.gamma() / static_cast<double>(per_obstacle);
    const ChiSquareResult map_chi = chi_square_test(map_counts.c, map_expected, p.level);

    // Liouville measure under Phi_t, binned by (x, y, velocity angle) modulo Z^2
    const auto s_bins = static_cast<std::size_t>(p.spatial_bins);
    const auto a_bins = static_cast<std::size_t>(p.angle_bins);
    const std::size_t flow_bins = s_bins * s_bins * a_bins;
    const Counts flow_counts = reduce_blocks<Counts>(p.samples, workers, [&](std::uint64_t begin, std::uint64_t end) {
        Counts c;
        c.c.assign(flow_bins, 0.0);
        for (std::uint64_t k = begin; k < end; ++k) {
            Rng rng = sample_rng(seed, "invariance_flow", k);
            const PhasePoint y = flow(sample_free_phase(rng, config), p.flow_time, config);
            const double fx = y.q.x - std::floor(y.q.x);
            const double fy = y.q.y - std::floor(y.q.y);
            double ang = std::atan2(y.v.y, y.v.x);
            if (ang < 0.0) ang += kTwoPi;
            const auto ix = std::min(s_bins - 1, static_cast<std::size_t>(fx * p.spatial_bins));
            const auto iy = std::min(s_bins - 1, static_cast<std::size_t>(fy * p.spatial_bins));
            const auto ia = std::min(a_bins - 1, static_cast<std::size_t>(ang / kTwoPi * p.angle_bins));
            c.c[(iy * s_bins + ix) * a_bins + ia] += 1.0;
        }
        return c;
    });
    double free_total = 1.0;
    for (const Disk& d : config.disks()) free_total -= kPi * d.radius * d.radius;
    std::vector<double> flow_expected(flow_bins);
    const double h = 1.0 / p.spatial_bins;
    for (std::size_t iy = 0; iy < s_bins; ++iy)
        for (std::size_t ix = 0; ix < s_bins; ++ix) {
            const double area = free_area(config, ix * h, (ix + 1) * h, iy * h, (iy + 1) * h);
            for (std::size_t ia = 0; ia < a_bins; ++ia)
                flow_expected[(iy * s_bins + ix) * a_bins + ia] =
                    static_cast<double>(p.samples) * area / free_total / static_cast<double>(a_bins);
        }
    const ChiSquareResult flow_chi = chi_square_test(flow_counts.c, flow_expected, p.level);

    Table bins{"bins", {"test", "bin", "observed", "expected"}, {}};
    for (std::size_t i = 0; i < map_bins; ++i)
        bins.add({"map", format_number(static_cast<std::uint64_t>(i)), format_number(map_counts.c[i]),
                  format_number(map_expected[i])});
    for (std::size_t i = 0; i < flow_bins; ++i)
        bins.add({"flow", format_number(static_cast<std::uint64_t>(i)), format_number(flow_counts.c[i]),
                  format_number(flow_expected[i])});
    v.tables.push_back(std::move(bins));
    v.statistics = {{"map", chi_json(map_chi)}, {"flow", chi_json(flow_chi)}, {"free_area", free_total}};
    v.pass = map_chi.pass && flow_chi.pass;
    return v;
}

Verdict exp_centering(const CenteringParams& p, std::uint64_t seed, const ScattererConfig& config, int workers) {
    Verdict v;
    v.name = "centering";
    v.parameters = {{"samples", p.samples}, {"n", p.n}, {"max_z", p.max_z}, {"seed", seed}};
    const CenteringResult r = check_centering(p.samples, p.n, seed, config, workers);
    Table t{"centering", {"component", "mean", "std_error", "half_width", "z"}, {}};
    t.add({"x", format_number(r.mean.x), format_number(r.std_error.x), format_number(r.half_width.x),
           format_number(r.mean.x / r.std_error.x)});
    t.add({"y", format_number(r.mean.y), format_number(r.std_error.y), format_number(r.half_width.y),
           format_number(r.mean.y / r.std_error.y)});
    v.tables.push_back(std::move(t));
    v.statistics = {{"mean", {r.mean.x, r.mean.y}},
                    {"std_error", {r.std_error.x, r.std_error.y}},
                    {"max_z", r.max_z()},
                    {"zero_in_95ci", r.pass},
                    {"events", r.steps}};
    v.pass = r.max_z() <= p.max_z;
    return v;
}

Verdict exp_measure_lemmas(const MeasureParams& p, std::uint64_t seed, const ScattererConfig& config, int workers) {
    Verdict v;
    v.name = "measures";
    v.parameters = {{"eps", p.eps},
                    {"samples", p.samples},
                    {"center", {p.center.x, p.center.y}},
                    {"direction", p.direction},
                    {"tolerance", p.tolerance},
                    {"seed", seed}};
    Table t{"measures",
            {"kind", "epsilon", "samples", "members", "estimate", "half_width", "prediction", "ratio",
             "quotient_estimate", "quotient_prediction"},
            {}};
    bool pass = true;
    double worst = 0.0;
    std::vector<double> phase_estimates;
    const PhasePoint x{p.center, unit_from_angle(p.direction)};
    for (std::size_t i = 0; i < p.eps.size(); ++i) {
        const double eps = p.eps[i];
        const MeasureEstimate ball =
            measure_projected_phase_ball(x, eps, p.samples, sub_seed(seed, "phase_ball", i), config, workers);
        const MeasureEstimate tube = measure_A_eps(p.center, eps, p.samples, sub_seed(seed, "a_eps", i), config, workers);
        for (const auto* e : {&ball, &tube}) {
            t.add({e == &ball ? "phase_ball" : "a_eps", format_number(eps), format_number(e->samples),
                   format_number(e->members), format_number(e->estimate), format_number(e->half_width),
                   format_number(e->prediction), format_number(e->ratio), format_number(e->quotient_estimate),
                   format_number(e->quotient_prediction)});
            pass = pass && std::abs(e->ratio - 1.0) <= p.tolerance;
            worst = std::max(worst, std::abs(e->ratio - 1.0));
        }
        phase_estimates.push_back(ball.estimate);
    }
    Json doubling = Json::array();
    for (std::size_t i = 0; i < p.eps.size(); ++i)
        for (std::size_t j = 0; j < p.eps.size(); ++j)
            if (std::abs(p.eps[j] - 2.0 * p.eps[i]) < 1e-12)
                doubling.push_back({{"eps", p.eps[i]}, {"ratio", phase_estimates[j] / phase_estimates[i]}});
    v.tables.push_back(std::move(t));
    v.statistics = {{"max_relative_deviation", worst}, {"phase_ball_doubling", doubling}};
    v.pass = pass;
    return v;
}

Verdict exp_covariance(const CovarianceParams& p, std::uint64_t seed, const ScattererConfig& config, int workers,
                       SigmaFixture& fixture) {
    Verdict v;
    v.name = "covariance";
    v.parameters = {{"fixture_n", p.fixture_n},
                    {"stability_n", p.stability_n},
                    {"samples", p.samples},
                    {"max_lag", p.max_lag},
                    {"seed", seed}};
    const CovarianceEstimate direct = estimate_sigma2(p.fixture_n, p.samples, sub_seed(seed, "direct_fixture"),
                                                      CovarianceMethod::Direct, config, workers);
    const CovarianceEstimate gk = estimate_sigma2(p.max_lag, p.samples, sub_seed(seed, "green_kubo"),
                                                  CovarianceMethod::GreenKubo, config, workers);
    std::vector<CovarianceEstimate> stability;
    for (std::uint64_t n : p.stability_n)
        stability.push_back(
            estimate_sigma2(n, p.samples, sub_seed(seed, "direct_n", n), CovarianceMethod::Direct, config, workers));

    auto agree = [](const CovarianceEstimate& a, const CovarianceEstimate& b) {
        return joined_intervals_agree(a.sigma2.xx, a.half_widths.xx, b.sigma2.xx, b.half_widths.xx) &&
               joined_intervals_agree(a.sigma2.xy, a.half_widths.xy, b.sigma2.xy, b.half_widths.xy) &&
               joined_intervals_agree(a.sigma2.yy, a.half_widths.yy, b.sigma2.yy, b.half_widths.yy);
    };
    const bool methods_agree = agree(direct, gk);
    const bool diagonal_equal =
        joined_intervals_agree(direct.sigma2.xx, direct.half_widths.xx, direct.sigma2.yy, direct.half_widths.yy);
    bool stable = true;
    for (std::size_t i = 0; i < stability.size(); ++i)
        for (std::size_t j = i + 1; j < stability.size(); ++j) stable = stable && agree(stability[i], stability[j]);

    fixture.sigma2 = direct.sigma2;
    fixture.half_widths = direct.half_widths;
    fixture.n = direct.n_horizon;
    fixture.samples = direct.sample_count;
    fixture.seed = seed;
    fixture.gamma = config.gamma();
    fixture.beta = beta_constants(direct.sigma2, config.gamma());

    Table t{"covariance", {"method", "n", "samples", "xx", "xy", "yy", "hw_xx", "hw_xy", "hw_yy"}, {}};
    auto row = [&t](const std::string& method, const CovarianceEstimate& e) {
        t.add({method, format_number(e.n_horizon), format_number(e.sample_count), format_number(e.sigma2.xx),
               format_number(e.sigma2.xy), format_number(e.sigma2.yy), format_number(e.half_widths.xx),
               format_number(e.half_widths.xy), format_number(e.half_widths.yy)});
    };
    row("direct", direct);
    row("green_kubo", gk);
    for (const auto& e : stability) row("direct", e);
    v.tables.push_back(std::move(t));

    Table lags{"lags", {"lag", "c_xx", "c_xy", "c_yx", "c_yy", "hw_xx", "hw_xy", "hw_yy"}, {}};
    for (std::size_t j = 0; j < gk.lag_cov.size(); ++j)
        lags.add({format_number(static_cast<std::uint64_t>(j)), format_number(gk.lag_cov[j].xx),
                  format_number(gk.lag_cov[j].xy), format_number(gk.lag_cross_yx[j]), format_number(gk.lag_cov[j].yy),
                  format_number(gk.lag_half_widths[j].xx), format_number(gk.lag_half_widths[j].xy),
                  format_number(gk.lag_half_widths[j].yy)});
    v.tables.push_back(std::move(lags));

    Json stab = Json::array();
    for (const auto& e : stability)
        stab.push_back({{"n", e.n_horizon}, {"sigma2", to_json(e.sigma2)}, {"half_widths", to_json(e.half_widths)}});
    v.statistics = {{"direct", {{"sigma2", to_json(direct.sigma2)}, {"half_widths", to_json(direct.half_widths)}}},
                    {"green_kubo",
                     {{"sigma2", to_json(gk.sigma2)}, {"half_widths", to_json(gk.half_widths)}, {"lags_used", gk.lags_used}}},
                    {"stability", stab},
                    {"methods_agree", methods_agree},
                    {"diagonal_equal", diagonal_equal},
                    {"n_stable", stable},
                    {"beta", fixture.beta.beta},
                    {"beta0", fixture.beta.beta0},
                    {"beta1", fixture.beta.beta1}};
    v.pass = methods_agree && diagonal_equal && stable;
    return v;
}

Verdict exp_llt(const LltParams& p, std::uint64_t seed, const SigmaFixture& fixture, const ScattererConfig& config,
                int workers) {
    Verdict v;
    v.name = "llt";
    Json ells = Json::array();
    for (const Cell& l : p.ell) ells.push_back({l.x, l.y});
    v.parameters = {{"n", p.n},         {"ell", ells},         {"samples", p.samples},
                    {"band", p.band},   {"flatness", p.flatness}, {"seed", seed},
                    {"sigma2", to_json(fixture.sigma2)}};
    const auto rows = llt_empirical(p.n, p.ell, p.samples, seed, fixture.sigma2, config, workers);
    Table t{"llt",
            {"n", "ell_x", "ell_y", "hits", "samples", "empirical", "ci_lo", "ci_hi", "predicted", "ratio",
             "ratio_lo", "ratio_hi"},
            {}};
    bool in_band = true;
    std::vector<double> scaled;
    std::map<std::pair<std::uint64_t, std::pair<std::int64_t, std::int64_t>>, const LltRow*> by_key;
    for (const auto& r : rows) {
        t.add({format_number(r.n), format_number(r.ell.x), format_number(r.ell.y), format_number(r.hits),
               format_number(r.samples), format_number(r.empirical), format_number(r.ci.lo), format_number(r.ci.hi),
               format_number(r.predicted), format_number(r.ratio), format_number(r.ratio_ci.lo),
               format_number(r.ratio_ci.hi)});
        by_key[{r.n, {r.ell.x, r.ell.y}}] = &r;
        if (r.ell == Cell{0, 0}) {
            in_band = in_band && std::abs(r.ratio - 1.0) <= p.band;
            scaled.push_back(static_cast<double>(r.n) * r.empirical);
        }
    }
    double spread = 0.0;
    for (double a : scaled)
        for (double b : scaled) spread = std::max(spread, std::abs(a - b) / std::min(a, b));
    bool antisymmetric = true;
    for (const auto& r : rows) {
        const auto it = by_key.find({r.n, {-r.ell.x, -r.ell.y}});
        if (it == by_key.end()) continue;
        antisymmetric = antisymmetric && it->second->ci.lo <= r.ci.hi && r.ci.lo <= it->second->ci.hi;
    }
    v.tables.push_back(std::move(t));
    v.statistics = {{"ratios_in_band", in_band},
                    {"n_times_p_spread", spread},
                    {"flat", spread < p.flatness},
                    {"antisymmetric", antisymmetric},
                    {"beta", fixture.beta.beta}};
    v.pass = in_band;
    return v;
}

Verdict exp_decay(const DecayParams& p, std::uint64_t seed, const ScattererConfig& config, int workers) {
    Verdict v;
    v.name = "decay";
    v.parameters = {{"samples", p.samples}, {"max_lag", p.max_lag}, {"by_lag", p.by_lag}, {"seed", seed}};
    const CovarianceEstimate gk =
        estimate_sigma2(p.max_lag, p.samples, seed, CovarianceMethod::GreenKubo, config, workers);
    const DecayReport r = correlation_decay(gk, p.by_lag);
    Table t{"decay", {"lag", "cov", "half_width", "floor"}, {}};
    for (std::size_t j = 0; j < r.cov.size(); ++j)
        t.add({format_number(static_cast<std::uint64_t>(j)), format_number(r.cov[j]), format_number(r.half_width[j]),
               format_number(4.0 * r.half_width[j] / kZ95)});
    v.tables.push_back(std::move(t));
    v.statistics = {{"decorrelated_from", r.decorrelated_from}, {"fitted_rate", r.fitted_rate}};
    v.pass = r.pass;
    return v;
}

Verdict exp_exponential_law(const ExpLawParams& p, std::uint64_t seed, const ScattererConfig& config, int workers) {
    Verdict v;
    v.name = "exp-law";
    v.parameters = {{"centers", p.centers},     {"eps", p.eps},   {"samples_per_center", p.samples_per_center},
                    {"cap_scale", p.cap_scale}, {"ks_max", p.ks_max}, {"seed", seed}};
    if (!(p.eps < config.min_gap())) throw PreconditionViolation("exp-law: eps must be below the obstacle gap");

    struct Center {
        MapPoint m;
        double mass;
        std::uint64_t cap;
    };
    std::vector<Center> centers;
    for (std::uint64_t c = 0; c < p.centers; ++c) {
        Rng rng = sample_rng(seed, "exp_law_center", c);
        const MapPoint m = sample_mu_bar_one(rng, config);
        const double mass = mu_bar_ball(m, p.eps, config);
        centers.push_back({m, mass, static_cast<std::uint64_t>(std::ceil(p.cap_scale / mass))});
    }
    const std::uint64_t per = p.samples_per_center;
    const std::uint64_t total = p.centers * per;

    // entrance from mu-bar starts, and return from starts drawn from mu-bar restricted to the ball
    auto entrance = collect<ReturnOutcome>(total, workers, [&](std::uint64_t k) {
        const Center& c = centers[k / per];
        Rng rng = sample_rng(seed, "exp_law_entrance", k);
        return hitting_time(sample_mu_bar_one(rng, config), TargetSet::map_ball(c.m, p.eps, true), c.cap, config);
    });
    auto returns = collect<ReturnOutcome>(total, workers, [&](std::uint64_t k) {
        const Center& c = centers[k / per];
        Rng rng = sample_rng(seed, "exp_law_return", k);
        const auto i = static_cast<std::size_t>(c.m.obstacle);
        const double perimeter = config.perimeter(i);
        MapPoint start = c.m;
        start.r = std::fmod(c.m.r + p.eps * (2.0 * rng.uniform() - 1.0) + perimeter, perimeter);
        const double lo = std::sin(std::max(c.m.phi - p.eps, -0.5 * kPi));
        const double hi = std::sin(std::min(c.m.phi + p.eps, 0.5 * kPi));
        start.phi = std::asin(std::clamp(lo + (hi - lo) * rng.uniform(), -1.0, 1.0));
        return hitting_time(start, TargetSet::map_ball(c.m, p.eps, true), c.cap, config);
    });

    auto transform = [&](const std::vector<ReturnOutcome>& out, std::vector<CensoredValue>& all,
                         std::vector<double>& caps) {
        for (std::uint64_t k = 0; k < total; ++k) {
            const Center& c = centers[k / per];
            all.push_back({c.mass * out[k].value, !out[k].hit()});
            caps.push_back(c.mass * static_cast<double>(c.cap));
        }
    };
    std::vector<CensoredValue> ent_values, ret_values;
    std::vector<double> ent_caps, ret_caps;
    transform(entrance, ent_values, ent_caps);
    transform(returns, ret_values, ret_caps);
    require_observable(ent_values, 3.0, "exp-law entrance");
    require_observable(ret_values, 3.0, "exp-law return");

    auto reference = [](double t) { return std::exp(-t); };
    const double upper = std::min(min_cap(ent_caps), min_cap(ret_caps));
    const SurvivalCurve ent_curve(ent_values), ret_curve(ret_values);
    const KsResult ks_ent = ks_survival(ent_curve, reference, upper);
    const KsResult ks_ret = ks_survival(ret_curve, reference, upper);

    Table per_center{"centers",
                     {"center", "obstacle", "r", "phi", "mu_bar_ball", "cap", "ks_entrance", "ks_return", "censored"},
                     {}};
    Table samples = return_table();
    for (std::uint64_t c = 0; c < p.centers; ++c) {
        std::vector<CensoredValue> e(ent_values.begin() + static_cast<std::ptrdiff_t>(c * per),
                                     ent_values.begin() + static_cast<std::ptrdiff_t>((c + 1) * per));
        std::vector<CensoredValue> r(ret_values.begin() + static_cast<std::ptrdiff_t>(c * per),
                                     ret_values.begin() + static_cast<std::ptrdiff_t>((c + 1) * per));
        std::uint64_t censored = 0;
        for (std::uint64_t k = c * per; k < (c + 1) * per; ++k) {
            censored += !entrance[k].hit() + !returns[k].hit();
            add_return_row(samples, seed, p.eps, "entrance", entrance[k], static_cast<double>(centers[c].cap));
        }
        for (std::uint64_t k = c * per; k < (c + 1) * per; ++k)
            add_return_row(samples, seed, p.eps, "return", returns[k], static_cast<double>(centers[c].cap));
        const Center& cc = centers[c];
        per_center.add({format_number(c), format_number(cc.m.obstacle), format_number(cc.m.r), format_number(cc.m.phi),
                        format_number(cc.mass), format_number(cc.cap),
                        format_number(ks_survival(SurvivalCurve(e), reference, upper).statistic),
                        format_number(ks_survival(SurvivalCurve(r), reference, upper).statistic),
                        format_number(censored)});
    }
    v.tables.push_back(std::move(samples));
    v.tables.push_back(std::move(per_center));
    v.tables.push_back(curve_table("curve_entrance", ent_curve, reference, upper));
    v.tables.push_back(curve_table("curve_return", ret_curve, reference, upper));

    std::uint64_t events = 0;
    for (const auto& o : entrance) events += o.collisions_traversed;
    for (const auto& o : returns) events += o.collisions_traversed;
    v.statistics = {{"ks_entrance", to_json(ks_ent, ent_values.size())},
                    {"ks_return", to_json(ks_ret, ret_values.size())},
                    {"ball_measure", "exact clipped mu-bar(B)"},
                    {"events", events}};
    v.pass = ks_ent.statistic < p.ks_max && ks_ret.statistic < p.ks_max;
    return v;
}

Verdict exp_mixture_law(const MixtureParams& p, std::uint64_t seed, const ScattererConfig& config, int workers) {
    Verdict v;
    v.name = "mixture-law";
    v.parameters = {{"eps", p.eps},       {"samples", p.samples}, {"cap_scale", p.cap_scale},
                    {"ks_max", p.ks_max}, {"max_cap", p.max_cap}, {"seed", seed}};
    if (!(p.eps < config.min_gap())) throw PreconditionViolation("mixture-law: eps must be below the obstacle gap");
    const double eps2 = p.eps * p.eps;
    const double gamma = config.gamma();
    const double exp_horizon = 10.0;  // transformed cap of the exponential form, where affordable

    struct Sample {
        MapPoint m;
        std::uint64_t cap;
        ReturnOutcome out;
    };
    const auto samples = collect<Sample>(p.samples, workers, [&](std::uint64_t k) {
        Rng rng = sample_rng(seed, "mixture_start", k);
        const MapPoint m = sample_mu_bar_one(rng, config);
        const double rho = mu_bar_density(m, config);
        const double want = std::max(p.cap_scale / eps2, exp_horizon / (4.0 * eps2 * std::max(rho, 1e-300)));
        const auto cap = static_cast<std::uint64_t>(std::min(static_cast<double>(p.max_cap), std::ceil(want)));
        return Sample{m, cap, return_time_map(m, p.eps, cap, true, config)};
    });

    std::vector<CensoredValue> a, b;
    std::vector<double> a_caps, b_caps;
    Table raw = return_table();
    std::uint64_t events = 0;
    for (const auto& s : samples) {
        const double scale_a = 4.0 * eps2 * mu_bar_density(s.m, config);
        a.push_back({scale_a * s.out.value, !s.out.hit()});
        b.push_back({eps2 * s.out.value, !s.out.hit()});
        a_caps.push_back(scale_a * static_cast<double>(s.cap));
        b_caps.push_back(eps2 * static_cast<double>(s.cap));
        add_return_row(raw, seed, p.eps, "w_bar", s.out, static_cast<double>(s.cap));
        events += s.out.collisions_traversed;
    }
    require_observable(a, 3.0, "mixture-law exponential form");
    require_observable(b, 3.0, "mixture-law mixture form");
    auto ref_a = [](double t) { return std::exp(-t); };
    auto ref_b = [gamma](double t) { return mixture_survival(t, gamma); };
    const SurvivalCurve curve_a(a), curve_b(b);
    const double upper_a = min_cap(a_caps);
    const double upper_b = min_cap(b_caps);
    const KsResult ks_a = ks_survival(curve_a, ref_a, upper_a);
    const KsResult ks_b = ks_survival(curve_b, ref_b, upper_b);

    v.tables.push_back(std::move(raw));
    v.tables.push_back(curve_table("curve_exponential", curve_a, ref_a, std::min(upper_a, 10.0)));
    v.tables.push_back(curve_table("curve_mixture", curve_b, ref_b, std::min(upper_b, 50.0)));
    v.statistics = {{"ks_exponential", to_json(ks_a, a.size())},
                    {"ks_mixture", to_json(ks_b, b.size())},
                    {"events", events}};
    v.pass = ks_a.statistic < p.ks_max && ks_b.statistic < p.ks_max;
    return v;
}

Verdict exp_position_return_law(const PositionReturnParams& p, std::uint64_t seed, const SigmaFixture& fixture,
                                const ScattererConfig& config, int workers) {
    Verdict v;
    v.name = "position-return";
    v.parameters = {{"eps", p.eps},
                    {"scaling_eps", p.scaling_eps},
                    {"samples", p.samples},
                    {"time_cap", p.time_cap},
                    {"ks_max", p.ks_max},
                    {"beta1", fixture.beta.beta1},
                    {"seed", seed}};
    std::vector<double> eps_list{p.eps};
    for (double e : p.scaling_eps)
        if (std::find(eps_list.begin(), eps_list.end(), e) == eps_list.end()) eps_list.push_back(e);

    const auto outcomes = collect<std::vector<ReturnOutcome>>(p.samples, workers, [&](std::uint64_t k) {
        Rng rng = sample_rng(seed, "position_start", k);
        return flow_returns(sample_free_phase(rng, config), ReturnKind::Position, eps_list, p.time_cap, config);
    });

    std::vector<std::size_t> order(eps_list.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eps_list[a] < eps_list[b]; });

    bool brackets = true, monotone = true;
    std::uint64_t events = 0, trivial = 0;
    Table raw = return_table();
    std::vector<std::vector<CensoredValue>> logs(eps_list.size());
    for (const auto& row : outcomes) {
        trivial += row[0].hit() && row[0].value == p.eps;
        for (std::size_t i = 0; i < eps_list.size(); ++i) {
            brackets = brackets && bracketed(row[i], config);
            add_return_row(raw, seed, eps_list[i], "position", row[i], p.time_cap);
            logs[i].push_back({std::log(row[i].value), !row[i].hit()});
        }
        for (std::size_t a = 0; a + 1 < order.size(); ++a)
            monotone = monotone && monotone_pair(row[order[a]], eps_list[order[a + 1]], row[order[a + 1]]);
        std::uint64_t most = 0;
        for (const auto& r : row) most = std::max(most, r.collisions_traversed);
        events += most;
    }

    std::vector<CensoredValue> scaled;
    for (const auto& l : logs[0]) scaled.push_back({p.eps * l.value, l.censored});
    require_observable(scaled, std::min(3.0, p.eps * std::log(p.time_cap)), "position-return");
    const double beta1 = fixture.beta.beta1;
    auto reference = [beta1](double t) { return 1.0 / (1.0 + beta1 * t); };
    const double upper = p.eps * std::log(p.time_cap);
    const SurvivalCurve curve(scaled);
    const KsResult ks = ks_survival(curve, reference, upper);

    Json scaling = Json::array();
    bool scaling_pass = true;
    for (std::size_t i = 0; i < eps_list.size(); ++i)
        for (std::size_t j = 0; j < eps_list.size(); ++j) {
            if (std::abs(eps_list[j] - 0.5 * eps_list[i]) > 1e-12) continue;
            std::size_t ci = 0, cj = 0;
            const double mi = censored_median(logs[i], &ci);
            const double mj = censored_median(logs[j], &cj);
            const double ratio = mj / mi;
            const bool ok = ratio >= p.scaling_lo && ratio <= p.scaling_hi;
            scaling_pass = scaling_pass && ok;
            scaling.push_back({{"eps", eps_list[i]},
                               {"median_log", mi},
                               {"half_eps_median_log", mj},
                               {"ratio", ratio},
                               {"model_ratio", 2.0},
                               {"within", ok}});
        }
    Table medians{"medians", {"epsilon", "median_log_return", "censored", "model_median_log_return"}, {}};
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        std::size_t c = 0;
        const double m = censored_median(logs[i], &c);
        medians.add({format_number(eps_list[i]), format_number(m), format_number(static_cast<std::uint64_t>(c)),
                     format_number(1.0 / (beta1 * eps_list[i]))});
    }

    v.tables.push_back(std::move(raw));
    v.tables.push_back(curve_table("curve", curve, reference, upper));
    v.tables.push_back(std::move(medians));
    v.statistics = {{"ks", to_json(ks, scaled.size())},
                    {"bracketing", brackets},
                    {"monotone", monotone},
                    {"scaling", scaling},
                    {"scaling_within_band", scaling_pass},
                    {"returns_at_eps", trivial},
                    {"events", events}};
    v.pass = ks.statistic < p.ks_max && brackets && monotone;
    return v;
}

Verdict exp_phase_return_law(const PhaseReturnParams& p, std::uint64_t seed, const SigmaFixture& fixture,
                             const ScattererConfig& config, int workers) {
    Verdict v;
    v.name = "phase-return";
    v.parameters = {{"eps", p.eps},         {"eps_outer", p.eps_outer}, {"samples", p.samples},
                    {"time_cap", p.time_cap}, {"grid", {p.grid_lo, p.grid_hi, p.grid_step}},
                    {"tolerance", p.tolerance}, {"beta0", fixture.beta.beta0}, {"seed", seed}};
    const double upper = p.eps * p.eps * std::log(p.time_cap);
    if (p.grid_hi > upper) {
        std::ostringstream os;
        os << "phase-return: grid end " << p.grid_hi << " beyond the reachable range " << upper;
        throw PreconditionViolation(os.str());
    }
    const std::vector<double> eps_list{p.eps, p.eps_outer};
    const auto outcomes = collect<std::vector<ReturnOutcome>>(p.samples, workers, [&](std::uint64_t k) {
        Rng rng = sample_rng(seed, "phase_start", k);
        return flow_returns(sample_free_phase(rng, config), ReturnKind::Phase, eps_list, p.time_cap, config);
    });

    bool brackets = true, monotone = true;
    std::uint64_t events = 0, trivial = 0;
    Table raw = return_table();
    std::vector<CensoredValue> scaled;
    const double eps2 = p.eps * p.eps;
    for (const auto& row : outcomes) {
        trivial += row[0].hit() && row[0].value == p.eps;
        for (std::size_t i = 0; i < 2; ++i) {
            brackets = brackets && bracketed(row[i], config);
            add_return_row(raw, seed, eps_list[i], "phase", row[i], p.time_cap);
        }
        if (p.eps < p.eps_outer) monotone = monotone && monotone_pair(row[0], p.eps_outer, row[1]);
        else monotone = monotone && monotone_pair(row[1], p.eps, row[0]);
        scaled.push_back({eps2 * std::log(row[0].value), !row[0].hit()});
        events += std::max(row[0].collisions_traversed, row[1].collisions_traversed);
    }
    require_observable(scaled, 3.0, "phase-return");
    const double beta0 = fixture.beta.beta0;
    auto reference = [beta0](double t) { return 1.0 / (1.0 + beta0 * t); };
    const SurvivalCurve curve(scaled);

    Table grid{"grid", {"t", "empirical", "reference", "deviation"}, {}};
    double worst = 0.0, worst_at = p.grid_lo;
    const int steps = static_cast<int>(std::floor((p.grid_hi - p.grid_lo) / p.grid_step + 1e-9));
    for (int i = 0; i <= steps; ++i) {
        const double t = p.grid_lo + i * p.grid_step;
        const double e = curve(t), r = reference(t);
        grid.add({format_number(t), format_number(e), format_number(r), format_number(e - r)});
        if (std::abs(e - r) > worst) {
            worst = std::abs(e - r);
            worst_at = t;
        }
    }
    const KsResult ks = ks_survival(curve, reference, upper);

    v.tables.push_back(std::move(raw));
    v.tables.push_back(curve_table("curve", curve, reference, upper));
    v.tables.push_back(std::move(grid));
    v.statistics = {{"max_pointwise_deviation", worst},
                    {"at", worst_at},
                    {"reachable_range", upper},
                    {"ks_reachable", to_json(ks, scaled.size())},
                    {"bracketing", brackets},
                    {"monotone", monotone},
                    {"returns_at_eps", trivial},
                    {"events", events}};
    v.pass = worst < p.tolerance && brackets && monotone;
    return v;
}

Verdict exp_recurrence_rates(const RatesParams& p, std::uint64_t seed, const ScattererConfig& config, int workers,
                             const SigmaFixture* fixture) {
    Verdict v;
    v.name = "rates";
    v.parameters = {{"eps", p.eps},
                    {"samples", p.samples},
                    {"cap_scale", p.cap_scale},
                    {"band", {p.band_lo, p.band_hi}},
                    {"max_slope", p.max_slope},
                    {"extended_samples", p.extended_samples},
                    {"extended_cap", p.extended_cap},
                    {"position_eps", p.position_eps},
                    {"position_samples", p.position_samples},
                    {"position_time_cap", p.position_time_cap},
                    {"seed", seed}};
    for (std::size_t i = 0; i + 1 < p.eps.size(); ++i)
        if (!(p.eps[i + 1] < p.eps[i])) throw PreconditionViolation("rates: eps must be strictly decreasing");

    Table raw = return_table();
    Table summary{"rates",
                  {"variant", "epsilon", "samples", "uncensored", "median_statistic", "model_statistic"},
                  {}};
    std::vector<double> xs, medians;
    bool in_band = true;
    std::uint64_t events = 0;

    // gated: log W-bar / (-log eps) on matched mu-bar starts
    for (double eps : p.eps) {
        const auto cap = static_cast<std::uint64_t>(std::ceil(p.cap_scale / (eps * eps)));
        const auto out = collect<ReturnOutcome>(p.samples, workers, [&](std::uint64_t k) {
            Rng rng = sample_rng(seed, "rates_start", k);
            return return_time_map(sample_mu_bar_one(rng, config), eps, cap, true, config);
        });
        std::vector<CensoredValue> stat;
        std::uint64_t hits = 0;
        for (const auto& o : out) {
            add_return_row(raw, seed, eps, "w_bar", o, static_cast<double>(cap));
            stat.push_back({std::log(o.value) / -std::log(eps), !o.hit()});
            hits += o.hit();
            events += o.collisions_traversed;
        }
        if (hits < p.min_uncensored) {
            std::ostringstream os;
            os << "InsufficientUncensored: rates eps=" << eps << " has " << hits << " uncensored samples";
            throw InsufficientUncensored(os.str());
        }
        const double m = censored_median(stat);
        in_band = in_band && m >= p.band_lo && m <= p.band_hi;
        xs.push_back(-std::log(eps));
        medians.push_back(m);
        summary.add({"w_bar", format_number(eps), format_number(p.samples), format_number(hits), format_number(m), ""});
    }
    const LinearFit trend = linear_fit(xs, medians);
    const bool flat = std::abs(trend.slope) <= p.max_slope;

    // sanity row: the diameter orbit of obstacle 0 returns after two steps
    MapPoint periodic;
    periodic.obstacle = 0;
    for (double eps : p.eps) {
        const ReturnOutcome o = return_time_map(periodic, eps, 10, true, config);
        summary.add({"periodic", format_number(eps), "1", format_number(static_cast<std::uint64_t>(o.hit())),
                     format_number(std::log(o.value) / -std::log(eps)), format_number(std::log(2.0) / -std::log(eps))});
    }

    // diagnostics: log log W / (-log eps) on the extended map
    Json extended = Json::array();
    for (double eps : p.eps) {
        const auto out = collect<ReturnOutcome>(p.extended_samples, workers, [&](std::uint64_t k) {
            Rng rng = sample_rng(seed, "rates_start", k);
            return return_time_map(sample_mu_bar_one(rng, config), eps, p.extended_cap, false, config);
        });
        std::vector<double> stat;
        for (const auto& o : out) {
            add_return_row(raw, seed, eps, "w", o, static_cast<double>(p.extended_cap));
            events += o.collisions_traversed;
            if (o.hit() && o.value > 1.0) stat.push_back(std::log(std::log(o.value)) / -std::log(eps));
        }
        const bool reachable = stat.size() >= p.min_uncensored && 2 * stat.size() > out.size();
        const double m = reachable ? median(stat) : std::nan("");
        extended.push_back({{"eps", eps}, {"uncensored", stat.size()}, {"reachable", reachable}});
        summary.add({"w", format_number(eps), format_number(p.extended_samples),
                     format_number(static_cast<std::uint64_t>(stat.size())), format_number(m), ""});
    }

    // diagnostics: flow position returns, extended and modulo Z^2, on matched starts
    const auto flows = collect<std::pair<std::vector<ReturnOutcome>, std::vector<ReturnOutcome>>>(
        p.position_samples, workers, [&](std::uint64_t k) {
            Rng rng = sample_rng(seed, "rates_flow_start", k);
            const PhasePoint x = sample_free_phase(rng, config);
            return std::make_pair(
                flow_returns(x, ReturnKind::Position, p.position_eps, p.position_time_cap, config),
                flow_returns(x, ReturnKind::PositionModulo, p.position_eps, p.position_time_cap, config));
        });
    bool dominance = true;
    Json position = Json::array();
    for (std::size_t i = 0; i < p.position_eps.size(); ++i) {
        const double eps = p.position_eps[i];
        std::vector<double> ext, mod;
        for (const auto& [e, m] : flows) {
            add_return_row(raw, seed, eps, "position", e[i], p.position_time_cap);
            add_return_row(raw, seed, eps, "position_modulo", m[i], p.position_time_cap);
            events += e[i].collisions_traversed + m[i].collisions_traversed;
            if (e[i].hit() && m[i].hit()) dominance = dominance && m[i].value <= e[i].value;
            if (e[i].hit() && e[i].value > 1.0) ext.push_back(std::log(std::log(e[i].value)) / -std::log(eps));
            if (m[i].hit()) mod.push_back(std::log(m[i].value) / -std::log(eps));
        }
        const bool ext_ok = ext.size() >= p.min_uncensored && 2 * ext.size() > flows.size();
        const bool mod_ok = mod.size() >= p.min_uncensored && 2 * mod.size() > flows.size();
        const double ext_median = ext_ok ? median(ext) : std::nan("");
        const double mod_median = mod_ok ? median(mod) : std::nan("");
        // log Z ~ Y1 / eps with median(Y1) = 1 / beta1
        const double model =
            fixture ? std::log(1.0 / (fixture->beta.beta1 * eps)) / -std::log(eps) : std::nan("");
        summary.add({"position_loglog", format_number(eps), format_number(p.position_samples),
                     format_number(static_cast<std::uint64_t>(ext.size())), format_number(ext_median),
                     format_number(model)});
        summary.add({"position_modulo_log", format_number(eps), format_number(p.position_samples),
                     format_number(static_cast<std::uint64_t>(mod.size())), format_number(mod_median), ""});
        position.push_back({{"eps", eps}, {"loglog_median", ext_median}, {"modulo_log_median", mod_median}});
    }

    v.tables.push_back(std::move(raw));
    v.tables.push_back(std::move(summary));
    v.statistics = {{"w_bar_medians", medians},
                    {"w_bar_in_band", in_band},
                    {"trend_slope", trend.slope},
                    {"trend_slope_std_error", trend.slope_std_error},
                    {"trend_intercept", trend.intercept},
                    {"flat", flat},
                    {"extended_map", extended},
                    {"position", position},
                    {"quotient_dominance", dominance},
                    {"events", events}};
    v.pass = in_band && flat;
    return v;
}

}  // namespace lorentz
