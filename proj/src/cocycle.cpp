#include "lorentz/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lorentz/errors.hpp"
#include "lorentz/parallel.hpp"

namespace lorentz {

namespace {

struct Sym2Moments {
    Moments xx;
    Moments xy;
    Moments yy;

    void add(double a, double b, double c) {
        xx.add(a);
        xy.add(b);
        yy.add(c);
    }
    Sym2Moments& operator+=(const Sym2Moments& o) {
        xx += o.xx;
        xy += o.xy;
        yy += o.yy;
        return *this;
    }
    [[nodiscard]] Sym2 mean() const { return {xx.mean(), xy.mean(), yy.mean()}; }
    [[nodiscard]] Sym2 half_width() const { return {xx.half_width(), xy.half_width(), yy.half_width()}; }
};

std::string describe(const Sym2& s) {
    std::ostringstream os;
    os << "[[" << s.xx << ", " << s.xy << "], [" << s.xy << ", " << s.yy << "]]";
    return os.str();
}

}  // namespace

Cell birkhoff_kappa(const MapPoint& m, std::uint64_t n, const ScattererConfig& config) {
    MapWalker w(m, config);
    Cell sum{};
    for (std::uint64_t k = 0; k < n; ++k) {
        w.step();
        sum += w.last_kappa();
    }
    return sum;
}

double CenteringResult::max_z() const {
    const double zx = std_error.x > 0.0 ? std::abs(mean.x) / std_error.x : 0.0;
    const double zy = std_error.y > 0.0 ? std::abs(mean.y) / std_error.y : 0.0;
    return std::max(zx, zy);
}

CenteringResult check_centering(std::uint64_t samples, std::uint64_t n, std::uint64_t seed,
                                const ScattererConfig& config, int workers) {
    if (n == 0) throw LorentzError("check_centering: n must be >= 1");
    struct Part {
        Moments x, y;
        Part& operator+=(const Part& o) {
            x += o.x;
            y += o.y;
            return *this;
        }
    };
    const Part total = reduce_blocks<Part>(samples, workers, [&](std::uint64_t begin, std::uint64_t end) {
        Part p;
        for (std::uint64_t k = begin; k < end; ++k) {
            Rng rng = sample_rng(seed, "centering", k);
            const Cell s = birkhoff_kappa(sample_mu_bar_one(rng, config), n, config);
            p.x.add(static_cast<double>(s.x) / static_cast<double>(n));
            p.y.add(static_cast<double>(s.y) / static_cast<double>(n));
        }
        return p;
    });
    CenteringResult out;
    out.samples = samples;
    out.steps = n;
    out.mean = {total.x.mean(), total.y.mean()};
    out.std_error = {total.x.std_error(), total.y.std_error()};
    out.half_width = {total.x.half_width(), total.y.half_width()};
    out.pass = std::abs(out.mean.x) <= out.half_width.x && std::abs(out.mean.y) <= out.half_width.y;
    return out;
}

CovarianceEstimate estimate_sigma2(std::uint64_t n, std::uint64_t samples, std::uint64_t seed, CovarianceMethod method,
                                   const ScattererConfig& config, int workers) {
    if (n == 0 || samples < 2) throw LorentzError("estimate_sigma2: need n >= 1 and samples >= 2");
    CovarianceEstimate out;
    out.n_horizon = n;
    out.sample_count = samples;
    out.method = method;

    if (method == CovarianceMethod::Direct) {
        struct Part {
            Sym2Moments prod;
            Moments sx, sy;
            Part& operator+=(const Part& o) {
                prod += o.prod;
                sx += o.sx;
                sy += o.sy;
                return *this;
            }
        };
        const double inv_n = 1.0 / static_cast<double>(n);
        const Part total = reduce_blocks<Part>(samples, workers, [&](std::uint64_t begin, std::uint64_t end) {
            Part p;
            for (std::uint64_t k = begin; k < end; ++k) {
                Rng rng = sample_rng(seed, "sigma2_direct", k);
                const Cell s = birkhoff_kappa(sample_mu_bar_one(rng, config), n, config);
                const double x = static_cast<double>(s.x);
                const double y = static_cast<double>(s.y);
                p.prod.add(x * x * inv_n, x * y * inv_n, y * y * inv_n);
                p.sx.add(x);
                p.sy.add(y);
            }
            return p;
        });
        const Sym2 second = total.prod.mean();
        const double mx = total.sx.mean(), my = total.sy.mean();
        out.sigma2 = {second.xx - mx * mx * inv_n, second.xy - mx * my * inv_n, second.yy - my * my * inv_n};
        out.half_widths = total.prod.half_width();
    } else {
        // Per start: kappa_0 .. kappa_n. Lag products use the start only, so
        // samples stay independent and the running Green-Kubo partial sums
        // f_J have plain i.i.d. confidence intervals.
        const std::size_t lags = static_cast<std::size_t>(n) + 1;
        struct Part {
            std::vector<Moments> cxx, cxy, cyx, cyy;  // lag products
            std::vector<Sym2Moments> partial;         // f_J
            Moments mx, my;
            Part& operator+=(const Part& o) {
                if (cxx.empty()) {
                    *this = o;
                    return *this;
                }
                for (std::size_t j = 0; j < cxx.size(); ++j) {
                    cxx[j] += o.cxx[j];
                    cxy[j] += o.cxy[j];
                    cyx[j] += o.cyx[j];
                    cyy[j] += o.cyy[j];
                    partial[j] += o.partial[j];
                }
                mx += o.mx;
                my += o.my;
                return *this;
            }
        };
        const Part total = reduce_blocks<Part>(samples, workers, [&](std::uint64_t begin, std::uint64_t end) {
            Part p;
            p.cxx.resize(lags);
            p.cxy.resize(lags);
            p.cyx.resize(lags);
            p.cyy.resize(lags);
            p.partial.resize(lags);
            for (std::uint64_t k = begin; k < end; ++k) {
                Rng rng = sample_rng(seed, "sigma2_green_kubo", k);
                MapWalker w(sample_mu_bar_one(rng, config), config);
                w.step();
                const double x0 = static_cast<double>(w.last_kappa().x);
                const double y0 = static_cast<double>(w.last_kappa().y);
                p.mx.add(x0);
                p.my.add(y0);
                double fxx = x0 * x0, fxy = x0 * y0, fyy = y0 * y0;
                p.cxx[0].add(fxx);
                p.cxy[0].add(fxy);
                p.cyx[0].add(fxy);
                p.cyy[0].add(fyy);
                p.partial[0].add(fxx, fxy, fyy);
                for (std::size_t j = 1; j < lags; ++j) {
                    w.step();
                    const double xj = static_cast<double>(w.last_kappa().x);
                    const double yj = static_cast<double>(w.last_kappa().y);
                    p.cxx[j].add(x0 * xj);
                    p.cxy[j].add(x0 * yj);
                    p.cyx[j].add(y0 * xj);
                    p.cyy[j].add(y0 * yj);
                    fxx += 2.0 * x0 * xj;
                    fxy += x0 * yj + y0 * xj;
                    fyy += 2.0 * y0 * yj;
                    p.partial[j].add(fxx, fxy, fyy);
                }
            }
            return p;
        });
        const double mx = total.mx.mean(), my = total.my.mean();
        out.lag_cov.resize(lags);
        out.lag_cross_yx.resize(lags);
        out.lag_half_widths.resize(lags);
        std::size_t last_signal = 0;
        for (std::size_t j = 0; j < lags; ++j) {
            out.lag_cov[j] = {total.cxx[j].mean() - mx * mx, total.cxy[j].mean() - mx * my,
                              total.cyy[j].mean() - my * my};
            out.lag_cross_yx[j] = total.cyx[j].mean() - my * mx;
            out.lag_half_widths[j] = {total.cxx[j].half_width(), total.cxy[j].half_width(),
                                      total.cyy[j].half_width()};
            const auto above = [](double v, double se) { return se > 0.0 && std::abs(v) > 4.0 * se; };
            if (j > 0 && (above(out.lag_cov[j].xx, total.cxx[j].std_error()) ||
                          above(out.lag_cov[j].xy, total.cxy[j].std_error()) ||
                          above(out.lag_cross_yx[j], total.cyx[j].std_error()) ||
                          above(out.lag_cov[j].yy, total.cyy[j].std_error())))
                last_signal = j;
        }
        // Terms just below the detection threshold still carry signal, so the
        // sum runs to three times the last detectable lag.
        const std::size_t J = std::min(lags - 1, 3 * last_signal + 3);
        out.lags_used = J;
        const Sym2 f = total.partial[J].mean();
        const double terms = static_cast<double>(2 * J + 1);
        out.sigma2 = {f.xx - terms * mx * mx, f.xy - terms * mx * my, f.yy - terms * my * my};
        out.half_widths = total.partial[J].half_width();
    }
    if (!out.sigma2.positive_definite())
        throw NotPositiveDefinite("NotPositiveDefinite: covariance estimate " + describe(out.sigma2));
    return out;
}

BetaConstants beta_constants(const Sym2& sigma2, double gamma) {
    if (!sigma2.positive_definite())
        throw NotPositiveDefinite("NotPositiveDefinite: " + describe(sigma2));
    if (!(gamma > 0.0)) throw LorentzError("beta_constants: gamma must be positive");
    BetaConstants b;
    b.beta = 1.0 / (kTwoPi * std::sqrt(sigma2.det()));
    b.beta0 = 2.0 * b.beta / gamma;
    b.beta1 = kTwoPi * b.beta / gamma;
    return b;
}

std::vector<LltRow> llt_empirical(const std::vector<std::uint64_t>& n_list, const std::vector<Cell>& ell_list,
                                  std::uint64_t samples, std::uint64_t seed, const Sym2& sigma2,
                                  const ScattererConfig& config, int workers) {
    if (n_list.empty() || ell_list.empty()) throw LorentzError("llt_empirical: empty n or l list");
    const BetaConstants bc = beta_constants(sigma2, config.gamma());
    for (std::uint64_t n : n_list) {
        if (n < 100) throw PreconditionViolation("llt_empirical: every n must be >= 100");
        if (bc.beta * static_cast<double>(samples) / static_cast<double>(n) < 100.0) {
            std::ostringstream os;
            os << "llt_empirical: expected hit count beta*samples/n = "
               << bc.beta * static_cast<double>(samples) / static_cast<double>(n) << " < 100 at n=" << n;
            throw PreconditionViolation(os.str());
        }
    }
    std::vector<std::uint64_t> sorted = n_list;
    std::sort(sorted.begin(), sorted.end());
    const std::uint64_t n_max = sorted.back();
    const std::size_t cols = ell_list.size();

    struct Part {
        std::vector<std::uint64_t> hits;
        Part& operator+=(const Part& o) {
            if (hits.empty()) hits.assign(o.hits.size(), 0);
            for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += o.hits[i];
            return *this;
        }
    };
    const Part total = reduce_blocks<Part>(samples, workers, [&](std::uint64_t begin, std::uint64_t end) {
        Part p;
        p.hits.assign(sorted.size() * cols, 0);
        for (std::uint64_t k = begin; k < end; ++k) {
            Rng rng = sample_rng(seed, "llt", k);
            MapWalker w(sample_mu_bar_one(rng, config), config);
            Cell s{};
            std::size_t next = 0;
            for (std::uint64_t step = 1; step <= n_max; ++step) {
                w.step();
                s += w.last_kappa();
                while (next < sorted.size() && sorted[next] == step) {
                    for (std::size_t c = 0; c < cols; ++c)
                        if (s == ell_list[c]) ++p.hits[next * cols + c];
                    ++next;
                }
            }
        }
        return p;
    });

    std::vector<LltRow> rows;
    for (std::uint64_t n : n_list) {
        const std::size_t idx = static_cast<std::size_t>(std::find(sorted.begin(), sorted.end(), n) - sorted.begin());
        for (std::size_t c = 0; c < cols; ++c) {
            LltRow row;
            row.n = n;
            row.ell = ell_list[c];
            row.samples = samples;
            row.hits = total.hits[idx * cols + c];
            if (row.hits < 20) {
                std::ostringstream os;
                os << "InsufficientHits: n=" << n << " l=(" << row.ell.x << "," << row.ell.y << ") only " << row.hits
                   << " hits";
                throw InsufficientHits(os.str());
            }
            row.empirical = static_cast<double>(row.hits) / static_cast<double>(samples);
            row.ci = wilson_interval(row.hits, samples);
            const double q = sigma2.inverse_form(static_cast<double>(row.ell.x), static_cast<double>(row.ell.y));
            row.predicted = bc.beta * std::exp(-q / (2.0 * static_cast<double>(n))) / static_cast<double>(n);
            row.ratio = row.empirical / row.predicted;
            row.ratio_ci = {row.ci.lo / row.predicted, row.ci.hi / row.predicted};
            rows.push_back(row);
        }
    }
    return rows;
}

DecayReport correlation_decay(const CovarianceEstimate& gk, std::uint64_t by_lag, double floor_sigmas) {
    if (gk.method != CovarianceMethod::GreenKubo || gk.lag_cov.size() < 2)
        throw LorentzError("correlation_decay needs a Green-Kubo estimate with lags");
    DecayReport r;
    const std::size_t lags = gk.lag_cov.size();
    r.cov.resize(lags);
    r.half_width.resize(lags);
    for (std::size_t j = 0; j < lags; ++j) {
        r.cov[j] = gk.lag_cov[j].xx;
        r.half_width[j] = gk.lag_half_widths[j].xx;
    }
    auto below = [&](std::size_t j) {
        const double se = r.half_width[j] / kZ95;
        return std::abs(r.cov[j]) <= floor_sigmas * se;
    };
    // monotone envelope: the first lag from which everything stays below the floor
    std::size_t from = lags;
    while (from > 1 && below(from - 1)) --from;
    r.decorrelated_from = from;
    std::vector<double> xs, ys;
    for (std::size_t j = 1; j < from; ++j) {
        if (r.cov[j] == 0.0 || below(j)) continue;
        xs.push_back(static_cast<double>(j));
        ys.push_back(std::log(std::abs(r.cov[j])));
    }
    if (xs.size() >= 2) r.fitted_rate = -linear_fit(xs, ys).slope;
    r.pass = from <= by_lag;
    return r;
}

}  // namespace lorentz
