#pragma once

#include <cstdint>
#include <vector>

#include "lorentz/billiard_map.hpp"
#include "lorentz/stats.hpp"

namespace lorentz {

/// Symmetric 2x2 matrix.
struct Sym2 {
    double xx{0.0};
    double xy{0.0};
    double yy{0.0};

    [[nodiscard]] double det() const { return xx * yy - xy * xy; }
    [[nodiscard]] bool positive_definite() const { return xx > 0.0 && det() > 0.0; }
    /// Quadratic form of the inverse, l^T S^{-1} l.
    [[nodiscard]] double inverse_form(double lx, double ly) const {
        return (yy * lx * lx - 2.0 * xy * lx * ly + xx * ly * ly) / det();
    }
    Sym2& operator+=(const Sym2& o) {
        xx += o.xx;
        xy += o.xy;
        yy += o.yy;
        return *this;
    }
    [[nodiscard]] Sym2 scaled(double s) const { return {xx * s, xy * s, yy * s}; }
};

/// S_n kappa along the orbit of m under T (equivalently the lifted orbit of T-bar).
Cell birkhoff_kappa(const MapPoint& m, std::uint64_t n, const ScattererConfig& config);

struct CenteringResult {
    Vec2 mean;
    Vec2 std_error;
    Vec2 half_width;   ///< 95%
    std::uint64_t samples{0};
    std::uint64_t steps{0};
    bool pass{false};  ///< 0 inside the 95% interval in both components
    /// Largest |mean| / standard error over the two components.
    [[nodiscard]] double max_z() const;
};

/// Mean of S_n kappa / n over mu-bar starts (n = 1 gives the mean of kappa).
CenteringResult check_centering(std::uint64_t samples, std::uint64_t n, std::uint64_t seed,
                                const ScattererConfig& config, int workers = 0);

enum class CovarianceMethod { Direct, GreenKubo };

struct CovarianceEstimate {
    Sym2 sigma2;
    Sym2 half_widths;  ///< 95% normal-approximation half-widths, componentwise
    std::uint64_t n_horizon{0};
    std::uint64_t sample_count{0};
    CovarianceMethod method{CovarianceMethod::Direct};
    /// Green-Kubo only: number of lags summed, and the lag covariances of
    /// kappa (index j holds cov(kappa, kappa o T^j)) with their half-widths.
    std::uint64_t lags_used{0};
    std::vector<Sym2> lag_cov;
    std::vector<double> lag_cross_yx;  ///< cov(kappa_y, kappa_x o T^j)
    std::vector<Sym2> lag_half_widths;
};

/// Asymptotic covariance of the cell shift.
///
/// Direct: cov(S_n kappa) / n over independent mu-bar starts. Green-Kubo:
/// C_0 + sum_{j=1}^{J} (C_j + C_j^T) from lags up to n, with J the first lag
/// from which every term stays inside its noise band.
CovarianceEstimate estimate_sigma2(std::uint64_t n, std::uint64_t samples, std::uint64_t seed, CovarianceMethod method,
                                   const ScattererConfig& config, int workers = 0);

struct BetaConstants {
    double beta{0.0};
    double beta0{0.0};
    double beta1{0.0};
};

/// beta = 1/(2 pi sqrt(det sigma2)), beta0 = 2 beta / gamma, beta1 = 2 pi beta / gamma.
BetaConstants beta_constants(const Sym2& sigma2, double gamma);

struct LltRow {
    std::uint64_t n{0};
    Cell ell;
    std::uint64_t hits{0};
    std::uint64_t samples{0};
    double empirical{0.0};
    Interval ci;
    double predicted{0.0};
    double ratio{0.0};
    Interval ratio_ci;
};

/// Empirical P(S_n kappa = l) over mu-bar starts against beta exp(-l.S^{-1}l/(2n)) / n.
/// Every n shares the same trajectories (one run to max n per start).
std::vector<LltRow> llt_empirical(const std::vector<std::uint64_t>& n_list, const std::vector<Cell>& ell_list,
                                  std::uint64_t samples, std::uint64_t seed, const Sym2& sigma2,
                                  const ScattererConfig& config, int workers = 0);

struct DecayReport {
    std::vector<double> cov;         ///< cov(f, f o T^j), f = first component of kappa
    std::vector<double> half_width;  ///< 95%
    std::uint64_t decorrelated_from{0};  ///< first lag after which every |cov| stays below the noise floor
    double fitted_rate{0.0};             ///< exponential rate from the lags above the floor
    bool pass{false};
};

/// Correlation decay for f = kappa_x, read off a Green-Kubo estimate. The
/// noise floor of lag j is `floor_sigmas` standard errors.
DecayReport correlation_decay(const CovarianceEstimate& gk, std::uint64_t by_lag, double floor_sigmas = 4.0);

}  // namespace lorentz
