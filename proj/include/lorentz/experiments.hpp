#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lorentz/cocycle.hpp"
#include "lorentz/recurrence.hpp"
#include "lorentz/table.hpp"

namespace lorentz {

using Json = nlohmann::ordered_json;

/// Outcome of one named experiment: parameters, summary statistics, the
/// overall verdict and the tables written next to it.
struct Verdict {
    std::string name;
    Json parameters = Json::object();
    Json statistics = Json::object();
    bool pass{false};
    std::vector<Table> tables;
};

struct InvarianceParams {
    std::uint64_t samples{1'000'000};
    std::uint64_t map_steps{5};
    int arc_bins{20};
    int sine_bins{20};
    double flow_time{3.0};
    int spatial_bins{10};
    int angle_bins{8};
    double level{0.99};
};

struct CenteringParams {
    std::uint64_t samples{1'000'000};
    std::uint64_t n{1};
    double max_z{3.5};
};

struct MeasureParams {
    std::vector<double> eps{0.02, 0.05, 0.1};
    std::uint64_t samples{1'000'000};
    Vec2 center{0.5, 0.0};
    double direction{1.25};  ///< angle of the phase-ball velocity
    double tolerance{0.05};
};

struct CovarianceParams {
    std::uint64_t fixture_n{1000};
    std::vector<std::uint64_t> stability_n{500, 2000};
    std::uint64_t samples{1'000'000};
    std::uint64_t max_lag{100};
};

struct LltParams {
    std::vector<std::uint64_t> n{200, 400, 800, 1600};
    std::vector<Cell> ell{Cell{0, 0}, Cell{1, 0}, Cell{-1, 0}, Cell{0, 1}};
    std::uint64_t samples{1'000'000};
    double band{0.15};
    double flatness{0.20};
};

struct ExpLawParams {
    std::uint64_t centers{50};
    double eps{0.02};
    std::uint64_t samples_per_center{2000};
    double cap_scale{10.0};  ///< cap = cap_scale / mu-bar(B)
    double ks_max{0.05};
};

struct MixtureParams {
    double eps{0.02};
    std::uint64_t samples{10'000};
    double cap_scale{50.0};  ///< transformed caps are at least this for eps^2 W
    double ks_max{0.05};
    std::uint64_t max_cap{1'000'000'000};
};

struct PositionReturnParams {
    double eps{0.25};
    std::vector<double> scaling_eps{0.3, 0.15, 0.125};
    std::uint64_t samples{10'000};
    double time_cap{1e6};
    double ks_max{0.1};
    double scaling_lo{1.6};
    double scaling_hi{2.4};
};

struct PhaseReturnParams {
    double eps{0.35};
    double eps_outer{0.4};
    std::uint64_t samples{10'000};
    double time_cap{1e7};
    double grid_lo{0.2};
    double grid_hi{1.5};
    double grid_step{0.05};
    double tolerance{0.03};
};

struct RatesParams {
    std::vector<double> eps{0.04, 0.02, 0.01, 0.005};
    std::uint64_t samples{2000};
    double cap_scale{200.0};  ///< map cap = cap_scale / eps^2
    double band_lo{1.7};
    double band_hi{2.3};
    double max_slope{0.1};
    std::uint64_t min_uncensored{30};
    std::uint64_t extended_samples{200};
    std::uint64_t extended_cap{100'000};
    std::vector<double> position_eps{0.3, 0.25, 0.2, 0.15};
    std::uint64_t position_samples{1000};
    double position_time_cap{1e5};
};

struct DecayParams {
    std::uint64_t samples{1'000'000};
    std::uint64_t max_lag{100};
    std::uint64_t by_lag{50};
};

struct ExperimentParams {
    InvarianceParams invariance;
    CenteringParams centering;
    MeasureParams measures;
    CovarianceParams covariance;
    LltParams llt;
    ExpLawParams exp_law;
    MixtureParams mixture_law;
    PositionReturnParams position_return;
    PhaseReturnParams phase_return;
    RatesParams rates;
    DecayParams decay;
};

/// The covariance fixture consumed by the LLT and the flow return laws.
struct SigmaFixture {
    Sym2 sigma2;
    Sym2 half_widths;
    std::uint64_t n{0};
    std::uint64_t samples{0};
    std::uint64_t seed{0};
    double gamma{0.0};
    BetaConstants beta;
};

/// Survival of the mixture law, integral of exp(-4 t rho) d mu-bar, by Simpson quadrature over phi.
double mixture_survival(double t, double gamma, int intervals = 10'000);

/// Free area of [x0, x1] x [y0, y1] inside the unit cell (quadrature over x).
double free_area(const ScattererConfig& config, double x0, double x1, double y0, double y1, int intervals = 4000);

/// Uniform point of the free cell times a uniform direction.
PhasePoint sample_free_phase(Rng& rng, const ScattererConfig& config);

Verdict exp_invariance(const InvarianceParams& p, std::uint64_t seed, const ScattererConfig& config, int workers);
Verdict exp_centering(const CenteringParams& p, std::uint64_t seed, const ScattererConfig& config, int workers);
Verdict exp_measure_lemmas(const MeasureParams& p, std::uint64_t seed, const ScattererConfig& config, int workers);
/// Direct estimate at the fixture horizon (the fixture), Green-Kubo, and the
/// n-stability runs. `fixture` receives the recorded matrix and constants.
Verdict exp_covariance(const CovarianceParams& p, std::uint64_t seed, const ScattererConfig& config, int workers,
                       SigmaFixture& fixture);
Verdict exp_llt(const LltParams& p, std::uint64_t seed, const SigmaFixture& fixture, const ScattererConfig& config,
                int workers);
Verdict exp_decay(const DecayParams& p, std::uint64_t seed, const ScattererConfig& config, int workers);
Verdict exp_exponential_law(const ExpLawParams& p, std::uint64_t seed, const ScattererConfig& config, int workers);
Verdict exp_mixture_law(const MixtureParams& p, std::uint64_t seed, const ScattererConfig& config, int workers);
Verdict exp_position_return_law(const PositionReturnParams& p, std::uint64_t seed, const SigmaFixture& fixture,
                                const ScattererConfig& config, int workers);
Verdict exp_phase_return_law(const PhaseReturnParams& p, std::uint64_t seed, const SigmaFixture& fixture,
                             const ScattererConfig& config, int workers);
/// The map rate W-bar is gated; the extended map and flow position variants
/// are diagnostics. With a fixture, the flow rows carry the model prediction.
Verdict exp_recurrence_rates(const RatesParams& p, std::uint64_t seed, const ScattererConfig& config, int workers,
                             const SigmaFixture* fixture = nullptr);

}  // namespace lorentz
