#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lorentz/billiard_map.hpp"
#include "lorentz/stats.hpp"

namespace lorentz {

/// Outcome of a return- or hitting-time computation.
///
/// For flow-level times `collisions_traversed` counts the reflections strictly
/// before the returned time; for map-level times it is the iterate count.
struct ReturnOutcome {
    enum class Kind { Hit, Censored };
    Kind kind{Kind::Censored};
    double value{0.0};  ///< time or iterate (Hit), cap (Censored)
    std::uint64_t collisions_traversed{0};

    [[nodiscard]] bool hit() const { return kind == Kind::Hit; }
    static ReturnOutcome make_hit(double v, std::uint64_t c) { return {Kind::Hit, v, c}; }
    static ReturnOutcome make_censored(double cap, std::uint64_t c) { return {Kind::Censored, cap, c}; }
};

/// A target set on the section.
///
/// MapBall: points within eps of a centre in the map metric. The two segment
/// kinds test the flight leaving psi(m): FlowBallProjection asks whether the
/// flight passes through the phase ball B(x, eps) (the projection of the ball
/// onto the base), PositionTube whether it passes within eps of q (or of some
/// q + l when `modulo`).
class TargetSet {
public:
    enum class Kind { MapBall, FlowBallProjection, PositionTube, Predicate };

    static TargetSet map_ball(const MapPoint& center, double eps, bool quotient);
    static TargetSet flow_ball_projection(const PhasePoint& x, double eps);
    static TargetSet position_tube(Vec2 q, double eps, bool modulo);
    static TargetSet predicate(std::function<bool(const MapPoint&)> test);

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double eps() const { return eps_; }
    [[nodiscard]] bool quotient() const { return quotient_; }
    [[nodiscard]] const MapPoint& center() const { return center_; }
    [[nodiscard]] const PhasePoint& phase_center() const { return phase_; }

    /// Membership of a section point. Segment kinds cast the flight of m.
    [[nodiscard]] bool contains(const MapPoint& m, const ScattererConfig& config) const;
    /// Membership from a flight segment (segment kinds only): start point in
    /// the plane, unit direction, length.
    [[nodiscard]] bool segment_enters(Vec2 start, Vec2 dir, double length) const;

private:
    Kind kind_{Kind::Predicate};
    double eps_{0.0};
    bool quotient_{false};
    MapPoint center_{};
    PhasePoint phase_{};
    std::function<bool(const MapPoint&)> test_;
};

/// First n in [1, cap] with T^n m in the target (T-bar^n for quotient targets).
ReturnOutcome hitting_time(const MapPoint& m, const TargetSet& target, std::uint64_t cap, const ScattererConfig& config);

/// W_eps (extended, same cell required) or W-bar_eps (quotient).
ReturnOutcome return_time_map(const MapPoint& m, double eps, std::uint64_t cap, bool quotient,
                              const ScattererConfig& config);

/// Z_eps(x) = inf{t > eps : d(Phi_t x, x) < eps}, exact per flight segment.
ReturnOutcome flow_return_phase(const PhasePoint& x, double eps, double time_cap, const ScattererConfig& config);

/// Position return inf{t > eps : |q(t) - q0| < eps}; with `modulo` any
/// lattice translate q0 + l counts.
ReturnOutcome flow_return_position(const PhasePoint& x, double eps, double time_cap, bool modulo,
                                   const ScattererConfig& config);

enum class ReturnKind { Phase, Position, PositionModulo };

/// Several radii on one trajectory in a single pass; the pass ends when every
/// radius is resolved or the time cap is reached. Results follow `eps_list`.
std::vector<ReturnOutcome> flow_returns(const PhasePoint& x, ReturnKind kind, const std::vector<double>& eps_list,
                                        double time_cap, const ScattererConfig& config);

/// The backward projection of B(q, eps) x S^1 onto the section.
/// Throws BallTouchesBoundary unless eps < d(q, dQ).
TargetSet target_A_eps(Vec2 q, double eps, bool modulo, const ScattererConfig& config);

struct MeasureEstimate {
    double estimate{0.0};
    double half_width{0.0};  ///< 95%
    double prediction{0.0};
    double ratio{0.0};
    std::uint64_t samples{0};
    std::uint64_t members{0};
    double sampled_mass{0.0};      ///< arc length the boundary samples were drawn from
    double quotient_estimate{0.0};   ///< estimate / (2 Gamma)
    double quotient_prediction{0.0};
};

/// Monte Carlo estimate of mu(pi psi^{-1} B(x, eps)), predicted 4 eps^2.
MeasureEstimate measure_projected_phase_ball(const PhasePoint& x, double eps, std::uint64_t samples,
                                             std::uint64_t seed, const ScattererConfig& config, int workers = 0);

/// Monte Carlo estimate of mu(A_eps(q)), predicted 4 pi eps; the quotient
/// fields hold mu-bar values 2 pi eps / Gamma.
MeasureEstimate measure_A_eps(Vec2 q, double eps, std::uint64_t samples, std::uint64_t seed,
                              const ScattererConfig& config, int workers = 0);

/// Exact mu-bar measure of the map ball B(m, eps): arc window of length 2 eps
/// times the integral of cos(phi) / (2 Gamma) over the clipped angle window.
double mu_bar_ball(const MapPoint& m, double eps, const ScattererConfig& config);

}  // namespace lorentz
