#pragma once

#include <cstdint>
#include <vector>

#include "lorentz/flow.hpp"
#include "lorentz/geometry.hpp"
#include "lorentz/rng.hpp"

namespace lorentz {

/// Poincare-section coordinates (l, i, r, phi).
///
/// r is the counter-clockwise arc length on obstacle i measured from the point
/// center + (radius, 0); phi is the angle of the outgoing velocity with the
/// outward normal, counter-clockwise positive, in [-pi/2, pi/2].
struct MapPoint {
    Cell cell;
    int obstacle{0};
    double r{0.0};
    double phi{0.0};
};

struct SpecialFlowPoint {
    MapPoint base;
    double height{0.0};
};

/// One application of T: new point, free flight and cell shift.
struct MapStep {
    MapPoint next;
    double tau{0.0};
    Cell kappa;
};

/// Unit outward normal at the base point of m.
Vec2 map_normal(const MapPoint& m, const ScattererConfig& config);

PhasePoint psi(const MapPoint& m, const ScattererConfig& config);
/// Inverse of psi. The position is snapped radially onto the nearest circle.
MapPoint psi_inv(const PhasePoint& x, const ScattererConfig& config);

MapStep step_T(const MapPoint& m, const ScattererConfig& config, FlowCounters* counters = nullptr);
/// Quotient map: the cell is treated as (0,0) on input and reduced to (0,0) on output.
MapStep step_Tbar(const MapPoint& m, const ScattererConfig& config, FlowCounters* counters = nullptr);

/// Involution (i, r, phi) -> (i, r, -phi); conjugates Tbar to its inverse.
MapPoint time_reverse(const MapPoint& m);

/// psi extended to the special flow: Phi_s(psi(m)), 0 <= s < tau(psi(m)).
PhasePoint special_flow_lift(const MapPoint& m, double s, const ScattererConfig& config);
/// Base point and height of the flight segment carrying x.
SpecialFlowPoint section_project(const PhasePoint& x, const ScattererConfig& config);

/// Arc distance on the circle of perimeter `perimeter`.
double arc_distance(double r1, double r2, double perimeter);

/// max(arc distance, |dphi|) on the same obstacle (and same cell unless
/// `quotient`); +infinity otherwise.
double map_distance(const MapPoint& a, const MapPoint& b, const ScattererConfig& config, bool quotient);

/// Density of mu-bar, cos(phi) / (2 Gamma).
double mu_bar_density(const MapPoint& m, const ScattererConfig& config);

/// One exact draw from mu-bar (cell (0,0)).
MapPoint sample_mu_bar_one(Rng& rng, const ScattererConfig& config);
/// n i.i.d. draws from mu-bar; draw k uses the counter stream (seed, k).
std::vector<MapPoint> sample_mu_bar(std::uint64_t seed, std::size_t n, const ScattererConfig& config);

/// Incremental iteration of T on a point of the section, keeping the geometric
/// state (normal, velocity) so that no trigonometry is needed per step.
class MapWalker {
public:
    MapWalker(const MapPoint& start, const ScattererConfig& config);

    /// Applies T once; returns the flight time. The cell shift of the step is
    /// available from `last_kappa`.
    double step(FlowCounters* counters = nullptr);

    [[nodiscard]] MapPoint point() const;
    [[nodiscard]] const TrackState& state() const { return state_; }
    [[nodiscard]] Cell cell() const { return state_.cell; }
    [[nodiscard]] int obstacle() const { return state_.on.disk; }
    /// Outward normal at the current base point.
    [[nodiscard]] Vec2 normal() const;
    [[nodiscard]] Vec2 velocity() const { return state_.vel; }
    [[nodiscard]] Cell last_kappa() const { return last_kappa_; }
    /// Start of the last flown segment (relative to last_start_cell) and its direction.
    [[nodiscard]] const FlightStep& last_flight() const { return last_flight_; }

private:
    const ScattererConfig* config_;
    TrackState state_;
    FlightStep last_flight_{};
    Cell last_kappa_{};
};

/// Trajectory log record: the section point reached at `step`, together with
/// the flight and cell shift of the iteration leaving it.
struct TrajectoryRecord {
    std::uint64_t step{0};
    MapPoint point;
    double tau{0.0};
    Cell kappa;
};

std::vector<TrajectoryRecord> trajectory_log(const MapPoint& start, std::size_t steps,
                                             const ScattererConfig& config);

}  // namespace lorentz
