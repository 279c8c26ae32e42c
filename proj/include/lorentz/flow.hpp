#pragma once

#include <cstdint>
#include <optional>

#include "lorentz/geometry.hpp"
#include "lorentz/vec2.hpp"

namespace lorentz {

/// Reflections with |<v, n>| below this value are treated as misses.
inline constexpr double kGrazeTol = 1e-9;

/// Event counters accumulated by the kernel. Owned by the caller; never shared
/// between threads.
struct FlowCounters {
    std::uint64_t collisions{0};
    std::uint64_t grazes_skipped{0};
    std::uint64_t horizon_failures{0};

    FlowCounters& operator+=(const FlowCounters& o) {
        collisions += o.collisions;
        grazes_skipped += o.grazes_skipped;
        horizon_failures += o.horizon_failures;
        return *this;
    }
};

/// An obstacle translate l + O_i.
struct ObstacleId {
    Cell cell;
    int disk{-1};
    constexpr bool operator==(const ObstacleId&) const = default;
};

/// First obstacle met by a ray. `normal` is the outward unit normal at the hit.
struct RayHit {
    double time{0.0};
    ObstacleId obstacle;
    Vec2 normal;
};

/// Low-level ray cast on the periodic table.
///
/// The ray starts at `origin`, given relative to the lower-left corner of `base`,
/// and runs along the unit vector `dir` for at most `max_length`. Cells are
/// visited with an incremental grid traversal; the obstacle `exclude` (the one
/// the ray leaves from, if any) is ignored. Returns nullopt if nothing is hit.
std::optional<RayHit> cast_ray(const ScattererConfig& config, Cell base, Vec2 origin, Vec2 dir,
                               double max_length, std::optional<ObstacleId> exclude = std::nullopt,
                               FlowCounters* counters = nullptr);

/// Flow state (q, v). q is a plane point (not reduced modulo Z^2), v a unit vector.
struct PhasePoint {
    Vec2 q;
    Vec2 v;
};

struct CollisionEvent {
    double time{0.0};
    Cell cell;
    int obstacle{-1};
    Vec2 point;
    Vec2 normal;
};

/// Time to and location of the next collision of the ballistic ray from x.
/// Throws HorizonViolation when the configuration's search window is exhausted.
CollisionEvent next_collision(const PhasePoint& x, const ScattererConfig& config,
                              FlowCounters* counters = nullptr);

/// Specular reflection v - 2<v,n>n, renormalised.
Vec2 reflect(Vec2 v, Vec2 n);

/// The billiard flow Phi_t. At collision instants the state carries the
/// outgoing velocity.
PhasePoint flow(const PhasePoint& x, double t, const ScattererConfig& config,
                FlowCounters* counters = nullptr);

/// max(|q - q'|, angle(v, v')) with the angle taken on S^1 in [0, pi].
double phase_distance(const PhasePoint& a, const PhasePoint& b);

/// Geodesic distance between two unit vectors on S^1.
double angle_between(Vec2 a, Vec2 b);

/// Trajectory state in split form: integer cell plus offset inside it. The
/// obstacle field names the obstacle the state sits on (disk = -1 when the
/// state is in the interior of the free domain).
struct TrackState {
    Cell cell;
    Vec2 pos;
    Vec2 vel;
    ObstacleId on{};

    [[nodiscard]] Vec2 plane_position() const { return cell.as_vec() + pos; }
    static TrackState from_phase(const PhasePoint& x, const ScattererConfig& config);
    [[nodiscard]] PhasePoint to_phase() const { return {plane_position(), vel}; }
};

/// Result of advancing a TrackState to its next collision.
struct FlightStep {
    double time{0.0};
    Vec2 start_pos;   ///< start of the segment, relative to `start_cell`
    Cell start_cell;
    Vec2 dir;         ///< velocity along the segment
};

/// Advance `state` to the next collision and reflect. Returns the segment flown.
FlightStep advance_to_collision(TrackState& state, const ScattererConfig& config,
                                FlowCounters* counters = nullptr);

}  // namespace lorentz
