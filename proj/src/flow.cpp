#include "lorentz/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lorentz/errors.hpp"

namespace lorentz {

std::optional<RayHit> cast_ray(const ScattererConfig& config, Cell base, Vec2 origin, Vec2 dir, double max_length,
                               std::optional<ObstacleId> exclude, FlowCounters* counters) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int g = config.grid_subdivision();
    const double h = 1.0 / g;

    // Sub-cell index split into a unit cell (cx, cy) relative to `base` and a
    // sub-cell (sx, sy) inside it, both updated incrementally.
    const double fx = std::floor(origin.x * g);
    const double fy = std::floor(origin.y * g);
    const std::int64_t ix = static_cast<std::int64_t>(fx);
    const std::int64_t iy = static_cast<std::int64_t>(fy);
    std::int64_t cx = floor_div(ix, g);
    std::int64_t cy = floor_div(iy, g);
    int sx = static_cast<int>(ix - cx * g);
    int sy = static_cast<int>(iy - cy * g);

    const int step_x = dir.x > 0.0 ? 1 : -1;
    const int step_y = dir.y > 0.0 ? 1 : -1;
    const double delta_x = dir.x != 0.0 ? h / std::abs(dir.x) : inf;
    const double delta_y = dir.y != 0.0 ? h / std::abs(dir.y) : inf;
    double tmax_x = inf;
    double tmax_y = inf;
    if (dir.x > 0.0) tmax_x = ((fx + 1.0) * h - origin.x) / dir.x;
    else if (dir.x < 0.0) tmax_x = (fx * h - origin.x) / dir.x;
    if (dir.y > 0.0) tmax_y = ((fy + 1.0) * h - origin.y) / dir.y;
    else if (dir.y < 0.0) tmax_y = (fy * h - origin.y) / dir.y;

    const bool has_exclude = exclude.has_value();
    const Cell exclude_rel = has_exclude ? exclude->cell - base : Cell{};
    const int exclude_disk = has_exclude ? exclude->disk : -1;

    double best_t = inf;
    const DiskTranslate* best = nullptr;
    std::int64_t best_cx = 0;
    std::int64_t best_cy = 0;
    double t_enter = 0.0;

    while (true) {
        const double t_exit = std::min(tmax_x, tmax_y);
        const double ox = origin.x - static_cast<double>(cx);
        const double oy = origin.y - static_cast<double>(cy);
        for (const DiskTranslate& cand : config.candidates(sx, sy)) {
            const double dx = ox - cand.center.x;
            const double dy = oy - cand.center.y;
            const double b = dx * dir.x + dy * dir.y;
            if (b >= 0.0) continue;  // moving away from this disk
            const double c = dx * dx + dy * dy - cand.radius2;
            const double disc = b * b - c;
            if (disc <= 0.0) continue;
            const double sq = std::sqrt(disc);
            const double t = c / (sq - b);  // smaller root, cancellation-free
            if (t < 0.0 || t >= best_t) continue;
            if (cand.disk == exclude_disk && cx + cand.dx == exclude_rel.x && cy + cand.dy == exclude_rel.y) continue;
            if (sq < kGrazeTol * cand.radius) {
                // |<v,n>| at impact equals sq / radius
                if (counters != nullptr && t >= t_enter && t <= t_exit) ++counters->grazes_skipped;
                continue;
            }
            best_t = t;
            best = &cand;
            best_cx = cx;
            best_cy = cy;
        }
        if (best_t <= t_exit) break;
        if (t_exit > max_length) break;
        t_enter = t_exit;
        if (tmax_x < tmax_y) {
            sx += step_x;
            if (sx == g) { sx = 0; ++cx; }
            else if (sx < 0) { sx = g - 1; --cx; }
            tmax_x += delta_x;
        } else {
            sy += step_y;
            if (sy == g) { sy = 0; ++cy; }
            else if (sy < 0) { sy = g - 1; --cy; }
            tmax_y += delta_y;
        }
    }
    if (best == nullptr || best_t > max_length) return std::nullopt;

    const Vec2 center(static_cast<double>(best_cx) + best->center.x, static_cast<double>(best_cy) + best->center.y);
    RayHit hit;
    hit.time = best_t;
    hit.obstacle = ObstacleId{base + Cell{best_cx + best->dx, best_cy + best->dy}, best->disk};
    hit.normal = (origin + best_t * dir - center) * (1.0 / best->radius);
    return hit;
}

Vec2 reflect(Vec2 v, Vec2 n) {
    const double vn = dot(v, n);
    const Vec2 w = v - 2.0 * vn * n;
    // one Newton step towards |w| = 1; exact to second order in the defect
    return w * (1.5 - 0.5 * norm2(w));
}

double angle_between(Vec2 a, Vec2 b) { return std::atan2(std::abs(cross(a, b)), dot(a, b)); }

double phase_distance(const PhasePoint& a, const PhasePoint& b) {
    return std::max(norm(a.q - b.q), angle_between(a.v, b.v));
}

TrackState TrackState::from_phase(const PhasePoint& x, const ScattererConfig& config) {
    TrackState s;
    s.cell = Cell{static_cast<std::int64_t>(std::floor(x.q.x)), static_cast<std::int64_t>(std::floor(x.q.y))};
    s.pos = x.q - s.cell.as_vec();
    s.vel = x.v;
    const auto near = config.nearest_obstacle(x.q);
    if (near.distance < -1e-9) {
        std::ostringstream os;
        os << "phase point (" << x.q.x << "," << x.q.y << ") lies inside obstacle " << near.disk;
        throw LorentzError(os.str());
    }
    if (near.distance <= 1e-9) {
        const Vec2 c = near.cell.as_vec() + config.disk(static_cast<std::size_t>(near.disk)).center;
        const Vec2 n = normalized(x.q - c);
        if (dot(n, x.v) >= 0.0) {
            s.on = ObstacleId{near.cell, near.disk};
            s.cell = near.cell;
            s.pos = x.q - s.cell.as_vec();
        }
    }
    return s;
}

namespace {

// Next hit from the beam table for a state sitting on an obstacle. Returns
// false when the table cannot decide (no hit within its reach, or a graze).
bool beam_hit(const TrackState& s, const BeamTable& beams, const ScattererConfig& config, RayHit& out) {
    const Disk& src = config.disk(static_cast<std::size_t>(s.on.disk));
    const Vec2 rel = s.pos - src.center;
    const Vec2 n = rel * (1.0 / src.radius);
    const std::size_t slot = beams.slot(s.on.disk, n, s.vel);
    const auto& near = beams.neighbors[static_cast<std::size_t>(s.on.disk)];
    const std::uint8_t* it = beams.entries.data() + beams.offsets[slot];
    const std::uint8_t* end = beams.entries.data() + beams.offsets[slot + 1];
    // Branch-free scan: candidates moving away or missing get t = inf.
    constexpr double inf = std::numeric_limits<double>::infinity();
    double best_t = inf;
    double best_sq = 0.0;
    const BeamTable::Neighbor* best = nullptr;
    for (; it != end; ++it) {
        const BeamTable::Neighbor& cand = near[*it];
        if (cand.lower >= best_t) break;
        const double dx = rel.x - cand.center.x;
        const double dy = rel.y - cand.center.y;
        const double b = dx * s.vel.x + dy * s.vel.y;
        const double c = dx * dx + dy * dy - cand.radius2;
        const double disc = b * b - c;
        const double sq = std::sqrt(std::max(disc, 0.0));
        const double root = c / (sq - b);
        const double t = (b < 0.0 && disc > 0.0 && root >= 0.0) ? root : inf;
        const bool better = t < best_t;
        best_t = better ? t : best_t;
        best_sq = better ? sq : best_sq;
        best = better ? &cand : best;
    }
    if (best == nullptr || best_t > beams.reach || best_sq < kGrazeTol * best->radius) return false;
    if (best == nullptr) return false;
    out.time = best_t;
    out.obstacle = ObstacleId{s.cell + Cell{best->dx, best->dy}, best->disk};
    out.normal = (rel + best_t * s.vel - best->center) * (1.0 / best->radius);
    return true;
}

RayHit require_hit(const TrackState& s, const ScattererConfig& config, FlowCounters* counters) {
    if (s.on.disk >= 0) {
        if (const BeamTable* beams = config.beams()) {
            RayHit hit;
            if (beam_hit(s, *beams, config, hit)) return hit;
        }
    }
    std::optional<ObstacleId> exclude;
    if (s.on.disk >= 0) exclude = s.on;
    auto hit = cast_ray(config, s.cell, s.pos, s.vel, config.search_limit(), exclude, counters);
    if (!hit) {
        std::ostringstream os;
        os << "HorizonViolation: no collision within " << config.search_limit() << " from cell (" << s.cell.x << ","
           << s.cell.y << ") offset (" << s.pos.x << "," << s.pos.y << ") direction (" << s.vel.x << "," << s.vel.y
           << ")";
        throw HorizonViolation(os.str());
    }
    return *hit;
}

void land(TrackState& s, const RayHit& hit, const ScattererConfig& config, FlowCounters* counters) {
    const Disk& d = config.disk(static_cast<std::size_t>(hit.obstacle.disk));
    if (counters != nullptr) {
        ++counters->collisions;
        const bool full_flight = s.on.disk >= 0;
        if (hit.time > config.tau_plus() * (1.0 + 1e-6) ||
            (full_flight && hit.time < config.tau_minus() * (1.0 - 1e-6)))
            ++counters->horizon_failures;
    }
    s.cell = hit.obstacle.cell;
    s.pos = d.center + d.radius * hit.normal;
    s.vel = reflect(s.vel, hit.normal);
    s.on = hit.obstacle;
}

}  // namespace

CollisionEvent next_collision(const PhasePoint& x, const ScattererConfig& config, FlowCounters* counters) {
    const TrackState s = TrackState::from_phase(x, config);
    const RayHit hit = require_hit(s, config, counters);
    const Disk& d = config.disk(static_cast<std::size_t>(hit.obstacle.disk));
    CollisionEvent ev;
    ev.time = hit.time;
    ev.cell = hit.obstacle.cell;
    ev.obstacle = hit.obstacle.disk;
    ev.normal = hit.normal;
    ev.point = hit.obstacle.cell.as_vec() + d.center + d.radius * hit.normal;
    return ev;
}

FlightStep advance_to_collision(TrackState& state, const ScattererConfig& config, FlowCounters* counters) {
    const RayHit hit = require_hit(state, config, counters);
    FlightStep step{hit.time, state.pos, state.cell, state.vel};
    land(state, hit, config, counters);
    return step;
}

PhasePoint flow(const PhasePoint& x, double t, const ScattererConfig& config, FlowCounters* counters) {
    TrackState s = TrackState::from_phase(x, config);
    double remaining = t;
    while (true) {
        const RayHit hit = require_hit(s, config, counters);
        if (hit.time <= remaining + kGeomTol) {
            land(s, hit, config, counters);
            remaining = std::max(0.0, remaining - hit.time);
            if (remaining == 0.0) break;
        } else {
            s.pos += remaining * s.vel;
            break;
        }
    }
    return s.to_phase();
}

}  // namespace lorentz
