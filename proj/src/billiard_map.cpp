#include "lorentz/billiard_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lorentz/errors.hpp"

namespace lorentz {

namespace {

double wrap_arc(double r, double perimeter) {
    double w = std::fmod(r, perimeter);
    if (w < 0.0) w += perimeter;
    if (w >= perimeter) w = 0.0;
    return w;
}

MapPoint from_boundary(Cell cell, int disk, Vec2 normal, Vec2 vel, const ScattererConfig& config) {
    const double radius = config.disk(static_cast<std::size_t>(disk)).radius;
    double theta = std::atan2(normal.y, normal.x);
    if (theta < 0.0) theta += kTwoPi;
    MapPoint m;
    m.cell = cell;
    m.obstacle = disk;
    m.r = wrap_arc(radius * theta, kTwoPi * radius);
    m.phi = std::clamp(signed_angle(normal, vel), -0.5 * kPi, 0.5 * kPi);
    return m;
}

TrackState to_track(const MapPoint& m, const ScattererConfig& config) {
    const Disk& d = config.disk(static_cast<std::size_t>(m.obstacle));
    const Vec2 n = unit_from_angle(m.r / d.radius);
    TrackState s;
    s.cell = m.cell;
    s.pos = d.center + d.radius * n;
    s.vel = rotate(n, m.phi);
    s.on = ObstacleId{m.cell, m.obstacle};
    return s;
}

}  // namespace

Vec2 map_normal(const MapPoint& m, const ScattererConfig& config) {
    return unit_from_angle(m.r / config.disk(static_cast<std::size_t>(m.obstacle)).radius);
}

PhasePoint psi(const MapPoint& m, const ScattererConfig& config) { return to_track(m, config).to_phase(); }

MapPoint psi_inv(const PhasePoint& x, const ScattererConfig& config) {
    const auto near = config.nearest_obstacle(x.q);
    if (std::abs(near.distance) > 1e-8) {
        std::ostringstream os;
        os << "NotOnBoundary: (" << x.q.x << "," << x.q.y << ") is " << near.distance
           << " from the nearest obstacle";
        throw NotOnBoundary(os.str());
    }
    const Vec2 c = near.cell.as_vec() + config.disk(static_cast<std::size_t>(near.disk)).center;
    return from_boundary(near.cell, near.disk, normalized(x.q - c), x.v, config);
}

MapStep step_T(const MapPoint& m, const ScattererConfig& config, FlowCounters* counters) {
    TrackState s = to_track(m, config);
    const FlightStep flight = advance_to_collision(s, config, counters);
    MapStep out;
    const Disk& d = config.disk(static_cast<std::size_t>(s.on.disk));
    out.next = from_boundary(s.cell, s.on.disk, (s.pos - d.center) * (1.0 / d.radius), s.vel, config);
    out.tau = flight.time;
    out.kappa = s.cell - m.cell;
    return out;
}

MapStep step_Tbar(const MapPoint& m, const ScattererConfig& config, FlowCounters* counters) {
    MapPoint lifted = m;
    lifted.cell = Cell{};
    MapStep out = step_T(lifted, config, counters);
    out.next.cell = Cell{};
    return out;
}

MapPoint time_reverse(const MapPoint& m) {
    MapPoint out = m;
    out.phi = -m.phi;
    return out;
}

PhasePoint special_flow_lift(const MapPoint& m, double s, const ScattererConfig& config) {
    return flow(psi(m, config), s, config);
}

SpecialFlowPoint section_project(const PhasePoint& x, const ScattererConfig& config) {
    const auto near = config.nearest_obstacle(x.q);
    if (std::abs(near.distance) <= 1e-9) {
        const Vec2 c = near.cell.as_vec() + config.disk(static_cast<std::size_t>(near.disk)).center;
        const Vec2 n = normalized(x.q - c);
        if (dot(n, x.v) >= 0.0) return {from_boundary(near.cell, near.disk, n, x.v, config), 0.0};
    }
    // Backtrack along -v to the obstacle the segment left from.
    const TrackState s = TrackState::from_phase({x.q, -x.v}, config);
    auto hit = cast_ray(config, s.cell, s.pos, s.vel, config.search_limit(),
                        s.on.disk >= 0 ? std::optional<ObstacleId>(s.on) : std::nullopt);
    if (!hit) throw HorizonViolation("HorizonViolation: no obstacle behind the phase point");
    return {from_boundary(hit->obstacle.cell, hit->obstacle.disk, hit->normal, x.v, config), hit->time};
}

double arc_distance(double r1, double r2, double perimeter) {
    const double d = std::fmod(std::abs(r1 - r2), perimeter);
    return std::min(d, perimeter - d);
}

double map_distance(const MapPoint& a, const MapPoint& b, const ScattererConfig& config, bool quotient) {
    if (a.obstacle != b.obstacle) return std::numeric_limits<double>::infinity();
    if (!quotient && a.cell != b.cell) return std::numeric_limits<double>::infinity();
    const double arc = arc_distance(a.r, b.r, config.perimeter(static_cast<std::size_t>(a.obstacle)));
    return std::max(arc, std::abs(a.phi - b.phi));
}

double mu_bar_density(const MapPoint& m, const ScattererConfig& config) {
    return std::cos(m.phi) / (2.0 * config.gamma());
}

MapPoint sample_mu_bar_one(Rng& rng, const ScattererConfig& config) {
    // obstacle by perimeter share, r uniform, sin(phi) uniform on [-1, 1]
    double u = rng.uniform() * config.gamma();
    std::size_t i = 0;
    while (i + 1 < config.size() && u >= config.perimeter(i)) {
        u -= config.perimeter(i);
        ++i;
    }
    MapPoint m;
    m.obstacle = static_cast<int>(i);
    m.r = wrap_arc(rng.uniform() * config.perimeter(i), config.perimeter(i));
    m.phi = std::asin(2.0 * rng.uniform() - 1.0);
    return m;
}

std::vector<MapPoint> sample_mu_bar(std::uint64_t seed, std::size_t n, const ScattererConfig& config) {
    std::vector<MapPoint> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        Rng rng = sample_rng(seed, "mu_bar", k);
        out.push_back(sample_mu_bar_one(rng, config));
    }
    return out;
}

MapWalker::MapWalker(const MapPoint& start, const ScattererConfig& config)
    : config_(&config), state_(to_track(start, config)) {}

double MapWalker::step(FlowCounters* counters) {
    const Cell before = state_.cell;
    last_flight_ = advance_to_collision(state_, *config_, counters);
    last_kappa_ = state_.cell - before;
    return last_flight_.time;
}

Vec2 MapWalker::normal() const {
    const Disk& d = config_->disk(static_cast<std::size_t>(state_.on.disk));
    return (state_.pos - d.center) * (1.0 / d.radius);
}

MapPoint MapWalker::point() const {
    return from_boundary(state_.cell, state_.on.disk, normal(), state_.vel, *config_);
}

std::vector<TrajectoryRecord> trajectory_log(const MapPoint& start, std::size_t steps,
                                             const ScattererConfig& config) {
    std::vector<TrajectoryRecord> log;
    log.reserve(steps);
    MapWalker w(start, config);
    for (std::size_t k = 0; k < steps; ++k) {
        TrajectoryRecord rec;
        rec.step = k;
        rec.point = w.point();
        rec.tau = w.step();
        rec.kappa = w.last_kappa();
        log.push_back(rec);
    }
    return log;
}

}  // namespace lorentz
