#include "lorentz/recurrence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lorentz/errors.hpp"
#include "lorentz/parallel.hpp"

namespace lorentz {

namespace {

double wrap_pi(double a) {
    a = std::fmod(a, kTwoPi);
    if (a > kPi) a -= kTwoPi;
    else if (a <= -kPi) a += kTwoPi;
    return a;
}

// Squared distance from the origin to the segment p + s u, s in [0, length].
double segment_dist2(Vec2 p, Vec2 u, double length) {
    const double s = std::clamp(-dot(p, u), 0.0, length);
    return norm2(p + s * u);
}

// Lattice translates l with q0 + l possibly within eps of the segment that
// starts at p (relative to q0) and runs along u for `length`.
template <class Fn>
void for_each_translate(Vec2 p, Vec2 u, double length, double eps, Fn&& fn) {
    const Vec2 e = p + length * u;
    const auto lo_x = static_cast<std::int64_t>(std::floor(std::min(p.x, e.x) - eps));
    const auto hi_x = static_cast<std::int64_t>(std::ceil(std::max(p.x, e.x) + eps));
    const auto lo_y = static_cast<std::int64_t>(std::floor(std::min(p.y, e.y) - eps));
    const auto hi_y = static_cast<std::int64_t>(std::ceil(std::max(p.y, e.y) + eps));
    for (std::int64_t ly = lo_y; ly <= hi_y; ++ly)
        for (std::int64_t lx = lo_x; lx <= hi_x; ++lx) fn(Vec2(static_cast<double>(lx), static_cast<double>(ly)));
}

}  // namespace

TargetSet TargetSet::map_ball(const MapPoint& center, double eps, bool quotient) {
    TargetSet t;
    t.kind_ = Kind::MapBall;
    t.center_ = center;
    t.eps_ = eps;
    t.quotient_ = quotient;
    return t;
}

TargetSet TargetSet::flow_ball_projection(const PhasePoint& x, double eps) {
    TargetSet t;
    t.kind_ = Kind::FlowBallProjection;
    t.phase_ = x;
    t.eps_ = eps;
    return t;
}

TargetSet TargetSet::position_tube(Vec2 q, double eps, bool modulo) {
    TargetSet t;
    t.kind_ = Kind::PositionTube;
    t.phase_ = {q, {1.0, 0.0}};
    t.eps_ = eps;
    t.quotient_ = modulo;
    return t;
}

TargetSet TargetSet::predicate(std::function<bool(const MapPoint&)> test) {
    TargetSet t;
    t.kind_ = Kind::Predicate;
    t.test_ = std::move(test);
    return t;
}

bool TargetSet::segment_enters(Vec2 start, Vec2 dir, double length) const {
    const double eps2 = eps_ * eps_;
    switch (kind_) {
        case Kind::FlowBallProjection:
            if (angle_between(dir, phase_.v) >= eps_) return false;
            return segment_dist2(start - phase_.q, dir, length) < eps2;
        case Kind::PositionTube: {
            const Vec2 p = start - phase_.q;
            if (!quotient_) return segment_dist2(p, dir, length) < eps2;
            bool found = false;
            for_each_translate(p, dir, length, eps_, [&](Vec2 l) {
                if (!found && segment_dist2(p - l, dir, length) < eps2) found = true;
            });
            return found;
        }
        default:
            throw LorentzError("segment_enters: not a segment target");
    }
}

bool TargetSet::contains(const MapPoint& m, const ScattererConfig& config) const {
    switch (kind_) {
        case Kind::MapBall:
            return map_distance(m, center_, config, quotient_) < eps_;
        case Kind::Predicate:
            return test_(m);
        default: {
            const PhasePoint x = psi(m, config);
            const CollisionEvent ev = next_collision(x, config);
            return segment_enters(x.q, x.v, ev.time);
        }
    }
}

ReturnOutcome hitting_time(const MapPoint& m, const TargetSet& target, std::uint64_t cap, const ScattererConfig& config) {
    if (cap == 0) throw PreconditionViolation("hitting_time: cap must be >= 1");
    MapPoint start = m;
    if (target.kind() == TargetSet::Kind::MapBall && target.quotient()) start.cell = Cell{};
    MapWalker w(start, config);

    switch (target.kind()) {
        case TargetSet::Kind::MapBall: {
            const MapPoint& c = target.center();
            const double radius = config.disk(static_cast<std::size_t>(c.obstacle)).radius;
            const Vec2 n0 = map_normal(c, config);
            const double arc_angle = target.eps() / radius + 1e-9;
            // cheap prefilter on the normal direction; the final test is map_distance
            const double min_dot = arc_angle >= kPi ? -2.0 : std::cos(arc_angle);
            for (std::uint64_t n = 1; n <= cap; ++n) {
                w.step();
                if (w.obstacle() != c.obstacle) continue;
                if (!target.quotient() && w.cell() != c.cell) continue;
                if (dot(w.normal(), n0) < min_dot) continue;
                if (map_distance(w.point(), c, config, target.quotient()) < target.eps())
                    return ReturnOutcome::make_hit(static_cast<double>(n), n);
            }
            return ReturnOutcome::make_censored(static_cast<double>(cap), cap);
        }
        case TargetSet::Kind::Predicate:
            for (std::uint64_t n = 1; n <= cap; ++n) {
                w.step();
                if (target.contains(w.point(), config)) return ReturnOutcome::make_hit(static_cast<double>(n), n);
            }
            return ReturnOutcome::make_censored(static_cast<double>(cap), cap);
        default: {
            // the flight leaving T^n m is the step that follows it
            w.step();
            for (std::uint64_t n = 1; n <= cap; ++n) {
                w.step();
                const FlightStep& f = w.last_flight();
                if (target.segment_enters(f.start_cell.as_vec() + f.start_pos, f.dir, f.time))
                    return ReturnOutcome::make_hit(static_cast<double>(n), n);
            }
            return ReturnOutcome::make_censored(static_cast<double>(cap), cap);
        }
    }
}

ReturnOutcome return_time_map(const MapPoint& m, double eps, std::uint64_t cap, bool quotient,
                              const ScattererConfig& config) {
    MapPoint center = m;
    if (quotient) center.cell = Cell{};
    return hitting_time(center, TargetSet::map_ball(center, eps, quotient), cap, config);
}

std::vector<ReturnOutcome> flow_returns(const PhasePoint& x, ReturnKind kind, const std::vector<double>& eps_list,
                                        double time_cap, const ScattererConfig& config) {
    const std::size_t count = eps_list.size();
    std::vector<ReturnOutcome> out(count);
    std::vector<bool> done(count, false);
    std::vector<double> cos_eps(count), eps2(count);
    double max_eps = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        if (!(eps_list[i] > 0.0) || !(time_cap > eps_list[i]))
            throw PreconditionViolation("flow return: need eps > 0 and time_cap > eps");
        cos_eps[i] = std::cos(eps_list[i]);
        eps2[i] = eps_list[i] * eps_list[i];
        max_eps = std::max(max_eps, eps_list[i]);
    }
    std::size_t open = count;

    TrackState s = TrackState::from_phase(x, config);
    const Cell cell0 = s.cell;
    const Vec2 off0 = s.pos;
    const Vec2 v0 = x.v;
    double t0 = 0.0;  // start time of the current segment
    std::uint64_t k = 0;

    // Admissible times on the segment [t0, t0 + len) for the offset p of its
    // start from the target centre: the open interval where |p + s u| < eps,
    // intersected with (eps, inf). Returns the infimum or +inf.
    auto first_time = [&](Vec2 p, Vec2 u, double len, std::size_t i) {
        const double b = dot(p, u);
        const double c = norm2(p) - eps2[i];
        const double disc = b * b - c;
        if (disc <= 0.0) return std::numeric_limits<double>::infinity();
        const double sq = std::sqrt(disc);
        const double s1 = -b - sq;
        const double s2 = -b + sq;
        const double lo = std::max({t0, t0 + s1, eps_list[i]});
        const double hi = std::min(t0 + len, t0 + s2);
        return lo < hi ? lo : std::numeric_limits<double>::infinity();
    };

    while (open > 0 && t0 <= time_cap) {
        const Cell seg_cell = s.cell;
        const Vec2 seg_pos = s.pos;
        const Vec2 u = s.vel;
        const FlightStep f = advance_to_collision(s, config);
        const double len = f.time;

        const double vdot = dot(u, v0);
        const Vec2 p_mod = seg_pos - off0;
        const Vec2 p = (seg_cell - cell0).as_vec() + p_mod;
        const bool near = norm2(p) < (len + max_eps) * (len + max_eps);
        for (std::size_t i = 0; i < count; ++i) {
            if (done[i]) continue;
            double hit = std::numeric_limits<double>::infinity();
            switch (kind) {
                case ReturnKind::Phase:
                    if (near && vdot > cos_eps[i] - 1e-12 && angle_between(u, v0) < eps_list[i])
                        hit = first_time(p, u, len, i);
                    break;
                case ReturnKind::Position:
                    if (near) hit = first_time(p, u, len, i);
                    break;
                case ReturnKind::PositionModulo:
                    for_each_translate(p_mod, u, len, eps_list[i],
                                       [&](Vec2 l) { hit = std::min(hit, first_time(p_mod - l, u, len, i)); });
                    break;
            }
            if (hit <= time_cap) {
                out[i] = ReturnOutcome::make_hit(hit, k);
                done[i] = true;
                --open;
            }
        }
        t0 += len;
        ++k;
    }
    for (std::size_t i = 0; i < count; ++i)
        if (!done[i]) out[i] = ReturnOutcome::make_censored(time_cap, k);
    return out;
}

ReturnOutcome flow_return_phase(const PhasePoint& x, double eps, double time_cap, const ScattererConfig& config) {
    return flow_returns(x, ReturnKind::Phase, {eps}, time_cap, config).front();
}

ReturnOutcome flow_return_position(const PhasePoint& x, double eps, double time_cap, bool modulo,
                                   const ScattererConfig& config) {
    return flow_returns(x, modulo ? ReturnKind::PositionModulo : ReturnKind::Position, {eps}, time_cap, config)
        .front();
}

TargetSet target_A_eps(Vec2 q, double eps, bool modulo, const ScattererConfig& config) {
    const double d = config.distance_to_obstacles(q);
    if (!(eps > 0.0) || eps >= d) {
        std::ostringstream os;
        os << "BallTouchesBoundary: eps=" << eps << " but d(q, dQ)=" << d;
        throw BallTouchesBoundary(os.str());
    }
    return TargetSet::position_tube(q, eps, modulo);
}

double mu_bar_ball(const MapPoint& m, double eps, const ScattererConfig& config) {
    const double perimeter = config.perimeter(static_cast<std::size_t>(m.obstacle));
    const double arc = std::min(2.0 * eps, perimeter);
    const double hi = std::min(m.phi + eps, 0.5 * kPi);
    const double lo = std::max(m.phi - eps, -0.5 * kPi);
    return arc * (std::sin(hi) - std::sin(lo)) / (2.0 * config.gamma());
}

namespace {

// Boundary pieces from which a flight can enter the target, as arc cells of
// equal angular width on the reachable obstacle translates.
struct ArcCell {
    Cell cell;
    int disk{0};
    double theta{0.0};  // lower end
    double mass_end{0.0};
};

struct SamplingPlan {
    std::vector<ArcCell> cells;
    double dtheta{0.0};
    double mass{0.0};
};

struct Window {
    double lo{0.0};
    double hi{0.0};
    [[nodiscard]] bool empty() const { return !(hi > lo); }
};

// Angles relative to the outward normal at theta for which the ray from the
// boundary point passes within eps of q0, optionally restricted to within
// eps of the direction v0.
Window direction_window(Vec2 center, double radius, double theta, Vec2 q0, double eps, const Vec2* v0) {
    const Vec2 n = unit_from_angle(theta);
    const Vec2 rel = q0 - (center + radius * n);
    const double d = norm(rel);
    const double half = std::asin(std::min(1.0, eps / d));
    const double phi_c = wrap_pi(std::atan2(rel.y, rel.x) - theta);
    Window w{std::max(phi_c - half, -0.5 * kPi), std::min(phi_c + half, 0.5 * kPi)};
    if (v0 != nullptr) {
        const double phi_v = phi_c + wrap_pi(wrap_pi(std::atan2(v0->y, v0->x) - theta) - phi_c);
        w.lo = std::max(w.lo, phi_v - eps);
        w.hi = std::min(w.hi, phi_v + eps);
    }
    return w;
}

SamplingPlan plan_arcs(Vec2 q0, double eps, const Vec2* v0, const ScattererConfig& config) {
    const double d_min = config.distance_to_obstacles(q0);
    const int grid = 4096;
    SamplingPlan plan;
    plan.dtheta = kTwoPi / grid;
    const double reach = config.tau_plus() * (1.0 + 1e-6) + eps;
    const int span = static_cast<int>(std::ceil(reach + 1.0));
    const Cell base{static_cast<std::int64_t>(std::floor(q0.x)), static_cast<std::int64_t>(std::floor(q0.y))};
    for (int dy = -span; dy <= span; ++dy) {
        for (int dx = -span; dx <= span; ++dx) {
            const Cell cell = base + Cell{dx, dy};
            for (std::size_t i = 0; i < config.size(); ++i) {
                const Disk& disk = config.disk(i);
                const Vec2 c = cell.as_vec() + disk.center;
                if (norm(c - q0) - disk.radius > reach) continue;
                const double R = disk.radius;
                const double ratio = std::min(eps / d_min, 1.0 - 1e-12);
                const double lipschitz = 1.0 + (R / d_min) * (1.0 + ratio / std::sqrt(1.0 - ratio * ratio));
                const double slack = 0.51 * lipschitz * plan.dtheta;
                for (int k = 0; k < grid; ++k) {
                    const double theta = (k + 0.5) * plan.dtheta;
                    const Vec2 n = unit_from_angle(theta);
                    const Vec2 rel = q0 - (c + R * n);
                    const double d = norm(rel);
                    const double half = std::asin(std::min(1.0, eps / d));
                    const double beta = std::atan2(rel.y, rel.x);
                    bool keep = std::abs(wrap_pi(beta - theta)) < 0.5 * kPi + half + slack;
                    if (keep && v0 != nullptr)
                        keep = std::abs(wrap_pi(beta - std::atan2(v0->y, v0->x))) < eps + half + slack;
                    if (!keep) continue;
                    plan.mass += R * plan.dtheta;
                    plan.cells.push_back({cell, static_cast<int>(i), k * plan.dtheta, plan.mass});
                }
            }
        }
    }
    return plan;
}

MeasureEstimate run_measure(Vec2 q0, double eps, const Vec2* v0, std::uint64_t samples, std::uint64_t seed,
                            std::string_view label, const ScattererConfig& config, int workers) {
    const double d = config.distance_to_obstacles(q0);
    if (!(eps > 0.0) || eps >= d) {
        std::ostringstream os;
        os << "BallTouchesBoundary: eps=" << eps << " but d(q, dQ)=" << d;
        throw BallTouchesBoundary(os.str());
    }
    const SamplingPlan plan = plan_arcs(q0, eps, v0, config);
    const double eps2 = eps * eps;
    struct Part {
        Moments w;
        std::uint64_t members{0};
        Part& operator+=(const Part& o) {
            w += o.w;
            members += o.members;
            return *this;
        }
    };
    const Part total = reduce_blocks<Part>(samples, workers, [&](std::uint64_t begin, std::uint64_t end) {
        Part p;
        for (std::uint64_t k = begin; k < end; ++k) {
            Rng rng = sample_rng(seed, label, k);
            const double target = rng.uniform() * plan.mass;
            const auto it = std::upper_bound(plan.cells.begin(), plan.cells.end(), target,
                                             [](double x, const ArcCell& a) { return x < a.mass_end; });
            const ArcCell& arc = it == plan.cells.end() ? plan.cells.back() : *it;
            const Disk& disk = config.disk(static_cast<std::size_t>(arc.disk));
            const double theta = arc.theta + rng.uniform() * plan.dtheta;
            const Vec2 center = arc.cell.as_vec() + disk.center;
            const Window win = direction_window(center, disk.radius, theta, q0, eps, v0);
            const double u = rng.uniform();
            if (win.empty()) {
                p.w.add(0.0);
                continue;
            }
            const double s_lo = std::sin(win.lo);
            const double s_hi = std::sin(win.hi);
            const double weight = s_hi - s_lo;
            const double phi = std::asin(std::clamp(s_lo + u * weight, -1.0, 1.0));
            const Vec2 n = unit_from_angle(theta);
            const Vec2 dir = rotate(n, phi);

            TrackState s;
            s.cell = arc.cell;
            s.pos = disk.center + disk.radius * n;
            s.vel = dir;
            s.on = ObstacleId{arc.cell, arc.disk};
            const Vec2 start = center + disk.radius * n;
            const FlightStep f = advance_to_collision(s, config);
            bool member = segment_dist2(start - q0, dir, f.time) < eps2;
            if (member && v0 != nullptr) member = angle_between(dir, *v0) < eps;
            if (member) ++p.members;
            p.w.add(member ? weight : 0.0);
        }
        return p;
    });
    MeasureEstimate out;
    out.samples = samples;
    out.members = total.members;
    out.sampled_mass = plan.mass;
    out.estimate = plan.mass * total.w.mean();
    out.half_width = plan.mass * total.w.half_width();
    out.quotient_estimate = out.estimate / (2.0 * config.gamma());
    return out;
}

}  // namespace

MeasureEstimate measure_projected_phase_ball(const PhasePoint& x, double eps, std::uint64_t samples,
                                             std::uint64_t seed, const ScattererConfig& config, int workers) {
    const Vec2 v0 = normalized(x.v);
    MeasureEstimate out = run_measure(x.q, eps, &v0, samples, seed, "phase_ball", config, workers);
    out.prediction = 4.0 * eps * eps;
    out.ratio = out.estimate / out.prediction;
    out.quotient_prediction = out.prediction / (2.0 * config.gamma());
    return out;
}

MeasureEstimate measure_A_eps(Vec2 q, double eps, std::uint64_t samples, std::uint64_t seed,
                              const ScattererConfig& config, int workers) {
    MeasureEstimate out = run_measure(q, eps, nullptr, samples, seed, "a_eps", config, workers);
    out.prediction = 4.0 * kPi * eps;
    out.ratio = out.estimate / out.prediction;
    out.quotient_prediction = kTwoPi * eps / config.gamma();
    return out;
}

}  // namespace lorentz
