#include "lorentz/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "lorentz/errors.hpp"
#include "lorentz/flow.hpp"

namespace lorentz {

namespace {

std::string describe_disk(const Disk& d) {
    std::ostringstream os;
    os << "((" << d.center.x << "," << d.center.y << ")," << d.radius << ")";
    return os.str();
}

double box_distance(Vec2 p, double x0, double y0, double x1, double y1) {
    const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
    const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
    return std::hypot(dx, dy);
}

// Flights up to this length are resolved from the beam table.
double beam_reach(double tau_plus) { return tau_plus * 1.02 + 0.02; }

// Width in radians of the pseudo-angle interval [p0, p1] after conversion, with padding.
struct AngleRange {
    double lo;
    double hi;
};

double angle_gap(double a, double lo, double hi) {
    // distance on the circle from angle a to the arc [lo, hi] (hi - lo < 2 pi)
    double x = std::fmod(a - lo, kTwoPi);
    if (x < 0.0) x += kTwoPi;
    const double width = hi - lo;
    if (x <= width) return 0.0;
    return std::min(x - width, kTwoPi - x);
}

std::shared_ptr<const BeamTable> build_beams(const std::vector<Disk>& disks, double reach, int bins) {
    auto table = std::make_shared<BeamTable>();
    table->bins = bins;
    table->reach = reach;
    constexpr double pad = 1e-9;
    double max_r = 0.0;
    for (const auto& d : disks) max_r = std::max(max_r, d.radius);
    const int cells = static_cast<int>(std::ceil(reach + 2.0 * max_r)) + 1;

    std::vector<AngleRange> ranges(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) {
        const double lo = from_pseudo_angle(4.0 * b / bins);
        double hi = from_pseudo_angle(4.0 * (b + 1) / bins);
        if (b + 1 == bins) hi = kTwoPi;
        ranges[static_cast<std::size_t>(b)] = {lo - pad, hi + pad};
    }

    table->offsets.reserve(disks.size() * static_cast<std::size_t>(bins * bins) + 1);
    table->offsets.push_back(0);
    for (std::size_t i = 0; i < disks.size(); ++i) {
        const Disk& src = disks[i];
        std::vector<BeamTable::Neighbor> near;
        for (std::size_t j = 0; j < disks.size(); ++j) {
            for (int dy = -cells; dy <= cells; ++dy) {
                for (int dx = -cells; dx <= cells; ++dx) {
                    if (j == i && dx == 0 && dy == 0) continue;
                    const Vec2 c = disks[j].center + Vec2(dx, dy) - src.center;
                    if (norm(c) - src.radius - disks[j].radius > reach) continue;
                    const double r = disks[j].radius;
                    // no point of the source disk is closer than `lower` to this translate
                    near.push_back({c, r, r * r, norm(c) - src.radius - r, static_cast<std::int32_t>(j), dx, dy});
                }
            }
        }
        if (near.size() > 255) throw LorentzError("beam table: too many reachable obstacles");

        for (int pb = 0; pb < bins; ++pb) {
            const AngleRange arc = ranges[static_cast<std::size_t>(pb)];
            const double mid = 0.5 * (arc.lo + arc.hi);
            const Vec2 pm = src.radius * unit_from_angle(mid);
            // every point of the arc is within delta of its midpoint
            const double delta = src.radius * 0.5 * (arc.hi - arc.lo) + 1e-9;
            for (int db = 0; db < bins; ++db) {
                const AngleRange dir = ranges[static_cast<std::size_t>(db)];
                const std::size_t first = table->entries.size();
                for (std::size_t k = 0; k < near.size(); ++k) {
                    const Vec2 rel = near[k].center - pm;
                    const double dist = norm(rel);
                    const double rho = near[k].radius + delta;
                    if (dist - rho > reach) continue;
                    bool keep = dist <= rho;
                    if (!keep) {
                        const double half = std::asin(rho / dist);
                        keep = angle_gap(std::atan2(rel.y, rel.x), dir.lo, dir.hi) < half + pad;
                    }
                    if (keep) table->entries.push_back(static_cast<std::uint8_t>(k));
                }
                // nearest first, so that a scan can stop at the first lower bound
                // beyond the best hit found so far
                std::sort(table->entries.begin() + static_cast<std::ptrdiff_t>(first), table->entries.end(),
                          [&](std::uint8_t a, std::uint8_t b) { return near[a].lower < near[b].lower; });
                table->offsets.push_back(static_cast<std::uint32_t>(table->entries.size()));
            }
        }
        table->neighbors.push_back(std::move(near));
    }
    return table;
}

}  // namespace

double from_pseudo_angle(double p) {
    const double q = std::floor(p);
    const double f = p - q;
    return q * (0.5 * kPi) + std::atan2(f, 1.0 - f);
}

double validate_disjoint(std::span<const Disk> disks) {
    if (disks.empty()) throw SchemaError("configuration has no disks");
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < disks.size(); ++i) {
        for (std::size_t j = i; j < disks.size(); ++j) {
            for (int dx = -2; dx <= 2; ++dx) {
                for (int dy = -2; dy <= 2; ++dy) {
                    if (i == j && dx == 0 && dy == 0) continue;
                    const Vec2 cj = disks[j].center + Vec2(dx, dy);
                    const double gap = norm(cj - disks[i].center) - disks[i].radius - disks[j].radius;
                    if (gap <= 0.0) {
                        std::ostringstream os;
                        os << "NonPositiveMargin: disks " << i << " " << describe_disk(disks[i]) << " and " << j
                           << " " << describe_disk(disks[j]) << " translated by (" << dx << "," << dy
                           << ") overlap (margin " << gap << ")";
                        throw NonPositiveMargin(os.str());
                    }
                    margin = std::min(margin, gap);
                }
            }
        }
    }
    return margin;
}

ScattererConfig::ScattererConfig(std::vector<Disk> disks, int grid_subdivision)
    : disks_(std::move(disks)), subdivision_(grid_subdivision) {
    if (disks_.empty()) throw SchemaError("configuration has no disks");
    if (subdivision_ < 1 || subdivision_ > 16) throw SchemaError("grid subdivision must be in [1, 16]");
    for (const auto& d : disks_) {
        if (!(d.radius > 0.0)) throw SchemaError("disk radius must be positive: " + describe_disk(d));
        if (!(d.center.x >= 0.0 && d.center.x < 1.0 && d.center.y >= 0.0 && d.center.y < 1.0))
            throw SchemaError("disk center must lie in [0,1)^2: " + describe_disk(d));
        gamma_ += kTwoPi * d.radius;
        max_radius_ = std::max(max_radius_, d.radius);
    }
    min_gap_ = validate_disjoint(disks_);

    // Sub-cell candidate lists. A disk translate is listed for every sub-cell its
    // closed disk touches, so a ray only needs the lists of the sub-cells it crosses.
    const double h = 1.0 / subdivision_;
    grid_.resize(static_cast<std::size_t>(subdivision_ * subdivision_));
    const int reach = static_cast<int>(std::ceil(max_radius_)) + 1;
    for (int sy = 0; sy < subdivision_; ++sy) {
        for (int sx = 0; sx < subdivision_; ++sx) {
            auto& list = grid_[static_cast<std::size_t>(sy * subdivision_ + sx)];
            for (std::size_t i = 0; i < disks_.size(); ++i) {
                for (int dy = -reach; dy <= reach; ++dy) {
                    for (int dx = -reach; dx <= reach; ++dx) {
                        const Vec2 c = disks_[i].center + Vec2(dx, dy);
                        const double r = disks_[i].radius;
                        if (box_distance(c, sx * h, sy * h, (sx + 1) * h, (sy + 1) * h) <= r + 1e-9) {
                            list.push_back({c, r, r * r, static_cast<std::int32_t>(i), dx, dy});
                        }
                    }
                }
            }
        }
    }
}

ScattererConfig ScattererConfig::with_horizon(double tau_minus, double tau_plus) const {
    if (!(tau_minus > 0.0 && tau_minus <= tau_plus && std::isfinite(tau_plus)))
        throw InfiniteHorizonSuspected("free-flight bounds must satisfy 0 < tau_minus <= tau_plus < inf");
    ScattererConfig copy = *this;
    copy.tau_minus_ = tau_minus;
    copy.tau_plus_ = tau_plus;
    copy.beams_ = build_beams(copy.disks_, beam_reach(tau_plus), 128);
    return copy;
}

ScattererConfig::Nearest ScattererConfig::nearest_obstacle(Vec2 q) const {
    const Cell base{static_cast<std::int64_t>(std::floor(q.x)), static_cast<std::int64_t>(std::floor(q.y))};
    const Vec2 local = q - base.as_vec();
    Nearest best;
    for (std::size_t i = 0; i < disks_.size(); ++i) {
        for (int dy = -2; dy <= 2; ++dy) {
            for (int dx = -2; dx <= 2; ++dx) {
                const double d = norm(local - (disks_[i].center + Vec2(dx, dy))) - disks_[i].radius;
                if (d < best.distance) best = {base + Cell{dx, dy}, static_cast<int>(i), d};
            }
        }
    }
    return best;
}

double ScattererConfig::distance_to_obstacles(Vec2 q) const { return nearest_obstacle(q).distance; }

ScattererConfig ScattererConfig::mirrored_xy() const {
    std::vector<Disk> m;
    m.reserve(disks_.size());
    for (const auto& d : disks_) m.push_back({{d.center.y, d.center.x}, d.radius});
    ScattererConfig out(std::move(m), subdivision_);
    if (horizon_certified()) out = out.with_horizon(tau_minus_, tau_plus_);
    return out;
}

namespace {

struct ProbeRecord {
    double tau;
    int disk;
    double theta;
    double phi;
};

double boundary_flight(const ScattererConfig& config, int disk, double theta, double phi, double cap,
                       std::uint64_t& rays) {
    const Disk& d = config.disk(static_cast<std::size_t>(disk));
    const Vec2 n = unit_from_angle(theta);
    const Vec2 origin = d.center + d.radius * n;
    const Vec2 dir = rotate(n, phi);
    ++rays;
    auto hit = cast_ray(config, Cell{}, origin, dir, cap, ObstacleId{Cell{}, disk});
    if (!hit) {
        std::ostringstream os;
        os << "InfiniteHorizonSuspected: ray from disk " << disk << " at theta=" << theta << " phi=" << phi
           << " exceeds flight cap " << cap;
        throw InfiniteHorizonSuspected(os.str());
    }
    return hit->time;
}

// Length of the free gap around the point `p` on the line through p with
// direction u, ignoring the obstacles listed in `skip` (the ones the line is
// tangent to at construction). Returns +inf if one side stays open within `cap`.
double gap_through(const ScattererConfig& config, Vec2 p, Vec2 u, const std::vector<ObstacleId>& skip, double cap) {
    double window = 4.0;
    while (true) {
        double ahead = std::numeric_limits<double>::infinity();
        double behind = std::numeric_limits<double>::infinity();
        const int reach = static_cast<int>(std::ceil(window));
        const Cell base{static_cast<std::int64_t>(std::floor(p.x)), static_cast<std::int64_t>(std::floor(p.y))};
        for (int dy = -reach; dy <= reach; ++dy) {
            for (int dx = -reach; dx <= reach; ++dx) {
                const Cell cell = base + Cell{dx, dy};
                for (std::size_t i = 0; i < config.size(); ++i) {
                    const ObstacleId id{cell, static_cast<int>(i)};
                    if (std::find(skip.begin(), skip.end(), id) != skip.end()) continue;
                    const Disk& d = config.disk(i);
                    const Vec2 rel = cell.as_vec() + d.center - p;
                    const double along = dot(rel, u);
                    const double across = cross(u, rel);
                    if (std::abs(across) >= d.radius) continue;
                    const double half = std::sqrt(d.radius * d.radius - across * across);
                    if (along > 0.0) ahead = std::min(ahead, along - half);
                    else behind = std::min(behind, -along - half);
                }
            }
        }
        if (std::isfinite(ahead) && std::isfinite(behind) && std::max(ahead, behind) < window - 1.0)
            return ahead + behind;
        if (window > cap + 2.0) return std::numeric_limits<double>::infinity();
        window *= 2.0;
    }
}

// Supremum of the free flight. The flight between two fixed obstacles is a
// convex function of the offset of its line, so the supremum is approached by
// lines tangent to some obstacle: either tangent to two obstacles at once or
// a local maximum along the one-parameter family of tangents to one obstacle.
double tangent_supremum(const ScattererConfig& config, int samples, double cap) {
    double best = 0.0;
    auto gap_tangent = [&](int disk, double alpha) {
        const Disk& d = config.disk(static_cast<std::size_t>(disk));
        const Vec2 n = unit_from_angle(alpha);
        const double g = gap_through(config, d.center + d.radius * n, Vec2(-n.y, n.x), {ObstacleId{Cell{}, disk}}, cap);
        if (!std::isfinite(g)) {
            std::ostringstream os;
            os << "InfiniteHorizonSuspected: tangent line to disk " << disk << " at angle " << alpha
               << " stays free beyond " << cap;
            throw InfiniteHorizonSuspected(os.str());
        }
        return g;
    };

    // one-obstacle families: dense scan plus golden-section refinement of local maxima
    for (std::size_t i = 0; i < config.size(); ++i) {
        const int disk = static_cast<int>(i);
        std::vector<double> values(static_cast<std::size_t>(samples));
        const double h = kTwoPi / samples;
        for (int k = 0; k < samples; ++k) values[static_cast<std::size_t>(k)] = gap_tangent(disk, k * h);
        for (int k = 0; k < samples; ++k) {
            const double v = values[static_cast<std::size_t>(k)];
            best = std::max(best, v);
            const double prev = values[static_cast<std::size_t>((k + samples - 1) % samples)];
            const double next = values[static_cast<std::size_t>((k + 1) % samples)];
            if (v < prev || v < next) continue;
            double a = (k - 1) * h;
            double b = (k + 1) * h;
            const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
            double x1 = b - ratio * (b - a);
            double x2 = a + ratio * (b - a);
            double f1 = gap_tangent(disk, x1);
            double f2 = gap_tangent(disk, x2);
            for (int it = 0; it < 60; ++it) {
                if (f1 < f2) {
                    a = x1; x1 = x2; f1 = f2;
                    x2 = a + ratio * (b - a);
                    f2 = gap_tangent(disk, x2);
                } else {
                    b = x2; x2 = x1; f2 = f1;
                    x1 = b - ratio * (b - a);
                    f1 = gap_tangent(disk, x1);
                }
                best = std::max({best, f1, f2});
            }
        }
    }

    // Common tangents of obstacle pairs. Only pairs whose tangency points can
    // share one free gap matter, and such a gap is at most about `best`.
    const double pair_range = std::min(cap, 2.0 * best + 1.0);
    const int reach = static_cast<int>(std::ceil(pair_range)) + 1;
    for (std::size_t i = 0; i < config.size(); ++i) {
        const Disk& a = config.disk(i);
        for (std::size_t j = 0; j < config.size(); ++j) {
            const Disk& b = config.disk(j);
            for (int dy = -reach; dy <= reach; ++dy) {
                for (int dx = -reach; dx <= reach; ++dx) {
                    if (i == j && dx == 0 && dy == 0) continue;
                    const Vec2 cb = b.center + Vec2(dx, dy);
                    const Vec2 w = cb - a.center;
                    const double dist = norm(w);
                    if (dist > pair_range + a.radius + b.radius) continue;
                    const double base = std::atan2(w.y, w.x);
                    // tangent with normal n at a: <n, w> = ra - s * rb, s = +1 outer, -1 inner
                    for (double sgn : {1.0, -1.0}) {
                        const double c = (a.radius - sgn * b.radius) / dist;
                        if (std::abs(c) > 1.0) continue;
                        for (double side : {1.0, -1.0}) {
                            const double alpha = base + side * std::acos(c);
                            const Vec2 n = unit_from_angle(alpha);
                            const std::vector<ObstacleId> skip{ObstacleId{Cell{}, static_cast<int>(i)},
                                                               ObstacleId{Cell{dx, dy}, static_cast<int>(j)}};
                            const double g = gap_through(config, a.center + a.radius * n, Vec2(-n.y, n.x), skip, cap);
                            if (std::isfinite(g)) best = std::max(best, g);
                        }
                    }
                }
            }
        }
    }
    return best;
}

}  // namespace

HorizonEstimate check_finite_horizon(const ScattererConfig& config, int probe_grid, double flight_cap) {
    if (probe_grid < 2) throw SchemaError("probe_grid must be >= 2");
    if (!(flight_cap > 0.0)) throw SchemaError("flight_cap must be positive");
    HorizonEstimate est;
    est.tau_plus = 0.0;
    est.tau_minus = std::numeric_limits<double>::infinity();

    // Free-space rays along the corridor candidates. Open corridors are only
    // visible from interior points: obstacle boundary points never lie in one.
    std::vector<Vec2> directions;
    for (int p = -2; p <= 2; ++p) {
        for (int q = -2; q <= 2; ++q) {
            if (p == 0 && q == 0) continue;
            if (std::gcd(std::abs(p), std::abs(q)) != 1) continue;
            directions.push_back(normalized(Vec2(p, q)));
        }
    }
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    std::uint64_t k = 0;
    for (int j = 0; j < probe_grid; ++j) {
        for (int i = 0; i < probe_grid; ++i) {
            const Vec2 origin((i + 0.5) / probe_grid, (j + 0.5) / probe_grid);
            if (config.distance_to_obstacles(origin) <= kGeomTol) continue;
            ++k;
            const double frac = std::fmod(static_cast<double>(k) * golden, 1.0);
            auto probe = [&](Vec2 dir) {
                ++est.rays_cast;
                if (!cast_ray(config, Cell{}, origin, dir, flight_cap)) {
                    std::ostringstream os;
                    os << "InfiniteHorizonSuspected: ray from (" << origin.x << "," << origin.y << ") along ("
                       << dir.x << "," << dir.y << ") travels more than " << flight_cap << " without collision";
                    throw InfiniteHorizonSuspected(os.str());
                }
            };
            for (const Vec2& dir : directions) probe(dir);
            probe(unit_from_angle(kTwoPi * frac));
        }
    }

    // Boundary sweep over (theta, phi) on every obstacle.
    std::vector<ProbeRecord> top;
    const std::size_t keep = 16;
    for (std::size_t disk = 0; disk < config.size(); ++disk) {
        for (int a = 0; a < probe_grid; ++a) {
            const double theta = kTwoPi * (a + 0.5) / probe_grid;
            for (int b = 0; b < probe_grid; ++b) {
                const double phi = -0.5 * kPi + kPi * (b + 0.5) / probe_grid;
                const double tau =
                    boundary_flight(config, static_cast<int>(disk), theta, phi, flight_cap, est.rays_cast);
                est.tau_minus = std::min(est.tau_minus, tau);
                if (top.size() < keep || tau > top.back().tau) {
                    top.push_back({tau, static_cast<int>(disk), theta, phi});
                    std::sort(top.begin(), top.end(), [](const auto& x, const auto& y) { return x.tau > y.tau; });
                    if (top.size() > keep) top.pop_back();
                }
            }
        }
    }

    // Local zoom around the longest flights; the supremum usually sits on a
    // grazing discontinuity, which the shrinking grids approach from inside.
    for (ProbeRecord rec : top) {
        double span_theta = kTwoPi / probe_grid;
        double span_phi = kPi / probe_grid;
        for (int level = 0; level < 8; ++level) {
            ProbeRecord best = rec;
            for (int a = -4; a <= 4; ++a) {
                for (int b = -4; b <= 4; ++b) {
                    const double theta = rec.theta + span_theta * a / 4.0;
                    const double phi = std::clamp(rec.phi + span_phi * b / 4.0, -0.5 * kPi + 1e-9, 0.5 * kPi - 1e-9);
                    const double tau = boundary_flight(config, rec.disk, theta, phi, flight_cap, est.rays_cast);
                    if (tau > best.tau) best = {tau, rec.disk, theta, phi};
                }
            }
            rec = best;
            span_theta /= 4.0;
            span_phi /= 4.0;
        }
        est.tau_plus = std::max(est.tau_plus, rec.tau);
    }

    est.tau_plus = std::max(est.tau_plus, tangent_supremum(config, std::max(probe_grid * 50, 20000), flight_cap));

    // Center-line rays realise the shortest flights exactly.
    for (std::size_t i = 0; i < config.size(); ++i) {
        for (std::size_t j = 0; j < config.size(); ++j) {
            for (int dx = -2; dx <= 2; ++dx) {
                for (int dy = -2; dy <= 2; ++dy) {
                    if (i == j && dx == 0 && dy == 0) continue;
                    const Vec2 ci = config.disk(i).center;
                    const Vec2 cj = config.disk(j).center + Vec2(dx, dy);
                    const Vec2 u = normalized(cj - ci);
                    const Vec2 origin = ci + config.disk(i).radius * u;
                    ++est.rays_cast;
                    auto hit = cast_ray(config, Cell{}, origin, u, flight_cap,
                                        ObstacleId{Cell{}, static_cast<int>(i)});
                    if (hit) est.tau_minus = std::min(est.tau_minus, hit->time);
                }
            }
        }
    }
    return est;
}

ScattererConfig certify(std::vector<Disk> disks, int probe_grid, double flight_cap, int grid_subdivision) {
    ScattererConfig config(std::move(disks), grid_subdivision);
    const HorizonEstimate est = check_finite_horizon(config, probe_grid, flight_cap);
    return config.with_horizon(est.tau_minus, est.tau_plus);
}

std::vector<Disk> default_disks() { return {{{0.0, 0.0}, 0.3}, {{0.5, 0.5}, 0.36}}; }

const ScattererConfig& default_config() {
    static const ScattererConfig config = certify(default_disks(), 200, 50.0);
    return config;
}

}  // namespace lorentz
