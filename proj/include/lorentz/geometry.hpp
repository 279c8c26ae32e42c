#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "lorentz/vec2.hpp"

namespace lorentz {

/// Default geometric tolerance in cell units.
inline constexpr double kGeomTol = 1e-12;

/// Circular obstacle with center in the fundamental cell [0,1)^2.
struct Disk {
    Vec2 center;
    double radius{0.0};
};

/// One lattice translate of a disk that may intersect a given grid sub-cell.
/// `center` is relative to the origin of the unit cell that owns the sub-cell.
struct DiskTranslate {
    Vec2 center;
    double radius{0.0};
    double radius2{0.0};
    std::int32_t disk{0};
    std::int32_t dx{0};
    std::int32_t dy{0};
};

/// Monotone surrogate for the polar angle of u, in [0, 4): one unit per
/// quadrant, y / (|x| + |y|) inside each. Cheaper than atan2 and exactly invertible.
inline double pseudo_angle(Vec2 u) {
    const double a = std::abs(u.x) + std::abs(u.y);
    const double f = u.y / a;
    if (u.x >= 0.0) return u.y >= 0.0 ? f : 4.0 + f;
    return 2.0 - f;
}

/// Polar angle in [0, 2 pi) with the given pseudo_angle.
double from_pseudo_angle(double p);

/// Obstacles reachable by a flight that leaves the boundary of a disk.
///
/// Boundary points are binned by the pseudo-angle of their outward normal and
/// directions by the pseudo-angle of the velocity. For every (disk, position
/// bin, direction bin) the table lists the translates that some ray from that
/// arc in that direction range meets within `reach`; any hit no later than
/// `reach` found among them is therefore the first hit.
struct BeamTable {
    struct Neighbor {
        Vec2 center;  ///< relative to the source disk center
        double radius{0.0};
        double radius2{0.0};
        double lower{0.0};  ///< lower bound on the flight to this translate
        std::int32_t disk{0};
        std::int32_t dx{0};  ///< cell offset of the translate from the source cell
        std::int32_t dy{0};
    };

    int bins{0};
    double reach{0.0};
    std::vector<std::vector<Neighbor>> neighbors;  // per source disk
    std::vector<std::uint32_t> offsets;            // (disk, position bin, direction bin) -> entries range
    std::vector<std::uint8_t> entries;

    [[nodiscard]] int bin(Vec2 u) const {
        const int b = static_cast<int>(pseudo_angle(u) * (bins * 0.25));
        return b < bins ? b : bins - 1;
    }
    [[nodiscard]] std::size_t slot(int disk, Vec2 normal, Vec2 dir) const {
        return (static_cast<std::size_t>(disk) * static_cast<std::size_t>(bins) +
                static_cast<std::size_t>(bin(normal))) * static_cast<std::size_t>(bins) +
               static_cast<std::size_t>(bin(dir));
    }
};

/// Periodic scatterer configuration: the obstacles `l + O_i`, l in Z^2.
///
/// Immutable after construction. The constructor validates disk invariants and
/// pairwise disjointness; the free-flight bounds are attached afterwards by
/// `with_horizon` once a finite-horizon check has succeeded.
class ScattererConfig {
public:
    explicit ScattererConfig(std::vector<Disk> disks, int grid_subdivision = 2);

    /// Copy with certified free-flight bounds attached.
    [[nodiscard]] ScattererConfig with_horizon(double tau_minus, double tau_plus) const;

    [[nodiscard]] std::span<const Disk> disks() const { return disks_; }
    [[nodiscard]] std::size_t size() const { return disks_.size(); }
    [[nodiscard]] const Disk& disk(std::size_t i) const { return disks_[i]; }
    [[nodiscard]] double perimeter(std::size_t i) const { return kTwoPi * disks_[i].radius; }
    /// Total perimeter Gamma = sum_i |dO_i|.
    [[nodiscard]] double gamma() const { return gamma_; }
    /// Minimum distance between distinct obstacle closures (the margin).
    [[nodiscard]] double min_gap() const { return min_gap_; }
    [[nodiscard]] double max_radius() const { return max_radius_; }

    [[nodiscard]] bool horizon_certified() const { return tau_plus_ < std::numeric_limits<double>::infinity(); }
    [[nodiscard]] double tau_plus() const { return tau_plus_; }
    [[nodiscard]] double tau_minus() const { return tau_minus_; }
    /// Ray length beyond which a missing collision is a hard error.
    [[nodiscard]] double search_limit() const { return 2.0 * tau_plus_ + 2.0; }

    [[nodiscard]] int grid_subdivision() const { return subdivision_; }
    /// Beam lookup for flights leaving an obstacle; null until the horizon is attached.
    [[nodiscard]] const BeamTable* beams() const { return beams_.get(); }
    [[nodiscard]] std::span<const DiskTranslate> candidates(int sub_x, int sub_y) const {
        const auto& c = grid_[static_cast<std::size_t>(sub_y * subdivision_ + sub_x)];
        return c;
    }

    /// Distance from a plane point to the nearest obstacle boundary (negative inside).
    [[nodiscard]] double distance_to_obstacles(Vec2 q) const;
    /// Index of the obstacle translate nearest to q, with its cell.
    struct Nearest {
        Cell cell;
        int disk{-1};
        double distance{std::numeric_limits<double>::infinity()};
    };
    [[nodiscard]] Nearest nearest_obstacle(Vec2 q) const;

    /// Mirror image under (x, y) -> (y, x).
    [[nodiscard]] ScattererConfig mirrored_xy() const;

private:
    std::vector<Disk> disks_;
    double gamma_{0.0};
    double min_gap_{0.0};
    double max_radius_{0.0};
    double tau_minus_{0.0};
    double tau_plus_{std::numeric_limits<double>::infinity()};
    int subdivision_{2};
    std::vector<std::vector<DiskTranslate>> grid_;
    std::shared_ptr<const BeamTable> beams_;
};

/// Minimum over distinct obstacle pairs (lattice translates included) of
/// center distance minus radii sum. Throws NonPositiveMargin if <= 0.
double validate_disjoint(std::span<const Disk> disks);

struct HorizonEstimate {
    double tau_plus{0.0};
    double tau_minus{0.0};
    std::uint64_t rays_cast{0};
};

/// Probes the free-flight function with rays and reports observed extremes.
///
/// Two probe families are cast. Free-space rays start on a probe_grid x probe_grid
/// lattice of positions in the cell and follow the low-order lattice directions
/// (axes, diagonals, (1,2)-type) plus one quasi-random direction; any of them
/// exceeding `flight_cap` raises InfiniteHorizonSuspected. Boundary rays sweep a
/// probe_grid x probe_grid grid of (arc, angle) on every obstacle and, together with
/// center-line rays between neighbouring obstacles and a local zoom around the
/// longest flights, give the tau_plus / tau_minus estimates.
HorizonEstimate check_finite_horizon(const ScattererConfig& config, int probe_grid, double flight_cap);

/// validate_disjoint + check_finite_horizon, returning the certified configuration.
ScattererConfig certify(std::vector<Disk> disks, int probe_grid, double flight_cap, int grid_subdivision = 2);

/// Disks of the shipped default configuration.
std::vector<Disk> default_disks();

/// The shipped default configuration, certified once per process.
const ScattererConfig& default_config();

}  // namespace lorentz
