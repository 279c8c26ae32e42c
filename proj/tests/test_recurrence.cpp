#include <doctest.h>

#include <cmath>
#include <optional>

#include "lorentz/errors.hpp"
#include "lorentz/recurrence.hpp"
#include "naive.hpp"

using namespace lorentz;

namespace {

const ScattererConfig& cfg() { return default_config(); }

const MapPoint kDiameter{{0, 0}, 0, 0.0, 0.0};
const PhasePoint kDiameterFlow{{0.3, 0.0}, {1.0, 0.0}};

PhasePoint random_free_point(Rng& rng) {
    while (true) {
        const Vec2 q{rng.uniform(), rng.uniform()};
        if (cfg().distance_to_obstacles(q) > 1e-6) return {q, unit_from_angle(rng.uniform(0.0, kTwoPi))};
    }
}

// Scan of a logged orbit with the map distance written out by hand.
std::optional<std::uint64_t> scan_log(const MapPoint& m, double eps, std::uint64_t cap, bool quotient) {
    MapPoint start = m;
    if (quotient) start.cell = {};
    const auto log = trajectory_log(start, cap, cfg());
    const double P = cfg().perimeter(static_cast<std::size_t>(m.obstacle));
    for (std::uint64_t n = 1; n <= cap; ++n) {
        const MapPoint& p = log[n].point;
        if (p.obstacle != m.obstacle) continue;
        if (!quotient && !(p.cell == start.cell)) continue;
        double d = std::abs(p.r - start.r);
        if (d > P / 2) d = P - d;
        if (std::max(d, std::abs(p.phi - start.phi)) < eps) return n;
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("hitting time of the whole space is one") {
    const auto all = TargetSet::predicate([](const MapPoint&) { return true; });
    Rng rng(1, 0);
    for (int k = 0; k < 100; ++k) {
        const auto r = hitting_time(sample_mu_bar_one(rng, cfg()), all, 10, cfg());
        CHECK(r.hit());
        CHECK(r.value == 1.0);
    }
    CHECK_THROWS_AS(hitting_time(kDiameter, all, 0, cfg()), PreconditionViolation);
}

TEST_CASE("period-two orbit returns in two steps") {
    const auto q = return_time_map(kDiameter, 0.01, 100, true, cfg());
    CHECK(q.hit());
    CHECK(q.value == 2.0);
    const auto e = return_time_map(kDiameter, 0.01, 100, false, cfg());
    CHECK(e.hit());
    CHECK(e.value == 2.0);
    const auto b = hitting_time(kDiameter, TargetSet::map_ball(kDiameter, 0.01, true), 100, cfg());
    CHECK(b.value == 2.0);
    // the sanity row of the rates experiment: log 2 / (-log eps)
    CHECK(std::log(q.value) / -std::log(0.01) == doctest::Approx(std::log(2.0) / std::log(100.0)));
}

TEST_CASE("map return times match the scan of the logged orbit") {
    Rng rng(2, 0);
    int hits = 0;
    for (int k = 0; k < 60; ++k) {
        const MapPoint m = sample_mu_bar_one(rng, cfg());
        for (bool quotient : {true, false}) {
            const std::uint64_t cap = quotient ? 20000 : 2000;
            const auto r = return_time_map(m, 0.05, cap, quotient, cfg());
            const auto ref = scan_log(m, 0.05, cap, quotient);
            CHECK(r.hit() == ref.has_value());
            if (ref) {
                CHECK(r.value == static_cast<double>(*ref));
                ++hits;
            } else {
                CHECK(r.value == static_cast<double>(cap));
            }
        }
    }
    CHECK(hits > 30);
}

TEST_CASE("map returns are monotone in eps, censoring-consistent and dominated by the quotient") {
    Rng rng(3, 0);
    for (int k = 0; k < 100; ++k) {
        const MapPoint m = sample_mu_bar_one(rng, cfg());
        const auto small = return_time_map(m, 0.02, 50000, true, cfg());
        const auto large = return_time_map(m, 0.04, 50000, true, cfg());
        if (small.hit()) {
            REQUIRE(large.hit());
            CHECK(large.value <= small.value);
        }
        const auto short_cap = return_time_map(m, 0.04, 500, true, cfg());
        if (short_cap.hit()) {
            CHECK(large.hit());
            CHECK(large.value == short_cap.value);
        } else {
            CHECK(short_cap.value == 500.0);
        }
        const auto ext = return_time_map(m, 0.04, 5000, false, cfg());
        if (ext.hit()) {
            CHECK(large.hit());
            CHECK(large.value <= ext.value);
        }
    }
}

TEST_CASE("flow returns of the diameter orbit") {
    auto r = flow_return_phase(kDiameterFlow, 0.1, 10.0, cfg());
    CHECK(r.hit());
    CHECK(r.value == doctest::Approx(0.8).epsilon(1e-12));
    r = flow_return_position(kDiameterFlow, 0.1, 10.0, false, cfg());
    CHECK(r.hit());
    CHECK(r.value == doctest::Approx(0.7).epsilon(1e-12));
    r = flow_return_position(kDiameterFlow, 0.1, 10.0, true, cfg());
    CHECK(r.hit());
    CHECK(r.value == doctest::Approx(0.7).epsilon(1e-12));
    r = flow_return_phase(kDiameterFlow, 0.1, 0.75, cfg());
    CHECK_FALSE(r.hit());
    CHECK(r.value == 0.75);
    CHECK_THROWS_AS(flow_return_phase(kDiameterFlow, 0.1, 0.05, cfg()), PreconditionViolation);
}

TEST_CASE("flow returns match the dense-sampling oracle") {
    Rng rng(4, 0);
    const double cap = 12.0;
    for (int k = 0; k < 8; ++k) {
        const PhasePoint x = random_free_point(rng);
        double drift = 0.0;
        const auto traj = naive::Trajectory::shadow(x.q, x.v, cap + 2.0, cfg(), drift);
        CHECK(drift < 1e-9);
        struct Case {
            ReturnKind kind;
            naive::Metric metric;
            double eps;
        };
        for (const Case c : {Case{ReturnKind::Phase, naive::Metric::Phase, 0.35},
                             Case{ReturnKind::Position, naive::Metric::Position, 0.25},
                             Case{ReturnKind::PositionModulo, naive::Metric::PositionModulo, 0.25}}) {
            const auto r = flow_returns(x, c.kind, {c.eps}, cap, cfg()).front();
            const auto ref = naive::dense_return(traj, c.eps, cap, c.metric);
            REQUIRE(r.hit() == ref.has_value());
            if (ref) CHECK(std::abs(r.value - *ref) < 1e-3);
        }
    }
}

TEST_CASE("flow return invariants") {
    Rng rng(5, 0);
    const auto& c = cfg();
    for (int k = 0; k < 300; ++k) {
        const PhasePoint x = random_free_point(rng);
        const std::vector<double> eps{0.1, 0.2, 0.3};
        const auto phase = flow_returns(x, ReturnKind::Phase, eps, 2000.0, c);
        const auto pos = flow_returns(x, ReturnKind::Position, eps, 2000.0, c);
        const auto mod = flow_returns(x, ReturnKind::PositionModulo, eps, 2000.0, c);
        for (std::size_t i = 0; i < eps.size(); ++i) {
            for (const auto* set : {&phase, &pos, &mod}) {
                const auto& r = (*set)[i];
                if (!r.hit()) continue;
                CHECK(r.value >= eps[i]);
                const double n = static_cast<double>(r.collisions_traversed);
                CHECK(r.value >= c.tau_minus() * (n - 1.0) * (1 - 1e-9));
                CHECK(r.value <= c.tau_plus() * (n + 1.0) * (1 + 1e-9));
            }
            // a phase return is also a position return
            if (phase[i].hit()) CHECK(pos[i].value <= phase[i].value);
            if (pos[i].hit()) {
                REQUIRE(mod[i].hit());
                CHECK(mod[i].value <= pos[i].value);
            }
            if (i + 1 < eps.size()) {
                for (const auto* set : {&phase, &pos, &mod}) {
                    const auto& small = (*set)[i];
                    const auto& large = (*set)[i + 1];
                    // with t > eps the larger radius can only return sooner once the smaller
                    // return is past the larger threshold
                    if (small.hit() && small.value > eps[i + 1]) {
                        REQUIRE(large.hit());
                        CHECK(large.value <= small.value);
                    }
                }
            }
        }
        const auto short_cap = flow_returns(x, ReturnKind::Position, eps, 5.0, c);
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (short_cap[i].hit()) CHECK(short_cap[i].value == pos[i].value);
            else CHECK(short_cap[i].value == 5.0);
        }
        // single-radius wrappers agree with the multi-radius pass
        const auto single = flow_return_phase(x, 0.2, 2000.0, c);
        CHECK(single.kind == phase[1].kind);
        CHECK(single.value == phase[1].value);
    }
}

TEST_CASE("trivial returns at t = eps") {
    // a particle that bounces straight back is still inside the ball at t = eps
    const PhasePoint x{{0.32, 0.0}, {-1.0, 0.0}};
    const auto r = flow_return_position(x, 0.1, 10.0, false, cfg());
    CHECK(r.hit());
    CHECK(r.value == doctest::Approx(0.1));
    CHECK(r.collisions_traversed == 1);
}

TEST_CASE("A_eps membership") {
    const TargetSet on_path = target_A_eps({0.5, 0.0}, 0.1, false, cfg());
    CHECK(on_path.contains(kDiameter, cfg()));
    CHECK(on_path.contains(step_T(kDiameter, cfg()).next, cfg()));
    const MapPoint left{{0, 0}, 0, 0.3 * kPi, 0.0};
    CHECK_FALSE(on_path.contains(left, cfg()));
    CHECK(target_A_eps({0.5, 0.0}, 0.1, true, cfg()).contains(left, cfg()));
    CHECK_THROWS_AS(target_A_eps({0.5, 0.0}, 0.25, false, cfg()), BallTouchesBoundary);
    // the left orbit bounces between x = -0.3 and x = -0.7 and only meets the
    // target modulo the lattice
    CHECK_FALSE(hitting_time(left, on_path, 10, cfg()).hit());
    const auto r = hitting_time(left, target_A_eps({0.5, 0.0}, 0.1, true, cfg()), 10, cfg());
    CHECK(r.hit());
    CHECK(r.value == 1.0);
}

TEST_CASE("segment membership") {
    const auto tube = TargetSet::position_tube({0.0, 1.0}, 0.1, false);
    CHECK(tube.segment_enters({-1.0, 1.05}, {1.0, 0.0}, 2.0));
    CHECK_FALSE(tube.segment_enters({-1.0, 1.15}, {1.0, 0.0}, 2.0));
    CHECK_FALSE(tube.segment_enters({-1.0, 1.05}, {1.0, 0.0}, 0.5));
    const auto mod = TargetSet::position_tube({0.0, 1.0}, 0.1, true);
    CHECK(mod.segment_enters({3.2, -6.95}, {-1.0, 0.0}, 0.5));
    const auto ball = TargetSet::flow_ball_projection({{0.0, 0.0}, {1.0, 0.0}}, 0.1);
    CHECK(ball.segment_enters({-1.0, 0.0}, unit_from_angle(0.05), 2.0));
    CHECK_FALSE(ball.segment_enters({-1.0, 0.0}, unit_from_angle(-0.2), 2.0));
}

TEST_CASE("exact mu-bar of a map ball") {
    const MapPoint m{{0, 0}, 1, 0.4, 0.3};
    const double eps = 0.01;
    const double rho = std::cos(0.3) / (2.0 * cfg().gamma());
    CHECK(mu_bar_ball(m, eps, cfg()) == doctest::Approx(4.0 * eps * eps * rho).epsilon(1e-4));
    // clipped at phi = pi/2
    const MapPoint edge{{0, 0}, 0, 0.4, 0.5 * kPi};
    CHECK(mu_bar_ball(edge, eps, cfg()) == doctest::Approx(2 * eps * (1 - std::cos(eps)) / (2 * cfg().gamma())));
}

TEST_CASE("projected phase ball measure") {
    const PhasePoint x{{0.5, 0.0}, unit_from_angle(1.25)};
    const auto a = measure_projected_phase_ball(x, 0.05, 200000, 7, cfg(), 0);
    CHECK(a.prediction == doctest::Approx(0.01));
    CHECK(std::abs(a.estimate - a.prediction) < 3.0 * a.half_width);
    CHECK(a.ratio == doctest::Approx(a.estimate / a.prediction));
    const auto b = measure_projected_phase_ball(x, 0.025, 200000, 7, cfg(), 0);
    const double q = a.estimate / b.estimate;
    const double q_hw = q * (a.half_width / a.estimate + b.half_width / b.estimate);
    CHECK(std::abs(q - 4.0) < q_hw);
    CHECK_THROWS_AS(measure_projected_phase_ball(x, 0.3, 1000, 7, cfg(), 0), BallTouchesBoundary);
}

TEST_CASE("A_eps measure") {
    const auto a = measure_A_eps({0.5, 0.0}, 0.05, 200000, 9, cfg(), 0);
    CHECK(a.prediction == doctest::Approx(4.0 * kPi * 0.05));
    CHECK(a.prediction == doctest::Approx(0.6283).epsilon(1e-4));
    CHECK(std::abs(a.estimate - a.prediction) < 3.0 * a.half_width);
    CHECK(a.quotient_prediction == doctest::Approx(2.0 * kPi * 0.05 / cfg().gamma()));
    CHECK(a.quotient_estimate == doctest::Approx(a.estimate / (2.0 * cfg().gamma())));
    // Gamma = pi makes the quotient value 2 eps
    CHECK(2.0 * kPi * 0.05 / kPi == doctest::Approx(0.1));
}
