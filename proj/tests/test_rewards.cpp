#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dogfight/rewards.hpp"
#include "dogfight/rng.hpp"

using namespace dogfight;

namespace {

AircraftState state_at(double altitude, double airspeed) {
    return make_level_state({0, 0, altitude}, 0.0, airspeed);
}

RelativeGeometry geom(double ao, double ta, double distance_m) {
    RelativeGeometry g;
    g.ao = ao;
    g.ta = ta;
    g.distance = distance_m;
    return g;
}

}  // namespace

TEST_CASE("altitude reward boundary cases") {
    RewardConfig cfg;
    CHECK(altitude_reward(state_at(6000.0, 90.0), cfg) == 0.0);
    // at the safe speed exactly, the speed penalty is zero; 3800 m is above
    // the danger altitude so the altitude penalty is zero too
    CHECK(altitude_reward(state_at(3800.0, cfg.safe_speed), cfg) == 0.0);
    // grounded and stationary saturates both penalties
    CHECK(altitude_reward(state_at(0.0, 0.0), cfg) == -2.0);
}

TEST_CASE("altitude reward range over random states") {
    RewardConfig cfg;
    Rng rng(11);
    for (int k = 0; k < 100000; ++k) {
        const double alt = rng.uniform(-500.0, 12000.0);
        const double speed = rng.uniform(0.0, 400.0);
        const double r = altitude_reward(state_at(alt, speed), cfg);
        REQUIRE(r <= 0.0);
        REQUIRE(r >= -2.0);
        if (alt >= cfg.safe_altitude) REQUIRE(r == 0.0);
    }
}

TEST_CASE("posture reward: tail chase, standoff, and far penalty") {
    RewardConfig cfg;
    CHECK(posture_reward(geom(0.0, kPi, 2000.0), cfg) == Catch::Approx(1.0));
    // symmetric aspect zeroes the orientation factor
    const double standoff = posture_reward(geom(0.8, 0.8, 2000.0), cfg);
    CHECK(standoff == Catch::Approx(0.0).margin(1e-12));
    // beyond 2x range_far the additive negative branch dominates at any aspect
    Rng rng(3);
    for (int k = 0; k < 500; ++k) {
        const double ao = rng.uniform(0.0, kPi);
        const double ta = rng.uniform(0.0, kPi);
        const double d = rng.uniform(2.0 * cfg.range_far_km * 1000.0, 60000.0);
        REQUIRE(posture_reward(geom(ao, ta, d), cfg) ==
                Catch::Approx(cfg.far_penalty_floor));
    }
}

TEST_CASE("posture reward is continuous across the range breakpoints") {
    RewardConfig cfg;
    const double eps = 1e-9;
    for (double break_km : {cfg.range_inner_km, cfg.range_outer_km, cfg.range_far_km}) {
        for (double ao : {0.0, 1.0, 2.5}) {
            const double below = posture_reward(geom(ao, 2.0, (break_km - eps) * 1000.0), cfg);
            const double above = posture_reward(geom(ao, 2.0, (break_km + eps) * 1000.0), cfg);
            REQUIRE(std::abs(below - above) < 1e-6);
        }
    }
}

TEST_CASE("orientation factor is antisymmetric (zero-sum pair)") {
    Rng rng(5);
    for (int k = 0; k < 1000; ++k) {
        const double a = rng.uniform(0.0, kPi);
        const double b = rng.uniform(0.0, kPi);
        REQUIRE(posture_orientation_factor(a, b) ==
                Catch::Approx(-posture_orientation_factor(b, a)).margin(1e-15));
    }
    // mutual engagement computed from actual geometry
    AircraftState ego = make_level_state({0, 0, 6000.0}, 0.3, 200.0);
    AircraftState enemy = make_level_state({2000.0, 500.0, 6400.0}, -2.0, 240.0);
    const RelativeGeometry fwd = relative_geometry(ego, enemy);
    const RelativeGeometry back = relative_geometry(enemy, ego);
    CHECK(posture_orientation_factor(fwd.ao, fwd.ta) ==
          Catch::Approx(-posture_orientation_factor(back.ao, back.ta)).margin(1e-12));
}

TEST_CASE("event reward values are exact") {
    RewardConfig cfg;
    CHECK(event_reward({{EventKind::ShotDownByMissile, 0, 1}}, 0, cfg) == -200.0);
    CHECK(event_reward({{EventKind::Crash, 0, std::nullopt}}, 0, cfg) == -200.0);
    CHECK(event_reward({{EventKind::EnemyKill, 0, 1}}, 0, cfg) == 200.0);
    // additivity in one step
    CHECK(event_reward({{EventKind::EnemyKill, 0, 1}, {EventKind::Crash, 0, std::nullopt}},
                       0, cfg) == 0.0);
    // events for other agents do not leak
    CHECK(event_reward({{EventKind::Crash, 1, std::nullopt}}, 0, cfg) == 0.0);
}

TEST_CASE("event reward is permutation invariant and additive") {
    RewardConfig cfg;
    std::vector<CombatEvent> events = {{EventKind::EnemyKill, 2, 0},
                                       {EventKind::Crash, 2, std::nullopt},
                                       {EventKind::ShotDownByMissile, 1, 2},
                                       {EventKind::EnemyKill, 2, 1}};
    const double base = event_reward(events, 2, cfg);
    Rng rng(9);
    for (int k = 0; k < 20; ++k) {
        rng.shuffle(events);
        REQUIRE(event_reward(events, 2, cfg) == base);
    }
    CHECK(base == 200.0);  // +200 kill - 200 crash + 200 kill
}

TEST_CASE("total reward composes the three parts") {
    RewardConfig cfg;
    // perfect tail chase at 2 km inside the band, safe altitude, no events
    const RewardBreakdown top =
        total_reward(state_at(6000.0, 250.0), geom(0.0, kPi, 2000.0), {}, 0, cfg);
    CHECK(top.total == Catch::Approx(1.0));
    CHECK(top.altitude == 0.0);

    const RewardBreakdown zero =
        total_reward(state_at(6000.0, 250.0), geom(kPi / 2.0, kPi / 2.0, 2000.0), {}, 0, cfg);
    CHECK(zero.total == Catch::Approx(0.0).margin(1e-12));

    // random batch: total always equals the weighted sum recomputed here
    RewardConfig weighted = cfg;
    weighted.weight_altitude = 0.7;
    weighted.weight_posture = 1.3;
    Rng rng(13);
    for (int k = 0; k < 2000; ++k) {
        const AircraftState s = state_at(rng.uniform(0.0, 9000.0), rng.uniform(0.0, 400.0));
        const RelativeGeometry g = geom(rng.uniform(0.0, kPi), rng.uniform(0.0, kPi),
                                        rng.uniform(10.0, 30000.0));
        std::vector<CombatEvent> events;
        if (rng.bernoulli(0.2)) events.push_back({EventKind::EnemyKill, 0, 1});
        if (rng.bernoulli(0.2)) events.push_back({EventKind::Crash, 0, std::nullopt});
        const RewardBreakdown r = total_reward(s, g, events, 0, weighted);
        const double expect = weighted.weight_altitude * altitude_reward(s, weighted) +
                              weighted.weight_posture * posture_reward(g, weighted) +
                              event_reward(events, 0, weighted);
        REQUIRE(std::abs(r.total - expect) <= 1e-12);
    }
}
