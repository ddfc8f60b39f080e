#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dogfight/arena.hpp"

using namespace dogfight;

namespace {

EnvConfig base_config(TaskKind task) {
    EnvConfig cfg;
    cfg.task = task;
    cfg.spawn_random_bearing = false;
    cfg.seed = 42;
    return cfg;
}

std::vector<AgentAction> hold_actions(int n) {
    return std::vector<AgentAction>(static_cast<std::size_t>(n),
                                    AgentAction::from_hla(HighLevelAction{}));
}

}  // namespace

TEST_CASE("reset is deterministic and arity follows the task") {
    EnvConfig cfg = base_config(TaskKind::NoWeapon1v1);
    cfg.spawn_random_bearing = true;
    CombatEnv a(cfg), b(cfg);
    const auto oa = a.reset(123);
    const auto ob = b.reset(123);
    REQUIRE(oa.size() == 2);
    for (std::size_t i = 0; i < oa.size(); ++i) REQUIRE(oa[i] == ob[i]);

    CombatEnv c(base_config(TaskKind::NoWeapon2v2));
    CHECK(c.reset(7).size() == 4);
    CHECK(CombatEnv(base_config(TaskKind::SingleControlHeading)).reset(7).size() == 1);
}

TEST_CASE("observation layout: sizes, missile block, normalization") {
    CHECK(observation_size(TaskKind::SingleControlHeading) == 18);
    CHECK(observation_size(TaskKind::NoWeapon1v1) == 21);
    CHECK(observation_size(TaskKind::ShootMissile1v1) == 21);
    CHECK(observation_size(TaskKind::NoWeapon2v2) == 33);

    CombatEnv env(base_config(TaskKind::ShootMissile1v1));
    const auto obs = env.reset(5);
    // no missiles in flight at reset: the trailing block is all zeros
    for (const auto& o : obs) {
        REQUIRE(o.size() == 21);
        for (std::size_t k = o.size() - kMissileBlock; k < o.size(); ++k)
            REQUIRE(o[k] == 0.0);
    }
    // the enemy-block distance entry is distance/10000 exactly
    const RelativeGeometry g = relative_geometry(env.aircraft()[0], env.aircraft()[1]);
    CHECK(obs[0][kEgoBlock + 0] == g.distance / 10000.0);

    // symmetric head-on spawn: the two enemy blocks mirror each other
    for (int k = 0; k < 5; ++k)  // distance..delta_altitude (delta_heading matches too)
        REQUIRE(obs[0][static_cast<std::size_t>(kEgoBlock + k)] ==
                Catch::Approx(obs[1][static_cast<std::size_t>(kEgoBlock + k)]).margin(1e-12));
}

TEST_CASE("zero-offset bins from trim barely move the heading") {
    CombatEnv env(base_config(TaskKind::NoWeapon1v1));
    env.reset(3);
    const double h0 = env.aircraft()[0].heading;
    std::vector<AgentAction> acts = hold_actions(2);
    const StepOutcome out = env.step(acts);
    CHECK(std::abs(wrap_pi(env.aircraft()[0].heading - h0)) < 0.02);
    CHECK(out.decision_steps == 1);
}

TEST_CASE("pid cascade: fixed point, sign convention, and settling") {
    AirframeConfig cfg;
    PidGains gains;
    AircraftState s = make_level_state({0, 0, 6000.0}, 0.0, 200.0);
    PidController pid;
    CommandTargets hold{0.0, 6000.0, 200.0};
    const ControlInput trim = pid.control(hold, s, cfg, gains, kInnerDt);
    CHECK(trim.aileron == 0.0);
    CHECK(trim.elevator == 0.0);
    CHECK(trim.throttle ==
          Catch::Approx(cfg.drag_coefficient * 200.0 * 200.0 / cfg.max_thrust));

    // commanded heading left of current: left-roll (negative) aileron
    PidController pid2;
    const ControlInput left = pid2.control({-0.5, 6000.0, 200.0}, s, cfg, gains, kInnerDt);
    CHECK(left.aileron < 0.0);

    // closed loop: a 90-degree heading change settles within 0.05 rad in 30 s
    PidController pid3;
    AircraftState fly = s;
    const CommandTargets turn{kPi / 2.0, 6000.0, 200.0};
    for (int k = 0; k < 30 * 60; ++k)
        fly = step_airframe(fly, pid3.control(turn, fly, cfg, gains, kInnerDt), cfg, kInnerDt);
    CHECK(std::abs(wrap_pi(fly.heading - kPi / 2.0)) < 0.05);

    PidController pid4;
    CommandTargets bad{std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0};
    CHECK_THROWS_AS(pid4.control(bad, s, cfg, gains, kInnerDt), std::invalid_argument);
}

TEST_CASE("shoot gate probabilities and the beta prior") {
    BetaShootPrior prior;  // (10, 10)
    CHECK(prior.mean() == 0.5);
    CHECK(effective_fire_probability(0.8, prior) == Catch::Approx(0.4));

    Rng rng(17);
    for (int k = 0; k < 10000; ++k) REQUIRE(!shoot_gate(0.0, prior, rng));

    int fires = 0;
    const int draws = 100000;
    for (int k = 0; k < draws; ++k)
        if (shoot_gate(1.0, prior, rng)) ++fires;
    CHECK(std::abs(fires / static_cast<double>(draws) - 0.5) < 0.01);

    // conjugate counting: five hits and no misses from (10,10) give Beta(15,10)
    BetaShootPrior updated;
    for (int k = 0; k < 5; ++k) updated.alpha += 1.0;
    CHECK(updated.mean() == Catch::Approx(15.0 / 25.0));

    CHECK_THROWS_AS(shoot_gate(1.5, prior, rng), std::invalid_argument);
}

TEST_CASE("pursue baseline picks aligned bins and respects the task") {
    AircraftState agent = make_level_state({0, 0, 6000.0}, 0.0, 200.0);
    AircraftState enemy = make_level_state({10000.0, 0, 6000.0}, kPi, 200.0);
    const HighLevelAction aligned = pursue_baseline(agent, enemy, TaskKind::NoWeapon1v1);
    CHECK(aligned.heading_bin == kZeroHeadingBin);
    CHECK(aligned.altitude_bin == kZeroAltitudeBin);
    CHECK(aligned.speed_bin == static_cast<int>(kSpeedOffsets.size()) - 1);
    CHECK(!aligned.shoot);

    // enemy 90 degrees to the right: the largest right offset wins
    AircraftState right = make_level_state({0.0, 9000.0, 6000.0}, 0.0, 200.0);
    const HighLevelAction hard = pursue_baseline(agent, right, TaskKind::NoWeapon1v1);
    CHECK(hard.heading_bin == static_cast<int>(kHeadingOffsets.size()) - 1);

    // in-envelope shot request only for shoot tasks
    AircraftState close = make_level_state({5000.0, 0, 6000.0}, kPi, 200.0);
    CHECK(pursue_baseline(agent, close, TaskKind::ShootMissile1v1).shoot);
    CHECK(!pursue_baseline(agent, close, TaskKind::NoWeapon1v1).shoot);
}

TEST_CASE("rewards decompose and accumulate per agent") {
    CombatEnv env(base_config(TaskKind::NoWeapon1v1));
    env.reset(11);
    std::vector<AgentAction> acts = hold_actions(2);
    double accum0 = 0.0;
    for (int k = 0; k < 10; ++k) {
        const StepOutcome out = env.step(acts);
        for (const auto& r : out.rewards)
            REQUIRE(r.total == Catch::Approx(r.altitude + r.posture + r.event).margin(1e-12));
        accum0 += out.rewards[0].total;
        REQUIRE(out.episode_reward[0] == Catch::Approx(accum0).margin(1e-9));
    }
}

TEST_CASE("no-weapon tasks never spawn missiles; shoot actions are inert") {
    EnvConfig cfg = base_config(TaskKind::NoWeapon1v1);
    cfg.spawn_separation_km = 5.0;  // well inside any launch envelope
    cfg.spawn_separation_jitter_km = 0.0;
    CombatEnv env(cfg);
    env.reset(13);
    std::vector<AgentAction> acts = hold_actions(2);
    acts[0].hla.shoot = true;
    acts[0].shoot_prob = 1.0;
    acts[1].hla.shoot = true;
    acts[1].shoot_prob = 1.0;
    for (int k = 0; k < 20 && !env.episode_done(); ++k) env.step(acts);
    CHECK(env.missiles().empty());
    CHECK(env.remaining_ammo(0) == 0);  // no ammunition in unarmed tasks
}

TEST_CASE("driving the aircraft into the ground crashes it") {
    EnvConfig cfg = base_config(TaskKind::SingleControlHeading);
    cfg.spawn_altitude = 900.0;
    cfg.spawn_altitude_jitter = 0.0;
    CombatEnv env(cfg);
    env.reset(17);
    std::vector<AgentAction> acts(1);
    HighLevelAction dive;
    dive.altitude_bin = 0;  // -2100 m
    dive.speed_bin = static_cast<int>(kSpeedOffsets.size()) - 1;
    acts[0] = AgentAction::from_hla(dive);
    bool crashed = false;
    for (int k = 0; k < 400 && !crashed; ++k) {
        const StepOutcome out = env.step(acts);
        for (const auto& e : out.events) {
            if (e.kind == EventKind::Crash && e.subject == 0) {
                crashed = true;
                CHECK(out.rewards[0].event == -200.0);
                CHECK(out.done[0]);
                CHECK(out.episode_done);
            }
        }
    }
    CHECK(crashed);
    CHECK_THROWS_AS(env.step(acts), std::logic_error);
}

TEST_CASE("shoot-missile engagement: launch, hit, events, and prior updates") {
    EnvConfig cfg = base_config(TaskKind::ShootMissile1v1);
    cfg.spawn_separation_km = 6.0;
    cfg.spawn_separation_jitter_km = 0.0;
    cfg.prior_alpha = 100000.0;  // effectively always fire when requested
    cfg.prior_beta = 1e-9;
    CombatEnv env(cfg);
    env.reset(19);

    std::vector<AgentAction> acts = hold_actions(2);
    acts[0].hla.shoot = true;
    acts[0].shoot_prob = 1.0;

    bool hit = false;
    int steps = 0;
    const int ammo0 = env.remaining_ammo(0);
    while (!env.episode_done() && steps < 600) {
        const StepOutcome out = env.step(acts);
        ++steps;
        for (const auto& e : out.events) {
            if (e.kind == EventKind::ShotDownByMissile) {
                hit = true;
                CHECK(e.subject == 1);
                CHECK(e.counterpart == 0);
                CHECK(out.rewards[1].event == -200.0);
            }
            if (e.kind == EventKind::EnemyKill) {
                CHECK(e.subject == 0);
                CHECK(out.rewards[0].event == 200.0);
            }
        }
    }
    CHECK(hit);
    CHECK(env.remaining_ammo(0) < ammo0);
    CHECK(env.shoot_priors()[0].alpha > 100000.0);  // hit counted into the prior
    CHECK(env.episode_done());
}

TEST_CASE("dodge task auto-fires on the scripted rule") {
    EnvConfig cfg = base_config(TaskKind::DodgeMissile1v1);
    cfg.spawn_separation_km = 6.0;  // inside the 8 km rule from the start
    cfg.spawn_separation_jitter_km = 0.0;
    CombatEnv env(cfg);
    env.reset(23);
    std::vector<AgentAction> acts = hold_actions(2);
    env.step(acts);
    // both aircraft satisfy the rule head-on: both fire immediately
    CHECK(env.missiles().size() == 2);
    const StepOutcome out = env.step(acts);
    // cooldown: no immediate re-fire
    CHECK(env.missiles().size() == 2);
    // threat block becomes visible to the targeted agent
    bool threat_seen = false;
    for (const auto& o : out.observations)
        if (!o.empty() && o[o.size() - kMissileBlock] == 1.0) threat_seen = true;
    CHECK(threat_seen);
}

TEST_CASE("ammunition is non-increasing and bounded") {
    EnvConfig cfg = base_config(TaskKind::ShootMissile1v1);
    cfg.spawn_separation_km = 6.0;
    cfg.spawn_separation_jitter_km = 0.0;
    cfg.missiles_per_aircraft = 2;
    cfg.missile.explosive_radius = 1.0;  // keep the fight going
    cfg.prior_alpha = 100000.0;
    cfg.prior_beta = 1e-9;
    CombatEnv env(cfg);
    env.reset(29);
    std::vector<AgentAction> acts = hold_actions(2);
    acts[0].hla.shoot = true;
    acts[0].shoot_prob = 1.0;
    acts[1].hla.shoot = true;
    acts[1].shoot_prob = 1.0;
    int prev0 = env.remaining_ammo(0);
    for (int k = 0; k < 50 && !env.episode_done(); ++k) {
        env.step(acts);
        REQUIRE(env.remaining_ammo(0) <= prev0);
        prev0 = env.remaining_ammo(0);
        REQUIRE(env.missiles().size() <= 4);
    }
    CHECK(env.remaining_ammo(0) == 0);
}

TEST_CASE("episodes always terminate within the step cap") {
    EnvConfig cfg = base_config(TaskKind::NoWeapon1v1);
    cfg.max_decision_steps = 25;
    CombatEnv env(cfg);
    env.reset(31);
    std::vector<AgentAction> acts = hold_actions(2);
    int steps = 0;
    while (!env.episode_done()) {
        env.step(acts);
        ++steps;
        REQUIRE(steps <= 25);
    }
    CHECK(steps == 25);
}

TEST_CASE("full determinism: same config, seed, and actions") {
    EnvConfig cfg = base_config(TaskKind::ShootMissile1v1);
    cfg.spawn_random_bearing = true;
    cfg.spawn_separation_km = 7.0;
    CombatEnv a(cfg), b(cfg);
    a.reset(37);
    b.reset(37);
    Rng action_rng(101);
    for (int k = 0; k < 40 && !a.episode_done(); ++k) {
        std::vector<AgentAction> acts(2);
        for (auto& act : acts) {
            HighLevelAction h;
            h.heading_bin = static_cast<int>(action_rng.uniform_index(7));
            h.altitude_bin = static_cast<int>(action_rng.uniform_index(5));
            h.speed_bin = static_cast<int>(action_rng.uniform_index(5));
            h.shoot = action_rng.bernoulli(0.3);
            act = AgentAction::from_hla(h);
        }
        const StepOutcome oa = a.step(acts);
        const StepOutcome ob = b.step(acts);
        REQUIRE(oa.episode_done == ob.episode_done);
        for (std::size_t i = 0; i < oa.observations.size(); ++i) {
            REQUIRE(oa.observations[i] == ob.observations[i]);
            REQUIRE(oa.rewards[i].total == ob.rewards[i].total);
        }
        if (oa.episode_done) break;
    }
}

TEST_CASE("single-control heading task tracks a goal") {
    EnvConfig cfg = base_config(TaskKind::SingleControlHeading);
    cfg.spawn_random_bearing = true;
    CombatEnv env(cfg);
    const auto obs = env.reset(41);
    REQUIRE(obs[0].size() == 18);

    const double goal = env.goal_heading();
    std::vector<AgentAction> acts(1);
    HighLevelAction h;
    // steer toward the goal with the largest offset in the right direction
    const double err0 = wrap_pi(goal - env.aircraft()[0].heading);
    h.heading_bin = err0 > 0 ? 6 : 0;
    acts[0] = AgentAction::from_hla(h);
    const StepOutcome out = env.step(acts);
    const double err = wrap_pi(env.aircraft()[0].heading - goal);
    CHECK(out.rewards[0].posture == Catch::Approx(-std::abs(err) / kPi).margin(1e-12));
    CHECK(out.rewards[0].posture <= 0.0);
    CHECK(out.rewards[0].posture >= -1.0);
}

TEST_CASE("malformed action bins are rejected") {
    CombatEnv env(base_config(TaskKind::NoWeapon1v1));
    env.reset(43);
    std::vector<AgentAction> acts = hold_actions(2);
    acts[0].hla.heading_bin = 99;
    CHECK_THROWS_AS(env.step(acts), std::invalid_argument);
    acts[0].hla.heading_bin = 0;
    acts.pop_back();
    CHECK_THROWS_AS(env.step(acts), std::invalid_argument);
}

TEST_CASE("raw control mode applies held surfaces directly") {
    EnvConfig cfg = base_config(TaskKind::NoWeapon1v1);
    CombatEnv env(cfg);
    env.reset(47);
    std::vector<AgentAction> acts(2);
    ControlInput ctrl;
    ctrl.aileron = 0.5;
    ctrl.throttle = 0.25;
    acts[0] = AgentAction::from_ctrl(ctrl);
    acts[1] = AgentAction::from_ctrl(ControlInput{});
    const double roll0 = env.aircraft()[0].roll;
    env.step(acts);
    // roll integrates the aileron for the whole decision interval
    const double expect =
        roll0 + cfg.airframe.roll_rate_gain * 0.5 * cfg.decision_interval * kInnerDt;
    CHECK(env.aircraft()[0].roll == Catch::Approx(expect).margin(1e-9));
}
