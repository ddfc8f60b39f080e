// Task environments: spawning, the hierarchical control interface, missile
// bookkeeping, event detection, observation construction, termination, and
// the scripted pursuit baseline.
//
// One CombatEnv instance is single-threaded; run one per worker. All
// randomness flows through the instance's own stream, so a (config, seed,
// action sequence) triple fully determines every StepOutcome.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dogfight/airframe.hpp"
#include "dogfight/common.hpp"
#include "dogfight/ordnance.hpp"
#include "dogfight/rewards.hpp"
#include "dogfight/rng.hpp"

namespace dogfight {

enum class TaskKind {
    SingleControlHeading,
    NoWeapon1v1,
    DodgeMissile1v1,
    ShootMissile1v1,
    NoWeapon2v2,
    ShootMissile2v2,
};

inline const char* task_name(TaskKind t) {
    switch (t) {
        case TaskKind::SingleControlHeading: return "SingleControlHeading";
        case TaskKind::NoWeapon1v1: return "NoWeapon1v1";
        case TaskKind::DodgeMissile1v1: return "DodgeMissile1v1";
        case TaskKind::ShootMissile1v1: return "ShootMissile1v1";
        case TaskKind::NoWeapon2v2: return "NoWeapon2v2";
        case TaskKind::ShootMissile2v2: return "ShootMissile2v2";
    }
    return "?";
}

inline int task_aircraft_count(TaskKind t) {
    switch (t) {
        case TaskKind::SingleControlHeading: return 1;
        case TaskKind::NoWeapon2v2:
        case TaskKind::ShootMissile2v2: return 4;
        default: return 2;
    }
}

/// Team layout: 1v1 puts aircraft 0 vs 1; 2v2 puts {0,1} vs {2,3}.
inline int task_team_of(TaskKind t, int aircraft) {
    if (task_aircraft_count(t) == 4) return aircraft / 2;
    return aircraft;
}

/// Missiles exist in the world (Dodge and Shoot variants).
inline bool task_has_missiles(TaskKind t) {
    return t == TaskKind::DodgeMissile1v1 || t == TaskKind::ShootMissile1v1 ||
           t == TaskKind::ShootMissile2v2;
}

/// The shoot decision is part of the action space (Shoot variants only;
/// Dodge launches follow the scripted rule instead).
inline bool task_has_shoot_action(TaskKind t) {
    return t == TaskKind::ShootMissile1v1 || t == TaskKind::ShootMissile2v2;
}

// ---- hierarchical command interface ----

inline constexpr std::array<double, 7> kHeadingOffsets = {
    -kPi / 3.0, -kPi / 6.0, -kPi / 12.0, 0.0, kPi / 12.0, kPi / 6.0, kPi / 3.0};
inline constexpr std::array<double, 5> kAltitudeOffsets = {-2100.0, -600.0, 0.0,
                                                           600.0, 2100.0};
inline constexpr std::array<double, 5> kSpeedOffsets = {-60.0, -20.0, 0.0, 20.0, 60.0};
inline constexpr int kZeroHeadingBin = 3;
inline constexpr int kZeroAltitudeBin = 2;
inline constexpr int kZeroSpeedBin = 2;

struct HighLevelAction {
    int heading_bin = kZeroHeadingBin;
    int altitude_bin = kZeroAltitudeBin;
    int speed_bin = kZeroSpeedBin;
    bool shoot = false;  // ignored outside Shoot tasks
};

/// Either a high-level command (executed by the PID cascade) or a raw
/// control-surface input held for the whole decision interval.
struct AgentAction {
    bool is_raw = false;
    HighLevelAction hla;
    ControlInput ctrl;
    double shoot_prob = 0.0;  // [0,1]; hierarchy actions set this from the shoot bit

    static AgentAction from_hla(const HighLevelAction& a) {
        AgentAction act;
        act.hla = a;
        act.shoot_prob = a.shoot ? 1.0 : 0.0;
        return act;
    }
    static AgentAction from_ctrl(const ControlInput& c, double shoot_prob = 0.0) {
        AgentAction act;
        act.is_raw = true;
        act.ctrl = c;
        act.shoot_prob = shoot_prob;
        return act;
    }
};

// ---- shoot decision prior ----

/// Beta prior over the per-shot hit probability. The posterior mean scales
/// the policy's firing probability; each resolved missile updates the counts
/// (hit -> alpha, expired -> beta).
struct BetaShootPrior {
    double alpha = 10.0;
    double beta = 10.0;

    double mean() const { return alpha / (alpha + beta); }
};

inline double effective_fire_probability(double policy_shoot_prob,
                                         const BetaShootPrior& prior) {
    return policy_shoot_prob * prior.mean();
}

inline bool shoot_gate(double policy_shoot_prob, const BetaShootPrior& prior, Rng& rng) {
    if (!(policy_shoot_prob >= 0.0 && policy_shoot_prob <= 1.0))
        throw std::invalid_argument("shoot_gate: probability outside [0,1]");
    return rng.uniform() < effective_fire_probability(policy_shoot_prob, prior);
}

// ---- low-level controller ----

struct PidGains {
    double kp_heading = 4.0;
    double roll_cmd_max = deg2rad(75.0);
    double kp_roll = 4.0;
    double kd_roll = 0.4;
    double kp_altitude = 0.0015;              // rad of pitch per m of error
    double pitch_cmd_max = deg2rad(30.0);
    double kp_pitch = 5.0;
    double kd_pitch = 0.3;
    double kp_speed = 0.05;
    double ki_speed = 0.01;
    double speed_integral_max = 50.0;
};

struct CommandTargets {
    double heading = 0.0;   // rad
    double altitude = 0.0;  // m
    double speed = 0.0;     // m/s
};

/// Cascaded loops: heading error -> roll command -> aileron (PD); altitude
/// error -> pitch command -> elevator (PD); speed error -> throttle (PI with
/// a drag/gravity feedforward and anti-windup). Rate terms come from finite
/// differences of the tracked state, so the controller carries memory and is
/// owned per aircraft.
class PidController {
public:
    void reset() {
        has_prev_ = false;
        prev_roll_ = prev_pitch_ = 0.0;
        speed_integral_ = 0.0;
    }

    ControlInput control(const CommandTargets& tgt, const AircraftState& s,
                         const AirframeConfig& cfg, const PidGains& g, double dt) {
        if (!(std::isfinite(tgt.heading) && std::isfinite(tgt.altitude) &&
              std::isfinite(tgt.speed)))
            throw std::invalid_argument("low_level_pid: non-finite targets");
        ControlInput out;

        const double heading_err = wrap_pi(tgt.heading - s.heading);
        const double roll_cmd =
            clamp(g.kp_heading * heading_err, -g.roll_cmd_max, g.roll_cmd_max);
        const double roll_rate = has_prev_ ? (s.roll - prev_roll_) / dt : 0.0;
        out.aileron =
            clamp(g.kp_roll * (roll_cmd - s.roll) - g.kd_roll * roll_rate, -1.0, 1.0);

        const double pitch_cmd = clamp(g.kp_altitude * (tgt.altitude - s.position.z),
                                       -g.pitch_cmd_max, g.pitch_cmd_max);
        const double pitch_rate = has_prev_ ? (s.pitch - prev_pitch_) / dt : 0.0;
        out.elevator =
            clamp(g.kp_pitch * (pitch_cmd - s.pitch) - g.kd_pitch * pitch_rate, -1.0, 1.0);

        const double speed_err = tgt.speed - s.airspeed;
        const double feedforward = (cfg.drag_coefficient * s.airspeed * s.airspeed +
                                    cfg.mass * cfg.gravity * std::sin(s.pitch)) /
                                   cfg.max_thrust;
        const double unclamped =
            feedforward + g.kp_speed * speed_err + g.ki_speed * speed_integral_;
        // integrate only while the throttle can still act on the error
        if ((unclamped > 0.0 && unclamped < 1.0) || (unclamped <= 0.0 && speed_err > 0.0) ||
            (unclamped >= 1.0 && speed_err < 0.0)) {
            speed_integral_ = clamp(speed_integral_ + speed_err * dt,
                                    -g.speed_integral_max, g.speed_integral_max);
        }
        out.throttle = clamp(unclamped, 0.0, 1.0);

        prev_roll_ = s.roll;
        prev_pitch_ = s.pitch;
        has_prev_ = true;
        return out;
    }

private:
    bool has_prev_ = false;
    double prev_roll_ = 0.0;
    double prev_pitch_ = 0.0;
    double speed_integral_ = 0.0;
};

// ---- environment ----

struct EnvConfig {
    TaskKind task = TaskKind::NoWeapon1v1;
    int decision_interval = 12;     // inner physics steps per decision
    int max_decision_steps = 1000;  // hard episode cap
    double spawn_altitude = 6000.0;
    double spawn_altitude_jitter = 1000.0;
    double spawn_separation_km = 14.0;
    double spawn_separation_jitter_km = 2.0;
    bool spawn_random_bearing = true;
    double spawn_speed = 200.0;
    int missiles_per_aircraft = 4;
    RewardConfig reward;
    MissileConfig missile;
    AirframeConfig airframe;
    PidGains pid;
    double prior_alpha = 10.0;  // initial Beta shoot prior
    double prior_beta = 10.0;
    double shoot_gate_range_km = 12.0;  // learner launch envelope
    double shoot_gate_ao = deg2rad(60.0);
    double dodge_fire_range_km = 8.0;   // scripted launch rule (Dodge task)
    double dodge_fire_ao = deg2rad(30.0);
    double dodge_cooldown = 10.0;  // s
    std::uint64_t seed = 0;
};

inline constexpr double kInnerDt = 1.0 / 60.0;

// observation block sizes and normalizers
inline constexpr int kEgoBlock = 9;
inline constexpr int kPerAircraftBlock = 6;
inline constexpr int kGoalBlock = 3;     // SingleControl only
inline constexpr int kMissileBlock = 6;
inline constexpr double kDistanceNorm = 10000.0;
inline constexpr double kSpeedNorm = 340.0;
inline constexpr double kAltitudeNorm = 5000.0;
inline constexpr double kVerticalSpeedNorm = 100.0;
inline constexpr double kMissileClosureNorm = 680.0;
inline constexpr double kTimeToGoNorm = 60.0;

inline int observation_size(TaskKind t) {
    if (t == TaskKind::SingleControlHeading)
        return kEgoBlock + kGoalBlock + kMissileBlock;
    return kEgoBlock + (task_aircraft_count(t) - 1) * kPerAircraftBlock + kMissileBlock;
}

struct StepOutcome {
    std::vector<std::vector<double>> observations;  // zeros for dead agents
    std::vector<RewardBreakdown> rewards;
    std::vector<bool> done;
    bool episode_done = false;
    std::vector<CombatEvent> events;
    std::vector<double> episode_reward;  // accumulated totals per agent
    int decision_steps = 0;
};

/// Scripted opponent: turn toward the enemy, match its altitude, run at full
/// speed, and request a shot inside an 8 km / 30 degree envelope.
inline HighLevelAction pursue_baseline(const AircraftState& agent,
                                       const AircraftState& enemy, TaskKind task) {
    if (!agent.alive || !enemy.alive)
        throw std::invalid_argument("pursue_baseline: both aircraft must be alive");
    HighLevelAction act;
    const Vec3 los = enemy.position - agent.position;
    const double bearing = std::atan2(los.y, los.x);
    double best = 1e300;
    for (int i = 0; i < static_cast<int>(kHeadingOffsets.size()); ++i) {
        const double commanded = agent.heading + kHeadingOffsets[static_cast<std::size_t>(i)];
        const double err = std::abs(wrap_pi(bearing - commanded));
        if (err < best) { best = err; act.heading_bin = i; }
    }
    best = 1e300;
    for (int i = 0; i < static_cast<int>(kAltitudeOffsets.size()); ++i) {
        const double commanded =
            agent.position.z + kAltitudeOffsets[static_cast<std::size_t>(i)];
        const double err = std::abs(enemy.position.z - commanded);
        if (err < best) { best = err; act.altitude_bin = i; }
    }
    act.speed_bin = static_cast<int>(kSpeedOffsets.size()) - 1;
    if (task_has_shoot_action(task)) {
        const RelativeGeometry g = relative_geometry(agent, enemy);
        act.shoot = g.distance < 8000.0 && g.ao < deg2rad(30.0);
    }
    return act;
}

class CombatEnv {
public:
    explicit CombatEnv(const EnvConfig& cfg) : cfg_(cfg) {
        if (cfg.decision_interval < 1)
            throw ConfigError("EnvConfig: decision_interval must be >= 1");
        if (cfg.max_decision_steps < 1)
            throw ConfigError("EnvConfig: max_decision_steps must be >= 1");
        if (!(cfg.prior_alpha > 0.0 && cfg.prior_beta > 0.0))
            throw ConfigError("EnvConfig: Beta prior parameters must be positive");
        n_ = task_aircraft_count(cfg.task);
        reset(cfg.seed);
    }

    const EnvConfig& config() const { return cfg_; }
    int aircraft_count() const { return n_; }
    bool episode_done() const { return episode_done_; }
    const std::vector<AircraftState>& aircraft() const { return aircraft_; }
    const std::vector<MissileState>& missiles() const { return missiles_; }
    const std::vector<BetaShootPrior>& shoot_priors() const { return priors_; }
    void set_shoot_priors(std::vector<BetaShootPrior> priors) {
        if (priors.size() != static_cast<std::size_t>(n_))
            throw std::invalid_argument("set_shoot_priors: arity mismatch");
        priors_ = std::move(priors);
    }
    double goal_heading() const { return goal_.heading; }
    int remaining_ammo(int i) const { return ammo_[static_cast<std::size_t>(i)]; }

    /// Called after every inner physics step; used by the trajectory exporter.
    void set_inner_hook(std::function<void()> hook) { inner_hook_ = std::move(hook); }

    std::vector<std::vector<double>> reset(std::uint64_t seed) {
        rng_.seed(mix_seed(seed, 0xA12EA));
        aircraft_.assign(static_cast<std::size_t>(n_), AircraftState{});
        pids_.assign(static_cast<std::size_t>(n_), PidController{});
        targets_.assign(static_cast<std::size_t>(n_), CommandTargets{});
        held_raw_.assign(static_cast<std::size_t>(n_), ControlInput{});
        raw_mode_.assign(static_cast<std::size_t>(n_), false);
        missiles_.clear();
        ammo_.assign(static_cast<std::size_t>(n_),
                     task_has_missiles(cfg_.task) ? cfg_.missiles_per_aircraft : 0);
        fire_age_.assign(static_cast<std::size_t>(n_), 1e9);
        if (priors_.empty())  // the prior is knowledge: it survives resets
            priors_.assign(static_cast<std::size_t>(n_),
                           BetaShootPrior{cfg_.prior_alpha, cfg_.prior_beta});
        terminal_processed_.assign(static_cast<std::size_t>(n_), false);
        episode_reward_.assign(static_cast<std::size_t>(n_), 0.0);
        decision_steps_ = 0;
        episode_done_ = false;
        spawn();
        std::vector<std::vector<double>> obs(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) obs[static_cast<std::size_t>(i)] = build_observation(i);
        return obs;
    }

    /// Execute one decision step: freeze per-agent targets, resolve launch
    /// decisions, run decision_interval inner physics steps with the PID (or
    /// held raw controls), advance missiles, detect events, and score.
    StepOutcome step(const std::vector<AgentAction>& actions) {
        if (episode_done_) throw std::logic_error("CombatEnv::step after episode end");
        if (static_cast<int>(actions.size()) != n_)
            throw std::invalid_argument("CombatEnv::step: one action per agent expected");

        for (int i = 0; i < n_; ++i) {
            auto& s = aircraft_[static_cast<std::size_t>(i)];
            if (!s.alive) continue;  // actions for dead agents are ignored
            const AgentAction& a = actions[static_cast<std::size_t>(i)];
            raw_mode_[static_cast<std::size_t>(i)] = a.is_raw;
            if (a.is_raw) {
                if (!a.ctrl.finite())
                    throw std::invalid_argument("CombatEnv::step: non-finite controls");
                held_raw_[static_cast<std::size_t>(i)] = a.ctrl;
                held_raw_[static_cast<std::size_t>(i)].aileron = clamp(a.ctrl.aileron, -1.0, 1.0);
                held_raw_[static_cast<std::size_t>(i)].elevator = clamp(a.ctrl.elevator, -1.0, 1.0);
                held_raw_[static_cast<std::size_t>(i)].rudder = clamp(a.ctrl.rudder, -1.0, 1.0);
                held_raw_[static_cast<std::size_t>(i)].throttle = clamp(a.ctrl.throttle, 0.0, 1.0);
            } else {
                const HighLevelAction& h = a.hla;
                if (h.heading_bin < 0 || h.heading_bin >= static_cast<int>(kHeadingOffsets.size()) ||
                    h.altitude_bin < 0 || h.altitude_bin >= static_cast<int>(kAltitudeOffsets.size()) ||
                    h.speed_bin < 0 || h.speed_bin >= static_cast<int>(kSpeedOffsets.size()))
                    throw std::invalid_argument("CombatEnv::step: action bin out of range");
                auto& t = targets_[static_cast<std::size_t>(i)];
                t.heading = wrap_pi(s.heading + kHeadingOffsets[static_cast<std::size_t>(h.heading_bin)]);
                t.altitude = s.position.z + kAltitudeOffsets[static_cast<std::size_t>(h.altitude_bin)];
                t.speed = clamp(s.airspeed + kSpeedOffsets[static_cast<std::size_t>(h.speed_bin)],
                                0.0, cfg_.airframe.max_speed);
            }
        }

        StepOutcome out;
        resolve_launches(actions, out.events);

        for (int k = 0; k < cfg_.decision_interval; ++k) {
            step_aircraft_inner(out.events);
            step_missiles_inner(out.events);
            if (inner_hook_) inner_hook_();
        }
        decision_steps_ += 1;

        out.rewards.assign(static_cast<std::size_t>(n_), RewardBreakdown{});
        for (int i = 0; i < n_; ++i) {
            auto& s = aircraft_[static_cast<std::size_t>(i)];
            if (terminal_processed_[static_cast<std::size_t>(i)]) continue;
            RewardBreakdown r = score_agent(i, out.events);
            out.rewards[static_cast<std::size_t>(i)] = r;
            episode_reward_[static_cast<std::size_t>(i)] += r.total;
            if (!s.alive) terminal_processed_[static_cast<std::size_t>(i)] = true;
        }

        episode_done_ = decision_steps_ >= cfg_.max_decision_steps || side_eliminated();
        out.episode_done = episode_done_;
        out.done.assign(static_cast<std::size_t>(n_), false);
        for (int i = 0; i < n_; ++i)
            out.done[static_cast<std::size_t>(i)] =
                episode_done_ || !aircraft_[static_cast<std::size_t>(i)].alive;

        out.observations.resize(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i)
            out.observations[static_cast<std::size_t>(i)] = build_observation(i);
        out.episode_reward = episode_reward_;
        out.decision_steps = decision_steps_;
        return out;
    }

    /// Observation vector for one agent (zeros when dead). Layout: ego block,
    /// then per-other-aircraft blocks ordered teammates-then-enemies (goal
    /// block instead for SingleControl), then the nearest-threat missile block.
    std::vector<double> build_observation(int agent) const {
        std::vector<double> obs(static_cast<std::size_t>(observation_size(cfg_.task)), 0.0);
        const auto& s = aircraft_[static_cast<std::size_t>(agent)];
        if (!s.alive) return obs;
        std::size_t k = 0;
        obs[k++] = s.position.z / kAltitudeNorm;
        obs[k++] = std::sin(s.heading);
        obs[k++] = std::cos(s.heading);
        obs[k++] = std::sin(s.roll);
        obs[k++] = std::cos(s.roll);
        obs[k++] = std::sin(s.pitch);
        obs[k++] = std::cos(s.pitch);
        obs[k++] = s.airspeed / kSpeedNorm;
        obs[k++] = s.velocity.z / kVerticalSpeedNorm;

        if (cfg_.task == TaskKind::SingleControlHeading) {
            obs[k++] = wrap_pi(goal_.heading - s.heading) / kPi;
            obs[k++] = (goal_.altitude - s.position.z) / kAltitudeNorm;
            obs[k++] = (goal_.speed - s.airspeed) / kSpeedNorm;
        } else {
            for (int other : others_teammates_first(agent)) {
                const auto& o = aircraft_[static_cast<std::size_t>(other)];
                if (!o.alive) { k += kPerAircraftBlock; continue; }
                const RelativeGeometry g = relative_geometry(s, o);
                obs[k++] = g.distance / kDistanceNorm;
                obs[k++] = g.closure_rate / kSpeedNorm;
                obs[k++] = g.ao / kPi;
                obs[k++] = g.ta / kPi;
                obs[k++] = g.delta_altitude / kAltitudeNorm;
                obs[k++] = g.delta_heading / kPi;
            }
        }

        // nearest inbound missile by time-to-go
        const MissileState* threat = nullptr;
        double best_tgo = 1e300;
        for (const auto& m : missiles_) {
            if (m.status != MissileStatus::Flying || m.target_id != agent) continue;
            const double tgo = missile_time_to_go(m, s);
            if (tgo < best_tgo) { best_tgo = tgo; threat = &m; }
        }
        if (threat) {
            const Vec3 los = threat->position - s.position;
            const double bearing = wrap_pi(std::atan2(los.y, los.x) - s.heading);
            const double dist = los.norm();
            const double closure =
                -los.dot(threat->velocity - s.velocity) / std::max(dist, 1e-9);
            obs[k++] = 1.0;
            obs[k++] = dist / kDistanceNorm;
            obs[k++] = closure / kMissileClosureNorm;
            obs[k++] = std::sin(bearing);
            obs[k++] = std::cos(bearing);
            obs[k++] = clamp(best_tgo, 0.0, kTimeToGoNorm) / kTimeToGoNorm;
        }
        return obs;
    }

    /// The PID cascade behind the hierarchical interface, exposed for tests
    /// and for substituting a learned low-level controller.
    ControlInput low_level_pid(int agent, const CommandTargets& targets) {
        return pids_[static_cast<std::size_t>(agent)].control(
            targets, aircraft_[static_cast<std::size_t>(agent)], cfg_.airframe,
            cfg_.pid, kInnerDt);
    }

    std::vector<int> others_teammates_first(int agent) const {
        std::vector<int> order;
        for (int j = 0; j < n_; ++j)
            if (j != agent && task_team_of(cfg_.task, j) == task_team_of(cfg_.task, agent))
                order.push_back(j);
        for (int j = 0; j < n_; ++j)
            if (task_team_of(cfg_.task, j) != task_team_of(cfg_.task, agent))
                order.push_back(j);
        return order;
    }

    /// Nearest living enemy, or -1 when the opposing side is gone.
    int nearest_enemy(int agent) const {
        const auto& s = aircraft_[static_cast<std::size_t>(agent)];
        int best = -1;
        double best_d = 1e300;
        for (int j = 0; j < n_; ++j) {
            if (task_team_of(cfg_.task, j) == task_team_of(cfg_.task, agent)) continue;
            const auto& o = aircraft_[static_cast<std::size_t>(j)];
            if (!o.alive) continue;
            const double d = (o.position - s.position).norm();
            if (d < best_d) { best_d = d; best = j; }
        }
        return best;
    }

private:
    struct Goal {
        double heading = 0.0;
        double altitude = 6000.0;
        double speed = 200.0;
    };

    void spawn() {
        const double altitude =
            cfg_.spawn_altitude +
            rng_.uniform(-cfg_.spawn_altitude_jitter, cfg_.spawn_altitude_jitter);
        if (cfg_.task == TaskKind::SingleControlHeading) {
            aircraft_[0] = make_level_state({0.0, 0.0, altitude}, 0.0, cfg_.spawn_speed);
            goal_.heading = cfg_.spawn_random_bearing ? rng_.uniform(-kPi, kPi) : kPi / 2.0;
            goal_.altitude = altitude;
            goal_.speed = cfg_.spawn_speed;
            return;
        }
        const double separation =
            1000.0 * (cfg_.spawn_separation_km +
                      rng_.uniform(-cfg_.spawn_separation_jitter_km,
                                   cfg_.spawn_separation_jitter_km));
        const double bearing = cfg_.spawn_random_bearing ? rng_.uniform(-kPi, kPi) : 0.0;
        // team 0 sits at -separation/2 along the engagement axis facing team 1
        const Vec3 axis{std::cos(bearing), std::sin(bearing), 0.0};
        const Vec3 lateral{-std::sin(bearing), std::cos(bearing), 0.0};
        const int per_team = n_ / 2;
        for (int i = 0; i < n_; ++i) {
            const int team = task_team_of(cfg_.task, i);
            const int slot = per_team == 1 ? 0 : i % 2;
            const double side = team == 0 ? -1.0 : 1.0;
            Vec3 pos = axis * (side * separation / 2.0);
            if (per_team > 1 && slot == 1) pos += lateral * 2000.0;  // wingman offset
            pos.z = altitude;
            const double heading = team == 0 ? bearing : wrap_pi(bearing + kPi);
            aircraft_[static_cast<std::size_t>(i)] =
                make_level_state(pos, heading, cfg_.spawn_speed);
        }
    }

    /// Launch decisions happen once per decision step, before physics.
    void resolve_launches(const std::vector<AgentAction>& actions,
                          std::vector<CombatEvent>&) {
        if (!task_has_missiles(cfg_.task)) return;
        for (int i = 0; i < n_; ++i) {
            auto& s = aircraft_[static_cast<std::size_t>(i)];
            fire_age_[static_cast<std::size_t>(i)] += cfg_.decision_interval * kInnerDt;
            if (!s.alive || ammo_[static_cast<std::size_t>(i)] <= 0) continue;
            const int enemy = nearest_enemy(i);
            if (enemy < 0) continue;
            const RelativeGeometry g =
                relative_geometry(s, aircraft_[static_cast<std::size_t>(enemy)]);
            bool fire = false;
            if (task_has_shoot_action(cfg_.task)) {
                const double p = actions[static_cast<std::size_t>(i)].shoot_prob;
                if (p > 0.0 && g.distance < cfg_.shoot_gate_range_km * 1000.0 &&
                    g.ao < cfg_.shoot_gate_ao)
                    fire = shoot_gate(p, priors_[static_cast<std::size_t>(i)], rng_);
            } else {
                // Dodge task: launches follow the fixed range/angle rule
                fire = fire_age_[static_cast<std::size_t>(i)] >= cfg_.dodge_cooldown &&
                       g.distance < cfg_.dodge_fire_range_km * 1000.0 &&
                       g.ao < cfg_.dodge_fire_ao;
            }
            if (fire) {
                missiles_.push_back(launch_missile(s, i, enemy, cfg_.missile));
                ammo_[static_cast<std::size_t>(i)] -= 1;
                fire_age_[static_cast<std::size_t>(i)] = 0.0;
            }
        }
    }

    void step_aircraft_inner(std::vector<CombatEvent>& events) {
        for (int i = 0; i < n_; ++i) {
            auto& s = aircraft_[static_cast<std::size_t>(i)];
            if (!s.alive) continue;
            const ControlInput ctrl =
                raw_mode_[static_cast<std::size_t>(i)]
                    ? held_raw_[static_cast<std::size_t>(i)]
                    : low_level_pid(i, targets_[static_cast<std::size_t>(i)]);
            s = step_airframe(s, ctrl, cfg_.airframe, kInnerDt);
            if (s.position.z <= 0.0) {
                s.alive = false;
                events.push_back({EventKind::Crash, i, std::nullopt});
                if (cfg_.reward.kill_on_crash) {
                    const int enemy = nearest_enemy(i);
                    if (enemy >= 0) events.push_back({EventKind::EnemyKill, enemy, i});
                }
            }
        }
    }

    void step_missiles_inner(std::vector<CombatEvent>& events) {
        for (auto& m : missiles_) {
            if (m.status != MissileStatus::Flying) continue;
            auto& target = aircraft_[static_cast<std::size_t>(m.target_id)];
            if (!target.alive) {
                m.status = MissileStatus::Expired;
                priors_[static_cast<std::size_t>(m.shooter_id)].beta += 1.0;
                continue;
            }
            m = step_missile(m, target, cfg_.missile, kInnerDt);
            if (m.status == MissileStatus::Hit) {
                target.alive = false;
                events.push_back({EventKind::ShotDownByMissile, m.target_id, m.shooter_id});
                events.push_back({EventKind::EnemyKill, m.shooter_id, m.target_id});
                priors_[static_cast<std::size_t>(m.shooter_id)].alpha += 1.0;
            } else if (m.status == MissileStatus::Expired) {
                priors_[static_cast<std::size_t>(m.shooter_id)].beta += 1.0;
            }
        }
    }

    RewardBreakdown score_agent(int agent, const std::vector<CombatEvent>& events) const {
        const auto& s = aircraft_[static_cast<std::size_t>(agent)];
        RewardBreakdown r;
        r.altitude = altitude_reward(s, cfg_.reward);
        if (cfg_.task == TaskKind::SingleControlHeading) {
            r.posture = -std::abs(wrap_pi(s.heading - goal_.heading)) / kPi;
        } else {
            const int enemy = nearest_enemy(agent);
            if (enemy >= 0 && s.alive) {
                const RelativeGeometry g =
                    relative_geometry(s, aircraft_[static_cast<std::size_t>(enemy)]);
                r.posture = posture_reward(g, cfg_.reward);
            }
        }
        r.event = event_reward(events, agent, cfg_.reward);
        r.total = cfg_.reward.weight_altitude * r.altitude +
                  cfg_.reward.weight_posture * r.posture + r.event;
        return r;
    }

    bool side_eliminated() const {
        if (cfg_.task == TaskKind::SingleControlHeading) return !aircraft_[0].alive;
        bool team_alive[2] = {false, false};
        for (int i = 0; i < n_; ++i)
            if (aircraft_[static_cast<std::size_t>(i)].alive)
                team_alive[task_team_of(cfg_.task, i)] = true;
        return !team_alive[0] || !team_alive[1];
    }

    double missile_time_to_go(const MissileState& m, const AircraftState& target) const {
        const Vec3 los = target.position - m.position;
        const double dist = los.norm();
        const double closing = los.dot(m.velocity - target.velocity) / std::max(dist, 1e-9);
        if (closing <= 1.0) return kTimeToGoNorm;
        return std::min(dist / closing, kTimeToGoNorm);
    }

    EnvConfig cfg_;
    int n_ = 0;
    Rng rng_;
    std::vector<AircraftState> aircraft_;
    std::vector<PidController> pids_;
    std::vector<CommandTargets> targets_;
    std::vector<ControlInput> held_raw_;
    std::vector<bool> raw_mode_;
    std::vector<MissileState> missiles_;
    std::vector<int> ammo_;
    std::vector<double> fire_age_;  // s since last launch (scripted-rule cooldown)
    std::vector<BetaShootPrior> priors_;
    std::vector<bool> terminal_processed_;
    std::vector<double> episode_reward_;
    Goal goal_;
    std::function<void()> inner_hook_;
    int decision_steps_ = 0;
    bool episode_done_ = false;
};

}  // namespace dogfight
