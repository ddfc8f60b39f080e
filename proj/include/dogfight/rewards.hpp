// Per-step composite reward: a dense flight-safety penalty, a dense
// engagement-posture term, and sparse high-magnitude combat events.
#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "dogfight/airframe.hpp"
#include "dogfight/common.hpp"

namespace dogfight {

struct RewardConfig {
    double safe_altitude = 4000.0;    // m, below this low speed is penalized
    double danger_altitude = 3500.0;  // m, below this altitude itself is penalized
    double safe_speed = 150.0;        // m/s
    double range_inner_km = 1.0;      // full posture credit starts here
    double range_outer_km = 3.0;      // ...and ends here
    double range_far_km = 10.0;       // posture credit reaches zero here
    double far_penalty_floor = -0.1;  // additive penalty cap beyond range_far
    double event_kill = 200.0;
    double event_death = -200.0;
    double event_crash = -200.0;
    double weight_altitude = 1.0;
    double weight_posture = 1.0;
    bool kill_on_crash = false;  // credit an EnemyKill when the opponent crashes itself
};

enum class EventKind { ShotDownByMissile, Crash, EnemyKill };

struct CombatEvent {
    EventKind kind;
    int subject;                        // agent the event happened to / is credited to
    std::optional<int> counterpart;     // e.g. the shooter, or the victim of a kill
};

struct RewardBreakdown {
    double altitude = 0.0;  // in [-2, 0]
    double posture = 0.0;
    double event = 0.0;
    double total = 0.0;
};

/// Flight-safety penalty in [-2, 0]: a speed deficit term active below the
/// safe altitude plus an altitude deficit term active below the danger
/// altitude, each clipped to [-1, 0].
inline double altitude_reward(const AircraftState& state, const RewardConfig& cfg) {
    const double alt = state.altitude();
    double speed_penalty = 0.0;
    if (alt < cfg.safe_altitude)
        speed_penalty =
            -clamp((cfg.safe_speed - state.airspeed) / cfg.safe_speed, 0.0, 1.0);
    double altitude_penalty = 0.0;
    if (alt < cfg.danger_altitude)
        altitude_penalty =
            -clamp((cfg.danger_altitude - alt) / cfg.danger_altitude, 0.0, 1.0);
    return speed_penalty + altitude_penalty;
}

/// Range factor of the posture term. Trapezoid in distance: ramps 0->1 below
/// range_inner, holds 1 through range_outer, decays 1->0 at range_far, then
/// keeps the same slope below zero until it caps at far_penalty_floor.
inline double posture_range_factor(double distance_m, const RewardConfig& cfg) {
    const double d = distance_m / 1000.0;
    if (d < cfg.range_inner_km) return d / cfg.range_inner_km;
    if (d <= cfg.range_outer_km) return 1.0;
    const double decay = (cfg.range_far_km - d) / (cfg.range_far_km - cfg.range_outer_km);
    return std::max(decay, cfg.far_penalty_floor);
}

/// Orientation factor in [-1, 1]: positive when pointing at the opponent,
/// negative when targeted. Antisymmetric under swapping the two roles.
inline double posture_orientation_factor(double ao, double ta) {
    return 0.5 * (std::cos(ao) - std::cos(ta));
}

/// Posture term. The orientation factor is scaled by the range factor inside
/// the engagement band; out-of-band negative range feedback applies
/// additively so that being far away is never rewarded regardless of aspect.
inline double posture_reward(const RelativeGeometry& geom, const RewardConfig& cfg) {
    const double orientation = posture_orientation_factor(geom.ao, geom.ta);
    const double range = posture_range_factor(geom.distance, cfg);
    return orientation * std::max(range, 0.0) + std::min(range, 0.0);
}

/// Sparse event term: sums the configured values over the events whose
/// subject is this agent.
inline double event_reward(const std::vector<CombatEvent>& events, int agent,
                           const RewardConfig& cfg) {
    double total = 0.0;
    for (const auto& e : events) {
        if (e.subject != agent) continue;
        switch (e.kind) {
            case EventKind::ShotDownByMissile: total += cfg.event_death; break;
            case EventKind::Crash: total += cfg.event_crash; break;
            case EventKind::EnemyKill: total += cfg.event_kill; break;
        }
    }
    return total;
}

inline RewardBreakdown total_reward(const AircraftState& state,
                                    const RelativeGeometry& geom,
                                    const std::vector<CombatEvent>& events,
                                    int agent, const RewardConfig& cfg) {
    RewardBreakdown r;
    r.altitude = altitude_reward(state, cfg);
    r.posture = posture_reward(geom, cfg);
    r.event = event_reward(events, agent, cfg);
    r.total = cfg.weight_altitude * r.altitude + cfg.weight_posture * r.posture + r.event;
    return r;
}

}  // namespace dogfight
