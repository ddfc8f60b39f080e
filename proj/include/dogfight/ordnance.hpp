// Guided missile flight: boost/coast propulsion, quadratic drag, true
// proportional navigation, proximity fusing and lifespan bookkeeping.
#pragma once

#include <cmath>
#include <stdexcept>

#include "dogfight/airframe.hpp"
#include "dogfight/common.hpp"

namespace dogfight {

enum class MissileStatus { Flying, Hit, Expired };

inline const char* missile_status_name(MissileStatus s) {
    switch (s) {
        case MissileStatus::Flying: return "flying";
        case MissileStatus::Hit: return "hit";
        case MissileStatus::Expired: return "expired";
    }
    return "?";
}

struct MissileState {
    Vec3 position;   // m, NEU
    Vec3 velocity;   // m/s
    double age = 0.0;
    int shooter_id = -1;
    int target_id = -1;
    MissileStatus status = MissileStatus::Flying;
};

struct MissileConfig {
    double nav_constant = 3.0;       // dimensionless, >= 1
    double boost_thrust = 30000.0;   // N, along the velocity vector
    double boost_duration = 4.0;     // s
    double mass = 84.0;              // kg
    double drag_coefficient = 0.004; // N per (m/s)^2
    double max_lateral_g = 30.0;     // guidance command clamp, in g
    double explosive_radius = 300.0; // m, proximity fuse
    double lifespan = 60.0;          // s
    double gravity = 9.81;           // m/s^2
};

/// Fire a missile: it leaves the rail with the shooter's position and
/// velocity and starts its boost phase.
inline MissileState launch_missile(const AircraftState& shooter, int shooter_id,
                                   int target_id, const MissileConfig&) {
    if (!shooter.alive)
        throw std::invalid_argument("launch_missile: shooter is not alive");
    MissileState m;
    m.position = shooter.position;
    m.velocity = shooter.velocity;
    m.age = 0.0;
    m.shooter_id = shooter_id;
    m.target_id = target_id;
    m.status = MissileStatus::Flying;
    return m;
}

/// True proportional navigation in vector form.
///
/// With line of sight r and relative velocity v_rel, the LOS rotation rate is
/// omega = (r x v_rel) / (r . r) and the commanded acceleration is
/// N * (omega x v_missile). The caller clamps the magnitude to the airframe's
/// lateral-g limit. A constant-bearing (collision-course) geometry has
/// omega = 0 and commands nothing.
inline Vec3 pn_command(const MissileState& missile, const AircraftState& target,
                       double nav_constant) {
    if (missile.status != MissileStatus::Flying)
        throw std::invalid_argument("pn_command: missile is not flying");
    const Vec3 r = target.position - missile.position;
    const double rr = r.dot(r);
    if (rr <= 0.0) throw std::domain_error("pn_command: coincident positions");
    const Vec3 v_rel = target.velocity - missile.velocity;
    const Vec3 omega = r.cross(v_rel) / rr;
    return nav_constant * omega.cross(missile.velocity);
}

/// Advance a flying missile by dt. Non-flying missiles pass through
/// unchanged. The proximity fuse is evaluated against the target position at
/// the start of the step, then again after integrating, so a pass inside the
/// lethal radius within one step still registers.
inline MissileState step_missile(const MissileState& missile,
                                 const AircraftState& target,
                                 const MissileConfig& cfg, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("step_missile: dt must be positive");
    if (missile.status != MissileStatus::Flying) return missile;

    MissileState next = missile;
    if ((target.position - missile.position).norm() <= cfg.explosive_radius) {
        next.status = MissileStatus::Hit;
        return next;
    }

    Vec3 accel{0.0, 0.0, -cfg.gravity};
    const double speed = missile.velocity.norm();
    if (missile.age < cfg.boost_duration && speed > 1e-9)
        accel += (cfg.boost_thrust / cfg.mass / speed) * missile.velocity;
    accel -= (cfg.drag_coefficient / cfg.mass * speed) * missile.velocity;

    Vec3 steer = pn_command(missile, target, cfg.nav_constant);
    const double steer_mag = steer.norm();
    const double steer_limit = cfg.max_lateral_g * cfg.gravity;
    if (steer_mag > steer_limit) steer = steer * (steer_limit / steer_mag);
    accel += steer;

    next.velocity = missile.velocity + accel * dt;
    next.position = missile.position + next.velocity * dt;
    next.age = missile.age + dt;

    const Vec3 r = target.position - next.position;
    const double distance = r.norm();
    if (distance <= cfg.explosive_radius) {
        next.status = MissileStatus::Hit;
        return next;
    }
    if (next.age > cfg.lifespan) {
        next.status = MissileStatus::Expired;
        return next;
    }
    // a slow missile that is no longer closing can never catch the target
    const double closure = -r.dot(target.velocity - next.velocity) / distance;
    if (next.velocity.norm() < target.velocity.norm() && closure <= 0.0)
        next.status = MissileStatus::Expired;
    return next;
}

}  // namespace dogfight
