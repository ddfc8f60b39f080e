// Simplified fixed-wing flight dynamics.
//
// Kinematic 3-DOF point mass: roll and pitch respond directly to stick
// inputs, heading follows the coordinated-turn law, airspeed follows the
// thrust/drag/gravity balance. The model exposes exactly the state a combat
// policy needs (attitude, velocity vector, relative geometry) without
// aerodynamic coefficients.
#pragma once

#include <cmath>
#include <stdexcept>

#include "dogfight/common.hpp"

namespace dogfight {

struct AircraftState {
    Vec3 position;             // north, east, altitude (m)
    double heading = 0.0;      // rad, [-pi, pi), 0 = north
    double pitch = 0.0;        // rad, flight-path angle
    double roll = 0.0;         // rad, bank angle
    double airspeed = 0.0;     // m/s, always equals |velocity|
    Vec3 velocity;             // m/s, NEU
    Vec3 acceleration;         // m/s^2, derived from the last step
    bool alive = true;

    double altitude() const { return position.z; }

    bool finite() const {
        return position.finite() && velocity.finite() && acceleration.finite() &&
               std::isfinite(heading) && std::isfinite(pitch) &&
               std::isfinite(roll) && std::isfinite(airspeed);
    }
};

struct ControlInput {
    double aileron = 0.0;   // [-1, 1], + rolls right
    double elevator = 0.0;  // [-1, 1], + pitches up
    double rudder = 0.0;    // [-1, 1], + yaws right
    double throttle = 0.0;  // [0, 1]

    bool finite() const {
        return std::isfinite(aileron) && std::isfinite(elevator) &&
               std::isfinite(rudder) && std::isfinite(throttle);
    }
};

struct AirframeConfig {
    double mass = 9000.0;             // kg
    double max_thrust = 80000.0;      // N
    double drag_coefficient = 0.5;    // N per (m/s)^2, quadratic
    double roll_rate_gain = 2.0;      // rad/s per unit aileron
    double pitch_rate_gain = 0.8;     // rad/s per unit elevator
    double yaw_trim_gain = 0.15;      // rad/s per unit rudder
    double min_speed = 50.0;          // m/s
    double max_speed = 400.0;         // m/s, also where thrust == drag at full throttle
    double max_roll = deg2rad(80.0);  // bank clamp, keeps tan(roll) finite
    double max_pitch = deg2rad(45.0);
    double gravity = 9.81;            // m/s^2
};

/// Velocity vector from airspeed, heading and pitch (NEU frame).
inline Vec3 velocity_from_angles(double airspeed, double heading, double pitch) {
    const double ch = std::cos(heading), sh = std::sin(heading);
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    return {airspeed * cp * ch, airspeed * cp * sh, airspeed * sp};
}

/// Construct a level-flight state at the given position/heading/speed.
inline AircraftState make_level_state(const Vec3& position, double heading,
                                      double airspeed) {
    AircraftState s;
    s.position = position;
    s.heading = wrap_pi(heading);
    s.airspeed = airspeed;
    s.velocity = velocity_from_angles(airspeed, s.heading, 0.0);
    return s;
}

/// Advance one aircraft by dt seconds under the given controls.
///
/// Update order: attitude integrates first (roll/pitch clamped), then the
/// coordinated-turn heading rate and the thrust-drag-gravity speed rate,
/// then the velocity vector is rebuilt from (airspeed, heading, pitch) and
/// the position integrates with the new velocity. dt == 0 is the identity.
inline AircraftState step_airframe(const AircraftState& state,
                                   const ControlInput& ctrl,
                                   const AirframeConfig& cfg, double dt) {
    if (!state.finite() || !ctrl.finite())
        throw std::invalid_argument("step_airframe: non-finite state or controls");
    if (dt < 0.0) throw std::invalid_argument("step_airframe: negative dt");
    if (dt == 0.0) return state;

    AircraftState next = state;
    next.roll = clamp(state.roll + cfg.roll_rate_gain * ctrl.aileron * dt,
                      -cfg.max_roll, cfg.max_roll);
    next.pitch = clamp(state.pitch + cfg.pitch_rate_gain * ctrl.elevator * dt,
                       -cfg.max_pitch, cfg.max_pitch);

    // coordinated turn; the turn term is meaningless at near-zero airspeed
    const double turn_rate =
        state.airspeed > 1.0 ? (cfg.gravity / state.airspeed) * std::tan(next.roll)
                             : 0.0;
    const double heading_rate = turn_rate + cfg.yaw_trim_gain * ctrl.rudder;
    next.heading = wrap_pi(state.heading + heading_rate * dt);

    const double thrust = ctrl.throttle * cfg.max_thrust;
    const double drag = cfg.drag_coefficient * state.airspeed * state.airspeed;
    const double speed_rate =
        (thrust - drag) / cfg.mass - cfg.gravity * std::sin(next.pitch);
    next.airspeed = clamp(state.airspeed + speed_rate * dt, 0.0, cfg.max_speed);

    next.velocity = velocity_from_angles(next.airspeed, next.heading, next.pitch);
    next.position = state.position + next.velocity * dt;
    next.acceleration = (next.velocity - state.velocity) / dt;
    return next;
}

// ---- relative engagement geometry ----

struct RelativeGeometry {
    double distance = 0.0;       // m
    double closure_rate = 0.0;   // m/s, positive when closing
    double ao = 0.0;             // rad in [0, pi]: ego velocity vs LOS ego->other
    double ta = 0.0;             // rad in [0, pi]: other velocity vs LOS other->ego
    double delta_altitude = 0.0; // other minus ego, m
    double delta_heading = 0.0;  // other minus ego, wrapped to [-pi, pi)
};

/// Engagement geometry from ego toward other. AO is 0 when ego's nose points
/// at the other aircraft; TA is 0 when the other aircraft points at ego.
inline RelativeGeometry relative_geometry(const AircraftState& ego,
                                          const AircraftState& other) {
    const Vec3 los = other.position - ego.position;
    const double distance = los.norm();
    if (distance <= 0.0)
        throw std::domain_error("relative_geometry: coincident positions");

    RelativeGeometry g;
    g.distance = distance;
    const Vec3 v_rel = other.velocity - ego.velocity;
    g.closure_rate = -los.dot(v_rel) / distance;
    g.ao = angle_between(ego.velocity, los);
    g.ta = angle_between(other.velocity, los * -1.0);
    g.delta_altitude = other.position.z - ego.position.z;
    g.delta_heading = wrap_pi(other.heading - ego.heading);
    return g;
}

/// Export helper: equirectangular local->geodetic around an origin.
struct Geodetic {
    double lat = 0.0;  // rad
    double lon = 0.0;  // rad
    double alt = 0.0;  // m
};

inline Geodetic to_geodetic(const Vec3& local, double origin_lat, double origin_lon) {
    if (!(std::abs(origin_lat) < kPi / 2.0))
        throw std::invalid_argument("to_geodetic: |origin_lat| must be < pi/2");
    Geodetic g;
    g.lat = origin_lat + local.x / kEarthRadius;
    g.lon = origin_lon + local.y / (kEarthRadius * std::cos(origin_lat));
    g.alt = local.z;
    return g;
}

}  // namespace dogfight
