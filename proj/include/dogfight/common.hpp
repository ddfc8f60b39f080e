// Shared scalar helpers, the local-frame vector type, and error categories.
//
// Coordinate convention: local flat-earth north-east-up (NEU). Positions in
// meters, velocities in m/s, angles in radians. Heading 0 points north and
// increases toward east.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace dogfight {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kEarthRadius = 6371000.0;  // mean radius, m

// Raised when a run configuration is contradictory or incomplete.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a persisted artifact (checkpoint, metrics file) fails validation.
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double clamp(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

/// Wrap an angle to [-pi, pi).
inline double wrap_pi(double a) {
    double x = std::fmod(a + kPi, kTwoPi);
    if (x < 0.0) x += kTwoPi;
    return x - kPi;
}

inline double deg2rad(double d) { return d * kPi / 180.0; }

struct Vec3 {
    double x = 0.0;  // north, m (or m/s)
    double y = 0.0;  // east
    double z = 0.0;  // up

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Angle between two vectors, in [0, pi]. Returns pi/2 when either vector is
/// degenerate (zero length).
inline double angle_between(const Vec3& a, const Vec3& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) return kPi / 2.0;
    return std::acos(clamp(a.dot(b) / (na * nb), -1.0, 1.0));
}

}  // namespace dogfight
