#pragma once

#include <array>
#include <cmath>

#include "kinoforge/common/random.hpp"
#include "kinoforge/sim/terrain.hpp"
#include "kinoforge/sim/vehicle.hpp"

namespace kinoforge::sim {

inline constexpr double kGravity = 9.81;

struct InertialSample {
    double time = 0;
    std::array<double, 3> accel{};
    std::array<double, 3> gyro{};
};

struct OdomSample {
    double time = 0;
    double x = 0, y = 0, heading = 0;
    double v = 0, omega = 0;

    Pose2 pose() const { return {x, y, heading}; }
};

struct ImuNoise {
    double base = 0.2;     // vibration std = roughness * (base + per_speed * v)
    double per_speed = 0.1;
    double gyro_ratio = 0.5;
};

inline double vibration_std(double roughness, double v, const ImuNoise &n = {})
{
    return roughness * (n.base + n.per_speed * v);
}

/// Specific force and body rates from two consecutive ticks.
inline InertialSample synthesize_imu(const VehicleState &s, const VehicleState &prev, const TerrainCell &cell, Rng &rng,
                                     Gaussian &gauss, const ImuNoise &noise = {})
{
    InertialSample out;
    out.time = s.time;
    const double dt = s.time - prev.time;
    const double a_long = dt > 0 ? (s.v - prev.v) / dt : 0.0;
    const double a_lat = s.v * s.omega;

    // gravity reaction seen in the body frame, positive pitch = nose down
    const double sp = std::sin(s.pitch), cp = std::cos(s.pitch);
    const double sr = std::sin(s.roll), cr = std::cos(s.roll);
    const double sigma = vibration_std(cell.roughness, s.v, noise);
    out.accel[0] = a_long - kGravity * sp + sigma * gauss(rng);
    out.accel[1] = a_lat + kGravity * cp * sr + sigma * gauss(rng);
    out.accel[2] = kGravity * cp * cr + sigma * gauss(rng);

    const double gs = noise.gyro_ratio * sigma;
    out.gyro[0] = (dt > 0 ? (s.roll - prev.roll) / dt : 0.0) + gs * gauss(rng);
    out.gyro[1] = (dt > 0 ? (s.pitch - prev.pitch) / dt : 0.0) + gs * gauss(rng);
    out.gyro[2] = s.omega + gs * gauss(rng);
    return out;
}

struct OdomNoise {
    double position_std = 0.01;
    double heading_std = 0.002;
    bool enabled = true;
};

inline OdomSample synthesize_odometry(const VehicleState &s, Rng &rng, Gaussian &gauss, const OdomNoise &n = {})
{
    OdomSample o{s.time, s.x, s.y, s.heading, s.v, s.omega};
    if (n.enabled) {
        o.x += n.position_std * gauss(rng);
        o.y += n.position_std * gauss(rng);
        o.heading = normalize_angle(o.heading + n.heading_std * gauss(rng));
    }
    return o;
}

} // namespace kinoforge::sim
