#pragma once

#include <cmath>
#include <numbers>

namespace kinoforge {

/// Wrap to (-pi, pi].
inline double normalize_angle(double a)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi)
        a += two_pi;
    else if (a > std::numbers::pi)
        a -= two_pi;
    return a;
}

struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
};

/// Express world point (wx, wy) in the frame of `frame`.
inline void world_to_local(const Pose2 &frame, double wx, double wy, double &lx, double &ly)
{
    const double c = std::cos(frame.heading), s = std::sin(frame.heading);
    const double dx = wx - frame.x, dy = wy - frame.y;
    lx = c * dx + s * dy;
    ly = -s * dx + c * dy;
}

inline void local_to_world(const Pose2 &frame, double lx, double ly, double &wx, double &wy)
{
    const double c = std::cos(frame.heading), s = std::sin(frame.heading);
    wx = frame.x + c * lx - s * ly;
    wy = frame.y + s * lx + c * ly;
}

/// Advance a planar pose along a constant-(v, omega) arc for duration dt.
/// Falls back to a straight line when |omega| < 1e-6.
inline Pose2 integrate_arc(const Pose2 &p, double v, double omega, double dt)
{
    Pose2 out = p;
    const double dth = omega * dt;
    if (std::abs(omega) < 1e-6) {
        out.x += v * dt * std::cos(p.heading);
        out.y += v * dt * std::sin(p.heading);
    } else {
        const double r = v / omega;
        out.x += r * (std::sin(p.heading + dth) - std::sin(p.heading));
        out.y += r * (std::cos(p.heading) - std::cos(p.heading + dth));
    }
    out.heading = normalize_angle(p.heading + dth);
    return out;
}

} // namespace kinoforge
