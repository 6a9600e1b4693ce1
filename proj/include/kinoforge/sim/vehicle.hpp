#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "kinoforge/common/angles.hpp"
#include "kinoforge/sim/terrain.hpp"

namespace kinoforge::sim {

inline constexpr double kVMax = 4.0;
inline constexpr double kOmegaMax = 1.8;

struct VehicleState {
    double x = 0, y = 0, heading = 0;
    double v = 0, omega = 0;
    double roll = 0, pitch = 0;
    double time = 0;

    Pose2 pose() const { return {x, y, heading}; }
};

struct Control {
    double v_cmd = 0;
    double omega_cmd = 0;
    double issue_time = 0;

    Control() = default;

    Control(double v, double omega, double t) : v_cmd(v), omega_cmd(omega), issue_time(t)
    {
        if (!(v >= 0.0 && v <= kVMax) || !(std::abs(omega) <= kOmegaMax))
            throw std::out_of_range("control out of bounds: v=" + std::to_string(v) + " omega=" + std::to_string(omega));
    }

    static Control clamped(double v, double omega, double t)
    {
        return Control(std::clamp(v, 0.0, kVMax), std::clamp(omega, -kOmegaMax, kOmegaMax), t);
    }
};

struct DynamicsParams {
    double T_v = 0.15;
    double T_omega = 0.10;
    double A0 = 4.0;
    double v_floor = 0.1;
    double K_us = 1.1;          // understeer gain on the cubed grip deficit; 0 gives the pure cap model
    double attitude_amp = 0.05; // rad per unit roughness
    double roll_hz = 2.3;
    double pitch_hz = 1.7;
    double T_attitude = 0.05;
};

// First-order lag gain; a zero time constant means the target is reached in one step.
inline double lag_gain(double dt, double T) { return T <= 0.0 ? 1.0 : std::min(1.0, dt / T); }

/// Yaw-rate target after grip limits: understeer below the cap, lateral-acceleration cap above it.
inline double achievable_omega(double omega_cmd, double v, double grip, const DynamicsParams &p = {})
{
    const double deficit = 1.0 - grip;
    const double g = 1.0 / (1.0 + p.K_us * deficit * deficit * deficit * v * v);
    const double cap = grip * p.A0 / std::max(v, p.v_floor);
    return std::copysign(std::min(g * std::abs(omega_cmd), cap), omega_cmd);
}

struct StepResult {
    VehicleState state;
    bool exited = false;
};

/// One physics tick of f(x, u, w).  Deterministic: no process noise is injected here,
/// sensor noise lives in the sensor models.
inline StepResult step_dynamics(const VehicleState &s, const Control &eff, const TerrainMap &terrain, double dt,
                                const DynamicsParams &p = {})
{
    if (!(dt > 0))
        throw std::invalid_argument("step_dynamics: dt must be positive");
    const TerrainCell cell = terrain.cell(s.x, s.y);

    StepResult r;
    VehicleState &n = r.state;
    n = s;
    const double w_target = achievable_omega(eff.omega_cmd, s.v, cell.grip, p);
    n.v = std::max(0.0, s.v + (eff.v_cmd - s.v) * lag_gain(dt, p.T_v));
    n.omega = s.omega + (w_target - s.omega) * lag_gain(dt, p.T_omega);

    const Pose2 np = integrate_arc(s.pose(), n.v, n.omega, dt);
    n.x = np.x;
    n.y = np.y;
    n.heading = np.heading;
    n.time = s.time + dt;

    // terrain-seeded phases keep the oscillation repeatable per terrain class
    const double amp = p.attitude_amp * cell.roughness;
    const double ph_r = static_cast<double>(splitmix64(cell.texture_seed) >> 11) * 0x1.0p-53 * 2.0 * std::numbers::pi;
    const double ph_p = static_cast<double>(splitmix64(cell.texture_seed + 7) >> 11) * 0x1.0p-53 * 2.0 * std::numbers::pi;
    const double roll_t = amp * std::sin(2.0 * std::numbers::pi * p.roll_hz * n.time + ph_r);
    const double pitch_t = amp * std::sin(2.0 * std::numbers::pi * p.pitch_hz * n.time + ph_p);
    const double ka = lag_gain(dt, p.T_attitude);
    n.roll = s.roll + (roll_t - s.roll) * ka;
    n.pitch = s.pitch + (pitch_t - s.pitch) * ka;

    r.exited = !terrain.contains(n.x, n.y);
    return r;
}

} // namespace kinoforge::sim
