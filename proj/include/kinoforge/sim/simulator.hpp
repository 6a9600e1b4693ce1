#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include "kinoforge/common/random.hpp"
#include "kinoforge/geometry/camera.hpp"
#include "kinoforge/sim/latency.hpp"
#include "kinoforge/sim/render.hpp"
#include "kinoforge/sim/sensors.hpp"
#include "kinoforge/sim/vehicle.hpp"

namespace kinoforge::sim {

struct SimConfig {
    int physics_rate = 200;
    int control_rate = 40;
    int camera_rate = 30;
    double latency = 0.25;
    DynamicsParams dynamics;
    ImuNoise imu;
    OdomNoise odom;
    bool camera = true;
    RenderOptions render;
    geometry::CameraIntrinsics intrinsics;
    geometry::CameraMount mount;

    double dt() const { return 1.0 / physics_rate; }
    int ticks_per_control() const { return physics_rate / control_rate; }
};

struct FrameRecord {
    double time = 0;
    geometry::CameraFrame image;
    OdomSample odom;          // odometry at capture
    double roll = 0, pitch = 0; // attitude used for the live homography
};

struct TickOutput {
    bool exited = false;
    VehicleState state;
    InertialSample imu;
    OdomSample odom;
    std::optional<FrameRecord> frame;
};

/// One world instance.  Time is derived from an integer tick counter so that
/// rates never drift.  Not thread-safe; separate instances are independent.
class Simulator {
public:
    Simulator(const TerrainMap &terrain, SimConfig cfg, std::uint64_t seed)
        : terrain_(&terrain), cfg_(cfg), queue_(cfg.latency), imu_rng_(named_stream(seed, "imu")),
          odom_rng_(named_stream(seed, "odom"))
    {
        if (cfg.physics_rate % cfg.control_rate != 0)
            throw std::invalid_argument("control rate must divide the physics rate");
    }

    const SimConfig &config() const { return cfg_; }
    const TerrainMap &terrain() const { return *terrain_; }
    const VehicleState &state() const { return state_; }
    std::int64_t tick() const { return tick_; }
    double time() const { return static_cast<double>(tick_) / cfg_.physics_rate; }
    bool at_control_tick() const { return tick_ % cfg_.ticks_per_control() == 0; }
    LatencyQueue &queue() { return queue_; }

    /// Place the vehicle; pending commands are discarded.
    void reset(VehicleState s)
    {
        s.time = time();
        s.heading = normalize_angle(s.heading);
        if (!terrain_->contains(s.x, s.y))
            throw OutOfBounds("reset position outside the map");
        state_ = s;
        queue_.clear();
    }

    /// Advance the clock with the vehicle removed from the world (after a boundary exit).
    void idle(std::int64_t ticks)
    {
        tick_ += ticks;
        queue_.clear();
    }

    Control issue(double v, double omega)
    {
        const Control u(v, omega, time());
        queue_.push(u);
        return u;
    }

    OdomSample odometry_now() { return synthesize_odometry(state_, odom_rng_, odom_gauss_, cfg_.odom); }

    TickOutput step()
    {
        const Control eff = queue_.effective(time());
        const VehicleState prev = state_;
        const StepResult r = step_dynamics(state_, eff, *terrain_, cfg_.dt(), cfg_.dynamics);
        ++tick_;
        state_ = r.state;
        state_.time = time();

        TickOutput out;
        out.exited = r.exited;
        out.state = state_;
        const TerrainCell cell = terrain_->cell(prev.x, prev.y);
        out.imu = synthesize_imu(state_, prev, cell, imu_rng_, imu_gauss_, cfg_.imu);
        out.odom = synthesize_odometry(state_, odom_rng_, odom_gauss_, cfg_.odom);
        if (cfg_.camera && !r.exited && camera_due(tick_)) {
            FrameRecord fr;
            fr.time = state_.time;
            fr.odom = out.odom;
            fr.roll = state_.roll;
            fr.pitch = state_.pitch;
            fr.image = render_camera(geometry::camera_pose_for(state_.pose(), state_.roll, state_.pitch, cfg_.mount),
                                     *terrain_, cfg_.intrinsics, cfg_.render);
            out.frame = std::move(fr);
        }
        return out;
    }

    bool camera_due(std::int64_t k) const
    {
        return (k * cfg_.camera_rate) / cfg_.physics_rate != ((k - 1) * cfg_.camera_rate) / cfg_.physics_rate;
    }

private:
    const TerrainMap *terrain_;
    SimConfig cfg_;
    LatencyQueue queue_;
    VehicleState state_;
    std::int64_t tick_ = 0;
    Rng imu_rng_, odom_rng_;
    Gaussian imu_gauss_, odom_gauss_;
};

} // namespace kinoforge::sim
