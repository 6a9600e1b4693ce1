#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "kinoforge/datagen/collect.hpp"
#include "kinoforge/datagen/sample.hpp"
#include "kinoforge/geometry/bev.hpp"
#include "kinoforge/ikd/inputs.hpp"

namespace kinoforge::datagen {

struct BuildConfig {
    int k = ikd::kDefaultK;
    int max_views = 3;                           // patches kept per sample, evenly spread over the viable frames
    double min_valid = geometry::kMinValidFraction;
    bool predict = true;                         // false centers patches on the current position (ablation)
};

struct BuildStats {
    std::size_t ticks = 0;
    std::size_t samples = 0;
    std::size_t dropped_window = 0; // not enough inertial history yet
    std::size_t dropped_tail = 0;   // execution interval not observed before the trajectory ended
    std::size_t with_patches = 0;
    std::size_t patches = 0;

    BuildStats &operator+=(const BuildStats &o)
    {
        ticks += o.ticks;
        samples += o.samples;
        dropped_window += o.dropped_window;
        dropped_tail += o.dropped_tail;
        with_patches += o.with_patches;
        patches += o.patches;
        return *this;
    }
};

/// Indices of `m` entries spread evenly over [0, n), always including 0 (the newest).
inline std::vector<std::size_t> spread_indices(std::size_t n, std::size_t m)
{
    std::vector<std::size_t> out;
    if (n <= m) {
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(i);
        return out;
    }
    for (std::size_t j = 0; j < m; ++j)
        out.push_back(m == 1 ? 0 : static_cast<std::size_t>(std::llround(static_cast<double>(j) * (n - 1) / (m - 1))));
    return out;
}

/// Latency-aligned samples for one trajectory.  The command issued at control tick i matures
/// at tick i + L (L = latency in control periods) and alone drives the period from X_obs[i+L]
/// to X_obs[i+L+1].  Inputs are what the vehicle knew at issue time: the last k inertial
/// samples, odometry, and the frames captured so far.
inline std::vector<TrainingSample> build_samples(const TrajectoryLog &log, const BuildConfig &cfg, BuildStats *stats = nullptr)
{
    const double ct = log.control_period();
    const int L = log.latency_ticks();
    if (std::abs(L * ct - log.latency) > 1e-9)
        throw std::invalid_argument("build_samples: latency must be a whole number of control periods");
    if (log.physics_rate % log.control_rate != 0)
        throw std::invalid_argument("build_samples: control rate must divide the physics rate");
    const int per_control = log.physics_rate / log.control_rate;

    std::vector<geometry::BufferedFrame> frames;
    frames.reserve(log.frames.size());
    for (const auto &f : log.frames)
        frames.push_back(geometry::make_buffered(std::shared_ptr<const sim::FrameRecord>(std::shared_ptr<void>(), &f),
                                                 log.intrinsics, log.mount));

    BuildStats st;
    std::vector<TrainingSample> out;
    std::size_t frame_end = 0; // frames[0, frame_end) were captured at or before the current tick
    for (std::size_t i = 0; i < log.commands.size(); ++i) {
        ++st.ticks;
        const double t = log.commands[i].issue_time;
        while (frame_end < frames.size() && log.frames[frame_end].time <= t + 1e-9)
            ++frame_end;
        const std::size_t imu_end = i * static_cast<std::size_t>(per_control); // samples stamped <= t
        if (imu_end < static_cast<std::size_t>(cfg.k)) {
            ++st.dropped_window;
            continue;
        }
        if (i + L + 1 >= log.states.size()) {
            ++st.dropped_tail;
            continue;
        }
        TrainingSample s;
        s.trajectory = log.index;
        s.tick = static_cast<std::int32_t>(i);
        s.x_t = log.states[i + L];
        s.x_next = log.states[i + L + 1];
        s.desired = ikd::desired_from_poses(s.x_t.pose(), s.x_next.pose(), ct);
        s.label = log.commands[i];
        const sim::OdomSample &odom = log.control_odom[i];
        ikd::make_window(log.imu, imu_end, odom, cfg.k, s.window);

        const Pose2 target = cfg.predict ? geometry::predict_future_location(odom, log.latency) : odom.pose();
        s.target_x = target.x;
        s.target_y = target.y;
        std::vector<geometry::Patch> viable; // newest first
        const std::size_t first = frame_end > geometry::kFrameBufferSize ? frame_end - geometry::kFrameBufferSize : 0;
        for (std::size_t f = frame_end; f-- > first;)
            if (auto p = geometry::extract_patch(frames[f], target, cfg.min_valid))
                viable.push_back(std::move(*p));
        for (std::size_t j : spread_indices(viable.size(), static_cast<std::size_t>(cfg.max_views)))
            s.patches.push_back(std::move(viable[j]));
        if (!s.patches.empty())
            ++st.with_patches;
        st.patches += s.patches.size();
        out.push_back(std::move(s));
    }
    st.samples = out.size();
    if (stats)
        *stats += st;
    return out;
}

/// Replays a sample's label from x_t with the noiseless forward model; returns the position
/// error against x_{t+1} in meters.
inline double replay_error(const TrainingSample &s, const sim::TerrainMap &world, const sim::DynamicsParams &dyn,
                           int physics_rate = 200, int control_rate = 40)
{
    sim::VehicleState x = s.x_t;
    const double dt = 1.0 / physics_rate;
    for (int j = 0; j < physics_rate / control_rate; ++j) {
        x = sim::step_dynamics(x, s.label, world, dt, dyn).state;
        x.time = s.x_t.time + (j + 1) * dt;
    }
    return std::hypot(x.x - s.x_next.x, x.y - s.x_next.y);
}

} // namespace kinoforge::datagen
