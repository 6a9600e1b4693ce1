#pragma once

#include <cmath>
#include <deque>
#include <stdexcept>
#include <vector>

#include "kinoforge/common/angles.hpp"
#include "kinoforge/geometry/bev.hpp"
#include "kinoforge/sim/sensors.hpp"
#include "kinoforge/sim/vehicle.hpp"

namespace kinoforge::ikd {

inline constexpr int kDefaultK = 40;
inline constexpr int kImuChannels = 6;
inline constexpr double kControlPeriod = 1.0 / 40.0;

struct DesiredTransition {
    double v_des = 0;
    double omega_des = 0;
};

/// Constant-(v, w) arc that carries pose a to pose b in time dt (inverse of integrate_arc).
inline DesiredTransition desired_from_poses(const Pose2 &a, const Pose2 &b, double dt = kControlPeriod)
{
    double lx, ly;
    world_to_local(a, b.x, b.y, lx, ly);
    const double dth = normalize_angle(b.heading - a.heading);
    const double chord = std::hypot(lx, ly);
    double arc = chord;
    if (std::abs(dth) > 1e-9)
        arc = chord * (0.5 * dth) / std::sin(0.5 * dth);
    if (lx < 0)
        arc = 0; // the vehicle cannot reverse; treat backwards jitter as standing still
    return {arc / dt, dth / dt};
}

inline sim::Control baseline_inverse(const DesiredTransition &d, double issue_time = 0)
{
    return sim::Control::clamped(d.v_des, d.omega_des, issue_time);
}

/// k inertial samples (most recent last, 6 values each) followed by the odometry (v, w).
struct InertialWindow {
    int k = kDefaultK;
    std::vector<float> values;

    std::size_t expected_size() const { return static_cast<std::size_t>(kImuChannels) * k + 2; }
};

/// Build from the last k samples with time <= t.  Returns false if fewer than k exist.
template<class Seq>
bool make_window(const Seq &imu, std::size_t end, const sim::OdomSample &odom, int k, InertialWindow &out)
{
    if (end < static_cast<std::size_t>(k))
        return false;
    out.k = k;
    out.values.resize(out.expected_size());
    std::size_t j = 0;
    for (std::size_t i = end - k; i < end; ++i) {
        const auto &s = imu[i];
        for (int a = 0; a < 3; ++a)
            out.values[j++] = static_cast<float>(s.accel[a]);
        for (int a = 0; a < 3; ++a)
            out.values[j++] = static_cast<float>(s.gyro[a]);
    }
    out.values[j++] = static_cast<float>(odom.v);
    out.values[j++] = static_cast<float>(odom.omega);
    return true;
}

/// Per-channel affine normalization.  Inertial statistics are pooled over the k time
/// slots of a channel; labels use the fixed Control ranges.
struct Normalizer {
    std::vector<double> mean = std::vector<double>(kImuChannels + 4, 0.0); // 6 imu, v, w, v_des, w_des
    std::vector<double> stddev = std::vector<double>(kImuChannels + 4, 1.0);

    static int channel_of(std::size_t idx, int k)
    {
        const std::size_t imu_len = static_cast<std::size_t>(kImuChannels) * k;
        return idx < imu_len ? static_cast<int>(idx % kImuChannels) : kImuChannels + static_cast<int>(idx - imu_len);
    }

    template<class WindowRange, class DesiredRange>
    static Normalizer fit(const WindowRange &windows, const DesiredRange &desired, int k)
    {
        std::vector<double> s(kImuChannels + 4, 0.0), s2(kImuChannels + 4, 0.0), n(kImuChannels + 4, 0.0);
        for (const auto &w : windows)
            for (std::size_t i = 0; i < w.size(); ++i) {
                const int c = channel_of(i, k);
                s[c] += w[i];
                s2[c] += static_cast<double>(w[i]) * w[i];
                n[c] += 1;
            }
        for (const auto &d : desired) {
            s[kImuChannels + 2] += d.v_des;
            s2[kImuChannels + 2] += d.v_des * d.v_des;
            n[kImuChannels + 2] += 1;
            s[kImuChannels + 3] += d.omega_des;
            s2[kImuChannels + 3] += d.omega_des * d.omega_des;
            n[kImuChannels + 3] += 1;
        }
        Normalizer out;
        for (int c = 0; c < kImuChannels + 4; ++c) {
            if (n[c] == 0)
                continue;
            const double m = s[c] / n[c];
            out.mean[c] = m;
            out.stddev[c] = std::max(1e-6, std::sqrt(std::max(0.0, s2[c] / n[c] - m * m)));
        }
        return out;
    }

    double window_value(const std::vector<float> &w, std::size_t i, int k) const
    {
        const int c = channel_of(i, k);
        return (w[i] - mean[c]) / stddev[c];
    }
    double desired_v(double v) const { return (v - mean[kImuChannels + 2]) / stddev[kImuChannels + 2]; }
    double desired_w(double w) const { return (w - mean[kImuChannels + 3]) / stddev[kImuChannels + 3]; }
};

// Controls <-> [-1, 1]
inline double normalize_v(double v) { return (v - 2.0) / 2.0; }
inline double normalize_w(double w) { return w / sim::kOmegaMax; }
inline double denormalize_v(double n) { return 2.0 + 2.0 * n; }
inline double denormalize_w(double n) { return sim::kOmegaMax * n; }

/// Patch pixels mapped to roughly zero-mean unit-range inputs for the conv encoder.
inline void patch_to_input(const geometry::Patch &p, double *dst)
{
    constexpr int n = geometry::kPatchSize * geometry::kPatchSize;
    if (p.pixels.size() != static_cast<std::size_t>(n) * 3)
        throw std::invalid_argument("patch must be 64x64x3");
    // HWC bytes -> CHW reals
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c)
            dst[c * n + i] = (p.pixels[static_cast<std::size_t>(i) * 3 + c] / 255.0 - 0.5) * 4.0;
}

} // namespace kinoforge::ikd
