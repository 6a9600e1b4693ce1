#pragma once

#include <algorithm>
#include <cmath>
#include <deque>

#include "kinoforge/eval/reference.hpp"
#include "kinoforge/ikd/inputs.hpp"
#include "kinoforge/sim/sensors.hpp"

namespace kinoforge::eval {

inline constexpr double kLostDistance = 5.0;

inline double lookahead_distance(double target_speed) { return std::max(0.5, 0.4 * target_speed); }

struct CarrotOutput {
    ikd::DesiredTransition desired;
    double s = 0;        // arc length of the closest reference point
    double distance = 0; // from the reference
    bool lost = false;
};

/// Pure pursuit toward the reference point one lookahead ahead of the closest point.
inline CarrotOutput carrot_planner(const ReferencePath &ref, const Pose2 &pose, double target_speed,
                                   double lost_distance = kLostDistance)
{
    CarrotOutput out;
    const auto pr = ref.project(pose.x, pose.y);
    out.s = pr.s;
    out.distance = pr.distance;
    if (pr.distance > lost_distance) {
        out.lost = true;
        return out;
    }
    const Pose2 carrot = ref.at(pr.s + lookahead_distance(target_speed));
    double lx = 0, ly = 0;
    world_to_local(pose, carrot.x, carrot.y, lx, ly);
    const double d2 = lx * lx + ly * ly;
    const double curvature = d2 > 1e-12 ? 2.0 * ly / d2 : 0.0;
    out.desired.v_des = target_speed;
    out.desired.omega_des = std::clamp(curvature * target_speed, -sim::kOmegaMax, sim::kOmegaMax);
    return out;
}

/// Desired transitions that have been sent but not yet executed; used to plan from where
/// the vehicle will be once the next command takes effect.
class InFlight {
public:
    struct Entry {
        double mature_time;
        double v, omega;
    };

    void push(double mature_time, double v, double omega) { q_.push_back({mature_time, v, omega}); }
    void clear() { q_.clear(); }
    std::size_t size() const { return q_.size(); }

    /// Pose at now + tau: start from the odometry (v, w) and, at each control step,
    /// switch to the newest entry matured by then.
    Pose2 predict(const sim::OdomSample &odom, double now, double tau, double step)
    {
        while (!q_.empty() && q_.front().mature_time <= now - step + 1e-9)
            q_.pop_front();
        Pose2 p = odom.pose();
        double v = odom.v, w = odom.omega;
        const int n = static_cast<int>(std::lround(tau / step));
        for (int i = 0; i < n; ++i) {
            const double t = now + i * step;
            for (const auto &e : q_)
                if (e.mature_time <= t + 1e-9) {
                    v = e.v;
                    w = e.omega;
                }
            p = integrate_arc(p, v, w, step);
        }
        return p;
    }

private:
    std::deque<Entry> q_;
};

} // namespace kinoforge::eval
