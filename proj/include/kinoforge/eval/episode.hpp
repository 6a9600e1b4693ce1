#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinoforge/eval/hausdorff.hpp"
#include "kinoforge/eval/planner.hpp"
#include "kinoforge/eval/reference.hpp"
#include "kinoforge/geometry/bev.hpp"
#include "kinoforge/ikd/model.hpp"
#include "kinoforge/sim/simulator.hpp"

namespace kinoforge::eval {

enum class ControllerKind { baseline, imu, vi };

inline const char *controller_name(ControllerKind k)
{
    switch (k) {
    case ControllerKind::baseline: return "baseline";
    case ControllerKind::imu: return "imu";
    case ControllerKind::vi: return "vi";
    }
    return "?";
}

inline ControllerKind parse_controller(const std::string &s)
{
    if (s == "baseline")
        return ControllerKind::baseline;
    if (s == "imu")
        return ControllerKind::imu;
    if (s == "vi")
        return ControllerKind::vi;
    throw std::invalid_argument("unknown controller '" + s + "' (expected baseline, imu or vi)");
}

struct Controller {
    ControllerKind kind = ControllerKind::baseline;
    const ikd::IkdModel *model = nullptr; // required for imu and vi

    static Controller baseline() { return {}; }
    static Controller learned(const ikd::IkdModel &m)
    {
        return {m.visual() ? ControllerKind::vi : ControllerKind::imu, &m};
    }

    void validate() const
    {
        if (kind == ControllerKind::baseline)
            return;
        if (!model)
            throw std::invalid_argument(std::string(controller_name(kind)) + " controller needs a trained model");
        if (model->visual() != (kind == ControllerKind::vi))
            throw std::invalid_argument(std::string("checkpoint variant '") + ikd::variant_name(model->variant())
                                        + "' does not match controller '" + controller_name(kind) + "'");
    }
};

struct EpisodeConfig {
    double speed = 2.0;
    int laps = 1;
    double success_threshold = 1.0; // max deviation within a turn, meters
    double lost_distance = kLostDistance;
    double reinit_offset = 1.0;     // re-entry point, meters past the end of the failed turn
    double timeout_factor = 3.0;    // x the nominal lap time, plus 20 s
    sim::SimConfig sim;
};

struct TrajectoryPoint {
    double t = 0, x = 0, y = 0, heading = 0, v = 0;
    int cell = 0; // terrain class under the vehicle
};

struct TurnAttempt {
    int lap = 0;
    int turn = 0;
    double max_deviation = 0;
    std::string cause; // empty, "deviation", "exit", "lost" or "timeout"
    bool success = false;
};

struct EpisodeResult {
    std::vector<TrajectoryPoint> trajectory;
    std::vector<TurnAttempt> turns; // in driving order
    double hausdorff = 0;
    double max_speed = 0;
    bool completed = false;
    int reinits = 0;
    std::string failure; // first failure cause, empty if every turn succeeded
    double patch_rate = 0; // vi only: fraction of learned-control ticks with a patch

    int successes() const
    {
        return static_cast<int>(std::count_if(turns.begin(), turns.end(), [](const TurnAttempt &a) { return a.success; }));
    }
};

inline std::vector<Point2> points_of(const std::vector<TrajectoryPoint> &t)
{
    std::vector<Point2> out;
    out.reserve(t.size());
    for (const auto &p : t)
        out.push_back({p.x, p.y});
    return out;
}

inline std::vector<Point2> points_of(const ReferencePath &r)
{
    std::vector<Point2> out;
    out.reserve(r.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        out.push_back({r.x[i], r.y[i]});
    return out;
}

/// Closed-loop tracking of `ref` at 40 Hz.  Scoring uses the true pose; the controller only
/// sees odometry, inertial samples and camera frames.  A boundary exit or losing the path
/// fails the current turn and restarts the vehicle at rest just after that turn.
inline EpisodeResult run_episode(const sim::TerrainMap &world, const Controller &ctl, const ReferencePath &ref,
                                 const EpisodeConfig &cfg, std::uint64_t seed)
{
    ctl.validate();
    if (!(cfg.speed > 0 && cfg.speed <= sim::kVMax) || cfg.laps < 1)
        throw std::invalid_argument("episode: speed must be in (0, 4] and laps >= 1");
    if (ref.turns.empty())
        throw std::invalid_argument("episode: reference has no labeled turns");

    sim::SimConfig sc = cfg.sim;
    sc.camera = ctl.kind == ControllerKind::vi;
    sim::Simulator sim(world, sc, seed);
    const double ct = 1.0 / sc.control_rate;
    const double L = ref.lap_length;
    const double total = cfg.laps * L;
    const double timeout = cfg.timeout_factor * total / cfg.speed + 20.0;
    const int k = ctl.model ? ctl.model->config().k : 0;

    EpisodeResult res;
    std::deque<sim::InertialSample> imu;
    geometry::FrameBuffer frames;
    InFlight inflight;
    ikd::InertialWindow window;
    std::size_t learned_ticks = 0, patched_ticks = 0;

    double progress = 0, prev_s = 0;
    auto place = [&](double s_abs) {
        const Pose2 p = ref.at(s_abs);
        sim::VehicleState st;
        st.x = p.x;
        st.y = p.y;
        st.heading = p.heading;
        sim.reset(st);
        imu.clear();
        frames.clear();
        inflight.clear();
        progress = s_abs;
        prev_s = std::fmod(s_abs, L);
    };
    place(0.0);

    auto attempt_for = [&](int lap, int turn) -> TurnAttempt & {
        for (auto it = res.turns.rbegin(); it != res.turns.rend(); ++it)
            if (it->lap == lap && it->turn == turn)
                return *it;
        res.turns.push_back({lap, turn, 0.0, "", false});
        return res.turns.back();
    };
    auto segment = [&](int turn) -> const TurnSegment & {
        for (const auto &t : ref.turns)
            if (t.id == turn)
                return t;
        throw std::logic_error("unknown turn id");
    };
    auto fail = [&](const char *cause) {
        const double s = std::fmod(std::fmod(progress, L) + L, L);
        const int lap = static_cast<int>(std::floor(progress / L));
        TurnAttempt *a = nullptr;
        if (const int id = ref.turn_at(s))
            a = &attempt_for(lap, id);
        else if (!res.turns.empty())
            a = &res.turns.back();
        else
            for (const auto &t : ref.turns)
                if (t.s_start > s) {
                    a = &attempt_for(lap, t.id);
                    break;
                }
        if (!a)
            a = &attempt_for(lap, ref.turns.front().id);
        if (a->cause.empty() || a->cause == "deviation")
            a->cause = cause;
        if (res.failure.empty())
            res.failure = cause;
        ++res.reinits;
        place(a->lap * L + segment(a->turn).s_end + cfg.reinit_offset);
    };

    while (progress < total && sim.time() < timeout) {
        if (sim.at_control_tick()) {
            const double now = sim.time();
            const sim::VehicleState &x = sim.state();
            const auto pr = ref.project(x.x, x.y);
            double ds = pr.s - prev_s;
            if (ds > 0.5 * L)
                ds -= L;
            else if (ds < -0.5 * L)
                ds += L;
            progress += ds;
            prev_s = pr.s;
            if (pr.distance > cfg.lost_distance) {
                fail("lost");
                continue;
            }
            if (!res.trajectory.empty() && now <= res.trajectory.back().t)
                throw std::logic_error("episode clock went backwards");
            res.trajectory.push_back({now, x.x, x.y, x.heading, x.v, world.class_id(x.x, x.y)});
            res.max_speed = std::max(res.max_speed, x.v);
            if (const int id = ref.turn_at(pr.s)) {
                TurnAttempt &a = attempt_for(static_cast<int>(std::floor(progress / L)), id);
                a.max_deviation = std::max(a.max_deviation, pr.distance);
                if (a.max_deviation >= cfg.success_threshold && a.cause.empty())
                    a.cause = "deviation";
            }

            const sim::OdomSample odom = sim.odometry_now();
            const Pose2 planned_from = inflight.predict(odom, now, sc.latency, ct);
            const CarrotOutput plan = carrot_planner(ref, planned_from, cfg.speed, cfg.lost_distance);
            ikd::DesiredTransition d = plan.desired;
            if (plan.lost) // odometry prediction left the path; steer nowhere in particular
                d = {cfg.speed, 0.0};
            sim::Control u = ikd::baseline_inverse(d, now);
            if (ctl.kind != ControllerKind::baseline && ikd::make_window(imu, imu.size(), odom, k, window)) {
                ++learned_ticks;
                std::optional<geometry::Patch> patch;
                if (ctl.kind == ControllerKind::vi) {
                    patch = frames.newest_patch(geometry::predict_future_location(odom, sc.latency), now);
                    if (patch)
                        ++patched_ticks;
                }
                u = ctl.model->infer(d, window, patch ? &*patch : nullptr, now);
            }
            sim.issue(u.v_cmd, u.omega_cmd);
            inflight.push(now + sc.latency, d.v_des, d.omega_des);
        }
        sim::TickOutput out = sim.step();
        if (out.exited) {
            fail("exit");
            continue;
        }
        imu.push_back(out.imu);
        if (k > 0 && imu.size() > static_cast<std::size_t>(k))
            imu.pop_front();
        if (out.frame)
            frames.push(geometry::make_buffered(std::make_shared<const sim::FrameRecord>(std::move(*out.frame)),
                                                sc.intrinsics, sc.mount));
    }
    res.completed = progress >= total;

    // Turns never reached before the timeout count as failures.
    for (int lap = 0; lap < cfg.laps; ++lap)
        for (const auto &t : ref.turns) {
            const bool seen = std::any_of(res.turns.begin(), res.turns.end(),
                                          [&](const TurnAttempt &a) { return a.lap == lap && a.turn == t.id; });
            if (!seen) {
                res.turns.push_back({lap, t.id, 0.0, "timeout", false});
                if (res.failure.empty())
                    res.failure = "timeout";
            }
        }
    for (auto &a : res.turns) {
        a.success = a.cause.empty() && a.max_deviation < cfg.success_threshold;
        if (!a.success && res.failure.empty())
            res.failure = a.cause;
    }
    res.patch_rate = learned_ticks ? static_cast<double>(patched_ticks) / learned_ticks : 0.0;
    if (res.trajectory.empty())
        throw std::runtime_error("episode produced no trajectory");
    res.hausdorff = hausdorff(points_of(res.trajectory), points_of(ref));
    return res;
}

/// The reference a course is scored against: one slow baseline lap of the geometric route,
/// resampled every `spacing` meters and labeled with the route's turns.
inline ReferencePath record_reference(const sim::TerrainMap &world, const sim::RouteSpec &route, const sim::SimConfig &sc,
                                      std::uint64_t seed, double speed = 0.5, double spacing = 0.1)
{
    const ReferencePath course = route_path(route);
    EpisodeConfig cfg;
    cfg.speed = speed;
    cfg.sim = sc;
    const EpisodeResult drive = run_episode(world, Controller::baseline(), course, cfg, seed);
    if (!drive.completed || drive.reinits)
        throw std::runtime_error("reference drive did not complete a clean lap");
    ReferencePath r;
    double since = spacing;
    const auto &tr = drive.trajectory;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (i > 0)
            since += std::hypot(tr[i].x - tr[i - 1].x, tr[i].y - tr[i - 1].y);
        if (since + 1e-12 < spacing)
            continue;
        since = 0;
        r.x.push_back(tr[i].x);
        r.y.push_back(tr[i].y);
        r.turn.push_back(course.turn_at(course.project(tr[i].x, tr[i].y).s));
    }
    // The lap ends where it began; drop the overlap so the loop closes on itself.
    while (r.size() > 3 && std::hypot(r.x.back() - r.x.front(), r.y.back() - r.y.front()) < spacing) {
        r.x.pop_back();
        r.y.pop_back();
        r.turn.pop_back();
    }
    r.finalize();
    return r;
}

} // namespace kinoforge::eval
