#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "kinoforge/common/binary_io.hpp"
#include "kinoforge/common/random.hpp"
#include "kinoforge/datagen/sample.hpp"
#include "kinoforge/sim/simulator.hpp"
#include "kinoforge/sim/terrain.hpp"

namespace kinoforge::datagen {

enum class EndReason : std::uint8_t { duration = 0, exited = 1, length_cap = 2 };

/// One continuous drive between restarts.  Control tick i is at time start_time + i/control_rate.
struct TrajectoryLog {
    std::int32_t index = 0;
    std::uint64_t seed = 0;
    std::uint64_t world_hash = 0;
    double start_time = 0;
    EndReason end = EndReason::duration;

    // rates and sensor geometry the streams were recorded with
    std::int32_t physics_rate = 200, control_rate = 40, camera_rate = 30;
    double latency = 0.25;
    geometry::CameraIntrinsics intrinsics;
    geometry::CameraMount mount;

    std::vector<sim::VehicleState> states;      // X_obs: true state at every control tick, incl. the last one reached
    std::vector<sim::OdomSample> control_odom;  // odometry read at each issuing control tick
    std::vector<sim::Control> commands;         // U: one per issuing control tick
    std::vector<sim::InertialSample> imu;       // S: physics rate
    std::vector<sim::OdomSample> odom;          // O: physics rate
    std::vector<sim::FrameRecord> frames;       // I: camera rate, with capture odometry and attitude

    double control_period() const { return 1.0 / control_rate; }
    int latency_ticks() const { return static_cast<int>(std::lround(latency * control_rate)); }
};

struct CollectConfig {
    double duration = 1200; // simulated seconds
    std::uint64_t seed = 1;
    double v_max = sim::kVMax;
    double omega_max = sim::kOmegaMax;
    double hold_min = 1.0, hold_max = 3.0; // command re-draw interval
    double max_trajectory = 120.0;         // restart after this long even without an exit
    double margin = 2.0;                   // restart poses keep this distance from the map edge
    sim::SimConfig sim;
};

using TrajectorySink = std::function<void(TrajectoryLog &&)>;

/// Records one trajectory from a simulator positioned at a control tick.
class TrajectoryRecorder {
public:
    TrajectoryRecorder(sim::Simulator &simulator, std::int32_t index, std::uint64_t seed) : sim_(&simulator)
    {
        const auto &c = simulator.config();
        log_.index = index;
        log_.seed = seed;
        log_.world_hash = simulator.terrain().content_hash();
        log_.start_time = simulator.time();
        log_.physics_rate = c.physics_rate;
        log_.control_rate = c.control_rate;
        log_.camera_rate = c.camera_rate;
        log_.latency = c.latency;
        log_.intrinsics = c.intrinsics;
        log_.mount = c.mount;
        log_.states.push_back(simulator.state());
    }

    std::size_t controls() const { return log_.commands.size(); }

    /// Issue one command and run one control period.  Returns false on a boundary exit; the
    /// interrupted period has no end state, so its command is not kept as a record.
    bool control(double v, double w)
    {
        log_.control_odom.push_back(sim_->odometry_now());
        log_.commands.push_back(sim_->issue(v, w));
        const int n = sim_->config().ticks_per_control();
        for (int j = 0; j < n; ++j) {
            auto out = sim_->step();
            log_.imu.push_back(out.imu);
            log_.odom.push_back(out.odom);
            if (out.frame)
                log_.frames.push_back(std::move(*out.frame));
            if (out.exited) {
                sim_->idle(n - 1 - j); // stay on the control grid
                log_.commands.pop_back();
                log_.control_odom.pop_back();
                log_.end = EndReason::exited;
                return false;
            }
        }
        log_.states.push_back(sim_->state());
        return true;
    }

    TrajectoryLog finish(EndReason end)
    {
        if (log_.end != EndReason::exited)
            log_.end = end;
        return std::move(log_);
    }

private:
    sim::Simulator *sim_;
    TrajectoryLog log_;
};

struct CommandDraw {
    double v, omega, hold;
};

inline CommandDraw draw_command(Rng &rng, const CollectConfig &cfg)
{
    CommandDraw d;
    d.v = uniform(rng, 0.0, cfg.v_max);
    d.omega = uniform(rng, -cfg.omega_max, cfg.omega_max);
    d.hold = uniform(rng, cfg.hold_min, cfg.hold_max);
    return d;
}

/// Random-excitation demonstrations: piecewise-constant commands re-drawn every
/// U[hold_min, hold_max] seconds, restarting from a random interior pose after a boundary
/// exit or max_trajectory seconds.  Trajectories are handed to `sink` as they finish so
/// long runs never hold more than one trajectory's frames in memory.
/// Returns the number of commands issued (including ones cut short by an exit).
inline std::size_t collect(const sim::TerrainMap &world, const CollectConfig &cfg, const TrajectorySink &sink)
{
    if (!(cfg.duration > 0))
        throw std::invalid_argument("collect: duration must be positive");
    if (!(cfg.hold_min > 0 && cfg.hold_max >= cfg.hold_min))
        throw std::invalid_argument("collect: bad command hold interval");
    if (!(cfg.v_max > 0 && cfg.v_max <= sim::kVMax && cfg.omega_max >= 0 && cfg.omega_max <= sim::kOmegaMax))
        throw std::invalid_argument("collect: command ranges exceed the control bounds");
    if (world.width() <= 2 * cfg.margin || world.height() <= 2 * cfg.margin)
        throw std::invalid_argument("collect: world smaller than the restart margin");

    sim::Simulator simulator(world, cfg.sim, cfg.seed);
    Rng cmd_rng = named_stream(cfg.seed, "collect-commands");
    Rng start_rng = named_stream(cfg.seed, "collect-restarts");
    const auto total = static_cast<std::size_t>(std::llround(cfg.duration * cfg.sim.control_rate));
    const auto cap = static_cast<std::size_t>(std::llround(cfg.max_trajectory * cfg.sim.control_rate));

    std::size_t issued = 0;
    std::int32_t index = 0;
    while (issued < total) {
        sim::VehicleState start;
        start.x = uniform(start_rng, cfg.margin, world.width() - cfg.margin);
        start.y = uniform(start_rng, cfg.margin, world.height() - cfg.margin);
        start.heading = uniform(start_rng, -std::numbers::pi, std::numbers::pi);
        simulator.reset(start);
        TrajectoryRecorder rec(simulator, index++, cfg.seed);
        CommandDraw cmd{};
        double next_draw = simulator.time();
        EndReason end = EndReason::duration;
        while (issued < total) {
            if (rec.controls() == cap) {
                end = EndReason::length_cap;
                break;
            }
            if (simulator.time() >= next_draw - 1e-9) {
                cmd = draw_command(cmd_rng, cfg);
                next_draw = simulator.time() + cmd.hold;
            }
            ++issued;
            if (!rec.control(cmd.v, cmd.omega))
                break;
        }
        sink(rec.finish(end));
    }
    return issued;
}

inline std::vector<TrajectoryLog> collect(const sim::TerrainMap &world, const CollectConfig &cfg)
{
    std::vector<TrajectoryLog> out;
    collect(world, cfg, [&](TrajectoryLog &&t) { out.push_back(std::move(t)); });
    return out;
}

// --- log files ---------------------------------------------------------------------------
// magic "KFLOG001"
// i32 index, u64 seed, u64 world_hash, f64 start_time, u8 end_reason,
// i32 physics_rate, i32 control_rate, i32 camera_rate, f64 latency,
// intrinsics: f64 fx, fy, cx, cy, i32 width, height; mount: f64 x, y, z, pitch
// u64 n + n states (8 f64 each: x y heading v omega roll pitch time)
// u64 n + n control odometry (6 f64: time x y heading v omega)
// u64 n + n commands (3 f64: v omega issue_time)
// u64 n + n imu (7 f64: time ax ay az gx gy gz)
// u64 n + n odometry (6 f64)
// u64 n + n frames: f64 time, odometry (6 f64), f64 roll, f64 pitch, i32 w, i32 h, u8[w*h*3]

inline void write_odom(BinaryWriter &w, const sim::OdomSample &o)
{
    for (double v : {o.time, o.x, o.y, o.heading, o.v, o.omega})
        w.put<double>(v);
}

inline sim::OdomSample read_odom(BinaryReader &r)
{
    sim::OdomSample o;
    for (double *v : {&o.time, &o.x, &o.y, &o.heading, &o.v, &o.omega})
        *v = r.get<double>();
    return o;
}

inline void write_log(const std::string &path, const TrajectoryLog &log)
{
    BinaryWriter w(path);
    w.magic("KFLOG001");
    w.put<std::int32_t>(log.index);
    w.put<std::uint64_t>(log.seed);
    w.put<std::uint64_t>(log.world_hash);
    w.put<double>(log.start_time);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(log.end));
    w.put<std::int32_t>(log.physics_rate);
    w.put<std::int32_t>(log.control_rate);
    w.put<std::int32_t>(log.camera_rate);
    w.put<double>(log.latency);
    for (double v : {log.intrinsics.fx, log.intrinsics.fy, log.intrinsics.cx, log.intrinsics.cy})
        w.put<double>(v);
    w.put<std::int32_t>(log.intrinsics.width);
    w.put<std::int32_t>(log.intrinsics.height);
    for (double v : {log.mount.offset.x(), log.mount.offset.y(), log.mount.offset.z(), log.mount.pitch})
        w.put<double>(v);
    w.put<std::uint64_t>(log.states.size());
    for (const auto &s : log.states)
        write_state(w, s);
    w.put<std::uint64_t>(log.control_odom.size());
    for (const auto &o : log.control_odom)
        write_odom(w, o);
    w.put<std::uint64_t>(log.commands.size());
    for (const auto &c : log.commands)
        for (double v : {c.v_cmd, c.omega_cmd, c.issue_time})
            w.put<double>(v);
    w.put<std::uint64_t>(log.imu.size());
    for (const auto &s : log.imu) {
        w.put<double>(s.time);
        w.put_array(s.accel.data(), 3);
        w.put_array(s.gyro.data(), 3);
    }
    w.put<std::uint64_t>(log.odom.size());
    for (const auto &o : log.odom)
        write_odom(w, o);
    w.put<std::uint64_t>(log.frames.size());
    for (const auto &f : log.frames) {
        w.put<double>(f.time);
        write_odom(w, f.odom);
        w.put<double>(f.roll);
        w.put<double>(f.pitch);
        w.put<std::int32_t>(f.image.width);
        w.put<std::int32_t>(f.image.height);
        w.put_array(f.image.rgb.data(), f.image.rgb.size());
    }
    w.close();
}

inline TrajectoryLog read_log(const std::string &path)
{
    BinaryReader r(path);
    r.expect_magic("KFLOG001");
    TrajectoryLog log;
    log.index = r.get<std::int32_t>();
    log.seed = r.get<std::uint64_t>();
    log.world_hash = r.get<std::uint64_t>();
    log.start_time = r.get<double>();
    const auto end = r.get<std::uint8_t>();
    if (end > 2)
        throw FormatError("unknown end reason in " + path);
    log.end = static_cast<EndReason>(end);
    log.physics_rate = r.get<std::int32_t>();
    log.control_rate = r.get<std::int32_t>();
    log.camera_rate = r.get<std::int32_t>();
    log.latency = r.get<double>();
    log.intrinsics.fx = r.get<double>();
    log.intrinsics.fy = r.get<double>();
    log.intrinsics.cx = r.get<double>();
    log.intrinsics.cy = r.get<double>();
    log.intrinsics.width = r.get<std::int32_t>();
    log.intrinsics.height = r.get<std::int32_t>();
    for (int i = 0; i < 3; ++i)
        log.mount.offset[i] = r.get<double>();
    log.mount.pitch = r.get<double>();
    auto count = [&](std::uint64_t limit) {
        const auto n = r.get<std::uint64_t>();
        if (n > limit)
            throw FormatError("implausible record count in " + path);
        return static_cast<std::size_t>(n);
    };
    constexpr std::uint64_t kLimit = 1ull << 32;
    log.states.resize(count(kLimit));
    for (auto &s : log.states)
        s = read_state(r);
    log.control_odom.resize(count(kLimit));
    for (auto &o : log.control_odom)
        o = read_odom(r);
    log.commands.resize(count(kLimit));
    for (auto &c : log.commands) {
        const double v = r.get<double>(), om = r.get<double>(), t = r.get<double>();
        c = sim::Control(v, om, t);
    }
    log.imu.resize(count(kLimit));
    for (auto &s : log.imu) {
        s.time = r.get<double>();
        r.get_array(s.accel.data(), 3);
        r.get_array(s.gyro.data(), 3);
    }
    log.odom.resize(count(kLimit));
    for (auto &o : log.odom)
        o = read_odom(r);
    log.frames.resize(count(kLimit));
    for (auto &f : log.frames) {
        f.time = r.get<double>();
        f.odom = read_odom(r);
        f.roll = r.get<double>();
        f.pitch = r.get<double>();
        f.image.width = r.get<std::int32_t>();
        f.image.height = r.get<std::int32_t>();
        if (f.image.width <= 0 || f.image.height <= 0 || f.image.width > 8192 || f.image.height > 8192)
            throw FormatError("implausible frame size in " + path);
        f.image.rgb.resize(static_cast<std::size_t>(f.image.width) * f.image.height * 3);
        r.get_array(f.image.rgb.data(), f.image.rgb.size());
    }
    if (log.commands.size() != log.control_odom.size() || log.states.size() != log.commands.size() + 1)
        throw FormatError("inconsistent stream lengths in " + path);
    return log;
}

} // namespace kinoforge::datagen
