#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kinoforge/common/binary_io.hpp"
#include "kinoforge/geometry/bev.hpp"
#include "kinoforge/ikd/inputs.hpp"
#include "kinoforge/sim/vehicle.hpp"

namespace kinoforge::datagen {

/// <x_{t+1}, x_t, O^h, S^h, patch set, u_t> for one control tick.
struct TrainingSample {
    std::int32_t trajectory = 0;
    std::int32_t tick = 0;      // control tick index within the trajectory (issue tick of the label)
    sim::VehicleState x_t;      // state when the label's command matures
    sim::VehicleState x_next;   // one control period later
    ikd::DesiredTransition desired;
    ikd::InertialWindow window;
    std::vector<geometry::Patch> patches; // newest source frame first
    double target_x = 0, target_y = 0;    // predicted execution location
    sim::Control label;
};

inline void write_state(BinaryWriter &w, const sim::VehicleState &s)
{
    for (double v : {s.x, s.y, s.heading, s.v, s.omega, s.roll, s.pitch, s.time})
        w.put<double>(v);
}

inline sim::VehicleState read_state(BinaryReader &r)
{
    sim::VehicleState s;
    for (double *v : {&s.x, &s.y, &s.heading, &s.v, &s.omega, &s.roll, &s.pitch, &s.time})
        *v = r.get<double>();
    return s;
}

// Sample record:
//   i32 trajectory, i32 tick, state x_t (8 f64), state x_next (8 f64), f64 v_des, f64 w_des,
//   i32 k, u32 n, f32[n] window, f64 target_x, f64 target_y, f64 v_cmd, f64 w_cmd, f64 issue_time,
//   u32 patch_count, per patch: f64 cx, f64 cy, f64 source_time, f64 valid_fraction, u8[64*64*3]
inline void write_sample(BinaryWriter &w, const TrainingSample &s)
{
    w.put<std::int32_t>(s.trajectory);
    w.put<std::int32_t>(s.tick);
    write_state(w, s.x_t);
    write_state(w, s.x_next);
    w.put<double>(s.desired.v_des);
    w.put<double>(s.desired.omega_des);
    w.put<std::int32_t>(s.window.k);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.window.values.size()));
    w.put_array(s.window.values.data(), s.window.values.size());
    w.put<double>(s.target_x);
    w.put<double>(s.target_y);
    w.put<double>(s.label.v_cmd);
    w.put<double>(s.label.omega_cmd);
    w.put<double>(s.label.issue_time);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.patches.size()));
    for (const auto &p : s.patches) {
        w.put<double>(p.center_x);
        w.put<double>(p.center_y);
        w.put<double>(p.source_frame_time);
        w.put<double>(p.valid_fraction);
        w.put_array(p.pixels.data(), p.pixels.size());
    }
}

inline TrainingSample read_sample(BinaryReader &r)
{
    TrainingSample s;
    s.trajectory = r.get<std::int32_t>();
    s.tick = r.get<std::int32_t>();
    s.x_t = read_state(r);
    s.x_next = read_state(r);
    s.desired.v_des = r.get<double>();
    s.desired.omega_des = r.get<double>();
    s.window.k = r.get<std::int32_t>();
    const auto n = r.get<std::uint32_t>();
    if (s.window.k <= 0 || n != s.window.expected_size())
        throw FormatError("sample window length does not match k");
    s.window.values.resize(n);
    r.get_array(s.window.values.data(), n);
    s.target_x = r.get<double>();
    s.target_y = r.get<double>();
    const double v = r.get<double>(), om = r.get<double>(), t = r.get<double>();
    s.label = sim::Control(v, om, t);
    const auto np = r.get<std::uint32_t>();
    if (np > 64)
        throw FormatError("implausible patch count");
    s.patches.resize(np);
    for (auto &p : s.patches) {
        p.center_x = r.get<double>();
        p.center_y = r.get<double>();
        p.source_frame_time = r.get<double>();
        p.valid_fraction = r.get<double>();
        p.pixels.resize(static_cast<std::size_t>(geometry::kPatchSize) * geometry::kPatchSize * 3);
        r.get_array(p.pixels.data(), p.pixels.size());
    }
    return s;
}

inline bool same_sample(const TrainingSample &a, const TrainingSample &b)
{
    auto st = [](const sim::VehicleState &x, const sim::VehicleState &y) {
        return x.x == y.x && x.y == y.y && x.heading == y.heading && x.v == y.v && x.omega == y.omega
            && x.roll == y.roll && x.pitch == y.pitch && x.time == y.time;
    };
    return a.trajectory == b.trajectory && a.tick == b.tick && st(a.x_t, b.x_t) && st(a.x_next, b.x_next)
        && a.desired.v_des == b.desired.v_des && a.desired.omega_des == b.desired.omega_des && a.window.k == b.window.k
        && a.window.values == b.window.values && a.patches == b.patches && a.target_x == b.target_x
        && a.target_y == b.target_y && a.label.v_cmd == b.label.v_cmd && a.label.omega_cmd == b.label.omega_cmd
        && a.label.issue_time == b.label.issue_time;
}

} // namespace kinoforge::datagen
