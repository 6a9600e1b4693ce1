#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <cstring>
#include <set>
#include <sstream>
#include <tuple>

#include "gen.hpp"
#include "kinoforge/sim/presets.hpp"
#include "kinoforge/sim/simulator.hpp"

using namespace kinoforge;
using namespace kinoforge::sim;

namespace {

TerrainMap flat(double grip, double roughness, double size = 50.0)
{
    return TerrainMap(size, size, 0.5, {{"flat", grip, roughness, {0.4, 0.5, 0.6}, 11}});
}

TerrainMap untextured_two_color(double split_x)
{
    TerrainMap m(10, 10, 0.25, {{"a", 1.0, 0.0, {0.2, 0.2, 0.2}, 1}, {"b", 1.0, 0.0, {0.8, 0.8, 0.8}, 2}});
    m.set_texture({1, 0, 1, 0});
    m.paint(1, [&](double x, double) { return x > split_x; });
    return m;
}

VehicleState at(double x, double y, double h, double v = 0, double w = 0)
{
    VehicleState s;
    s.x = x;
    s.y = y;
    s.heading = h;
    s.v = v;
    s.omega = w;
    return s;
}

} // namespace

TEST(Dynamics, SteadyStraightLine)
{
    const auto m = flat(1.0, 0.0);
    const auto r = step_dynamics(at(0.5, 0.5, 0, 1, 0), Control(1, 0, 0), m, 0.1);
    EXPECT_NEAR(r.state.x, 0.6, 1e-12);
    EXPECT_NEAR(r.state.y, 0.5, 1e-12);
    EXPECT_EQ(r.state.heading, 0.0);
    EXPECT_EQ(r.state.v, 1.0);
    EXPECT_FALSE(r.exited);
}

TEST(Dynamics, GripLimitedYawTarget)
{
    // demand 3 * 1.5 = 4.5 m/s^2 exceeds 0.5 * 4 = 2 m/s^2, so the cap 2 / 3 rad/s binds
    EXPECT_NEAR(achievable_omega(1.5, 3.0, 0.5), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(achievable_omega(-1.5, 3.0, 0.5), -2.0 / 3.0, 1e-15);
    DynamicsParams p;
    p.T_omega = 0;
    const auto m = flat(0.5, 0.0);
    const auto r = step_dynamics(at(5, 5, 0, 3, 0), Control(3, 1.5, 0), m, 0.005, p);
    EXPECT_NEAR(r.state.omega, 2.0 / 3.0, 1e-15);
}

TEST(Dynamics, UndersteerBelowCapOnlyOffFullGrip)
{
    EXPECT_EQ(achievable_omega(0.5, 2.0, 1.0), 0.5);
    const double g = 1.0 / (1.0 + 1.1 * std::pow(0.65, 3) * 4.0);
    EXPECT_NEAR(achievable_omega(0.2, 2.0, 0.35), 0.2 * g, 1e-15);
    DynamicsParams pure;
    pure.K_us = 0;
    EXPECT_EQ(achievable_omega(0.2, 2.0, 0.35, pure), 0.2);
}

TEST(Dynamics, Deterministic)
{
    const auto m = flat(0.6, 0.7);
    VehicleState a = at(10, 10, 0.2, 1.0, 0.1), b = a;
    for (int i = 0; i < 500; ++i) {
        a = step_dynamics(a, Control(2.5, 0.8, 0), m, 0.005).state;
        b = step_dynamics(b, Control(2.5, 0.8, 0), m, 0.005).state;
    }
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
}

TEST(Dynamics, BoundaryExitIsFlaggedNotClamped)
{
    const auto m = flat(1.0, 0.0, 10.0);
    const auto r = step_dynamics(at(9.99, 5, 0, 4, 0), Control(4, 0, 0), m, 0.005);
    EXPECT_TRUE(r.exited);
    EXPECT_GT(r.state.x, 10.0);
    EXPECT_THROW(step_dynamics(r.state, Control(4, 0, 0), m, 0.005), OutOfBounds);
    EXPECT_THROW(step_dynamics(at(5, 5, 0), Control(), m, 0.0), std::invalid_argument);
}

TEST(Dynamics, PureKinematicsReduction)
{
    DynamicsParams p;
    p.T_v = 0;
    p.T_omega = 0;
    const auto m = flat(1.0, 0.0, 1000.0);
    kftest::for_all(50, 5, [&](kftest::Gen &g, int) {
        const double v = g.real(0.1, 4.0);
        const double w = std::clamp(g.real(-1.8, 1.8), -3.9 / v, 3.9 / v);
        const double x0 = 500, y0 = 500, h0 = g.real(-3, 3);
        VehicleState s = at(x0, y0, h0, v, w);
        const double dt = 0.005;
        for (int k = 1; k <= 200; ++k) {
            s = step_dynamics(s, Control(v, w, 0), m, dt, p).state;
            const double t = k * dt;
            const double ex = x0 + v / w * (std::sin(h0 + w * t) - std::sin(h0));
            const double ey = y0 - v / w * (std::cos(h0 + w * t) - std::cos(h0));
            ASSERT_NEAR(s.x, ex, 1e-9);
            ASSERT_NEAR(s.y, ey, 1e-9);
            ASSERT_NEAR(std::remainder(s.heading - (h0 + w * t), 2 * std::numbers::pi), 0.0, 1e-9);
        }
    });
}

TEST(Dynamics, GripMonotonicity)
{
    kftest::for_all(2000, 6, [](kftest::Gen &g, int) {
        const double v = g.real(0, 4), w = g.real(-1.8, 1.8);
        double g1 = g.real(0.01, 1), g2 = g.real(0.01, 1);
        if (g1 > g2)
            std::swap(g1, g2);
        EXPECT_LE(std::abs(achievable_omega(w, v, g1)), std::abs(achievable_omega(w, v, g2)));
    });
}

TEST(Latency, MaturityRule)
{
    LatencyQueue q(0.25);
    q.push(Control(1, 0.5, 1.0));
    Control e = q.effective(1.2);
    EXPECT_EQ(e.v_cmd, 0.0);
    EXPECT_EQ(e.omega_cmd, 0.0);
    e = q.effective(1.25);
    EXPECT_EQ(e.v_cmd, 1.0);
    EXPECT_EQ(e.issue_time, 1.0);
}

TEST(Latency, MostRecentMaturedWins)
{
    LatencyQueue q(0.25);
    q.push(Control(1, 0, 1.0));
    q.push(Control(2, 0, 1.1));
    EXPECT_EQ(q.effective(1.40).issue_time, 1.1);
    EXPECT_EQ(q.pending(), 0u);
    LatencyQueue empty;
    EXPECT_EQ(empty.effective(10).v_cmd, 0.0);
    EXPECT_THROW(q.push(Control(1, 0, 0.5)), std::invalid_argument);
}

TEST(Latency, ControlBoundsEnforced)
{
    EXPECT_THROW(Control(4.5, 0, 0), std::out_of_range);
    EXPECT_THROW(Control(-0.1, 0, 0), std::out_of_range);
    EXPECT_THROW(Control(1, 1.9, 0), std::out_of_range);
    const auto c = Control::clamped(5, -3, 0);
    EXPECT_EQ(c.v_cmd, 4.0);
    EXPECT_EQ(c.omega_cmd, -1.8);
}

TEST(Latency, TrajectoryIsTimeShiftedCopy)
{
    const auto m = flat(0.7, 0.0, 200.0);
    auto run = [&](double tau) {
        SimConfig cfg;
        cfg.latency = tau;
        cfg.camera = false;
        cfg.odom.enabled = false;
        Simulator sim(m, cfg, 1);
        sim.reset(at(100, 100, 0.3));
        std::vector<VehicleState> out{sim.state()};
        for (int k = 0; k < 1200; ++k) {
            if (sim.at_control_tick()) {
                const double t = sim.time();
                sim.issue(t < 2.0 ? 3.0 : 1.5, t < 1.0 ? 0.0 : (t < 4.0 ? 1.2 : -0.6));
            }
            out.push_back(sim.step().state);
        }
        return out;
    };
    const auto a = run(0.0), b = run(0.25);
    const int shift = 50;
    for (std::size_t k = 0; k + shift < b.size(); ++k) {
        ASSERT_NEAR(b[k + shift].x, a[k].x, 1e-9) << k;
        ASSERT_NEAR(b[k + shift].y, a[k].y, 1e-9) << k;
        ASSERT_NEAR(b[k + shift].heading, a[k].heading, 1e-9) << k;
    }
}

TEST(Imu, GravityOnlyWhenStationaryOnSmoothGround)
{
    Rng rng = named_stream(1, "imu");
    Gaussian gauss;
    VehicleState prev, s;
    prev.time = 0;
    s.time = 0.005;
    const TerrainCell cell{0, 1.0, 0.0, 0, {}};
    const auto imu = synthesize_imu(s, prev, cell, rng, gauss);
    EXPECT_EQ(imu.accel[0], 0.0);
    EXPECT_EQ(imu.accel[1], 0.0);
    EXPECT_EQ(imu.accel[2], 9.81);
    for (double gy : imu.gyro)
        EXPECT_EQ(gy, 0.0);
}

namespace {
double accel_x_variance(double roughness, double v, std::uint64_t seed, int n = 100000)
{
    Rng rng = named_stream(seed, "imu");
    Gaussian gauss;
    VehicleState prev = at(0, 0, 0, v, 0), s = prev;
    s.time = prev.time + 0.005;
    const TerrainCell cell{0, 1.0, roughness, 0, {}};
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        const double a = synthesize_imu(s, prev, cell, rng, gauss).accel[0];
        sum += a;
        sum2 += a * a;
    }
    const double m = sum / n;
    return sum2 / n - m * m;
}
} // namespace

TEST(Imu, VibrationStdMatchesFormula)
{
    EXPECT_DOUBLE_EQ(vibration_std(1.0, 2.0), 0.4);
    EXPECT_NEAR(std::sqrt(accel_x_variance(1.0, 2.0, 9)), 0.4, 0.4 * 0.05);
}

TEST(Imu, VarianceScalesWithRoughnessSquared)
{
    const double ratio = accel_x_variance(1.0, 1.5, 10) / accel_x_variance(0.1, 1.5, 11);
    EXPECT_NEAR(ratio, 100.0, 10.0);
}

TEST(Odometry, NoiselessEqualsTruth)
{
    Rng rng = named_stream(1, "odom");
    Gaussian gauss;
    OdomNoise n;
    n.enabled = false;
    const auto s = at(3, 4, 0.5, 1.2, -0.3);
    const auto o = synthesize_odometry(s, rng, gauss, n);
    EXPECT_EQ(o.x, s.x);
    EXPECT_EQ(o.y, s.y);
    EXPECT_EQ(o.heading, s.heading);
    EXPECT_EQ(o.v, s.v);
    EXPECT_EQ(o.omega, s.omega);
}

TEST(Odometry, PositionNoiseStd)
{
    Rng rng = named_stream(2, "odom");
    Gaussian gauss;
    const auto s = at(3, 4, 0.5);
    double s2 = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double d = synthesize_odometry(s, rng, gauss).x - 3.0;
        s2 += d * d;
    }
    EXPECT_NEAR(std::sqrt(s2 / n), 0.01, 0.01 * 0.05);
}

TEST(Odometry, SeedRepeatable)
{
    Rng r1 = named_stream(5, "odom"), r2 = named_stream(5, "odom");
    Gaussian g1, g2;
    for (int i = 0; i < 100; ++i) {
        const auto a = synthesize_odometry(at(1, 1, 0), r1, g1), b = synthesize_odometry(at(1, 1, 0), r2, g2);
        ASSERT_EQ(a.x, b.x);
        ASSERT_EQ(a.heading, b.heading);
    }
}

TEST(Render, NadirOverUniformCellShowsBaseColor)
{
    TerrainMap m(10, 10, 1.0, {{"u", 1.0, 0.0, {0.3, 0.6, 0.9}, 4}});
    m.set_texture({1, 0, 1, 0});
    geometry::CameraPose pose;
    pose.position = {5, 5, 1};
    pose.pitch = std::numbers::pi / 2;
    const auto f = render_camera(pose, m, geometry::CameraIntrinsics{});
    for (int r = 0; r < f.height; ++r)
        for (int c = 0; c < f.width; ++c) {
            ASSERT_EQ(f.at(r, c, 0), quantize(0.3));
            ASSERT_EQ(f.at(r, c, 1), quantize(0.6));
            ASSERT_EQ(f.at(r, c, 2), quantize(0.9));
        }
}

TEST(Render, TextureIsDeterministicModulation)
{
    const auto m = flat(1.0, 0.0, 10.0);
    geometry::CameraPose pose;
    pose.position = {5, 5, 1};
    pose.pitch = std::numbers::pi / 2;
    const auto a = render_camera(pose, m, geometry::CameraIntrinsics{});
    const auto b = render_camera(pose, m, geometry::CameraIntrinsics{});
    EXPECT_EQ(a.rgb, b.rgb);
    // every pixel within the texture's multiplicative band around the base color
    for (int r = 0; r < a.height; ++r)
        for (int c = 0; c < a.width; ++c) {
            const double g = a.at(r, c, 1) / 255.0;
            ASSERT_LE(std::abs(g - 0.5), 0.5 * 0.13 + 1.0 / 255);
        }
}

TEST(Render, BoundarySplitsFrameAlongProjectedLine)
{
    const auto m = untextured_two_color(5.0);
    geometry::CameraPose pose;
    pose.position = {5.1, 5, 1.5};
    pose.pitch = std::numbers::pi / 2;
    const geometry::CameraIntrinsics K;
    const auto f = render_camera(pose, m, K);
    // nadir view: pixel (u, v) sees ground x = x0 + h (cy - v) / fy
    int dark = 0, light = 0;
    for (int r = 0; r < f.height; ++r) {
        const double gx = 5.1 + 1.5 * (K.cy - r) / K.fy;
        const double pix = 1.5 / K.fy;
        for (int c = 0; c < f.width; ++c) {
            if (std::abs(gx - 5.0) < pix)
                continue;
            const bool expect_light = gx > 5.0;
            ASSERT_EQ(f.at(r, c, 0), expect_light ? quantize(0.8) : quantize(0.2)) << r << "," << c;
            (expect_light ? light : dark)++;
        }
    }
    EXPECT_GT(dark, 0);
    EXPECT_GT(light, 0);
}

TEST(Render, SkyAboveHorizonAndErrorsUnderground)
{
    const auto m = flat(1.0, 0.0, 10.0);
    geometry::CameraPose pose;
    pose.position = {5, 5, 0.45};
    pose.pitch = 0.1;
    const auto f = render_camera(pose, m, geometry::CameraIntrinsics{});
    EXPECT_EQ(f.at(0, 64, 2), quantize(kSkyColor[2]));
    pose.position.z() = 0.0;
    EXPECT_THROW(render_camera(pose, m, geometry::CameraIntrinsics{}), std::invalid_argument);
}

TEST(Terrain, LookupAndBounds)
{
    const auto p = two_terrain_oval(1);
    EXPECT_EQ(p.world.cell(35.0, 10.0).class_id, 1);
    EXPECT_EQ(p.world.cell(20.0, 3.5).class_id, 0);
    EXPECT_EQ(p.world.cell(5.0, 24.0).class_id, 1);
    EXPECT_THROW(p.world.cell(-0.1, 3.0), OutOfBounds);
    EXPECT_THROW(p.world.cell(40.0, 3.0), OutOfBounds);
    EXPECT_THROW(TerrainMap(10, 10, 1, {{"bad", 1.5, 0.0, {}, 0}}), std::invalid_argument);
}

TEST(Terrain, WorldFileRoundTrip)
{
    for (const auto &name : preset_names()) {
        const auto p = make_preset(name, 42);
        std::stringstream ss;
        p.world.write(ss);
        const auto back = TerrainMap::read(ss);
        EXPECT_EQ(back.content_hash(), p.world.content_hash()) << name;
        EXPECT_EQ(back.classes().size(), p.world.classes().size());
    }
    std::stringstream bad("kinoforge-world 2\n");
    EXPECT_THROW(TerrainMap::read(bad), std::runtime_error);
}

TEST(Terrain, OutdoorMixUsesFiveClasses)
{
    const auto p = outdoor_mix(3);
    std::set<int> seen;
    for (int iy = 0; iy < p.world.ny(); ++iy)
        for (int ix = 0; ix < p.world.nx(); ++ix)
            seen.insert(p.world.id_at_index(ix, iy));
    EXPECT_EQ(seen.size(), 5u);
    EXPECT_EQ(p.route.corners.size(), 3u);
}

TEST(Simulator, RatesAndDeterminism)
{
    const auto p = two_terrain_oval(1);
    auto run = [&] {
        Simulator sim(p.world, SimConfig{}, 99);
        sim.reset(at(12, 3.5, 0));
        int frames = 0, controls = 0;
        std::vector<double> trace;
        for (int k = 0; k < 400; ++k) {
            if (sim.at_control_tick()) {
                ++controls;
                sim.issue(2.0, 0.3);
            }
            const auto o = sim.step();
            frames += o.frame.has_value();
            trace.push_back(o.imu.accel[2]);
            trace.push_back(o.odom.x);
        }
        return std::tuple{frames, controls, trace};
    };
    const auto [f1, c1, t1] = run();
    const auto [f2, c2, t2] = run();
    EXPECT_EQ(f1, 60); // 2 s at 30 Hz
    EXPECT_EQ(c1, 80); // 2 s at 40 Hz
    EXPECT_EQ(t1, t2);
}
