#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "kinoforge/common/angles.hpp"
#include "kinoforge/geometry/camera.hpp"
#include "kinoforge/geometry/homography.hpp"
#include "kinoforge/sim/sensors.hpp"
#include "kinoforge/sim/simulator.hpp"

namespace kinoforge::geometry {

inline constexpr int kPatchSize = 64;
inline constexpr double kBevScale = 0.015;
inline constexpr double kMinValidFraction = 0.5;
inline constexpr std::size_t kFrameBufferSize = 30;

/// BEV pixel (r, c) sits at local ground point (origin_x - r*scale, origin_y - c*scale):
/// rows run backwards from the far edge, columns run from left to right.
struct BevGrid {
    double origin_x = 0, origin_y = 0;
    double scale = kBevScale;
    int rows = 0, cols = 0;

    double X(int r) const { return origin_x - r * scale; }
    double Y(int c) const { return origin_y - c * scale; }

    static BevGrid centered(double x, double y, int n, double scale)
    {
        const double half = 0.5 * (n - 1) * scale;
        return BevGrid{x + half, y + half, scale, n, n};
    }
};

struct BevImage {
    BevGrid grid;
    std::vector<float> rgb;          // HWC in [0, 1]
    std::vector<std::uint8_t> valid; // one per pixel

    float at(int r, int c, int ch) const { return rgb[(static_cast<std::size_t>(r) * grid.cols + c) * 3 + ch]; }
    bool is_valid(int r, int c) const { return valid[static_cast<std::size_t>(r) * grid.cols + c] != 0; }
};

/// Inverse warp with bilinear sampling.  Pixels whose ground point projects behind the
/// camera or outside the image stay invalid.
inline BevImage warp_to_bev(const CameraFrame &frame, const Homography &h, const BevGrid &grid)
{
    BevImage out;
    out.grid = grid;
    const std::size_t n = static_cast<std::size_t>(grid.rows) * grid.cols;
    out.rgb.assign(n * 3, 0.0f);
    out.valid.assign(n, 0);
    const double umax = frame.width - 1, vmax = frame.height - 1;
    const auto &H = h.H;
    for (int r = 0; r < grid.rows; ++r) {
        const double X = grid.X(r);
        for (int c = 0; c < grid.cols; ++c) {
            const double Y = grid.Y(c);
            const double w = H(2, 0) * X + H(2, 1) * Y + H(2, 2);
            if (!(w > 0.0))
                continue;
            const double u = (H(0, 0) * X + H(0, 1) * Y + H(0, 2)) / w;
            const double v = (H(1, 0) * X + H(1, 1) * Y + H(1, 2)) / w;
            if (!(u >= 0.0 && v >= 0.0 && u <= umax && v <= vmax))
                continue;
            const int u0 = std::min(static_cast<int>(u), frame.width - 2);
            const int v0 = std::min(static_cast<int>(v), frame.height - 2);
            const double a = u - u0, b = v - v0;
            const std::size_t idx = static_cast<std::size_t>(r) * grid.cols + c;
            for (int ch = 0; ch < 3; ++ch) {
                const double p00 = frame.at(v0, u0, ch), p01 = frame.at(v0, u0 + 1, ch);
                const double p10 = frame.at(v0 + 1, u0, ch), p11 = frame.at(v0 + 1, u0 + 1, ch);
                const double val = (1 - b) * ((1 - a) * p00 + a * p01) + b * ((1 - a) * p10 + a * p11);
                out.rgb[idx * 3 + ch] = static_cast<float>(val / 255.0);
            }
            out.valid[idx] = 1;
        }
    }
    return out;
}

/// BEV covering `extent` meters ahead of the camera footprint origin and extent/2 to each side.
inline BevImage warp_to_bev(const CameraFrame &frame, const Homography &h, double scale, double extent)
{
    const int n = static_cast<int>(std::round(extent / scale));
    return warp_to_bev(frame, h, BevGrid{extent, 0.5 * extent, scale, n, n});
}

struct Patch {
    std::vector<std::uint8_t> pixels; // 64x64x3 HWC, 0 where invalid
    double center_x = 0, center_y = 0; // world
    double source_frame_time = 0;
    double valid_fraction = 0;

    double value(int r, int c, int ch) const { return pixels[(static_cast<std::size_t>(r) * kPatchSize + c) * 3 + ch] / 255.0; }
    bool operator==(const Patch &) const = default;
};

inline Pose2 predict_future_location(const sim::OdomSample &odom, double tau)
{
    return integrate_arc(odom.pose(), odom.v, odom.omega, tau);
}

/// Target expressed in the capture frame using the capture-time and current odometry poses.
/// Both are absolute odometry estimates, so chaining relative motions telescopes to this.
inline void target_in_capture_frame(const sim::OdomSample &capture, double tx, double ty, double &lx, double &ly)
{
    world_to_local(capture.pose(), tx, ty, lx, ly);
}

inline std::optional<Patch> crop_patch(const BevImage &bev, double lx, double ly, double min_valid)
{
    const auto &g = bev.grid;
    const double half = 0.5 * (kPatchSize - 1);
    const int r0 = static_cast<int>(std::lround((g.origin_x - lx) / g.scale - half));
    const int c0 = static_cast<int>(std::lround((g.origin_y - ly) / g.scale - half));
    if (r0 < 0 || c0 < 0 || r0 + kPatchSize > g.rows || c0 + kPatchSize > g.cols)
        return std::nullopt;
    Patch p;
    p.pixels.assign(static_cast<std::size_t>(kPatchSize) * kPatchSize * 3, 0);
    int nvalid = 0;
    for (int r = 0; r < kPatchSize; ++r)
        for (int c = 0; c < kPatchSize; ++c) {
            if (!bev.is_valid(r0 + r, c0 + c))
                continue;
            ++nvalid;
            for (int ch = 0; ch < 3; ++ch)
                p.pixels[(static_cast<std::size_t>(r) * kPatchSize + c) * 3 + ch] =
                    static_cast<std::uint8_t>(std::lround(std::clamp(bev.at(r0 + r, c0 + c, ch), 0.0f, 1.0f) * 255.0f));
        }
    p.valid_fraction = static_cast<double>(nvalid) / (kPatchSize * kPatchSize);
    if (p.valid_fraction < min_valid)
        return std::nullopt;
    return p;
}

/// Patch operator on a precomputed BEV: crop the 64x64 window nearest to the target.
inline std::optional<Patch> extract_patch(const BevImage &bev, const sim::OdomSample &capture, double capture_time,
                                          const Pose2 &target, double min_valid = kMinValidFraction)
{
    double lx, ly;
    target_in_capture_frame(capture, target.x, target.y, lx, ly);
    auto p = crop_patch(bev, lx, ly, min_valid);
    if (p) {
        p->center_x = target.x;
        p->center_y = target.y;
        p->source_frame_time = capture_time;
    }
    return p;
}

/// Buffered camera frame with its capture-frame homography precomputed.
struct BufferedFrame {
    std::shared_ptr<const sim::FrameRecord> record;
    Homography h;
};

inline BufferedFrame make_buffered(std::shared_ptr<const sim::FrameRecord> rec, const CameraIntrinsics &intr,
                                   const CameraMount &mount)
{
    const CameraPose local = camera_pose_for(Pose2{}, rec->roll, rec->pitch, mount);
    return BufferedFrame{std::move(rec), compute_homography(intr, local)};
}

/// Direct path: warp exactly the patch window (identical to cropping a larger BEV whose
/// grid is centered on the target) and skip frames that cannot see it.
inline std::optional<Patch> extract_patch(const BufferedFrame &f, const Pose2 &target,
                                          double min_valid = kMinValidFraction, double scale = kBevScale)
{
    double lx, ly;
    target_in_capture_frame(f.record->odom, target.x, target.y, lx, ly);
    if (lx <= 0.0)
        return std::nullopt; // behind the capture pose
    const BevGrid grid = BevGrid::centered(lx, ly, kPatchSize, scale);
    const auto &img = f.record->image;
    // cheap visibility screen on a coarse 5x5 lattice
    int seen = 0;
    for (int i = 0; i < 5 && !seen; ++i)
        for (int j = 0; j < 5; ++j) {
            const auto px = f.h.project(grid.X(i * (kPatchSize - 1) / 4), grid.Y(j * (kPatchSize - 1) / 4));
            if (px && px->x() >= 0 && px->y() >= 0 && px->x() <= img.width - 1 && px->y() <= img.height - 1) {
                ++seen;
                break;
            }
        }
    if (!seen)
        return std::nullopt;
    const BevImage bev = warp_to_bev(img, f.h, grid);
    auto p = crop_patch(bev, lx, ly, min_valid);
    if (p) {
        p->center_x = target.x;
        p->center_y = target.y;
        p->source_frame_time = f.record->time;
    }
    return p;
}

/// Rolling window of the most recent camera frames, newest last.
class FrameBuffer {
public:
    explicit FrameBuffer(std::size_t capacity = kFrameBufferSize) : cap_(capacity) {}

    void push(BufferedFrame f)
    {
        frames_.push_back(std::move(f));
        while (frames_.size() > cap_)
            frames_.pop_front();
    }

    void clear() { frames_.clear(); }
    std::size_t size() const { return frames_.size(); }
    std::size_t capacity() const { return cap_; }
    const BufferedFrame &operator[](std::size_t i) const { return frames_[i]; }
    auto begin() const { return frames_.begin(); }
    auto end() const { return frames_.end(); }

    /// Newest frame (at or before `now`) that yields a viable patch.
    std::optional<Patch> newest_patch(const Pose2 &target, double now, double min_valid = kMinValidFraction) const
    {
        for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
            if (it->record->time > now + 1e-9)
                continue;
            if (auto p = extract_patch(*it, target, min_valid))
                return p;
        }
        return std::nullopt;
    }

private:
    std::size_t cap_;
    std::deque<BufferedFrame> frames_;
};

} // namespace kinoforge::geometry
