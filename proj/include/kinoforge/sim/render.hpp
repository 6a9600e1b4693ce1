#pragma once

#include <cmath>
#include <stdexcept>

#include "kinoforge/geometry/camera.hpp"
#include "kinoforge/sim/terrain.hpp"

namespace kinoforge::sim {

inline constexpr Color kSkyColor{0.55, 0.75, 0.95};
inline constexpr Color kOffMapColor{0.5, 0.5, 0.5};

struct RenderOptions {
    int supersample = 1; // n x n rays per pixel
};

inline std::uint8_t quantize(double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

/// Perspective view of the textured ground plane z = 0 by per-pixel ray casting.
inline geometry::CameraFrame render_camera(const geometry::CameraPose &pose, const TerrainMap &terrain,
                                           const geometry::CameraIntrinsics &intr, const RenderOptions &opt = {})
{
    if (!(pose.position.z() > 0.0))
        throw std::invalid_argument("render_camera: camera must be above the ground plane");
    intr.validate();
    const Eigen::Matrix3d R = pose.rotation() * geometry::body_to_optical().transpose();
    const Eigen::Vector3d C = pose.position;
    const int ss = std::max(1, opt.supersample);

    geometry::CameraFrame f;
    f.width = intr.width;
    f.height = intr.height;
    f.rgb.resize(static_cast<std::size_t>(f.width) * f.height * 3);
    for (int r = 0; r < f.height; ++r) {
        for (int c = 0; c < f.width; ++c) {
            Color acc{0, 0, 0};
            for (int sy = 0; sy < ss; ++sy) {
                for (int sx = 0; sx < ss; ++sx) {
                    const double u = c + (sx + 0.5) / ss - 0.5;
                    const double v = r + (sy + 0.5) / ss - 0.5;
                    const Eigen::Vector3d d = R * Eigen::Vector3d((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
                    Color col = kSkyColor;
                    if (d.z() < -1e-12) {
                        const double t = -C.z() / d.z();
                        const double gx = C.x() + t * d.x(), gy = C.y() + t * d.y();
                        col = terrain.contains(gx, gy) ? terrain.color_at(gx, gy) : kOffMapColor;
                    }
                    for (int k = 0; k < 3; ++k)
                        acc[k] += col[k];
                }
            }
            const double norm = 1.0 / (ss * ss);
            auto *px = &f.rgb[(static_cast<std::size_t>(r) * f.width + c) * 3];
            for (int k = 0; k < 3; ++k)
                px[k] = quantize(acc[k] * norm);
        }
    }
    return f;
}

} // namespace kinoforge::sim
