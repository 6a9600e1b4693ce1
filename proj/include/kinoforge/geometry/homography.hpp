#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "kinoforge/geometry/camera.hpp"

namespace kinoforge::geometry {

class DegeneratePose : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Homography {
    Eigen::Matrix3d H;     // ground (X, Y, 1) -> pixel (u, v, 1), up to scale
    Eigen::Matrix3d H_inv;

    std::optional<Eigen::Vector2d> project(double X, double Y) const
    {
        const Eigen::Vector3d p = H * Eigen::Vector3d(X, Y, 1.0);
        if (!(p.z() > 0.0))
            return std::nullopt; // behind the camera
        return Eigen::Vector2d(p.x() / p.z(), p.y() / p.z());
    }

    std::optional<Eigen::Vector2d> back_project(double u, double v) const
    {
        const Eigen::Vector3d g = H_inv * Eigen::Vector3d(u, v, 1.0);
        if (!(g.z() > 0.0))
            return std::nullopt; // pixel at or above the horizon
        return Eigen::Vector2d(g.x() / g.z(), g.y() / g.z());
    }
};

/// Ground plane z = 0, expressed in whatever frame `pose` is given in.
/// With the ground point q = (X, Y, 0): pixel ~ K * M * R^T * (q - C) = K M R^T [e1 e2 -C] (X, Y, 1).
inline Homography compute_homography(const CameraIntrinsics &intr, const CameraPose &pose)
{
    if (!(pose.position.z() > 0.0))
        throw DegeneratePose("camera must be above the ground plane");
    const Eigen::Matrix3d Rt = pose.rotation().transpose();
    // some ground must be visible: the downward direction has to fall inside the view cone
    const Eigen::Vector3d down_cam = body_to_optical() * Rt * Eigen::Vector3d(0, 0, -1);
    const double half_v = std::atan2(std::max(intr.cy, intr.height - 1 - intr.cy), intr.fy);
    const double half_u = std::atan2(std::max(intr.cx, intr.width - 1 - intr.cx), intr.fx);
    const double max_angle = std::atan(std::hypot(std::tan(half_u), std::tan(half_v)));
    // the ground occupies the open half-space below the horizon, so any view direction
    // within 90 deg of straight down sees it
    if (std::acos(std::clamp(down_cam.z(), -1.0, 1.0)) >= std::numbers::pi / 2 + max_angle)
        throw DegeneratePose("no ground visible from this camera pose");

    Eigen::Matrix3d B;
    B.col(0) = Eigen::Vector3d::UnitX();
    B.col(1) = Eigen::Vector3d::UnitY();
    B.col(2) = -pose.position;
    Homography h;
    h.H = intr.K() * body_to_optical() * Rt * B;
    h.H /= h.H.norm();
    if (std::abs(h.H.determinant()) < 1e-12)
        throw DegeneratePose("homography is singular");
    h.H_inv = h.H.inverse();
    return h;
}

} // namespace kinoforge::geometry
