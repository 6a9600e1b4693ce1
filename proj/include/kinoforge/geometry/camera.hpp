#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "kinoforge/common/angles.hpp"

namespace kinoforge::geometry {

struct CameraIntrinsics {
    double fx = 96, fy = 96;
    double cx = 63.5, cy = 47.5;
    int width = 128, height = 96;

    void validate() const
    {
        if (!(fx > 0 && fy > 0))
            throw std::invalid_argument("focal lengths must be positive");
        if (!(cx >= 0 && cx <= width - 1 && cy >= 0 && cy <= height - 1))
            throw std::invalid_argument("principal point outside image");
    }

    Eigen::Matrix3d K() const
    {
        Eigen::Matrix3d k;
        k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
        return k;
    }
};

/// Camera body frame: x forward, y left, z up.  Positive pitch tilts the view down.
struct CameraPose {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    double yaw = 0, pitch = 0, roll = 0;

    Eigen::Matrix3d rotation() const
    {
        return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY())
                * Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
            .toRotationMatrix();
    }
};

// body (x fwd, y left, z up) -> optical (x right, y down, z forward)
inline Eigen::Matrix3d body_to_optical()
{
    Eigen::Matrix3d m;
    m << 0, -1, 0, 0, 0, -1, 1, 0, 0;
    return m;
}

struct CameraMount {
    Eigen::Vector3d offset{0.25, 0.0, 0.45};
    double pitch = 30.0 * std::numbers::pi / 180.0;
};

/// Camera pose in the frame of `frame` (a planar pose; pass a zero pose for vehicle-local).
/// Vehicle roll/pitch tilt the mount; their angles add to the mount's.
inline CameraPose camera_pose_for(const Pose2 &vehicle, double roll, double pitch, const CameraMount &m = {})
{
    CameraPose p;
    p.yaw = vehicle.heading;
    p.pitch = m.pitch + pitch;
    p.roll = roll;
    const Eigen::Matrix3d tilt = (Eigen::AngleAxisd(vehicle.heading, Eigen::Vector3d::UnitZ())
                                  * Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY())
                                  * Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
                                     .toRotationMatrix();
    p.position = Eigen::Vector3d(vehicle.x, vehicle.y, 0.0) + tilt * m.offset;
    return p;
}

struct CameraFrame {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb; // HWC

    std::uint8_t at(int r, int c, int ch) const { return rgb[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }
};

} // namespace kinoforge::geometry
