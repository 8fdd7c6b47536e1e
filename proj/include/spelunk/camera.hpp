#ifndef SPELUNK_CAMERA_HPP
#define SPELUNK_CAMERA_HPP

#include <cmath>
#include <numbers>

#include "spelunk/error.hpp"
#include "spelunk/network.hpp"
#include "spelunk/ray.hpp"

namespace spelunk {

/// Right-handed pinhole camera, y up. Pixel (0, 0) is the top-left pixel and
/// rays pass through pixel centers.
struct Camera {
    Vec3 position{0.0, 0.0, 3.0};
    Vec3 look_at = Vec3::Zero();
    Vec3 up = Vec3::UnitY();
    double vertical_fov = 45.0;  // degrees
    int width = 256;
    int height = 256;

    void validate() const {
        if (width < 1 || height < 1) throw Error(ErrorCode::InvalidCamera, "resolution must be at least 1x1");
        if (!position.allFinite() || !look_at.allFinite() || !up.allFinite()) {
            throw Error(ErrorCode::InvalidCamera, "non-finite camera vectors");
        }
        if (!(vertical_fov > 0.0 && vertical_fov < 180.0)) {
            throw Error(ErrorCode::InvalidCamera, "vertical_fov must be in (0, 180)");
        }
        const Vec3 f = look_at - position;
        if (!(f.norm() > 0.0)) throw Error(ErrorCode::InvalidCamera, "look_at coincides with position");
        if (!(f.normalized().cross(up).norm() > 1e-9 * up.norm())) {
            throw Error(ErrorCode::InvalidCamera, "look direction parallel to up");
        }
    }

    Vec3 forward() const { return (look_at - position).normalized(); }
    Vec3 right() const { return forward().cross(up).normalized(); }
    Vec3 true_up() const { return right().cross(forward()); }

    /// Primary ray through the center of pixel (px, py).
    Ray ray(int px, int py) const {
        const double tan_half = std::tan(vertical_fov * std::numbers::pi / 360.0);
        const double aspect = static_cast<double>(width) / height;
        const double x = ((px + 0.5) / width * 2.0 - 1.0) * tan_half * aspect;
        const double y = (1.0 - (py + 0.5) / height * 2.0) * tan_half;
        const Vec3 d = forward() + x * right() + y * true_up();
        return {position, d.normalized()};
    }
};

} // namespace spelunk

#endif
