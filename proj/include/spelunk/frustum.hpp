#ifndef SPELUNK_FRUSTUM_HPP
#define SPELUNK_FRUSTUM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "spelunk/camera.hpp"
#include "spelunk/parallel.hpp"
#include "spelunk/range_bound.hpp"
#include "spelunk/ray.hpp"

namespace spelunk {

struct FrustumOptions {
    int grid = 16;  // initial frusta per image side
};

struct FrustumImageResult {
    int width = 0;
    int height = 0;
    std::vector<HitResult> hits;           // row-major; HitResult::steps counts only per-pixel steps
    std::vector<double> amortized_steps;   // frustum steps shared over covered pixels, plus per-pixel steps
    long frustum_steps = 0;
    long ray_steps = 0;

    long total_steps() const { return frustum_steps + ray_steps; }
    const HitResult& at(int x, int y) const { return hits[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

struct Frustum {
    int x0, y0, x1, y1;  // half-open pixel rectangle
    double t, sigma;

    int pixels() const { return (x1 - x0) * (y1 - y0); }
};

/// Box around the slab [t, t + sigma] of every ray inside the cone spanned by
/// the corner rays. Along the center direction c the slab spans
/// [t cos(theta_max), t + sigma]; sideways it stays within (t + sigma) sin(theta_max).
inline QueryBox frustum_box(const Vec3& origin, const std::array<Vec3, 4>& corners, double t, double sigma) {
    const Vec3 c = (corners[0] + corners[1] + corners[2] + corners[3]).normalized();
    double cos_min = 1.0, sin_max = 0.0;
    for (const auto& d : corners) {
        cos_min = std::min(cos_min, c.dot(d));
        sin_max = std::max(sin_max, c.cross(d).norm());
    }
    const double near = t * cos_min;
    const double far = t + sigma;
    const double lateral = far * sin_max;
    const Vec3 e1 = c.unitOrthogonal();
    const Vec3 e2 = c.cross(e1);
    QueryBox box;
    box.center = origin + c * (0.5 * (near + far));
    box.axes = {Vector(c * (0.5 * (far - near))), Vector(e1 * lateral), Vector(e2 * lateral)};
    return box;
}

inline void split_frustum(const Frustum& f, std::vector<Frustum>& stack) {
    const int w = f.x1 - f.x0, h = f.y1 - f.y0;
    if (w >= h) {
        const int mid = f.x0 + w / 2;
        stack.push_back({f.x0, f.y0, mid, f.y1, f.t, f.sigma});
        stack.push_back({mid, f.y0, f.x1, f.y1, f.t, f.sigma});
    } else {
        const int mid = f.y0 + h / 2;
        stack.push_back({f.x0, f.y0, f.x1, mid, f.t, f.sigma});
        stack.push_back({f.x0, mid, f.x1, f.y1, f.t, f.sigma});
    }
}

} // namespace detail

/// Casts every pixel ray of `camera` by marching pixel blocks together with
/// 3d range bounds, splitting blocks as steps shrink. Single-pixel blocks
/// continue as ordinary ray casts from where the block stopped.
inline FrustumImageResult cast_frustum_image(const NetworkSpec& net, const Camera& camera, const RayCastParams& params,
                                             const CondensationPolicy& policy, const FrustumOptions& opts = {}) {
    camera.validate();
    params.validate();
    if (opts.grid < 1) throw Error(ErrorCode::InvalidParameter, "frustum grid must be >= 1");
    const int W = camera.width, H = camera.height;
    FrustumImageResult result;
    result.width = W;
    result.height = H;
    const std::size_t n_pix = static_cast<std::size_t>(W) * H;
    result.hits.assign(n_pix, HitResult::miss());
    result.amortized_steps.assign(n_pix, 0.0);

    const double f0 = eval_scalar(net, camera.position);
    if (f0 == 0.0) {
        result.hits.assign(n_pix, HitResult::at(0.0));
        return result;
    }

    const int gx = std::min(opts.grid, W), gy = std::min(opts.grid, H);
    std::vector<long> block_frustum_steps(static_cast<std::size_t>(gx) * gy, 0);
    std::vector<long> block_ray_steps(block_frustum_steps.size(), 0);

    parallel_for(block_frustum_steps.size(), [&](std::size_t b) {
        const int bx = static_cast<int>(b) % gx, by = static_cast<int>(b) / gx;
        std::vector<detail::Frustum> stack;
        stack.push_back({bx * W / gx, by * H / gy, (bx + 1) * W / gx, (by + 1) * H / gy, 0.0, params.sigma0});
        while (!stack.empty()) {
            detail::Frustum f = stack.back();
            stack.pop_back();
            while (true) {
                if (f.pixels() == 1) {
                    const Ray ray = camera.ray(f.x0, f.y0);
                    const auto idx = static_cast<std::size_t>(f.y0) * W + f.x0;
                    result.hits[idx] = detail::march_ray(net, ray, params, policy, f0, f.t, f.sigma);
                    result.amortized_steps[idx] += static_cast<double>(result.hits[idx].steps);
                    block_ray_steps[b] += result.hits[idx].steps;
                    break;
                }
                if (f.t >= params.t_max) break;  // all pixels stay Miss
                const std::array<Vec3, 4> corners = {camera.ray(f.x0, f.y0).dir, camera.ray(f.x1 - 1, f.y0).dir,
                                                     camera.ray(f.x0, f.y1 - 1).dir,
                                                     camera.ray(f.x1 - 1, f.y1 - 1).dir};
                const double front = f.t + f.sigma;
                const double width = front * std::max((corners[1] - corners[0]).norm(), (corners[3] - corners[2]).norm());
                const double height = front * std::max((corners[2] - corners[0]).norm(), (corners[3] - corners[1]).norm());
                if (std::max(width, height) > 2.0 * f.sigma) {
                    detail::split_frustum(f, stack);
                    break;
                }
                const auto box = detail::frustum_box(camera.position, corners, f.t, f.sigma);
                const bool safe = range_bound(net, box, policy).sign != SignClass::Unknown;
                ++block_frustum_steps[b];
                const double share = 1.0 / f.pixels();
                for (int y = f.y0; y < f.y1; ++y) {
                    for (int x = f.x0; x < f.x1; ++x) result.amortized_steps[static_cast<std::size_t>(y) * W + x] += share;
                }
                if (safe) {
                    f.t += params.safety * f.sigma;
                    f.sigma *= params.eta_plus;
                } else {
                    f.sigma *= params.eta_minus;
                    if (f.sigma < params.delta) {
                        detail::split_frustum(f, stack);
                        break;
                    }
                }
            }
        }
    });
    for (std::size_t b = 0; b < block_frustum_steps.size(); ++b) {
        result.frustum_steps += block_frustum_steps[b];
        result.ray_steps += block_ray_steps[b];
    }
    return result;
}

} // namespace spelunk

#endif
