#ifndef SPELUNK_RAY_HPP
#define SPELUNK_RAY_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "spelunk/error.hpp"
#include "spelunk/network.hpp"
#include "spelunk/parallel.hpp"
#include "spelunk/range_bound.hpp"

namespace spelunk {

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 dir = Vec3::UnitX();

    Vec3 at(double t) const { return origin + t * dir; }
};

struct RayCastParams {
    double sigma0 = 1.0;
    double eta_plus = 1.5;
    double eta_minus = 0.5;
    double t_max = 10.0;
    double delta = 1e-3;
    double safety = 0.98;

    /// Defaults with sigma0 = t_max / 10.
    static RayCastParams with_t_max(double t_max) {
        RayCastParams p;
        p.t_max = t_max;
        p.sigma0 = t_max / 10.0;
        return p;
    }

    void validate() const {
        const bool ok = sigma0 > 0.0 && std::isfinite(sigma0) && eta_plus > 1.0 && std::isfinite(eta_plus) &&
                        eta_minus > 0.0 && eta_minus < 1.0 && t_max > 0.0 && std::isfinite(t_max) &&
                        delta > 0.0 && std::isfinite(delta) && safety > 0.0 && safety <= 1.0;
        if (!ok) throw Error(ErrorCode::InvalidParameter, "invalid ray casting parameters");
    }
};

struct HitResult {
    bool hit = false;
    double t = 0.0;
    long steps = 0;  // loop iterations, i.e. range_bound calls plus the final test

    static HitResult miss(long steps = 0) { return {false, 0.0, steps}; }
    static HitResult at(double t, long steps = 0) { return {true, t, steps}; }
};

/// One loop iteration of a cast: the tested segment [t, t + sigma] and
/// whether it was certified single-signed.
struct RayStep {
    double t = 0.0;
    double sigma = 0.0;
    bool certified = false;
};

namespace detail {

// Zero counts as positive (outside).
inline bool different_signs(double a, double b) { return (a < 0.0) != (b < 0.0); }

inline void check_ray(const Ray& ray) {
    if (!ray.origin.allFinite() || !ray.dir.allFinite()) throw Error(ErrorCode::InvalidRay, "non-finite ray");
    if (std::abs(ray.dir.norm() - 1.0) > 1e-9) throw Error(ErrorCode::InvalidRay, "ray direction is not unit length");
}

/// The marching loop, resumable from any (t, sigma). f0 is the field value at
/// the ray origin.
inline HitResult march_ray(const NetworkSpec& net, const Ray& ray, const RayCastParams& params,
                           const CondensationPolicy& policy, double f0, double t, double sigma,
                           std::vector<RayStep>* trace = nullptr) {
    long steps = 0;
    while (t < params.t_max) {
        ++steps;
        // The sign test samples the first point of the fixed grid {k delta}
        // past t. Every grid point is then either tested or inside a certified
        // step, so hit/miss does not depend on where the march resumed.
        auto k = static_cast<long>(std::floor(t / params.delta)) + 1;
        if (static_cast<double>(k) * params.delta <= t) ++k;
        const double fc = eval_scalar(net, ray.at(static_cast<double>(k) * params.delta));
        if (different_signs(f0, fc)) return HitResult::at(static_cast<double>(k - 1) * params.delta, steps);
        const auto box = QueryBox::segment(ray.at(t + sigma / 2), (sigma / 2) * ray.dir);
        double advance = 0.0;
        const bool safe = range_bound(net, box, policy).sign != SignClass::Unknown;
        if (trace) trace->push_back({t, sigma, safe});
        if (safe) {
            advance = params.safety * sigma;
            sigma *= params.eta_plus;
        } else {
            sigma *= params.eta_minus;
        }
        t += std::max(advance, params.delta);
    }
    return HitResult::miss(steps);
}

} // namespace detail

/// Adaptive safe-step ray cast. Each step is certified single-signed over
/// the tested segment or is no longer than delta.
inline HitResult cast_ray(const NetworkSpec& net, const Ray& ray, const RayCastParams& params,
                          const CondensationPolicy& policy, std::vector<RayStep>* trace = nullptr) {
    detail::check_ray(ray);
    params.validate();
    const double f0 = eval_scalar(net, ray.origin);
    if (f0 == 0.0) return HitResult::at(0.0, 0);
    return detail::march_ray(net, ray, params, policy, f0, 0.0, params.sigma0, trace);
}

inline std::vector<HitResult> cast_rays(const NetworkSpec& net, const std::vector<Ray>& rays,
                                        const RayCastParams& params, const CondensationPolicy& policy) {
    for (const auto& r : rays) detail::check_ray(r);
    params.validate();
    std::vector<HitResult> out(rays.size());
    parallel_for(rays.size(), [&](std::size_t i) { out[i] = cast_ray(net, rays[i], params, policy); });
    return out;
}

/// Bisects the hit bracket [t, t + delta] down to a sign change of width
/// about 2^-iterations * delta and returns its lower end.
inline double refine_hit(const NetworkSpec& net, const Ray& ray, const HitResult& hit, double delta,
                         int iterations = 40) {
    if (!hit.hit) throw Error(ErrorCode::InvalidParameter, "cannot refine a miss");
    const double f0 = eval_scalar(net, ray.origin);
    double lo = hit.t, hi = hit.t + delta;
    if (f0 == 0.0 || detail::different_signs(f0, eval_scalar(net, ray.at(lo)))) return lo;
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (detail::different_signs(f0, eval_scalar(net, ray.at(mid)))) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return lo;
}

} // namespace spelunk

#endif
