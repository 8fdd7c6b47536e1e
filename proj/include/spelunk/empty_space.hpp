#ifndef SPELUNK_EMPTY_SPACE_HPP
#define SPELUNK_EMPTY_SPACE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "spelunk/error.hpp"
#include "spelunk/network.hpp"
#include "spelunk/parallel.hpp"
#include "spelunk/range_bound.hpp"

namespace spelunk {

struct EmptyRadius {
    double radius = 0.0;
    bool certified = false;
};

/// Largest r in {r_init, r_init/2, ...} whose cube of half-extent r around p
/// is certified single-signed. Gives up with {0, false} once r < delta.
inline EmptyRadius empty_box_radius(const NetworkSpec& net, const Vector& p, double r_init,
                                    const CondensationPolicy& policy, double delta = 1e-3) {
    if (!(r_init > 0.0) || !(delta > 0.0)) throw Error(ErrorCode::InvalidParameter, "r_init and delta must be positive");
    if (eval_scalar(net, p) == 0.0) throw Error(ErrorCode::OnSurface, "query point lies on the surface");
    const Eigen::Index d = p.size();
    for (double r = r_init; r >= delta; r *= 0.5) {
        QueryBox box{p, {}};
        for (Eigen::Index i = 0; i < d; ++i) {
            Vector axis = Vector::Zero(d);
            axis[i] = r;
            box.axes.push_back(std::move(axis));
        }
        if (range_bound(net, box, policy).sign != SignClass::Unknown) return {r, true};
    }
    return {0.0, false};
}

struct WalkOnSpheresOptions {
    double delta = 1e-3;
    double r_max = 1.0;      // first radius tried at every step
    long max_steps = 10000;  // per walk
    CondensationPolicy policy = CondensationPolicy::fixed();
};

struct WalkOnSpheresResult {
    double estimate = 0.0;
    double standard_error = 0.0;
    long n_walks = 0;
    long total_steps = 0;
};

namespace detail {

inline std::uint64_t walk_seed(std::uint64_t seed, std::uint64_t index) { return substream_seed(seed, index); }

} // namespace detail

/// Monte-Carlo estimate of the harmonic function with boundary data g at p.
/// Each walk jumps to a uniform point on the largest certified empty sphere
/// and stops once that radius drops below 2 delta. Every walk has its own
/// generator seeded from (seed, walk index), so results do not depend on
/// scheduling.
inline WalkOnSpheresResult walk_on_spheres(const NetworkSpec& net, const Vector& p,
                                           const std::function<double(const Vector&)>& g, long n_walks,
                                           std::uint64_t seed, const WalkOnSpheresOptions& opts = {}) {
    if (n_walks < 1) throw Error(ErrorCode::InvalidParameter, "n_walks must be >= 1");
    if (eval_scalar(net, p) == 0.0) throw Error(ErrorCode::OnSurface, "query point lies on the surface");
    const Eigen::Index d = p.size();
    std::vector<double> values(static_cast<std::size_t>(n_walks));
    std::vector<long> steps(values.size(), 0);
    parallel_for(values.size(), [&](std::size_t w) {
        std::mt19937_64 rng(detail::walk_seed(seed, w));
        std::normal_distribution<double> gauss(0.0, 1.0);
        Vector x = p;
        for (long s = 0; s < opts.max_steps; ++s) {
            if (eval_scalar(net, x) == 0.0) break;
            const auto er = empty_box_radius(net, x, opts.r_max, opts.policy, opts.delta);
            if (!er.certified || er.radius < 2.0 * opts.delta) break;
            Vector dir(d);
            for (Eigen::Index i = 0; i < d; ++i) dir[i] = gauss(rng);
            x += er.radius * dir.normalized();
            ++steps[w];
        }
        values[w] = g(x);
    });
    WalkOnSpheresResult out;
    out.n_walks = n_walks;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t w = 0; w < values.size(); ++w) {
        sum += values[w];
        out.total_steps += steps[w];
    }
    out.estimate = sum / static_cast<double>(n_walks);
    for (const double v : values) sum2 += (v - out.estimate) * (v - out.estimate);
    if (n_walks > 1) out.standard_error = std::sqrt(sum2 / static_cast<double>(n_walks - 1) / static_cast<double>(n_walks));
    return out;
}

} // namespace spelunk

#endif
