#ifndef SPELUNK_SAMPLING_HPP
#define SPELUNK_SAMPLING_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "spelunk/error.hpp"
#include "spelunk/network.hpp"
#include "spelunk/parallel.hpp"
#include "spelunk/range_bound.hpp"
#include "spelunk/tree.hpp"

namespace spelunk {

struct SampleResult {
    std::vector<Vector> points;
    long evaluations = 0;        // pointwise f evaluations spent on rejection
    long range_bound_calls = 0;  // tree construction cost
    std::vector<AABB> kept_nodes;

    double kept_volume() const {
        double v = 0.0;
        for (const auto& b : kept_nodes) v += b.volume();
        return v;
    }
};

namespace detail {

// Rejection sampling in batches from volume-weighted boxes until n points
// pass |f| < band or the evaluation budget runs out.
inline void reject_sample(const NetworkSpec& net, const std::vector<AABB>& boxes, long n_samples, double band,
                          std::uint64_t seed, long budget, SampleResult& out) {
    if (boxes.empty()) return;
    std::vector<double> weights;
    for (const auto& b : boxes) weights.push_back(b.volume());
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::mt19937_64 rng(seed);
    const Eigen::Index d = boxes.front().dim();
    const long batch = 4096;
    Matrix pts(d, batch);
    while (static_cast<long>(out.points.size()) < n_samples && out.evaluations < budget) {
        for (long k = 0; k < batch; ++k) {
            const AABB& b = boxes[pick(rng)];
            for (Eigen::Index i = 0; i < d; ++i) pts(i, k) = b.lo[i] + u(rng) * (b.hi[i] - b.lo[i]);
        }
        const Vector f = eval_batch(net, pts);
        out.evaluations += batch;
        for (long k = 0; k < batch && static_cast<long>(out.points.size()) < n_samples; ++k) {
            if (std::abs(f[k]) < band) out.points.emplace_back(pts.col(k));
        }
    }
}

} // namespace detail

/// Uniform samples from the band |f| < band inside `bounds`. A fixed-depth
/// tree first discards nodes whose bound is entirely above band or below
/// -band; rejection sampling then runs only inside the surviving nodes.
inline SampleResult sample_near_surface(const NetworkSpec& net, const AABB& bounds, long n_samples, double band,
                                        int depth, const CondensationPolicy& policy, std::uint64_t seed) {
    detail::check_net_bounds(net, bounds);
    if (!(band > 0.0)) throw Error(ErrorCode::InvalidParameter, "band must be positive");
    if (depth < 1 || depth > max_tree_depth) throw Error(ErrorCode::DepthOverflow, "depth out of range");
    if (n_samples < 0) throw Error(ErrorCode::InvalidParameter, "n_samples must be >= 0");

    SampleResult out;
    std::vector<AABB> frontier = {bounds};
    for (int level = 0; level <= depth && !frontier.empty(); ++level) {
        std::vector<char> keep(frontier.size(), 0);
        parallel_for(frontier.size(), [&](std::size_t k) {
            const Interval y = range_bound(net, frontier[k].to_query_box(), policy).interval;
            keep[k] = y.lo < band && y.hi > -band;
        });
        out.range_bound_calls += static_cast<long>(frontier.size());
        std::vector<AABB> next;
        for (std::size_t k = 0; k < frontier.size(); ++k) {
            if (!keep[k]) continue;
            if (level == depth) {
                out.kept_nodes.push_back(std::move(frontier[k]));
            } else {
                auto [a, b] = frontier[k].split();
                next.push_back(std::move(a));
                next.push_back(std::move(b));
            }
        }
        frontier = std::move(next);
    }
    const long budget = std::max<long>(1000000, 1000 * n_samples);
    detail::reject_sample(net, out.kept_nodes, n_samples, band, seed, budget, out);
    if (n_samples > 0 && out.points.empty()) throw Error(ErrorCode::EmptyBand, "no point found within the band");
    return out;
}

/// Baseline: rejection sampling over the whole domain.
inline SampleResult sample_near_surface_naive(const NetworkSpec& net, const AABB& bounds, long n_samples, double band,
                                              std::uint64_t seed, long budget = 1L << 40) {
    detail::check_net_bounds(net, bounds);
    SampleResult out;
    detail::reject_sample(net, {bounds}, n_samples, band, seed, budget, out);
    return out;
}

} // namespace spelunk

#endif
