#ifndef SPELUNK_BULK_HPP
#define SPELUNK_BULK_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "spelunk/empty_space.hpp"
#include "spelunk/error.hpp"
#include "spelunk/network.hpp"
#include "spelunk/parallel.hpp"
#include "spelunk/tree.hpp"

namespace spelunk {

struct BulkProperties {
    double mass = 0.0;
    Vec3 centroid = Vec3::Zero();
    Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();  // about the centroid, unit density
    double mass_error_bound = 0.0;
    long range_bound_calls = 0;
    long evaluations = 0;
    long unknown_leaves = 0;
};

namespace detail {

struct Moments {
    double m0 = 0.0;
    Vec3 m1 = Vec3::Zero();
    Eigen::Matrix3d m2 = Eigen::Matrix3d::Zero();

    void add_point(const Vec3& x, double w) {
        m0 += w;
        m1 += w * x;
        m2 += w * x * x.transpose();
    }
    // Exact moments of a solid box.
    void add_box(const AABB& b) {
        const double v = b.volume();
        const Vec3 c = b.center();
        const Vec3 e = b.extent();
        m0 += v;
        m1 += v * c;
        Eigen::Matrix3d s = c * c.transpose();
        for (int i = 0; i < 3; ++i) s(i, i) += e[i] * e[i] / 12.0;
        m2 += v * s;
    }
    void add(const Moments& o) {
        m0 += o.m0;
        m1 += o.m1;
        m2 += o.m2;
    }
};

} // namespace detail

/// Mass, centroid and inertia of the solid {f < 0} within `bounds`. Certified
/// interior leaves are integrated exactly; UNKNOWN leaves use jittered
/// stratified sampling on a k^3 grid (k^3 closest to samples_per_unknown).
/// The UNKNOWN volume bounds the mass error.
inline BulkProperties bulk_properties(const NetworkSpec& net, const AABB& bounds, int depth, int samples_per_unknown,
                                      std::uint64_t seed, const CondensationPolicy& policy) {
    detail::check_net_bounds(net, bounds);
    if (net.input_dim() != 3) throw Error(ErrorCode::DimensionMismatch, "bulk properties need a 3d network");
    if (depth < 1) throw Error(ErrorCode::InvalidParameter, "depth must be >= 1");
    if (samples_per_unknown < 1) throw Error(ErrorCode::InvalidParameter, "samples_per_unknown must be >= 1");
    const int k = std::max(1, static_cast<int>(std::lround(std::cbrt(static_cast<double>(samples_per_unknown)))));
    const int n = k * k * k;

    const auto tree = build_spatial_tree(net, bounds, 1.0, policy, TreeMode::fixed_depth(depth));
    const auto leaves = tree.leaves();
    std::vector<detail::Moments> parts(leaves.size());
    parallel_for(leaves.size(), [&](std::size_t idx) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(leaves[idx])];
        if (node.cls == SignClass::Negative) {
            parts[idx].add_box(node.box);
        } else if (node.cls == SignClass::Unknown) {
            std::mt19937_64 rng(detail::walk_seed(seed, static_cast<std::uint64_t>(leaves[idx])));
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const Vec3 lo(node.box.lo), e(node.box.extent());
            Matrix pts(3, n);
            int c = 0;
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b)
                    for (int g = 0; g < k; ++g, ++c) {
                        pts.col(c) = lo + Vec3((a + u(rng)) / k * e.x(), (b + u(rng)) / k * e.y(), (g + u(rng)) / k * e.z());
                    }
            const Vector f = eval_batch(net, pts);
            const double w = node.box.volume() / n;
            for (int s = 0; s < n; ++s) {
                if (f[s] < 0.0) parts[idx].add_point(pts.col(s), w);
            }
        }
    });

    detail::Moments total;
    BulkProperties out;
    for (std::size_t idx = 0; idx < leaves.size(); ++idx) {
        total.add(parts[idx]);
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(leaves[idx])];
        if (node.cls == SignClass::Unknown) {
            out.mass_error_bound += node.box.volume();
            out.evaluations += n;
            ++out.unknown_leaves;
        }
    }
    out.range_bound_calls = tree.range_bound_calls;
    out.mass = total.m0;
    if (total.m0 > 0.0) {
        out.centroid = total.m1 / total.m0;
        const Eigen::Matrix3d central = total.m2 - total.m0 * out.centroid * out.centroid.transpose();
        out.inertia = central.trace() * Eigen::Matrix3d::Identity() - central;
        out.inertia = 0.5 * (out.inertia + out.inertia.transpose()).eval();
    }
    return out;
}

} // namespace spelunk

#endif
