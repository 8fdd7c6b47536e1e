#ifndef SPELUNK_TREE_HPP
#define SPELUNK_TREE_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "spelunk/error.hpp"
#include "spelunk/network.hpp"
#include "spelunk/parallel.hpp"
#include "spelunk/range_bound.hpp"

namespace spelunk {

struct AABB {
    Vector lo;
    Vector hi;

    Eigen::Index dim() const { return lo.size(); }
    Vector center() const { return 0.5 * (lo + hi); }
    Vector extent() const { return hi - lo; }
    double max_extent() const { return extent().maxCoeff(); }
    double volume() const { return extent().prod(); }
    double diagonal() const { return extent().norm(); }

    bool contains(const Vector& x) const { return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all(); }

    double min_distance(const Vector& q) const {
        return (lo - q).cwiseMax(q - hi).cwiseMax(0.0).norm();
    }
    double max_distance(const Vector& q) const { return (q - lo).cwiseAbs().cwiseMax((q - hi).cwiseAbs()).norm(); }

    QueryBox to_query_box() const { return QueryBox::from_bounds(lo, hi); }

    /// The two halves of a midpoint split along the widest dimension.
    std::pair<AABB, AABB> split() const {
        Eigen::Index axis = 0;
        extent().maxCoeff(&axis);
        const double mid = 0.5 * (lo[axis] + hi[axis]);
        AABB a{lo, hi}, b{lo, hi};
        a.hi[axis] = mid;
        b.lo[axis] = mid;
        return {std::move(a), std::move(b)};
    }

    void validate() const {
        if (lo.size() == 0 || lo.size() != hi.size()) throw Error(ErrorCode::InvalidBounds, "bounds dimension mismatch");
        if (!lo.allFinite() || !hi.allFinite() || !(lo.array() < hi.array()).all()) {
            throw Error(ErrorCode::InvalidBounds, "bounds must be finite with lo < hi");
        }
    }

    static AABB cube(int d, double lo, double hi) { return {Vector::Constant(d, lo), Vector::Constant(d, hi)}; }
};

struct TreeNode {
    AABB box;
    SignClass cls = SignClass::Unknown;
    std::int32_t children[2] = {-1, -1};
    int depth = 0;
    // For UNKNOWN leaves stopped by the size rule: -1 or +1 when every face
    // sample had that sign, 0 when both signs were seen.
    int sampled_sign = 0;

    bool is_leaf() const { return children[0] < 0; }
};

struct TreeMode {
    enum class Kind { ToConvergence, FixedDepth };
    Kind kind = Kind::ToConvergence;
    int depth = 0;

    static TreeMode to_convergence() { return {Kind::ToConvergence, 0}; }
    static TreeMode fixed_depth(int d) { return {Kind::FixedDepth, d}; }
};

inline constexpr int max_tree_depth = 60;

/// Flat k-d tree; node 0 is the root and children follow their parents.
struct SpatialTree {
    std::vector<TreeNode> nodes;
    long range_bound_calls = 0;

    const TreeNode& root() const { return nodes.front(); }

    std::vector<std::int32_t> leaves() const {
        std::vector<std::int32_t> out;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].is_leaf()) out.push_back(static_cast<std::int32_t>(i));
        }
        return out;
    }

    double leaf_volume(SignClass cls) const {
        double v = 0.0;
        for (const auto& n : nodes) {
            if (n.is_leaf() && n.cls == cls) v += n.box.volume();
        }
        return v;
    }
};

namespace detail {

/// Field values at the 2d face centers of a box.
inline std::vector<double> face_center_values(const NetworkSpec& net, const AABB& box) {
    const Eigen::Index d = box.dim();
    Matrix pts(d, 2 * d);
    const Vector c = box.center();
    for (Eigen::Index i = 0; i < d; ++i) {
        pts.col(2 * i) = c;
        pts.col(2 * i)[i] = box.lo[i];
        pts.col(2 * i + 1) = c;
        pts.col(2 * i + 1)[i] = box.hi[i];
    }
    const Vector f = eval_batch(net, pts);
    return {f.data(), f.data() + f.size()};
}

// -1 all negative, +1 all non-negative, 0 mixed. Zero counts as positive.
inline int sample_sign(const std::vector<double>& values) {
    bool neg = false, pos = false;
    for (const double v : values) (v < 0.0 ? neg : pos) = true;
    return neg && pos ? 0 : (neg ? -1 : 1);
}

inline void check_net_bounds(const NetworkSpec& net, const AABB& bounds) {
    bounds.validate();
    if (bounds.dim() != net.input_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "bounds dimension does not match network input");
    }
}

} // namespace detail

/// Branch-and-bound k-d tree over `bounds`, built in breadth-first rounds.
/// Certified nodes stop immediately. UNKNOWN nodes stop at max extent below
/// delta / sqrt(d) (to_convergence) or at the requested depth (fixed_depth).
inline SpatialTree build_spatial_tree(const NetworkSpec& net, const AABB& bounds, double delta,
                                      const CondensationPolicy& policy, TreeMode mode = TreeMode::to_convergence()) {
    detail::check_net_bounds(net, bounds);
    if (!(delta > 0.0)) throw Error(ErrorCode::InvalidParameter, "delta must be positive");
    if (mode.kind == TreeMode::Kind::FixedDepth && (mode.depth < 0 || mode.depth > max_tree_depth)) {
        throw Error(ErrorCode::DepthOverflow, "fixed depth must be in [0, " + std::to_string(max_tree_depth) + "]");
    }
    const double stop_extent = delta / std::sqrt(static_cast<double>(bounds.dim()));

    SpatialTree tree;
    tree.nodes.push_back({bounds});
    std::vector<std::int32_t> frontier = {0};
    std::vector<SignClass> cls;
    std::vector<int> face_sign;
    while (!frontier.empty()) {
        cls.assign(frontier.size(), SignClass::Unknown);
        face_sign.assign(frontier.size(), 0);
        parallel_for(frontier.size(), [&](std::size_t k) {
            const TreeNode& node = tree.nodes[static_cast<std::size_t>(frontier[k])];
            cls[k] = range_bound(net, node.box.to_query_box(), policy).sign;
            if (cls[k] == SignClass::Unknown && mode.kind == TreeMode::Kind::ToConvergence &&
                node.box.max_extent() < stop_extent) {
                face_sign[k] = detail::sample_sign(detail::face_center_values(net, node.box));
            }
        });
        tree.range_bound_calls += static_cast<long>(frontier.size());

        std::vector<std::int32_t> next;
        for (std::size_t k = 0; k < frontier.size(); ++k) {
            const auto id = static_cast<std::size_t>(frontier[k]);
            tree.nodes[id].cls = cls[k];
            if (cls[k] != SignClass::Unknown) continue;
            const bool stop = mode.kind == TreeMode::Kind::FixedDepth ? tree.nodes[id].depth >= mode.depth
                                                                       : tree.nodes[id].box.max_extent() < stop_extent;
            if (stop) {
                tree.nodes[id].sampled_sign = face_sign[k];
                continue;
            }
            auto [a, b] = tree.nodes[id].box.split();
            const int depth = tree.nodes[id].depth + 1;
            const auto first = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes[id].children[0] = first;
            tree.nodes[id].children[1] = first + 1;
            tree.nodes.push_back({std::move(a), SignClass::Unknown, {-1, -1}, depth});
            tree.nodes.push_back({std::move(b), SignClass::Unknown, {-1, -1}, depth});
            next.push_back(first);
            next.push_back(first + 1);
        }
        frontier = std::move(next);
    }
    return tree;
}

} // namespace spelunk

#endif
