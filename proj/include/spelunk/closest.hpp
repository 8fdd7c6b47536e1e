#ifndef SPELUNK_CLOSEST_HPP
#define SPELUNK_CLOSEST_HPP

#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "spelunk/error.hpp"
#include "spelunk/network.hpp"
#include "spelunk/range_bound.hpp"
#include "spelunk/tree.hpp"

namespace spelunk {

struct ClosestPointResult {
    Vector point;
    double distance = 0.0;  // upper bound on the distance from q to the surface
    long nodes_visited = 0;
};

/// Best-first search for the surface point nearest q. Nodes are popped in
/// order of their distance to q and pruned when certified single-signed or
/// farther than the current bound. A node below extent delta/sqrt(d) whose
/// face samples show both signs contains the surface; its farthest point
/// from q bounds the answer and its center is the reported point.
inline ClosestPointResult closest_point(const NetworkSpec& net, const Vector& q, const AABB& bounds, double delta,
                                        const CondensationPolicy& policy) {
    detail::check_net_bounds(net, bounds);
    if (q.size() != bounds.dim()) throw Error(ErrorCode::DimensionMismatch, "query point dimension mismatch");
    if (!q.allFinite()) throw Error(ErrorCode::InvalidParameter, "query point is not finite");
    if (!(delta > 0.0)) throw Error(ErrorCode::InvalidParameter, "delta must be positive");
    const double stop_extent = delta / std::sqrt(static_cast<double>(bounds.dim()));

    struct Item {
        double dist;
        long order;  // tie break keeps the search deterministic
        AABB box;
    };
    auto later = [](const Item& a, const Item& b) { return a.dist != b.dist ? a.dist > b.dist : a.order > b.order; };
    std::priority_queue<Item, std::vector<Item>, decltype(later)> heap(later);
    long counter = 0;
    heap.push({bounds.min_distance(q), counter++, bounds});

    ClosestPointResult out;
    double best = std::numeric_limits<double>::infinity();
    while (!heap.empty()) {
        Item item = heap.top();
        heap.pop();
        if (item.dist > best) break;
        ++out.nodes_visited;
        if (range_bound(net, item.box.to_query_box(), policy).sign != SignClass::Unknown) continue;
        if (item.box.max_extent() < stop_extent) {
            if (detail::sample_sign(detail::face_center_values(net, item.box)) == 0) {
                const double far = item.box.max_distance(q);
                if (far < best) {
                    best = far;
                    out.point = item.box.center();
                }
            }
            continue;
        }
        auto [a, b] = item.box.split();
        const double da = a.min_distance(q), db = b.min_distance(q);
        if (da <= best) heap.push({da, counter++, std::move(a)});
        if (db <= best) heap.push({db, counter++, std::move(b)});
    }
    if (!std::isfinite(best)) throw Error(ErrorCode::NoSurfaceFound, "no surface found within bounds");
    out.distance = best;
    return out;
}

} // namespace spelunk

#endif
