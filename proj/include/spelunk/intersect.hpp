#ifndef SPELUNK_INTERSECT_HPP
#define SPELUNK_INTERSECT_HPP

#include <cmath>
#include <string_view>
#include <vector>

#include "spelunk/error.hpp"
#include "spelunk/network.hpp"
#include "spelunk/parallel.hpp"
#include "spelunk/range_bound.hpp"
#include "spelunk/tree.hpp"

namespace spelunk {

struct IntersectionResult {
    enum class Kind { Intersecting, Disjoint, InconclusiveAtDelta };
    Kind kind = Kind::Disjoint;
    AABB witness;                 // set when Intersecting
    long inconclusive_count = 0;  // surviving delta-sized nodes
    std::vector<AABB> nodes;      // the first max_reported of them
    long range_bound_calls = 0;

    static constexpr std::size_t max_reported = 4096;
};

inline std::string_view to_string(IntersectionResult::Kind k) {
    switch (k) {
        case IntersectionResult::Kind::Intersecting: return "intersecting";
        case IntersectionResult::Kind::Disjoint: return "disjoint";
        case IntersectionResult::Kind::InconclusiveAtDelta: return "inconclusive";
    }
    return "?";
}

/// Do the solids {f_a < 0} and {f_b < 0} overlap inside `bounds`? Nodes where
/// either field is certified positive are pruned; a node where both are
/// certified negative is a witness. Refinement stops at extent delta/sqrt(d).
inline IntersectionResult test_intersection(const NetworkSpec& net_a, const NetworkSpec& net_b, const AABB& bounds,
                                            double delta, const CondensationPolicy& policy) {
    detail::check_net_bounds(net_a, bounds);
    detail::check_net_bounds(net_b, bounds);
    if (!(delta > 0.0)) throw Error(ErrorCode::InvalidParameter, "delta must be positive");
    const double stop_extent = delta / std::sqrt(static_cast<double>(bounds.dim()));

    IntersectionResult out;
    std::vector<AABB> frontier = {bounds};
    while (!frontier.empty()) {
        std::vector<char> state(frontier.size(), 0);  // 0 prune, 1 both negative, 2 undecided
        parallel_for(frontier.size(), [&](std::size_t k) {
            const auto box = frontier[k].to_query_box();
            const auto a = range_bound(net_a, box, policy).sign;
            if (a == SignClass::Positive) return;
            const auto b = range_bound(net_b, box, policy).sign;
            if (b == SignClass::Positive) return;
            state[k] = (a == SignClass::Negative && b == SignClass::Negative) ? 1 : 2;
        });
        out.range_bound_calls += 2 * static_cast<long>(frontier.size());
        for (std::size_t k = 0; k < frontier.size(); ++k) {
            if (state[k] == 1) {
                out.kind = IntersectionResult::Kind::Intersecting;
                out.witness = frontier[k];
                out.nodes.clear();
                out.inconclusive_count = 0;
                return out;
            }
        }
        std::vector<AABB> next;
        for (std::size_t k = 0; k < frontier.size(); ++k) {
            if (state[k] != 2) continue;
            if (frontier[k].max_extent() < stop_extent) {
                ++out.inconclusive_count;
                if (out.nodes.size() < IntersectionResult::max_reported) out.nodes.push_back(frontier[k]);
                continue;
            }
            auto [a, b] = frontier[k].split();
            next.push_back(std::move(a));
            next.push_back(std::move(b));
        }
        frontier = std::move(next);
    }
    out.kind = out.inconclusive_count > 0 ? IntersectionResult::Kind::InconclusiveAtDelta
                                          : IntersectionResult::Kind::Disjoint;
    return out;
}

} // namespace spelunk

#endif
