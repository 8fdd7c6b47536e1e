#ifndef SPELUNK_RANGE_BOUND_HPP
#define SPELUNK_RANGE_BOUND_HPP

#include <cmath>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spelunk/affine.hpp"
#include "spelunk/error.hpp"
#include "spelunk/interval.hpp"
#include "spelunk/network.hpp"

namespace spelunk {

enum class SignClass { Positive, Negative, Unknown };

inline std::string_view to_string(SignClass c) {
    switch (c) {
        case SignClass::Positive: return "POSITIVE";
        case SignClass::Negative: return "NEGATIVE";
        case SignClass::Unknown: return "UNKNOWN";
    }
    return "?";
}

inline SignClass classify(const Interval& y) {
    if (y.lo > 0.0) return SignClass::Positive;
    if (y.hi < 0.0) return SignClass::Negative;
    return SignClass::Unknown;
}

/// An s-dimensional box in R^d: center plus s mutually orthogonal half-axes.
struct QueryBox {
    Vector center;
    std::vector<Vector> axes;

    /// Axis-aligned box with the given corners (one axis per dimension).
    static QueryBox from_bounds(const Vector& lo, const Vector& hi) {
        QueryBox box;
        box.center = 0.5 * (lo + hi);
        const Vector half = 0.5 * (hi - lo);
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            Vector axis = Vector::Zero(lo.size());
            axis[i] = half[i];
            box.axes.push_back(std::move(axis));
        }
        return box;
    }

    /// Segment from center - half_axis to center + half_axis.
    static QueryBox segment(const Vector& center, const Vector& half_axis) {
        return QueryBox{center, {half_axis}};
    }
};

struct RangeResult {
    Interval interval;
    SignClass sign = SignClass::Unknown;
};

namespace detail {

inline void check_box(const NetworkSpec& net, const QueryBox& box) {
    const Eigen::Index d = net.input_dim();
    if (box.center.size() != d) {
        throw Error(ErrorCode::DimensionMismatch, "box center has dimension " + std::to_string(box.center.size()) +
                                                      ", network expects " + std::to_string(d));
    }
    if (static_cast<Eigen::Index>(box.axes.size()) > d) {
        throw Error(ErrorCode::DimensionMismatch, "more box axes than input dimensions");
    }
    for (const auto& v : box.axes) {
        if (v.size() != d) throw Error(ErrorCode::DimensionMismatch, "box axis dimension mismatch");
    }
}

inline void check_orthogonal(const QueryBox& box) {
    constexpr double tol = 1e-6;
    for (std::size_t i = 0; i < box.axes.size(); ++i) {
        const double ni = box.axes[i].norm();
        if (!(ni > 0.0) || !std::isfinite(ni)) throw Error(ErrorCode::NonOrthogonalAxes, "zero or non-finite axis");
        for (std::size_t j = 0; j < i; ++j) {
            const double dot = std::abs(box.axes[i].dot(box.axes[j]));
            if (dot > tol * ni * box.axes[j].norm()) {
                throw Error(ErrorCode::NonOrthogonalAxes, "axes " + std::to_string(j) + " and " +
                                                              std::to_string(i) + " are not orthogonal");
            }
        }
    }
}

} // namespace detail

/// Affine form of a box: base = center, one noise column per axis.
inline AffineForm box_to_affine(const QueryBox& box) {
    detail::check_orthogonal(box);
    const Eigen::Index d = box.center.size();
    AffineForm form;
    form.base = box.center;
    form.coeffs.resize(d, static_cast<Eigen::Index>(box.axes.size()));
    for (std::size_t i = 0; i < box.axes.size(); ++i) {
        if (box.axes[i].size() != d) throw Error(ErrorCode::DimensionMismatch, "box axis dimension mismatch");
        form.coeffs.col(static_cast<Eigen::Index>(i)) = box.axes[i];
    }
    form.err = Vector::Zero(d);
    return form;
}

/// Runs the affine form through every layer under `policy`.
inline AffineForm propagate_affine(const NetworkSpec& net, AffineForm form, const CondensationPolicy& policy) {
    const auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (const auto* dense = std::get_if<DenseLayer>(&layers[i])) {
            form = affine_linear(form, *dense, net.abs_weights(i));
        } else {
            form = affine_nonlinear(form, std::get<ActivationKind>(layers[i]), policy);
        }
    }
    return form;
}

inline Interval interval_activation(ActivationKind kind, Interval x) {
    switch (kind) {
        case ActivationKind::Sin: return sin_range(x);
        default: return {activate(kind, x.lo), activate(kind, x.hi)};
    }
}

/// Plain interval propagation over the box's axis-aligned hull. Dense layers
/// use center-radius form: c' = W c + b, r' = |W| r.
inline Interval interval_forward(const NetworkSpec& net, const QueryBox& box) {
    detail::check_box(net, box);
    Vector c = box.center;
    Vector r = Vector::Zero(c.size());
    for (const auto& v : box.axes) r += v.cwiseAbs();
    const auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (const auto* dense = std::get_if<DenseLayer>(&layers[i])) {
            Vector next = dense->weights * c + dense->bias;
            r = net.abs_weights(i) * r;
            c = std::move(next);
        } else {
            const auto kind = std::get<ActivationKind>(layers[i]);
            if (kind == ActivationKind::Identity) continue;
            for (Eigen::Index k = 0; k < c.size(); ++k) {
                const Interval y = interval_activation(kind, {c[k] - r[k], c[k] + r[k]});
                c[k] = y.center();
                r[k] = 0.5 * y.width();
            }
        }
    }
    return {c[0] - r[0], c[0] + r[0]};
}

/// Bounds f over the box and classifies its sign.
inline RangeResult range_bound(const NetworkSpec& net, const QueryBox& box, const CondensationPolicy& policy) {
    detail::check_box(net, box);
    Interval y;
    if (policy.kind == CondensationPolicy::Kind::IntervalOnly) {
        detail::check_orthogonal(box);
        y = interval_forward(net, box);
    } else {
        const AffineForm out = propagate_affine(net, box_to_affine(box), policy);
        y = interval_of(out)[0];
    }
    return {y, classify(y)};
}

} // namespace spelunk

#endif
