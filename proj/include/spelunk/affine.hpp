#ifndef SPELUNK_AFFINE_HPP
#define SPELUNK_AFFINE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "spelunk/error.hpp"
#include "spelunk/interval.hpp"
#include "spelunk/network.hpp"

namespace spelunk {

/// Vector-valued affine form  x0 + X eps + diag(err) eps_inf,  eps in [-1, 1].
/// Column j of `coeffs` holds the coefficients of noise symbol j for every
/// component; `err` collects condensed terms and never cancels.
struct AffineForm {
    Vector base;
    Matrix coeffs;
    Vector err;

    Eigen::Index size() const { return base.size(); }
    Eigen::Index n_terms() const { return coeffs.cols(); }

    static AffineForm constant(const Vector& value) {
        return {value, Matrix(value.size(), 0), Vector::Zero(value.size())};
    }
};

/// Per-component radius sum_j |X_ij| + err_i.
inline Vector radius_of(const AffineForm& a) {
    if (a.n_terms() == 0) return a.err;
    return a.coeffs.cwiseAbs().rowwise().sum() + a.err;
}

inline std::vector<Interval> interval_of(const AffineForm& a) {
    const Vector r = radius_of(a);
    std::vector<Interval> out(static_cast<std::size_t>(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        out[static_cast<std::size_t>(i)] = {a.base[i] - r[i], a.base[i] + r[i]};
    }
    return out;
}

/// Condensation policy applied after every nonlinearity.
struct CondensationPolicy {
    enum class Kind { IntervalOnly, AffineFixed, AffineFull, AffineTruncate };

    Kind kind = Kind::AffineFull;
    int n_keep = 0;

    static CondensationPolicy interval() { return {Kind::IntervalOnly, 0}; }
    static CondensationPolicy fixed() { return {Kind::AffineFixed, 0}; }
    static CondensationPolicy full() { return {Kind::AffineFull, 0}; }
    static CondensationPolicy truncate(int n_keep) {
        if (n_keep < 1) throw Error(ErrorCode::InvalidParameter, "n_keep must be >= 1");
        return {Kind::AffineTruncate, n_keep};
    }

    friend bool operator==(const CondensationPolicy&, const CondensationPolicy&) = default;
};

inline constexpr int default_truncate_keep = 32;

inline std::string to_string(const CondensationPolicy& p) {
    switch (p.kind) {
        case CondensationPolicy::Kind::IntervalOnly: return "interval";
        case CondensationPolicy::Kind::AffineFixed: return "affine-fixed";
        case CondensationPolicy::Kind::AffineFull: return "affine-full";
        case CondensationPolicy::Kind::AffineTruncate: return "affine-truncate:" + std::to_string(p.n_keep);
    }
    return "?";
}

/// Parses "interval", "affine-fixed", "affine-full", "affine-truncate[:N]".
inline CondensationPolicy parse_policy(const std::string& s) {
    if (s == "interval") return CondensationPolicy::interval();
    if (s == "affine-fixed") return CondensationPolicy::fixed();
    if (s == "affine-full") return CondensationPolicy::full();
    const std::string prefix = "affine-truncate";
    if (s == prefix) return CondensationPolicy::truncate(default_truncate_keep);
    if (s.rfind(prefix + ":", 0) == 0) {
        const std::string n = s.substr(prefix.size() + 1);
        std::size_t used = 0;
        int value = 0;
        try {
            value = std::stoi(n, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != n.size()) throw Error(ErrorCode::InvalidParameter, "bad n_keep in '" + s + "'");
        return CondensationPolicy::truncate(value);
    }
    throw Error(ErrorCode::InvalidParameter, "unknown policy '" + s + "'");
}

/// Linear model alpha * x + beta of an activation over an input range, with
/// maximum absolute error gamma.
struct Linearization {
    double alpha = 1.0;
    double beta = 0.0;
    double gamma = 0.0;
};

namespace detail {

inline double activation_derivative(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::ReLU: return x > 0.0 ? 1.0 : 0.0;
        case ActivationKind::ELU: return x > 0.0 ? 1.0 : std::exp(x);
        case ActivationKind::Sin: return std::cos(x);
        case ActivationKind::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case ActivationKind::Identity: return 1.0;
    }
    return 1.0;
}

// Points where d/dx [h(x) - alpha x] can vanish or h has a kink. Together with
// the interval endpoints they contain the extrema of h(x) - alpha x.
inline void critical_points(ActivationKind kind, double alpha, double lo, double hi,
                            std::vector<double>& out) {
    auto push = [&](double x) {
        if (x > lo && x < hi) out.push_back(x);
    };
    switch (kind) {
        case ActivationKind::ReLU:
            push(0.0);
            break;
        case ActivationKind::ELU:
            push(0.0);
            if (alpha > 0.0 && alpha < 1.0) push(std::log(alpha));
            break;
        case ActivationKind::Tanh:
            if (alpha > 0.0 && alpha < 1.0) {
                const double x = std::atanh(std::sqrt(1.0 - alpha));
                push(x);
                push(-x);
            }
            break;
        case ActivationKind::Sin: {
            // cos x = alpha at x = +-acos(alpha) + 2 pi k. Along either family
            // h(x) - alpha x changes by -2 pi k alpha, so only the first and last
            // member inside [lo, hi] can be extremal.
            constexpr double two_pi = 2.0 * std::numbers::pi;
            const double e = std::acos(std::clamp(alpha, -1.0, 1.0));
            for (const double phase : {e, -e}) {
                const double first = phase + two_pi * std::ceil((lo - phase) / two_pi);
                const double last = phase + two_pi * std::floor((hi - phase) / two_pi);
                push(std::clamp(first, lo, hi));
                push(std::clamp(last, lo, hi));
            }
            break;
        }
        case ActivationKind::Identity:
            break;
    }
}

} // namespace detail

/// Chebyshev-style linearization of `kind` on [lo, hi]. The slope is the
/// secant (ReLU, ELU, Tanh) or the midpoint of the derivative range (Sin);
/// beta and gamma come from the exact extrema of h(x) - alpha x.
inline Linearization linearize(ActivationKind kind, double lo, double hi) {
    if (kind == ActivationKind::Identity) return {1.0, 0.0, 0.0};
    if (!(hi > lo)) {
        const double a = detail::activation_derivative(kind, lo);
        return {a, activate(kind, lo) - a * lo, 0.0};
    }
    if (kind == ActivationKind::ReLU || kind == ActivationKind::ELU) {
        if (lo >= 0.0) return {1.0, 0.0, 0.0};
        if (kind == ActivationKind::ReLU && hi <= 0.0) return {0.0, 0.0, 0.0};
    }

    double alpha = 0.0;
    if (kind == ActivationKind::Sin) {
        const Interval s = cos_range({lo, hi});
        alpha = 0.5 * (s.lo + s.hi);
    } else {
        alpha = (activate(kind, hi) - activate(kind, lo)) / (hi - lo);
    }

    thread_local std::vector<double> candidates;
    candidates.clear();
    candidates.push_back(lo);
    candidates.push_back(hi);
    detail::critical_points(kind, alpha, lo, hi, candidates);

    double r_max = -std::numeric_limits<double>::infinity();
    double r_min = std::numeric_limits<double>::infinity();
    for (const double x : candidates) {
        const double r = activate(kind, x) - alpha * x;
        r_max = std::max(r_max, r);
        r_min = std::min(r_min, r);
    }
    return {alpha, 0.5 * (r_max + r_min), 0.5 * (r_max - r_min)};
}

/// z = W x + b. Introduces no new error terms.
inline AffineForm affine_linear(const AffineForm& a, const DenseLayer& layer, const Matrix& abs_weights) {
    if (layer.in_dim() != a.size()) {
        throw Error(ErrorCode::DimensionMismatch, "dense layer expects " + std::to_string(layer.in_dim()) +
                                                      " inputs, form has " + std::to_string(a.size()));
    }
    AffineForm out;
    out.base.noalias() = layer.weights * a.base;
    out.base += layer.bias;
    if (a.n_terms() > 0) {
        out.coeffs.noalias() = layer.weights * a.coeffs;
    } else {
        out.coeffs.resize(layer.out_dim(), 0);
    }
    out.err.noalias() = abs_weights * a.err;
    return out;
}

inline AffineForm affine_linear(const AffineForm& a, const DenseLayer& layer) {
    return affine_linear(a, layer, layer.weights.cwiseAbs());
}

/// Removes the columns in `indices`, folding their magnitudes into err.
/// interval_of is unchanged.
inline AffineForm condense(const AffineForm& a, std::span<const Eigen::Index> indices) {
    std::vector<char> drop(static_cast<std::size_t>(a.n_terms()), 0);
    for (const auto j : indices) {
        if (j < 0 || j >= a.n_terms()) {
            throw Error(ErrorCode::IndexOutOfRange, "column " + std::to_string(j) + " of " +
                                                        std::to_string(a.n_terms()));
        }
        drop[static_cast<std::size_t>(j)] = 1;
    }
    AffineForm out;
    out.base = a.base;
    out.err = a.err;
    const auto kept = static_cast<Eigen::Index>(std::count(drop.begin(), drop.end(), 0));
    out.coeffs.resize(a.size(), kept);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < a.n_terms(); ++j) {
        if (drop[static_cast<std::size_t>(j)]) {
            out.err += a.coeffs.col(j).cwiseAbs();
        } else {
            out.coeffs.col(k++) = a.coeffs.col(j);
        }
    }
    return out;
}

/// Keeps the n_keep columns with the largest L1 norm (ties to the lower
/// index, original order preserved) and condenses the rest.
inline AffineForm truncate(const AffineForm& a, int n_keep) {
    if (n_keep < 1) throw Error(ErrorCode::InvalidParameter, "n_keep must be >= 1");
    const Eigen::Index n = a.n_terms();
    if (n <= n_keep) return a;
    const Vector norms = a.coeffs.cwiseAbs().colwise().sum().transpose();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return norms[x] > norms[y]; });
    std::vector<Eigen::Index> dropped(order.begin() + n_keep, order.end());
    return condense(a, dropped);
}

namespace detail {

// Appends the nonzero entries of gamma as fresh diagonal noise columns.
inline void append_error_columns(AffineForm& a, const Vector& gamma) {
    Eigen::Index fresh = 0;
    for (Eigen::Index i = 0; i < gamma.size(); ++i) fresh += gamma[i] != 0.0 ? 1 : 0;
    if (fresh == 0) return;
    const Eigen::Index old = a.n_terms();
    a.coeffs.conservativeResize(Eigen::NoChange, old + fresh);
    a.coeffs.rightCols(fresh).setZero();
    Eigen::Index k = old;
    for (Eigen::Index i = 0; i < gamma.size(); ++i) {
        if (gamma[i] != 0.0) a.coeffs(i, k++) = gamma[i];
    }
}

} // namespace detail

/// Pushes the form through an elementwise activation. Each component gets its
/// own linearization from its current range; the approximation error becomes
/// a fresh noise symbol (full, truncate) or is folded into err (fixed).
inline AffineForm affine_nonlinear(const AffineForm& a, ActivationKind kind, const CondensationPolicy& policy) {
    if (kind == ActivationKind::Identity) return a;
    const Vector r = radius_of(a);
    AffineForm out;
    out.base.resize(a.size());
    out.err.resize(a.size());
    out.coeffs = a.coeffs;
    Vector gamma(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const Linearization lin = linearize(kind, a.base[i] - r[i], a.base[i] + r[i]);
        out.base[i] = lin.alpha * a.base[i] + lin.beta;
        out.coeffs.row(i) *= lin.alpha;
        out.err[i] = std::abs(lin.alpha) * a.err[i];
        gamma[i] = lin.gamma;
    }
    switch (policy.kind) {
        case CondensationPolicy::Kind::IntervalOnly:
        case CondensationPolicy::Kind::AffineFixed:
            out.err += gamma;
            break;
        case CondensationPolicy::Kind::AffineFull:
            detail::append_error_columns(out, gamma);
            break;
        case CondensationPolicy::Kind::AffineTruncate:
            detail::append_error_columns(out, gamma);
            if (out.n_terms() > policy.n_keep) out = truncate(out, policy.n_keep);
            break;
    }
    return out;
}

} // namespace spelunk

#endif
