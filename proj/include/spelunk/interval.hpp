#ifndef SPELUNK_INTERVAL_HPP
#define SPELUNK_INTERVAL_HPP

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spelunk {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    double center() const { return 0.5 * (lo + hi); }
    bool contains(double x, double slack = 0.0) const { return x >= lo - slack && x <= hi + slack; }
    bool contains(const Interval& other) const { return other.lo >= lo && other.hi <= hi; }
    bool intersects(const Interval& other) const { return lo <= other.hi && other.lo <= hi; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

inline Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }

inline Interval operator*(double s, Interval a) {
    const double p = s * a.lo;
    const double q = s * a.hi;
    return {std::min(p, q), std::max(p, q)};
}

namespace detail {

// True if phase + k * period lies in [lo, hi] for some integer k.
inline bool hits_periodic_point(double lo, double hi, double phase, double period) {
    const double k = std::ceil((lo - phase) / period);
    return phase + k * period <= hi;
}

} // namespace detail

/// Exact range of sin over [lo, hi], locating interior extrema modulo 2*pi.
inline Interval sin_range(Interval x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    constexpr double half_pi = 0.5 * std::numbers::pi;
    const double a = std::sin(x.lo);
    const double b = std::sin(x.hi);
    Interval out{std::min(a, b), std::max(a, b)};
    if (x.width() >= two_pi) return {-1.0, 1.0};
    if (detail::hits_periodic_point(x.lo, x.hi, half_pi, two_pi)) out.hi = 1.0;
    if (detail::hits_periodic_point(x.lo, x.hi, -half_pi, two_pi)) out.lo = -1.0;
    return out;
}

inline Interval cos_range(Interval x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double a = std::cos(x.lo);
    const double b = std::cos(x.hi);
    Interval out{std::min(a, b), std::max(a, b)};
    if (x.width() >= two_pi) return {-1.0, 1.0};
    if (detail::hits_periodic_point(x.lo, x.hi, 0.0, two_pi)) out.hi = 1.0;
    if (detail::hits_periodic_point(x.lo, x.hi, std::numbers::pi, two_pi)) out.lo = -1.0;
    return out;
}

} // namespace spelunk

#endif
