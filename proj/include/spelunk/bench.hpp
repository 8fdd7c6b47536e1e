#ifndef SPELUNK_BENCH_HPP
#define SPELUNK_BENCH_HPP

// Range-analysis variant benchmark and soundness fuzzer.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spelunk/camera.hpp"
#include "spelunk/error.hpp"
#include "spelunk/network.hpp"
#include "spelunk/parallel.hpp"
#include "spelunk/range_bound.hpp"
#include "spelunk/ray.hpp"

namespace spelunk {

inline std::vector<CondensationPolicy> all_policies() {
    return {CondensationPolicy::interval(), CondensationPolicy::fixed(), CondensationPolicy::full(),
            CondensationPolicy::truncate(default_truncate_keep)};
}

struct BenchOptions {
    int n_regions = 10000;
    std::uint64_t seed = 0;
    std::vector<CondensationPolicy> variants = all_policies();
    int grid_size = 32;            // log-spaced region sizes
    double min_size = 1e-5;
    double max_size = 2.0;
    int timing_runs = 5;           // fastest-of, after one warm-up
    int timing_regions = 1000;     // regions per timing run
    int raycast_res = 256;         // 0 skips the raycast column
};

struct BenchRow {
    std::string variant;
    int dim = 1;
    double time_ratio = 0.0;       // bound time over scalar evaluation time
    double region_size = 0.0;      // length in 1d, volume in 3d
    double raycast_seconds = 0.0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

/// Regions of unit size; scaled by the probed size before use.
struct UnitRegions {
    std::vector<Vector> centers;
    std::vector<Vector> directions;  // 1d only
};

inline UnitRegions make_unit_regions(int d, int n, std::uint64_t seed, int dim) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    UnitRegions out;
    for (int i = 0; i < n; ++i) {
        Vector c(d);
        for (int k = 0; k < d; ++k) c[k] = u(rng);
        out.centers.push_back(std::move(c));
        if (dim == 1) {
            Vector v(d);
            do {
                for (int k = 0; k < d; ++k) v[k] = g(rng);
            } while (v.norm() < 1e-12);
            out.directions.push_back(v.normalized());
        }
    }
    return out;
}

/// 1d: segment of length s along a random direction. 3d: axis-aligned cube
/// of side s.
inline QueryBox scaled_region(const UnitRegions& r, std::size_t i, double s) {
    if (!r.directions.empty()) return QueryBox::segment(r.centers[i], 0.5 * s * r.directions[i]);
    const Vector half = Vector::Constant(r.centers[i].size(), 0.5 * s);
    return QueryBox::from_bounds(r.centers[i] - half, r.centers[i] + half);
}

inline double certified_fraction(const NetworkSpec& net, const UnitRegions& r, double s,
                                 const CondensationPolicy& policy) {
    std::vector<char> ok(r.centers.size(), 0);
    parallel_for(r.centers.size(), [&](std::size_t i) {
        ok[i] = range_bound(net, scaled_region(r, i, s), policy).sign != SignClass::Unknown;
    });
    long n = 0;
    for (const char c : ok) n += c;
    return static_cast<double>(n) / static_cast<double>(r.centers.size());
}

/// Largest grid size whose certified fraction is at least one half, by
/// binary search (the fraction falls as regions grow). Returns 0 when even the
/// smallest size fails.
inline double threshold_size(const NetworkSpec& net, const UnitRegions& r, const CondensationPolicy& policy,
                             const std::vector<double>& grid) {
    int lo = -1, hi = static_cast<int>(grid.size());  // f(lo) >= 0.5 > f(hi)
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (certified_fraction(net, r, grid[mid], policy) >= 0.5) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo < 0 ? 0.0 : grid[lo];
}

template <typename F>
double fastest_seconds(int runs, F&& body) {
    body();  // warm-up
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < runs; ++k) {
        const auto t0 = Clock::now();
        body();
        best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return best;
}

// Keeps the optimizer from discarding timed work.
inline volatile double bench_sink = 0.0;

inline Camera bench_camera(int res) {
    Camera cam;
    cam.position = Vec3(0.55, 0.45, 0.7).normalized() * 2.6;
    cam.look_at = Vec3::Zero();
    cam.vertical_fov = 45.0;
    cam.width = cam.height = res;
    return cam;
}

inline double raycast_seconds(const NetworkSpec& net, const CondensationPolicy& policy, int res) {
    const Camera cam = bench_camera(res);
    std::vector<Ray> rays;
    rays.reserve(static_cast<std::size_t>(res) * res);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) rays.push_back(cam.ray(x, y));
    const RayCastParams params = RayCastParams{}.with_t_max(6.0);
    const auto t0 = Clock::now();
    const auto hits = cast_rays(net, rays, params, policy);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    bench_sink = bench_sink + static_cast<double>(hits.size());
    return secs;
}

} // namespace detail

/// Log-spaced region sizes from min_size to max_size.
inline std::vector<double> bench_size_grid(const BenchOptions& o) {
    std::vector<double> grid;
    for (int i = 0; i < o.grid_size; ++i) {
        const double a = o.grid_size == 1 ? 0.0 : static_cast<double>(i) / (o.grid_size - 1);
        grid.push_back(std::exp(std::log(o.min_size) + a * (std::log(o.max_size) - std::log(o.min_size))));
    }
    return grid;
}

/// One row per (variant, dim), each value averaged over the networks.
inline std::vector<BenchRow> bench_variants(const std::vector<NetworkSpec>& nets, const BenchOptions& o) {
    if (nets.empty()) throw Error(ErrorCode::NoNetworks, "benchmark needs at least one network");
    if (o.n_regions < 1 || o.timing_regions < 1 || o.timing_runs < 1 || o.grid_size < 1 || !(o.min_size > 0.0) ||
        !(o.max_size > o.min_size) || o.raycast_res < 0 || o.variants.empty()) {
        throw Error(ErrorCode::InvalidParameter, "invalid benchmark options");
    }
    for (const auto& net : nets) {
        if (net.input_dim() != 3) throw Error(ErrorCode::DimensionMismatch, "benchmark networks must be 3d");
    }
    const auto grid = bench_size_grid(o);
    std::vector<BenchRow> rows;
    for (const auto& v : o.variants) {
        for (const int dim : {1, 3}) rows.push_back({to_string(v), dim, 0.0, 0.0, 0.0});
    }
    const double n_nets = static_cast<double>(nets.size());
    for (std::size_t k = 0; k < nets.size(); ++k) {
        const auto& net = nets[k];
        for (const int dim : {1, 3}) {
            const auto regions =
                detail::make_unit_regions(3, o.n_regions, detail::substream_seed(o.seed, 2 * k + (dim == 3)), dim);
            const auto n_time = static_cast<std::size_t>(std::min(o.timing_regions, o.n_regions));
            const double scalar = detail::fastest_seconds(o.timing_runs, [&] {
                double acc = 0.0;
                for (std::size_t i = 0; i < n_time; ++i) acc += eval_scalar(net, regions.centers[i]);
                detail::bench_sink = acc;
            });
            for (std::size_t vi = 0; vi < o.variants.size(); ++vi) {
                const auto& policy = o.variants[vi];
                BenchRow& row = rows[2 * vi + (dim == 3)];
                const double s = detail::threshold_size(net, regions, policy, grid);
                row.region_size += (dim == 1 ? s : s * s * s) / n_nets;
                // time at the variant's own threshold, where it does useful work
                const double s_time = s > 0.0 ? s : grid.front();
                const double bound = detail::fastest_seconds(o.timing_runs, [&] {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n_time; ++i) {
                        acc += range_bound(net, detail::scaled_region(regions, i, s_time), policy).interval.hi;
                    }
                    detail::bench_sink = acc;
                });
                row.time_ratio += bound / std::max(scalar, 1e-12) / n_nets;
            }
        }
        if (o.raycast_res > 0) {
            for (std::size_t vi = 0; vi < o.variants.size(); ++vi) {
                const double secs = detail::raycast_seconds(net, o.variants[vi], o.raycast_res) / n_nets;
                rows[2 * vi].raycast_seconds += secs;
                rows[2 * vi + 1].raycast_seconds += secs;
            }
        }
    }
    return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "variant,dim,time_ratio,region_size,raycast_seconds\n";
    char line[256];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%s,%d,%.6g,%.6g,%.6g\n", r.variant.c_str(), r.dim, r.time_ratio,
                      r.region_size, r.raycast_seconds);
        out << line;
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Soundness fuzzing

struct FuzzOptions {
    long n_regions = 1000000;
    std::uint64_t seed = 0;
    int samples = 32;
    double slack = 1e-5;
    double min_size = 1e-4;
    double max_size = 1.0;
    double domain = 1.1;  // centers uniform in [-domain, domain]^d
    std::vector<CondensationPolicy> policies = all_policies();
};

struct FuzzViolation {
    long region = -1;
    std::string network;
    std::string policy;
    QueryBox box;
    Vector point;
    double value = 0.0;
    Interval bound;
};

struct FuzzReport {
    long regions = 0;
    long checks = 0;      // sampled values compared against a bound
    long violations = 0;
    std::optional<FuzzViolation> first;  // lowest region index

    bool passed() const { return violations == 0; }
};

namespace detail {

/// Region `index` of a fuzz run: random center, log-uniform size, s in {1, 3}
/// random orthogonal axes each spanning `size`.
inline QueryBox fuzz_region(const FuzzOptions& o, int d, std::uint64_t index, std::mt19937_64& rng) {
    rng.seed(substream_seed(o.seed, index));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    QueryBox box;
    box.center.resize(d);
    for (int k = 0; k < d; ++k) box.center[k] = o.domain * u(rng);
    const int s = std::min(d, (rng() & 1) ? 3 : 1);
    const double size =
        std::exp(std::log(o.min_size) + 0.5 * (u(rng) + 1.0) * (std::log(o.max_size) - std::log(o.min_size)));
    for (int a = 0; a < s; ++a) {
        Vector v(d);
        for (;;) {
            for (int k = 0; k < d; ++k) v[k] = g(rng);
            for (const auto& w : box.axes) v -= v.dot(w) / w.squaredNorm() * w;
            if (v.norm() > 1e-6) break;
        }
        box.axes.push_back(0.5 * size * v.normalized());
    }
    return box;
}

} // namespace detail

/// Samples random regions and checks that point values fall inside the
/// computed bounds (widened by the slack). `bound(net, box, policy)` returns
/// an Interval; the default is range_bound. Regions cycle over the networks.
template <typename Bound>
FuzzReport fuzz_soundness(const std::vector<NetworkSpec>& nets, const FuzzOptions& o, Bound&& bound) {
    if (nets.empty()) throw Error(ErrorCode::NoNetworks, "fuzzing needs at least one network");
    if (o.n_regions < 0 || o.samples < 1 || !(o.min_size > 0.0) || !(o.max_size >= o.min_size) ||
        o.policies.empty()) {
        throw Error(ErrorCode::InvalidParameter, "invalid fuzz options");
    }
    constexpr long chunk = 2048;
    const long n_chunks = (o.n_regions + chunk - 1) / chunk;
    std::vector<FuzzReport> partial(static_cast<std::size_t>(n_chunks));
    parallel_for(static_cast<std::size_t>(n_chunks), [&](std::size_t c) {
        FuzzReport& rep = partial[c];
        std::mt19937_64 rng;
        const long end = std::min(o.n_regions, static_cast<long>(c + 1) * chunk);
        for (long i = static_cast<long>(c) * chunk; i < end; ++i) {
            const NetworkSpec& net = nets[static_cast<std::size_t>(i) % nets.size()];
            const QueryBox box = detail::fuzz_region(o, net.input_dim(), static_cast<std::uint64_t>(i), rng);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            Matrix pts(net.input_dim(), o.samples);
            for (int k = 0; k < o.samples; ++k) {
                Vector p = box.center;
                for (const auto& a : box.axes) p += u(rng) * a;
                pts.col(k) = p;
            }
            const Vector f = eval_batch(net, pts);
            ++rep.regions;
            for (const auto& policy : o.policies) {
                const Interval y = bound(net, box, policy);
                for (int k = 0; k < o.samples; ++k) {
                    ++rep.checks;
                    if (f[k] >= y.lo - o.slack && f[k] <= y.hi + o.slack) continue;
                    ++rep.violations;
                    if (!rep.first) rep.first = FuzzViolation{i, net.name(), to_string(policy), box, pts.col(k), f[k], y};
                }
            }
        }
    });
    FuzzReport out;
    for (auto& p : partial) {
        out.regions += p.regions;
        out.checks += p.checks;
        out.violations += p.violations;
        if (p.first && !out.first) out.first = std::move(p.first);  // chunks are in index order
    }
    return out;
}

inline FuzzReport fuzz_soundness(const std::vector<NetworkSpec>& nets, const FuzzOptions& o) {
    return fuzz_soundness(nets, o, [](const NetworkSpec& net, const QueryBox& box, const CondensationPolicy& p) {
        return range_bound(net, box, p).interval;
    });
}

inline std::string format_report(const FuzzReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << "regions " << r.regions << ", checks " << r.checks << ", violations " << r.violations << '\n';
    if (r.first) {
        const auto& v = *r.first;
        out << "first violation: region " << v.region << " network '" << v.network << "' policy " << v.policy
            << "\n  center " << v.box.center.transpose() << "\n";
        for (const auto& a : v.box.axes) out << "  axis " << a.transpose() << '\n';
        out << "  point " << v.point.transpose() << "\n  f = " << v.value << " outside [" << v.bound.lo << ", "
            << v.bound.hi << "]\n";
    }
    out << (r.passed() ? "PASS" : "FAIL") << '\n';
    return out.str();
}

} // namespace spelunk

#endif
