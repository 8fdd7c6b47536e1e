#ifndef SPELUNK_TEST_SUPPORT_HPP
#define SPELUNK_TEST_SUPPORT_HPP

// Shared helpers for the test suites: independent closed-form oracles and
// random network/box generators. Nothing here calls into the range analysis.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "spelunk/mesh.hpp"
#include "spelunk/network.hpp"
#include "spelunk/range_bound.hpp"

namespace spelunk::test {

inline std::string fixture(const std::string& name) { return std::string(SPELUNK_FIXTURE_DIR) + "/" + name; }

inline const std::vector<std::string>& trained_fixture_names() {
    static const std::vector<std::string> names = {"torus_sdf_relu.json", "blob_sdf_elu.json",
                                                   "dumbbell_occ_relu.json", "bracket_occ_elu.json"};
    return names;
}

/// L-infinity box field, computed directly.
inline double box_sdf(const Vector& x, const Vector& c, double h) { return (x - c).cwiseAbs().maxCoeff() - h; }

inline double box_sdf(const Vec3& x, double h = 0.5, const Vec3& c = Vec3::Zero()) {
    return (x - c).cwiseAbs().maxCoeff() - h;
}

/// Distance from q to the surface of the axis-aligned cube [c-h, c+h]^3.
inline double box_surface_distance(const Vec3& q, double h = 0.5, const Vec3& c = Vec3::Zero()) {
    const Vec3 p = q - c;
    const Vec3 a = p.cwiseAbs();
    const double m = a.maxCoeff();
    if (m > h) return (a.array() - h).max(0.0).matrix().norm();
    return h - m;
}

/// Random MLP with the given hidden widths and activation; He-style weights.
inline NetworkSpec random_network(std::mt19937_64& rng, int input_dim, const std::vector<int>& hidden,
                                  ActivationKind act, double weight_scale = 1.0) {
    std::vector<Layer> layers;
    int in = input_dim;
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto dense = [&](int out) {
        DenseLayer l{Matrix(out, in), Vector(out)};
        const double s = weight_scale * std::sqrt(2.0 / in);
        for (int i = 0; i < out; ++i) {
            for (int j = 0; j < in; ++j) l.weights(i, j) = s * gauss(rng);
            l.bias[i] = 0.3 * gauss(rng);
        }
        in = out;
        return l;
    };
    for (int w : hidden) {
        layers.emplace_back(dense(w));
        layers.emplace_back(act);
    }
    layers.emplace_back(dense(1));
    return NetworkSpec(input_dim, std::move(layers));
}

/// Random orthogonal frame scaled per axis.
inline std::vector<Vector> random_axes(std::mt19937_64& rng, int d, int s, double scale) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = gauss(rng);
    Eigen::HouseholderQR<Matrix> qr(m);
    const Matrix q = qr.householderQ();
    std::uniform_real_distribution<double> u(0.2, 1.0);
    std::vector<Vector> axes;
    for (int i = 0; i < s; ++i) axes.push_back(q.col(i) * scale * u(rng));
    return axes;
}

/// Uniform point in the box, via uniform noise symbols.
inline Vector sample_box(std::mt19937_64& rng, const QueryBox& box) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector x = box.center;
    for (const auto& v : box.axes) x += u(rng) * v;
    return x;
}

/// Brute-force ray marcher: samples f at a fixed spacing from the origin and
/// reports the last sample before the first sign change (zero counts as
/// positive). `run` is how far the flipped sign persists, capped at t_max.
struct DenseHit {
    bool hit = false;
    double t = 0.0;
    double run = 0.0;
};

inline DenseHit dense_march(const NetworkSpec& net, const Vec3& origin, const Vec3& dir, double t_max, double step) {
    const double f0 = eval_scalar(net, Vector(origin));
    auto flipped = [&](double v) { return (v < 0.0) != (f0 < 0.0); };
    const long n = static_cast<long>(std::ceil(t_max / step));
    const long chunk = 2048;
    DenseHit out;
    long first = -1;
    for (long start = 0; start <= n; start += chunk) {
        const long count = std::min(chunk, n + 1 - start);
        Matrix pts(3, count);
        for (long k = 0; k < count; ++k) pts.col(k) = origin + (static_cast<double>(start + k) * step) * dir;
        const Vector f = eval_batch(net, pts);
        for (long k = 0; k < count; ++k) {
            const long idx = start + k;
            if (first < 0) {
                if (idx * step >= t_max) return out;
                if (flipped(f[k])) {
                    first = idx;
                    out.hit = true;
                    out.t = static_cast<double>(idx - 1) * step;
                }
            } else if (!flipped(f[k])) {
                out.run = static_cast<double>(idx - first) * step;
                return out;
            }
        }
    }
    if (first >= 0) out.run = t_max;
    return out;
}

/// Vertex and triangle multisets with coordinates compared to `tol`.
/// Triangles are rotated to start at their smallest vertex, keeping winding.
inline bool same_mesh(const TriangleMesh& a, const TriangleMesh& b, double tol, std::string* why = nullptr) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (a.vertices.size() != b.vertices.size()) {
        return fail("vertex count " + std::to_string(a.vertices.size()) + " vs " + std::to_string(b.vertices.size()));
    }
    if (a.triangles.size() != b.triangles.size()) {
        return fail("triangle count " + std::to_string(a.triangles.size()) + " vs " +
                    std::to_string(b.triangles.size()));
    }
    auto less = [](const Vec3& x, const Vec3& y) {
        return std::lexicographical_compare(x.data(), x.data() + 3, y.data(), y.data() + 3);
    };
    auto close = [&](const Vec3& x, const Vec3& y) { return (x - y).cwiseAbs().maxCoeff() <= tol; };
    auto verts = [&](const TriangleMesh& m) {
        auto v = m.vertices;
        std::sort(v.begin(), v.end(), less);
        return v;
    };
    const auto va = verts(a), vb = verts(b);
    for (std::size_t i = 0; i < va.size(); ++i) {
        if (!close(va[i], vb[i])) return fail("vertex " + std::to_string(i) + " differs");
    }
    using Tri = std::array<Vec3, 3>;
    auto tris = [&](const TriangleMesh& m) {
        std::vector<Tri> out;
        for (const auto& t : m.triangles) {
            Tri tri = {m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]};
            int first = 0;
            for (int k = 1; k < 3; ++k) {
                if (less(tri[k], tri[first])) first = k;
            }
            std::rotate(tri.begin(), tri.begin() + first, tri.end());
            out.push_back(tri);
        }
        std::sort(out.begin(), out.end(), [&](const Tri& x, const Tri& y) {
            for (int k = 0; k < 3; ++k) {
                if (less(x[k], y[k])) return true;
                if (less(y[k], x[k])) return false;
            }
            return false;
        });
        return out;
    };
    const auto ta = tris(a), tb = tris(b);
    for (std::size_t i = 0; i < ta.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            if (!close(ta[i][k], tb[i][k])) return fail("triangle " + std::to_string(i) + " differs");
        }
    }
    return true;
}

/// Network whose output is the constant c everywhere.
inline NetworkSpec constant_network(int d, double c) {
    DenseLayer l{Matrix::Zero(1, d), Vector::Constant(1, c)};
    return NetworkSpec(d, {l});
}

/// Slab |x . n| - h of thickness 2h, as a one-hidden-layer ReLU network.
inline NetworkSpec slab_network(const Vec3& n, double h) {
    DenseLayer a{Matrix(2, 3), Vector::Zero(2)};
    a.weights.row(0) = n.transpose();
    a.weights.row(1) = -n.transpose();
    DenseLayer b{Matrix::Ones(1, 2), Vector::Constant(1, -h)};
    return NetworkSpec(3, {a, ActivationKind::ReLU, b});
}

} // namespace spelunk::test

#endif
