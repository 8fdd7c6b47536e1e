#ifndef SPELUNK_MESH_HPP
#define SPELUNK_MESH_HPP

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "spelunk/error.hpp"
#include "spelunk/marching_tables.hpp"
#include "spelunk/network.hpp"
#include "spelunk/parallel.hpp"
#include "spelunk/range_bound.hpp"
#include "spelunk/tree.hpp"

namespace spelunk {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::int32_t, 3>> triangles;
};

struct MeshStats {
    long evaluations = 0;
    long range_bound_calls = 0;
    long blocks_extracted = 0;
};

namespace detail {

inline constexpr int corner_offset[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                            {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
inline constexpr int edge_corners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                            {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

/// Integer lattice of 2^m cells per axis over `bounds`. Every consumer maps
/// lattice indices to space through coord(), so values at shared lattice
/// points are bit-identical wherever they are evaluated.
struct Lattice {
    Vec3 lo, hi;
    std::int64_t n;  // cells per axis

    double coord(int axis, std::int64_t i) const {
        return lo[axis] + (hi[axis] - lo[axis]) * (static_cast<double>(i) / static_cast<double>(n));
    }
    Vec3 point(std::int64_t i, std::int64_t j, std::int64_t k) const { return {coord(0, i), coord(1, j), coord(2, k)}; }
};

/// Half-open box of lattice cells.
struct LatticeBox {
    std::array<std::int64_t, 3> lo, hi;

    std::int64_t size(int axis) const { return hi[axis] - lo[axis]; }
    AABB aabb(const Lattice& lat) const {
        return {Vector(lat.point(lo[0], lo[1], lo[2])), Vector(lat.point(hi[0], hi[1], hi[2]))};
    }
    /// Midpoint split along the axis with the most cells (lowest axis on ties).
    std::pair<LatticeBox, LatticeBox> split() const {
        int axis = 0;
        for (int d = 1; d < 3; ++d) {
            if (size(d) > size(axis)) axis = d;
        }
        LatticeBox a = *this, b = *this;
        a.hi[axis] = b.lo[axis] = lo[axis] + size(axis) / 2;
        return {a, b};
    }
};

inline std::uint64_t edge_key(std::int64_t i, std::int64_t j, std::int64_t k, int axis) {
    return (static_cast<std::uint64_t>(i) << 42) | (static_cast<std::uint64_t>(j) << 22) |
           (static_cast<std::uint64_t>(k) << 2) | static_cast<std::uint64_t>(axis);
}

struct BlockMesh {
    std::vector<std::uint64_t> keys;       // one per edge vertex
    std::vector<Vec3> positions;           // matching keys
    std::vector<std::array<std::uint64_t, 3>> triangles;  // edge keys
};

/// Marching cubes over the cells of `block`. Corner
/// values below zero are inside; zero counts as outside.
inline long march_block(const NetworkSpec& net, const Lattice& lat, const LatticeBox& block, BlockMesh& out) {
    const std::int64_t i0 = block.lo[0], j0 = block.lo[1], k0 = block.lo[2];
    const std::int64_t px = block.size(0) + 1, py = block.size(1) + 1, pz = block.size(2) + 1;
    Matrix pts(3, px * py * pz);
    for (std::int64_t k = 0; k < pz; ++k)
        for (std::int64_t j = 0; j < py; ++j)
            for (std::int64_t i = 0; i < px; ++i) pts.col((k * py + j) * px + i) = lat.point(i0 + i, j0 + j, k0 + k);
    const Vector f = eval_batch(net, pts);
    auto value = [&](std::int64_t i, std::int64_t j, std::int64_t k) { return f[(k * py + j) * px + i]; };

    std::unordered_map<std::uint64_t, std::size_t> seen;
    for (std::int64_t k = 0; k + 1 < pz; ++k) {
        for (std::int64_t j = 0; j + 1 < py; ++j) {
            for (std::int64_t i = 0; i + 1 < px; ++i) {
                double v[8];
                int index = 0;
                for (int c = 0; c < 8; ++c) {
                    v[c] = value(i + corner_offset[c][0], j + corner_offset[c][1], k + corner_offset[c][2]);
                    if (v[c] < 0.0) index |= 1 << c;
                }
                const auto edges = mc::edge_table[index];
                if (edges == 0) continue;
                std::uint64_t key[12] = {};
                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1 << e))) continue;
                    int a = edge_corners[e][0], b = edge_corners[e][1];
                    // canonical direction: from the lower lattice point
                    int axis = 0;
                    for (int d = 0; d < 3; ++d) {
                        if (corner_offset[a][d] != corner_offset[b][d]) axis = d;
                    }
                    if (corner_offset[a][axis] > corner_offset[b][axis]) std::swap(a, b);
                    const std::int64_t gi = i0 + i + corner_offset[a][0];
                    const std::int64_t gj = j0 + j + corner_offset[a][1];
                    const std::int64_t gk = k0 + k + corner_offset[a][2];
                    key[e] = edge_key(gi, gj, gk, axis);
                    if (seen.count(key[e])) continue;
                    const Vec3 pa = lat.point(gi, gj, gk);
                    const Vec3 pb = lat.point(gi + (axis == 0), gj + (axis == 1), gk + (axis == 2));
                    const double t = v[a] / (v[a] - v[b]);
                    seen.emplace(key[e], out.keys.size());
                    out.keys.push_back(key[e]);
                    out.positions.push_back(pa + t * (pb - pa));
                }
                for (int t = 0; mc::tri_table[index][t] != -1; t += 3) {
                    out.triangles.push_back({key[mc::tri_table[index][t]], key[mc::tri_table[index][t + 1]],
                                             key[mc::tri_table[index][t + 2]]});
                }
            }
        }
    }
    return px * py * pz;
}

inline TriangleMesh weld(const std::vector<BlockMesh>& blocks) {
    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, std::int32_t> index;
    for (const auto& b : blocks) {
        for (std::size_t v = 0; v < b.keys.size(); ++v) {
            if (index.emplace(b.keys[v], static_cast<std::int32_t>(mesh.vertices.size())).second) {
                mesh.vertices.push_back(b.positions[v]);
            }
        }
        for (const auto& t : b.triangles) mesh.triangles.push_back({index.at(t[0]), index.at(t[1]), index.at(t[2])});
    }
    return mesh;
}

inline Lattice make_lattice(const NetworkSpec& net, const AABB& bounds, int m) {
    detail::check_net_bounds(net, bounds);
    if (net.input_dim() != 3) throw Error(ErrorCode::DimensionMismatch, "mesh extraction needs a 3d network");
    if (m < 1 || m > 20) throw Error(ErrorCode::InvalidParameter, "resolution exponent must be in [1, 20]");
    return {Vec3(bounds.lo), Vec3(bounds.hi), std::int64_t{1} << m};
}

} // namespace detail

/// Plain marching cubes on the full 2^m grid.
inline TriangleMesh extract_mesh_dense(const NetworkSpec& net, const AABB& bounds, int m, MeshStats* stats = nullptr) {
    const auto lat = detail::make_lattice(net, bounds, m);
    std::vector<detail::BlockMesh> blocks(1);
    const long evals = detail::march_block(net, lat, {{0, 0, 0}, {lat.n, lat.n, lat.n}}, blocks[0]);
    if (stats) *stats = {evals, 0, 1};
    return detail::weld(blocks);
}

/// Marching cubes on the 2^m grid that skips certified space. A k-d tree over
/// the lattice is refined to depth 3m - l, dropping nodes whose range bound is
/// single-signed; each surviving node covers the bottom l levels and is
/// extracted densely. The output equals extract_mesh_dense up to vertex and
/// triangle order.
inline TriangleMesh extract_mesh(const NetworkSpec& net, const AABB& bounds, int m, int l,
                                 const CondensationPolicy& policy, MeshStats* stats = nullptr) {
    const auto lat = detail::make_lattice(net, bounds, m);
    if (l < 0 || m <= l) throw Error(ErrorCode::ResolutionTooSmall, "need m > l");
    MeshStats st;
    std::vector<detail::LatticeBox> frontier = {{{0, 0, 0}, {lat.n, lat.n, lat.n}}};
    for (int depth = 0; !frontier.empty(); ++depth) {
        std::vector<char> keep(frontier.size(), 0);
        parallel_for(frontier.size(), [&](std::size_t b) {
            keep[b] = range_bound(net, frontier[b].aabb(lat).to_query_box(), policy).sign == SignClass::Unknown;
        });
        st.range_bound_calls += static_cast<long>(frontier.size());
        std::vector<detail::LatticeBox> next;
        for (std::size_t b = 0; b < frontier.size(); ++b) {
            if (!keep[b]) continue;
            if (depth == 3 * m - l) {
                next.push_back(frontier[b]);
                continue;
            }
            auto [lo, hi] = frontier[b].split();
            next.push_back(lo);
            next.push_back(hi);
        }
        frontier = std::move(next);
        if (depth == 3 * m - l) break;
    }
    std::vector<detail::BlockMesh> blocks(frontier.size());
    std::vector<long> evals(frontier.size(), 0);
    parallel_for(frontier.size(), [&](std::size_t b) { evals[b] = detail::march_block(net, lat, frontier[b], blocks[b]); });
    for (const long e : evals) st.evaluations += e;
    st.blocks_extracted = static_cast<long>(frontier.size());
    if (stats) *stats = st;
    return detail::weld(blocks);
}

/// Wavefront OBJ with 1-based faces.
inline void write_obj(const TriangleMesh& mesh, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error(ErrorCode::IOError, "cannot open " + path);
    for (const auto& v : mesh.vertices) std::fprintf(f, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    for (const auto& t : mesh.triangles) std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    const bool ok = std::ferror(f) == 0;
    if (std::fclose(f) != 0 || !ok) throw Error(ErrorCode::IOError, "failed writing " + path);
}

inline TriangleMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IOError, "cannot open " + path);
    TriangleMesh mesh;
    std::string tag;
    while (in >> tag) {
        if (tag == "v") {
            Vec3 v;
            in >> v.x() >> v.y() >> v.z();
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<std::int32_t, 3> t{};
            in >> t[0] >> t[1] >> t[2];
            mesh.triangles.push_back({t[0] - 1, t[1] - 1, t[2] - 1});
        } else {
            std::getline(in, tag);
        }
    }
    return mesh;
}

} // namespace spelunk

#endif
