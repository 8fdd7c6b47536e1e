#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <random>

#include "spelunk/bulk.hpp"
#include "spelunk/closest.hpp"
#include "spelunk/empty_space.hpp"
#include "spelunk/intersect.hpp"
#include "spelunk/mesh.hpp"
#include "spelunk/sampling.hpp"
#include "spelunk/tree.hpp"
#include "test_support.hpp"

using namespace spelunk;

namespace {

const NetworkSpec& box() {
    static const NetworkSpec net = build_box_oracle(Vector(Vec3::Zero()), 0.5);
    return net;
}

NetworkSpec box_at(const Vec3& c, double h = 0.5) { return build_box_oracle(Vector(c), h); }

// Bounds whose split planes never line up with the box faces.
const AABB skewed{Vector(Vec3(-1.0123, -1.0211, -1.0057)), Vector(Vec3(1.0311, 1.0179, 1.0243))};
const AABB unit = AABB::cube(3, -1.0, 1.0);

const CondensationPolicy full = CondensationPolicy::full();
const CondensationPolicy fixed = CondensationPolicy::fixed();

Vector point_in(std::mt19937_64& rng, const AABB& b) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector x(b.dim());
    for (Eigen::Index i = 0; i < b.dim(); ++i) x[i] = b.lo[i] + u(rng) * (b.hi[i] - b.lo[i]);
    return x;
}

void check_partition(const SpatialTree& tree) {
    double leaf_volume = 0.0;
    for (const auto& n : tree.nodes) {
        if (n.is_leaf()) {
            leaf_volume += n.box.volume();
            continue;
        }
        const auto& a = tree.nodes[static_cast<std::size_t>(n.children[0])].box;
        const auto& b = tree.nodes[static_cast<std::size_t>(n.children[1])].box;
        int split_axes = 0;
        for (Eigen::Index i = 0; i < n.box.dim(); ++i) {
            ASSERT_EQ(a.lo[i], n.box.lo[i]);
            ASSERT_EQ(b.hi[i], n.box.hi[i]);
            if (a.hi[i] != n.box.hi[i]) {
                ++split_axes;
                ASSERT_EQ(a.hi[i], b.lo[i]);
                ASSERT_GT(a.hi[i], a.lo[i]);
                ASSERT_LT(b.lo[i], b.hi[i]);
            } else {
                ASSERT_EQ(b.lo[i], n.box.lo[i]);
            }
        }
        ASSERT_EQ(split_axes, 1);
    }
    EXPECT_NEAR(leaf_volume, tree.root().box.volume(), 1e-9);
}

void check_certified_leaves(const NetworkSpec& net, const SpatialTree& tree, std::mt19937_64& rng) {
    for (const auto& n : tree.nodes) {
        if (!n.is_leaf() || n.cls == SignClass::Unknown) continue;
        for (int k = 0; k < 16; ++k) {
            const double f = eval_scalar(net, point_in(rng, n.box));
            if (n.cls == SignClass::Positive) {
                ASSERT_GT(f, 0.0);
            } else {
                ASSERT_LT(f, 0.0);
            }
        }
    }
}

} // namespace

// --- tree ----------------------------------------------------------------------

TEST(SpatialTree, BoxVolumeIsBracketed) {
    const double delta = 0.02;
    const auto tree = build_spatial_tree(box(), unit, delta, full);
    const double inside = tree.leaf_volume(SignClass::Negative);
    const double maybe = inside + tree.leaf_volume(SignClass::Unknown);
    EXPECT_LE(inside, 1.0);
    EXPECT_GE(maybe, 1.0);
    EXPECT_LE(1.0 - inside, 6 * delta * 6);
    EXPECT_LE(maybe - 1.0, 6 * delta * 6);
    const double stop = delta / std::sqrt(3.0);
    for (const auto& n : tree.nodes) {
        if (n.is_leaf() && n.cls == SignClass::Unknown) EXPECT_LT(n.box.max_extent(), stop);
    }
    check_partition(tree);
    std::mt19937_64 rng(1);
    check_certified_leaves(box(), tree, rng);
}

TEST(SpatialTree, ConstantNetworkIsSingleLeaf) {
    const auto tree = build_spatial_tree(test::constant_network(3, 1.0), unit, 1e-3, full);
    ASSERT_EQ(tree.nodes.size(), 1u);
    EXPECT_EQ(tree.root().cls, SignClass::Positive);
}

TEST(SpatialTree, FixedDepth) {
    const auto tree = build_spatial_tree(box(), skewed, 1e-3, fixed, TreeMode::fixed_depth(9));
    for (const auto& n : tree.nodes) {
        EXPECT_LE(n.depth, 9);
        if (n.is_leaf() && n.cls == SignClass::Unknown) EXPECT_EQ(n.depth, 9);
    }
    check_partition(tree);
}

TEST(SpatialTree, Errors) {
    try {
        build_spatial_tree(box(), unit, 1e-3, full, TreeMode::fixed_depth(61));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DepthOverflow);
    }
    try {
        build_spatial_tree(box(), AABB{Vector(Vec3(0, 0, 0)), Vector(Vec3(1, 0, 1))}, 1e-3, full);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidBounds);
    }
    EXPECT_THROW(build_spatial_tree(box(), AABB::cube(2, -1, 1), 1e-3, full), Error);
}

TEST(SpatialTree, CertifiedLeavesOnRandomNetworks) {
    std::mt19937_64 rng(2);
    for (const auto kind : {ActivationKind::ReLU, ActivationKind::ELU, ActivationKind::Sin, ActivationKind::Tanh}) {
        const auto net = test::random_network(rng, 3, {16, 16}, kind);
        for (const auto& policy : {CondensationPolicy::interval(), fixed, full, CondensationPolicy::truncate(8)}) {
            const auto tree = build_spatial_tree(net, unit, 0.05, policy, TreeMode::fixed_depth(12));
            check_partition(tree);
            check_certified_leaves(net, tree, rng);
        }
    }
}

TEST(SpatialTree, HigherDimension) {
    const auto net = build_box_oracle(Vector::Constant(4, 0.1), 0.4);
    const auto tree = build_spatial_tree(net, AABB::cube(4, -1, 1), 0.1, full);
    check_partition(tree);
    std::mt19937_64 rng(3);
    check_certified_leaves(net, tree, rng);
    EXPECT_LE(tree.leaf_volume(SignClass::Negative), std::pow(0.8, 4));
    EXPECT_GE(tree.leaf_volume(SignClass::Negative) + tree.leaf_volume(SignClass::Unknown), std::pow(0.8, 4));
}

// --- empty space -----------------------------------------------------------------

TEST(EmptyBox, Examples) {
    const auto outside = empty_box_radius(box(), Vector(Vec3(0.9, 0.9, 0.9)), 0.5, fixed);
    EXPECT_TRUE(outside.certified);
    EXPECT_GE(outside.radius, 0.15);
    const auto center = empty_box_radius(box(), Vector(Vec3::Zero()), 0.25, fixed);
    EXPECT_TRUE(center.certified);
    EXPECT_GE(center.radius, 0.1);
    const auto near = empty_box_radius(box(), Vector(Vec3(0.5 + 2e-4, 0, 0)), 0.5, fixed, 1e-3);
    EXPECT_FALSE(near.certified);
    EXPECT_EQ(near.radius, 0.0);
    try {
        empty_box_radius(box(), Vector(Vec3(0.5, 0, 0)), 0.5, fixed);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OnSurface);
    }
}

TEST(EmptyBox, CertifiedCubeHasNoSignChange) {
    std::mt19937_64 rng(4);
    const auto net = test::random_network(rng, 3, {24, 24}, ActivationKind::ELU);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 200; ++t) {
        const Vector p = Vec3(u(rng), u(rng), u(rng));
        const auto r = empty_box_radius(net, p, 1.0, fixed);
        if (!r.certified) continue;
        const bool neg = eval_scalar(net, p) < 0.0;
        const AABB cube{p.array() - r.radius, p.array() + r.radius};
        for (int k = 0; k < 16; ++k) ASSERT_EQ(eval_scalar(net, point_in(rng, cube)) < 0.0, neg);
    }
}

TEST(WalkOnSpheres, ConstantDataIsExact) {
    const auto r = walk_on_spheres(box(), Vector(Vec3(0.1, 0.2, -0.3)), [](const Vector&) { return 1.0; }, 200, 7);
    EXPECT_EQ(r.estimate, 1.0);
    EXPECT_EQ(r.standard_error, 0.0);
}

TEST(WalkOnSpheres, HarmonicDataAndDeterminism) {
    auto g = [](const Vector& x) { return x[0]; };
    const auto a = walk_on_spheres(box(), Vector(Vec3(0.2, 0, 0)), g, 2000, 11);
    const auto b = walk_on_spheres(box(), Vector(Vec3(0.2, 0, 0)), g, 2000, 11);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_GT(a.standard_error, 0.0);
    EXPECT_LE(std::abs(a.estimate - 0.2), 3 * a.standard_error);
    const auto c = walk_on_spheres(box(), Vector(Vec3(0.2, 0, 0)), g, 2000, 12);
    EXPECT_NE(a.estimate, c.estimate);
    EXPECT_THROW(walk_on_spheres(box(), Vector(Vec3(0.5, 0, 0)), g, 10, 1), Error);
}

// --- sampling ----------------------------------------------------------------------

TEST(Sampling, BandSamplesAndSavings) {
    const double r = 0.01;
    const auto s = sample_near_surface(box(), unit, 20000, r, 18, full, 5);
    ASSERT_EQ(s.points.size(), 20000u);
    for (const auto& p : s.points) ASSERT_LT(std::abs(eval_scalar(box(), p)), r);
    EXPECT_LE(s.kept_volume(), 0.1 * unit.volume());
    const auto naive = sample_near_surface_naive(box(), unit, 20000, r, 5);
    ASSERT_EQ(naive.points.size(), 20000u);
    EXPECT_GE(static_cast<double>(naive.evaluations), 5.0 * static_cast<double>(s.evaluations));
}

TEST(Sampling, EmptyBand) {
    try {
        sample_near_surface(test::constant_network(3, 1.0), unit, 10, 0.01, 6, full, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyBand);
    }
}

// --- meshing -------------------------------------------------------------------------

TEST(Mesh, HierarchicalEqualsDenseOnBox) {
    for (const int m : {5, 6}) {
        MeshStats hs, ds;
        const auto h = extract_mesh(box(), skewed, m, 3, full, &hs);
        const auto d = extract_mesh_dense(box(), skewed, m, &ds);
        std::string why;
        EXPECT_TRUE(test::same_mesh(h, d, 1e-9, &why)) << why;
        EXPECT_GT(h.triangles.size(), 100u);
        EXPECT_LT(hs.evaluations, ds.evaluations / 2);
        EXPECT_LT(hs.evaluations, 1L << (3 * m));
    }
}

TEST(Mesh, DyadicBoundsStillMatch) {
    const auto h = extract_mesh(box(), unit, 5, 3, full);
    const auto d = extract_mesh_dense(box(), unit, 5);
    std::string why;
    EXPECT_TRUE(test::same_mesh(h, d, 1e-9, &why)) << why;
}

TEST(Mesh, RandomNetworksMatchDense) {
    std::mt19937_64 rng(6);
    for (const auto kind : {ActivationKind::ReLU, ActivationKind::ELU}) {
        const auto net = test::random_network(rng, 3, {32, 32}, kind);
        const auto h = extract_mesh(net, unit, 5, 2, fixed);
        const auto d = extract_mesh_dense(net, unit, 5);
        std::string why;
        EXPECT_TRUE(test::same_mesh(h, d, 1e-9, &why)) << why;
    }
}

TEST(Mesh, ClosedAndOutwardOnBox) {
    const auto mesh = extract_mesh(box(), skewed, 5, 3, full);
    std::map<std::pair<int, int>, int> directed;
    double volume = 0.0;
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) ++directed[{t[k], t[(k + 1) % 3]}];
        volume += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]])) / 6.0;
    }
    for (const auto& [e, count] : directed) {
        EXPECT_EQ(count, 1);
        EXPECT_EQ(directed.count({e.second, e.first}), 1u);
    }
    EXPECT_NEAR(std::abs(volume), 1.0, 0.05);
}

TEST(Mesh, ConstantNetworkAndErrors) {
    EXPECT_TRUE(extract_mesh(test::constant_network(3, 1.0), unit, 5, 3, full).triangles.empty());
    try {
        extract_mesh(box(), unit, 3, 3, full);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ResolutionTooSmall);
    }
}

TEST(Mesh, ObjRoundTrip) {
    const auto mesh = extract_mesh(box(), skewed, 4, 2, full);
    const auto path = (std::filesystem::temp_directory_path() / "spelunk_mesh.obj").string();
    write_obj(mesh, path);
    const auto back = read_obj(path);
    ASSERT_EQ(back.triangles, mesh.triangles);
    ASSERT_EQ(back.vertices.size(), mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) EXPECT_EQ(back.vertices[i], mesh.vertices[i]);
}

// --- bulk -----------------------------------------------------------------------------

TEST(Bulk, BoxMassCentroidInertia) {
    const auto b = bulk_properties(box(), skewed, 21, 64, 3, full);
    EXPECT_NEAR(b.mass, 1.0, 5e-4);
    EXPECT_LE(std::abs(b.mass - 1.0), b.mass_error_bound);
    EXPECT_LT(b.centroid.norm(), 1e-3);
    EXPECT_TRUE(b.inertia.isApprox(b.inertia.transpose()));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(b.inertia(i, i), 1.0 / 6.0, 2e-3);
    EXPECT_GT(b.unknown_leaves, 0);
}

TEST(Bulk, OffsetBoxAndDeterminism) {
    const auto net = build_box_oracle(Vector(Vec3(0.2, -0.1, 0.3)), 0.3);
    const auto a = bulk_properties(net, skewed, 18, 64, 9, fixed);
    const auto b = bulk_properties(net, skewed, 18, 64, 9, fixed);
    EXPECT_EQ(a.mass, b.mass);
    EXPECT_NEAR(a.mass, 0.216, 0.216 * 5e-3);
    EXPECT_LT((a.centroid - Vec3(0.2, -0.1, 0.3)).norm(), 2e-3);
    EXPECT_THROW(bulk_properties(net, AABB{Vector(Vec3(1, 1, 1)), Vector(Vec3(0, 0, 0))}, 6, 64, 1, fixed), Error);
}

// --- intersection ---------------------------------------------------------------------

TEST(Intersection, TruthTable) {
    const AABB bounds = AABB::cube(3, -2.0, 3.0);
    const auto overlap = test_intersection(box(), box_at(Vec3(0.4, 0, 0)), bounds, 0.01, full);
    ASSERT_EQ(overlap.kind, IntersectionResult::Kind::Intersecting);
    const Vector c = overlap.witness.center();
    EXPECT_LT(eval_scalar(box(), c), 0.0);
    EXPECT_LT(eval_scalar(box_at(Vec3(0.4, 0, 0)), c), 0.0);
    EXPECT_GE(overlap.witness.lo[0], -0.1);
    EXPECT_LE(overlap.witness.hi[0], 0.5);

    EXPECT_EQ(test_intersection(box(), box_at(Vec3(2, 0, 0)), bounds, 0.01, full).kind,
              IntersectionResult::Kind::Disjoint);
    const auto touch = test_intersection(box(), box_at(Vec3(1, 0, 0)), bounds, 0.01, full);
    EXPECT_EQ(touch.kind, IntersectionResult::Kind::InconclusiveAtDelta);
    EXPECT_GT(touch.inconclusive_count, 0);
    for (const auto& n : touch.nodes) EXPECT_LE(std::abs(n.center()[0] - 0.5), 0.01);
}

// --- closest point ----------------------------------------------------------------------

TEST(ClosestPoint, Examples) {
    const double delta = 1e-3;
    const auto far = closest_point(box(), Vector(Vec3(2, 0, 0)), skewed, delta, fixed);
    EXPECT_LE((far.point - Vector(Vec3(0.5, 0, 0))).norm(), delta);
    EXPECT_GE(far.distance, 1.5);
    EXPECT_LE(far.distance, 1.5 + 2 * delta);
    const auto in = closest_point(box(), Vector(Vec3::Zero()), skewed, delta, fixed);
    EXPECT_GE(in.distance, 0.5);
    EXPECT_LE(in.distance, 0.5 + 2 * delta);
    const auto on = closest_point(box(), Vector(Vec3(0.5 + 3e-4, 0.1, 0.2)), skewed, delta, fixed);
    EXPECT_LE(on.distance, 2 * delta);
    try {
        closest_point(test::constant_network(3, 1.0), Vector(Vec3::Zero()), skewed, delta, fixed);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoSurfaceFound);
    }
}

TEST(ClosestPoint, Sandwich) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double delta = 1e-3;
    for (int t = 0; t < 20; ++t) {
        const Vec3 q(u(rng), u(rng), u(rng));
        const double exact = test::box_surface_distance(q);
        const auto r = closest_point(box(), Vector(q), skewed, delta, fixed);
        EXPECT_GE(r.distance, exact - 1e-12);
        EXPECT_LE(r.distance, exact + 2 * delta);
        EXPECT_LE(std::abs(eval_scalar(box(), r.point)), delta);
    }
}
