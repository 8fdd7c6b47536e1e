#include <gtest/gtest.h>

#include <random>

#include "spelunk/camera.hpp"
#include "spelunk/frustum.hpp"
#include "spelunk/ray.hpp"
#include "test_support.hpp"

using namespace spelunk;

namespace {

const NetworkSpec& box() {
    static const NetworkSpec net = build_box_oracle(Vector(Vec3::Zero()), 0.5);
    return net;
}

const CondensationPolicy fixed = CondensationPolicy::fixed();

std::vector<Ray> random_rays(std::mt19937_64& rng, int n, double radius, double aim) {
    std::normal_distribution<double> g(0, 1);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Ray> rays;
    for (int i = 0; i < n; ++i) {
        const Vec3 o = Vec3(g(rng), g(rng), g(rng)).normalized() * radius;
        const Vec3 target(aim * u(rng), aim * u(rng), aim * u(rng));
        rays.push_back({o, (target - o).normalized()});
    }
    return rays;
}

// The cast must agree with brute-force marching, allowing disagreement only
// where the marcher sees a sign flip thinner than delta.
void expect_matches_dense(const NetworkSpec& net, const Ray& ray, const HitResult& hit, const RayCastParams& p) {
    const auto dense = test::dense_march(net, ray.origin, ray.dir, p.t_max, p.delta / 10);
    if (dense.hit && dense.run < p.delta && !hit.hit) return;
    ASSERT_EQ(hit.hit, dense.hit) << "origin " << ray.origin.transpose() << " dir " << ray.dir.transpose();
    if (hit.hit) ASSERT_LE(std::abs(hit.t - dense.t), p.delta);
}

Camera face_on(int res) {
    Camera cam;
    cam.position = Vec3(0, 0, 3);
    cam.look_at = Vec3::Zero();
    cam.vertical_fov = 2.0 * std::atan(0.4) * 180.0 / std::numbers::pi;
    cam.width = cam.height = res;
    return cam;
}

} // namespace

TEST(CastRay, HitsBoxFace) {
    const RayCastParams p;
    const auto hit = cast_ray(box(), {Vec3(-2, 0, 0), Vec3(1, 0, 0)}, p, fixed);
    ASSERT_TRUE(hit.hit);
    EXPECT_LE(std::abs(hit.t - 1.5), p.delta);
    EXPECT_GT(hit.steps, 0);
}

TEST(CastRay, MissesAboveBox) {
    const auto hit = cast_ray(box(), {Vec3(-2, 0.9, 0), Vec3(1, 0, 0)}, RayCastParams{}, fixed);
    EXPECT_FALSE(hit.hit);
}

TEST(CastRay, OriginInsideReportsExit) {
    const RayCastParams p;
    const Ray ray{Vec3::Zero(), Vec3(1, 0, 0)};
    const auto hit = cast_ray(box(), ray, p, fixed);
    ASSERT_TRUE(hit.hit);
    EXPECT_LE(std::abs(hit.t - (0.5 - p.delta)), p.delta);
    expect_matches_dense(box(), ray, hit, p);
}

TEST(CastRay, OriginOnSurfaceIsHitAtZero) {
    const auto hit = cast_ray(box(), {Vec3(0.5, 0, 0), Vec3(1, 0, 0)}, RayCastParams{}, fixed);
    ASSERT_TRUE(hit.hit);
    EXPECT_EQ(hit.t, 0.0);
}

TEST(CastRay, RejectsBadRays) {
    for (const Ray& r : {Ray{Vec3::Zero(), Vec3(1, 1, 0)}, Ray{Vec3(NAN, 0, 0), Vec3(1, 0, 0)}}) {
        try {
            cast_ray(box(), r, RayCastParams{}, fixed);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidRay);
        }
    }
    RayCastParams bad;
    bad.eta_minus = 1.5;
    EXPECT_THROW(cast_ray(box(), {Vec3::Zero(), Vec3::UnitX()}, bad, fixed), Error);
}

TEST(CastRays, EmptyAndBatchEqualsSingle) {
    EXPECT_TRUE(cast_rays(box(), {}, RayCastParams{}, fixed).empty());
    std::mt19937_64 rng(1);
    const auto rays = random_rays(rng, 256, 2.5, 0.8);
    const auto batch = cast_rays(box(), rays, RayCastParams{}, fixed);
    for (std::size_t i = 0; i < rays.size(); ++i) {
        const auto one = cast_ray(box(), rays[i], RayCastParams{}, fixed);
        EXPECT_EQ(batch[i].hit, one.hit);
        EXPECT_EQ(batch[i].t, one.t);
        EXPECT_EQ(batch[i].steps, one.steps);
    }
}

TEST(CastRays, AgreesWithDenseMarcher) {
    std::mt19937_64 rng(2);
    const auto rays = random_rays(rng, 256, 2.0, 0.8);
    auto p = RayCastParams::with_t_max(4.0);
    const auto hits = cast_rays(box(), rays, p, fixed);
    int n_hit = 0;
    for (std::size_t i = 0; i < rays.size(); ++i) {
        expect_matches_dense(box(), rays[i], hits[i], p);
        n_hit += hits[i].hit;
    }
    EXPECT_GT(n_hit, 50);
    EXPECT_LT(n_hit, 256);
}

TEST(CastRay, AcceptedStepsAreSingleSigned) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (const auto kind : {ActivationKind::ReLU, ActivationKind::ELU}) {
        const auto net = test::random_network(rng, 3, {32, 32}, kind);
        for (const auto& ray : random_rays(rng, 32, 2.0, 0.8)) {
            std::vector<RayStep> trace;
            cast_ray(net, ray, RayCastParams::with_t_max(4.0), fixed, &trace);
            for (const auto& s : trace) {
                if (!s.certified) continue;
                const bool neg = eval_scalar(net, ray.at(s.t)) < 0.0;
                for (int k = 0; k < 16; ++k) {
                    ASSERT_EQ(eval_scalar(net, ray.at(s.t + u(rng) * s.sigma)) < 0.0, neg);
                }
            }
        }
    }
}

TEST(CastRay, HitBracketContainsSignChange) {
    std::mt19937_64 rng(4);
    const auto net = test::random_network(rng, 3, {32, 32}, ActivationKind::ELU);
    const RayCastParams p = RayCastParams::with_t_max(4.0);
    int hits = 0;
    for (const auto& ray : random_rays(rng, 64, 2.0, 0.8)) {
        const auto h = cast_ray(net, ray, p, fixed);
        if (!h.hit) continue;
        ++hits;
        const bool neg0 = eval_scalar(net, ray.origin) < 0.0;
        bool change = false;
        for (int k = 0; k <= 10; ++k) change |= (eval_scalar(net, ray.at(h.t + k * p.delta / 10)) < 0.0) != neg0;
        EXPECT_TRUE(change);
        const double t = refine_hit(net, ray, h, p.delta);
        EXPECT_GE(t, h.t);
        EXPECT_LE(t, h.t + p.delta);
    }
    EXPECT_GT(hits, 0);
}

TEST(CastRay, IndependentOfInitialStep) {
    std::mt19937_64 rng(5);
    const auto net = test::random_network(rng, 3, {32, 32}, ActivationKind::ReLU);
    const auto rays = random_rays(rng, 64, 2.0, 0.8);
    for (const double frac : {0.01, 0.1, 1.0}) {
        auto p = RayCastParams::with_t_max(4.0);
        p.sigma0 = p.t_max * frac;
        for (const auto& ray : rays) expect_matches_dense(net, ray, cast_ray(net, ray, p, fixed), p);
    }
}

// Grazing rays along box edges cross sign flips thinner than delta; the
// outcome must not depend on the step history, only on the ray.
TEST(CastRay, OutcomeIndependentOfStepHistory) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    int thin = 0;
    for (int i = 0; i < 400; ++i) {
        // aim just past an edge of the box
        const Vec3 o = Vec3(u(rng), u(rng), u(rng)).normalized() * 2.5;
        const Vec3 edge(0.5 * (u(rng) < 0 ? -1 : 1), 0.5 * (u(rng) < 0 ? -1 : 1), 0.5 * u(rng));
        const Ray ray{o, (edge + Vec3(u(rng), u(rng), u(rng)) * 2e-4 - o).normalized()};
        const auto dense = test::dense_march(box(), ray.origin, ray.dir, 10.0, 1e-5);
        thin += dense.hit && dense.run < 1e-3;
        RayCastParams a, b;
        b.sigma0 = 0.0137;
        b.eta_plus = 1.3;
        const auto ha = cast_ray(box(), ray, a, fixed);
        const auto hb = cast_ray(box(), ray, b, fixed);
        ASSERT_EQ(ha.hit, hb.hit) << i;
        if (ha.hit) EXPECT_DOUBLE_EQ(ha.t, hb.t);
    }
    EXPECT_GT(thin, 10);
}

TEST(Camera, Validation) {
    Camera cam;
    cam.up = Vec3(0, 0, 1);
    EXPECT_THROW(cam.validate(), Error);
    Camera zero;
    zero.width = 0;
    try {
        zero.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidCamera);
    }
    Camera ok;
    const auto r = ok.ray(128, 128);
    EXPECT_NEAR(r.dir.norm(), 1.0, 1e-15);
    EXPECT_LT(r.dir.z(), 0.0);
}

TEST(Frustum, MatchesPerPixelOnBox) {
    const Camera cam = face_on(64);
    const RayCastParams p;
    const auto fr = cast_frustum_image(box(), cam, p, fixed);
    long per_pixel = 0;
    int hits = 0;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const auto single = cast_ray(box(), cam.ray(x, y), p, fixed);
            per_pixel += single.steps;
            ASSERT_EQ(fr.at(x, y).hit, single.hit) << x << "," << y;
            if (single.hit) {
                ++hits;
                ASSERT_LE(std::abs(fr.at(x, y).t - single.t), p.delta);
            }
        }
    }
    EXPECT_GT(hits, 500);
    EXPECT_LT(fr.total_steps(), per_pixel);
}

TEST(Frustum, ObliqueViewAgreesWithDenseMarcher) {
    Camera cam;
    cam.position = Vec3(1.7, 1.3, 2.2);
    cam.width = 48;
    cam.height = 40;
    const RayCastParams p = RayCastParams::with_t_max(5.0);
    const auto fr = cast_frustum_image(box(), cam, p, fixed);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) expect_matches_dense(box(), cam.ray(x, y), fr.at(x, y), p);
    }
}

TEST(Frustum, EmptySceneIsAllMissAndCheaper) {
    Camera cam = face_on(64);
    cam.position = Vec3(0, 0, 3);
    cam.look_at = Vec3(0, 0, 6);
    const RayCastParams p;
    const auto fr = cast_frustum_image(box(), cam, p, fixed);
    long per_pixel = 0;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            EXPECT_FALSE(fr.at(x, y).hit);
            per_pixel += cast_ray(box(), cam.ray(x, y), p, fixed).steps;
        }
    }
    EXPECT_LE(fr.total_steps(), per_pixel);
    double amortized = 0;
    for (const double s : fr.amortized_steps) amortized += s;
    EXPECT_NEAR(amortized, static_cast<double>(fr.total_steps()), 1e-6 * fr.total_steps());
}

TEST(Frustum, OddResolutions) {
    for (const auto& [w, h] : {std::pair{1, 1}, std::pair{7, 3}, std::pair{33, 17}}) {
        Camera cam = face_on(1);
        cam.width = w;
        cam.height = h;
        const RayCastParams p;
        const auto fr = cast_frustum_image(box(), cam, p, fixed);
        ASSERT_EQ(fr.hits.size(), static_cast<std::size_t>(w * h));
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) EXPECT_EQ(fr.at(x, y).hit, cast_ray(box(), cam.ray(x, y), p, fixed).hit);
        }
    }
}
