#include "doctest.h"

#include <numbers>

#include "brdfnet/error.hpp"
#include "brdfnet/ward.hpp"
#include "oracles.hpp"

using namespace brdfnet;
using brdfnet::testing::random_material;

namespace {

Vec3 random_direction(Rng& rng) {
    for (;;) {
        Vec3 d = testing::uniform_hemisphere(rng);
        if (d.z() > 1e-3) return d;
    }
}

Vec3 rotate_z(const Vec3& v, double angle) {
    return Eigen::AngleAxisd(angle, Vec3::UnitZ()) * v;
}

}  // namespace

TEST_CASE("pure diffuse Ward is rho_d / pi") {
    WardBRDF m{Vec3(0.6, 0.3, 0.1), 0.0, 0.4};
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const Rgb f = eval_ward(random_direction(rng), random_direction(rng), m);
        CHECK(f(0) == doctest::Approx(0.6 / std::numbers::pi).epsilon(1e-14));
        CHECK(f(1) == doctest::Approx(0.3 / std::numbers::pi).epsilon(1e-14));
        CHECK(f(2) == doctest::Approx(0.1 / std::numbers::pi).epsilon(1e-14));
    }
}

TEST_CASE("specular peak at normal incidence") {
    WardBRDF m{Vec3::Zero(), 0.2, 0.1};
    const Rgb f = eval_ward(Vec3::UnitZ(), Vec3::UnitZ(), m);
    for (int c = 0; c < 3; ++c) CHECK(f(c) == doctest::Approx(1.59154943091895335).epsilon(1e-12));
}

TEST_CASE("grazing directions are rejected") {
    WardBRDF m{Vec3::Constant(0.5), 0.1, 0.2};
    CHECK_THROWS_AS(eval_ward(Vec3(1, 0, 0), Vec3::UnitZ(), m), Error);
    CHECK_THROWS_AS(eval_ward(Vec3::UnitZ(), Vec3(0, 1, -0.1).normalized(), m), Error);
}

TEST_CASE("Ward symmetry and isotropy") {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        const WardBRDF m = random_material(rng);
        const Vec3 wi = random_direction(rng), wo = random_direction(rng);
        const Rgb f = eval_ward(wi, wo, m);
        CHECK((f - eval_ward(wo, wi, m)).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, f.maxCoeff()));
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const Rgb g = eval_ward(rotate_z(wi, angle), rotate_z(wo, angle), m);
        CHECK((f - g).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, f.maxCoeff()));
        CHECK((f.array() >= 0.0).all());
    }
}

TEST_CASE("diffuse energy: cosine-weighted hemisphere integral equals rho_d") {
    Rng rng(11);
    for (int i = 0; i < 5; ++i) {
        WardBRDF m = random_material(rng);
        m.rho_s = 0.0;
        const Rgb albedo = testing::directional_albedo(m, random_direction(rng), 100, 100);
        CHECK((albedo - m.rho_d).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("perceptual coordinates") {
    SUBCASE("black non-glossy has zero contrast") {
        CHECK(to_perceptual(WardBRDF{Vec3::Zero(), 0.0, 0.5}).c == 0.0);
    }
    SUBCASE("alpha = 1 gives d = 0") {
        CHECK(to_perceptual(WardBRDF{Vec3::Constant(0.3), 0.1, 1.0}).d == 0.0);
    }
    SUBCASE("contrast at luminance 0.5") {
        const auto p = to_perceptual(WardBRDF{Vec3::Constant(0.5), 0.1, 0.3});
        CHECK(p.c == doctest::Approx(0.07476934825905261).epsilon(1e-12));
        CHECK(p.d == doctest::Approx(0.7));
    }
    SUBCASE("inverse recovers rho_s from contrast") {
        PerceptualBRDF p = to_perceptual(WardBRDF{Vec3::Constant(0.5), 0.0, 0.5});
        p.c = 0.0748;
        const WardBRDF w = from_perceptual(p);
        CHECK(w.rho_s == doctest::Approx(0.10004567101392171).epsilon(1e-9));
        CHECK(luminance<double>(w.rho_d) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("d = 0 gives alpha = 1") {
        PerceptualBRDF p = to_perceptual(WardBRDF{Vec3::Constant(0.2), 0.1, 0.4});
        p.d = 0.0;
        CHECK(from_perceptual(p).alpha == 1.0);
    }
    SUBCASE("negative implied rho_s is clamped and flagged") {
        PerceptualBRDF p = to_perceptual(WardBRDF{Vec3::Constant(0.5), 0.0, 0.5});
        p.c = -0.05;
        bool clamped = false;
        CHECK(from_perceptual(p, &clamped).rho_s == 0.0);
        CHECK(clamped);
    }
    SUBCASE("fixed roundtrip example") {
        const WardBRDF w{Vec3(0.2, 0.4, 0.6), 0.05, 0.3};
        const WardBRDF r = from_perceptual(to_perceptual(w));
        CHECK((r.rho_d - w.rho_d).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(std::abs(r.rho_s - w.rho_s) < 1e-9);
        CHECK(std::abs(r.alpha - w.alpha) < 1e-9);
    }
}

TEST_CASE("perceptual roundtrip on random materials") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const WardBRDF w = random_material(rng);
        bool clamped = true;
        const WardBRDF r = from_perceptual(to_perceptual(w), &clamped);
        REQUIRE((r.rho_d - w.rho_d).cwiseAbs().maxCoeff() < 1e-9);
        REQUIRE(std::abs(r.rho_s - w.rho_s) < 1e-9);
        REQUIRE(std::abs(r.alpha - w.alpha) < 1e-9);
        CHECK(to_perceptual(w).c >= 0.0);
    }
}

TEST_CASE("Lab conversion") {
    const Vec3 white = rgb_to_lab<double>(Vec3::Ones());
    CHECK(white(0) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(std::abs(white(1)) < 1e-9);
    CHECK(std::abs(white(2)) < 1e-9);
    const Vec3 black = rgb_to_lab<double>(Vec3::Zero());
    CHECK(black.cwiseAbs().maxCoeff() < 1e-12);
    // 116 * 0.5^(1/3) - 16; matches skimage's rgb2lab on the same gray.
    const Vec3 gray = rgb_to_lab<double>(Vec3::Constant(0.5));
    CHECK(gray(0) == doctest::Approx(76.06926101415557).epsilon(1e-10));
    CHECK(std::abs(gray(1)) < 1e-9);
    CHECK(std::abs(gray(2)) < 1e-9);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Vec3 rgb(rng.uniform(), rng.uniform(), rng.uniform());
        CHECK((lab_to_rgb<double>(rgb_to_lab<double>(rgb)) - rgb).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("metric parsing") {
    CHECK(parse_metric("rmse1") == Metric::Rmse1);
    CHECK(parse_metric("cuberoot") == Metric::CubeRoot);
    CHECK_THROWS_AS(parse_metric("l2"), Error);
}

TEST_CASE("BRDF distances") {
    const WardBRDF a{Vec3(0.5, 0.4, 0.3), 0.1, 0.3};
    SUBCASE("identity") {
        for (Metric m : {Metric::Rmse1, Metric::Rmse2, Metric::CubeRoot}) CHECK(brdf_distance(a, a, m) == 0.0);
    }
    SUBCASE("RMSE1 diffuse offset") {
        WardBRDF b = a;
        b.rho_d(0) += 0.1;
        CHECK(brdf_distance(a, b, Metric::Rmse1) == doctest::Approx(0.01).epsilon(1e-12));
    }
    SUBCASE("CubeRoot between diffuse BRDFs is closed form") {
        const WardBRDF d1{Vec3(0.5, 0.4, 0.3), 0.0, 0.5};
        const WardBRDF d2{Vec3(0.6, 0.5, 0.4), 0.0, 0.5};
        const double delta = (d1.rho_d - d2.rho_d).norm();
        const double integral = delta / std::numbers::pi * 2.0 * std::numbers::pi * std::numbers::pi;
        const double expected = std::cbrt(integral + kCubeRootEpsilon) - std::cbrt(kCubeRootEpsilon);
        const double got = brdf_distance(d1, d2, Metric::CubeRoot);
        CHECK(got == doctest::Approx(expected).epsilon(1e-12));
        CHECK(got == doctest::Approx(testing::monte_carlo_cube_root(d1, d2, 200000, 9)).epsilon(0.02));
    }
    SUBCASE("axioms on random pairs") {
        Rng rng(13);
        for (int i = 0; i < 20; ++i) {
            const WardBRDF x = random_material(rng), y = random_material(rng);
            for (Metric m : {Metric::Rmse1, Metric::Rmse2, Metric::CubeRoot}) {
                const double dxy = brdf_distance(x, y, m), dyx = brdf_distance(y, x, m);
                CHECK(dxy > 0.0);
                CHECK(dxy == doctest::Approx(dyx).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("CubeRoot quadrature agrees with Monte Carlo") {
    Rng rng(17);
    for (int i = 0; i < 3; ++i) {
        const WardBRDF x = random_material(rng, 0.25), y = random_material(rng, 0.25);
        const double q = brdf_distance(x, y, Metric::CubeRoot);
        const double mc = testing::monte_carlo_cube_root(x, y, 400000, 100 + i);
        CHECK(std::abs(q - mc) / mc < 0.02);
    }
}

TEST_CASE("pair grid collapses azimuth pairs exactly") {
    // The reduced table must reproduce the full n^2 x n^2 double sum.
    const int n = 6;
    const WardBRDF x{Vec3(0.3, 0.2, 0.1), 0.3, 0.3}, y{Vec3(0.1, 0.2, 0.5), 0.05, 0.6};
    const HemisphereGrid g = hemisphere_grid(n);
    double full = 0.0;
    for (const Vec3& wi : g.directions)
        for (const Vec3& wo : g.directions)
            full += (eval_ward(wi, wo, x) - eval_ward(wi, wo, y)).norm() * wi.z() * g.solid_angle * g.solid_angle;
    const double expected = std::cbrt(full + kCubeRootEpsilon) - std::cbrt(kCubeRootEpsilon);
    CHECK(cube_root_distance(x, y, pair_grid(n)) == doctest::Approx(expected).epsilon(1e-10));
}
