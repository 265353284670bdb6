#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <numbers>

#include "brdfnet/random.hpp"
#include "brdfnet/ward.hpp"

namespace brdfnet::testing {

inline Vec3 uniform_hemisphere(Rng& rng) {
    const double z = rng.uniform();
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
}

// Monte-Carlo estimate of the CubeRoot integrand over both hemispheres,
// using eval_ward on uniformly drawn direction pairs.
inline double monte_carlo_cube_root(const WardBRDF& a, const WardBRDF& b, long samples,
                                    std::uint64_t seed) {
    Rng rng(seed);
    double sum = 0.0;
    for (long s = 0; s < samples; ++s) {
        Vec3 wi = uniform_hemisphere(rng), wo = uniform_hemisphere(rng);
        if (wi.z() < kMinDirectionCos || wo.z() < kMinDirectionCos) continue;
        sum += (eval_ward(wi, wo, a) - eval_ward(wi, wo, b)).norm() * wi.z();
    }
    const double pdf_inv = 2.0 * std::numbers::pi * 2.0 * std::numbers::pi;
    return std::cbrt(sum / double(samples) * pdf_inv);
}

// Material drawn like the dataset generator does by default.
inline WardBRDF random_material(Rng& rng, double alpha_min = 0.03, double alpha_max = 1.0,
                                double rho_s_max = 0.5) {
    for (;;) {
        WardBRDF m;
        m.rho_d = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
        m.rho_s = rng.uniform(0.0, rho_s_max);
        m.alpha = rng.uniform(alpha_min, alpha_max);
        if (luminance<double>(m.rho_d) + m.rho_s <= 1.0) return m;
    }
}

// Hemisphere integral of f(w_i, w_o) cos(theta_o) d(w_o) by a product
// midpoint rule in (theta, phi).
inline Rgb directional_albedo(const WardBRDF& m, const Vec3& w_i, int n_theta = 400, int n_phi = 400) {
    Rgb sum = Rgb::Zero();
    const double dt = 0.5 * std::numbers::pi / n_theta, dp = 2.0 * std::numbers::pi / n_phi;
    for (int t = 0; t < n_theta; ++t) {
        const double th = (t + 0.5) * dt;
        for (int p = 0; p < n_phi; ++p) {
            const double ph = (p + 0.5) * dp;
            const Vec3 wo(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
            sum += eval_ward(w_i, wo, m) * std::cos(th) * std::sin(th) * dt * dp;
        }
    }
    return sum;
}

}  // namespace brdfnet::testing
