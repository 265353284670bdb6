#include <map>
#include <mutex>

#include "brdfnet/error.hpp"
#include "brdfnet/ward.hpp"

namespace brdfnet {

Metric parse_metric(std::string_view name) {
    if (name == "rmse1") return Metric::Rmse1;
    if (name == "rmse2") return Metric::Rmse2;
    if (name == "cuberoot") return Metric::CubeRoot;
    throw Error("config", "unknown metric '" + std::string(name) + "' (expected rmse1, rmse2 or cuberoot)");
}

std::string_view metric_name(Metric metric) {
    switch (metric) {
        case Metric::Rmse1: return "rmse1";
        case Metric::Rmse2: return "rmse2";
        case Metric::CubeRoot: return "cuberoot";
    }
    return "?";
}

bool is_valid(const WardBRDF& brdf) {
    return (brdf.rho_d.array() >= 0.0).all() && (brdf.rho_d.array() <= 1.0).all() &&
           brdf.rho_s >= 0.0 && brdf.rho_s <= 1.0 && brdf.alpha > 0.0 && brdf.alpha <= 1.0;
}

Rgb eval_ward(const Vec3& w_i, const Vec3& w_o, const WardBRDF& brdf) {
    require(w_i.z() >= kMinDirectionCos && w_o.z() >= kMinDirectionCos, "invalid-direction",
            "eval_ward: direction at or below the horizon");
    require(brdf.alpha > 0.0, "invalid-brdf", "eval_ward: alpha must be positive");
    return eval_ward_unchecked(w_i.normalized(), w_o.normalized(), brdf);
}

PerceptualBRDF to_perceptual(const WardBRDF& brdf) { return perceptual_from_ward(brdf); }

WardBRDF from_perceptual(const PerceptualBRDF& p, bool* clamped) {
    WardBRDF w = ward_from_perceptual(p);
    const bool negative = w.rho_s < 0.0;
    if (negative) w.rho_s = 0.0;
    if (clamped) *clamped = negative;
    return w;
}

Vec5 to_vector(const WardBRDF& brdf) {
    Vec5 v;
    v << brdf.rho_d, brdf.rho_s, brdf.alpha;
    return v;
}

Vec5 to_vector(const PerceptualBRDF& p) {
    Vec5 v;
    v << p.lab, p.c, p.d;
    return v;
}

WardBRDF ward_from_vector(const Vec5& v) {
    return {v.head<3>(), v(3), v(4)};
}

PerceptualBRDF perceptual_from_vector(const Vec5& v) {
    return {v.head<3>(), v(3), v(4)};
}

HemisphereGrid hemisphere_grid(int n) {
    require(n >= 1, "config", "hemisphere_grid: n must be positive");
    HemisphereGrid grid;
    grid.solid_angle = 2.0 * std::numbers::pi / (double(n) * n);
    grid.directions.reserve(std::size_t(n) * n);
    for (int t = 0; t < n; ++t) {
        const double z = (t + 0.5) / n;
        const double s = std::sqrt(1.0 - z * z);
        for (int p = 0; p < n; ++p) {
            const double phi = 2.0 * std::numbers::pi * (p + 0.5) / n;
            grid.directions.emplace_back(s * std::cos(phi), s * std::sin(phi), z);
        }
    }
    return grid;
}

namespace {

PairGrid build_pair_grid(int n) {
    PairGrid g;
    g.n = n;
    const double d_omega = 2.0 * std::numbers::pi / (double(n) * n);
    // phi_i - phi_o takes each multiple of 2*pi/n exactly n times.
    const double w_pair = d_omega * d_omega * n;
    for (int ti = 0; ti < n; ++ti) {
        const double zi = (ti + 0.5) / n;
        const Vec3 wi(std::sqrt(1.0 - zi * zi), 0.0, zi);
        for (int to = 0; to < n; ++to) {
            const double zo = (to + 0.5) / n;
            const double so = std::sqrt(1.0 - zo * zo);
            for (int dp = 0; dp < n; ++dp) {
                const double phi = 2.0 * std::numbers::pi * dp / n;
                const Vec3 wo(so * std::cos(phi), so * std::sin(phi), zo);
                g.cos_i.push_back(zi);
                g.cos_o.push_back(zo);
                g.tan2_h.push_back(half_angle_tan2(wi, wo));
                g.weight.push_back(w_pair * zi);
            }
        }
    }
    return g;
}

}  // namespace

const PairGrid& pair_grid(int n) {
    require(n >= 1, "config", "pair_grid: n must be positive");
    static std::mutex mutex;
    static std::map<int, PairGrid> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_pair_grid(n)).first;
    return it->second;
}

double brdf_distance(const WardBRDF& a, const WardBRDF& b, Metric metric, int cube_root_grid,
                     double lambda_g) {
    switch (metric) {
        case Metric::Rmse1: return rmse1_distance(a, b);
        case Metric::Rmse2: return rmse2_distance(to_perceptual(a), to_perceptual(b), lambda_g);
        case Metric::CubeRoot: return cube_root_distance(a, b, pair_grid(cube_root_grid));
    }
    throw Error("config", "brdf_distance: unknown metric");
}

}  // namespace brdfnet
