#pragma once

#include <cmath>
#include <numbers>
#include <string_view>
#include <vector>

#include "brdfnet/autodiff.hpp"
#include "brdfnet/color.hpp"
#include "brdfnet/types.hpp"

namespace brdfnet {

/// Isotropic Ward parameters. rho_s is a single gloss value broadcast over
/// the color channels.
template <typename Scalar>
struct BasicWard {
    Vector3<Scalar> rho_d = Vector3<Scalar>::Zero();
    Scalar rho_s = Scalar(0);
    Scalar alpha = Scalar(1);
};

/// (L, a, b) of the diffuse albedo plus gloss contrast c and distinctness d.
template <typename Scalar>
struct BasicPerceptual {
    Vector3<Scalar> lab = Vector3<Scalar>::Zero();
    Scalar c = Scalar(0);
    Scalar d = Scalar(0);
};

using WardBRDF = BasicWard<double>;
using PerceptualBRDF = BasicPerceptual<double>;

enum class Metric { Rmse1, Rmse2, CubeRoot };

Metric parse_metric(std::string_view name);
std::string_view metric_name(Metric metric);

bool is_valid(const WardBRDF& brdf);

// Cosines below this are floored inside the specular denominator.
inline constexpr double kGrazingCosFloor = 1e-4;
// eval_ward rejects directions closer to the horizon than this.
inline constexpr double kMinDirectionCos = 1e-6;

/// Specular lobe of the Ward model without the rho_s factor.
template <typename Scalar>
Scalar ward_lobe(double cos_i, double cos_o, double tan2_h, const Scalar& alpha) {
    using std::exp;
    const double denom_cos = std::sqrt(std::max(cos_i, kGrazingCosFloor) *
                                       std::max(cos_o, kGrazingCosFloor));
    const Scalar a2 = alpha * alpha;
    return exp(-tan2_h / a2) / (4.0 * std::numbers::pi * a2 * denom_cos);
}

/// tan^2 of the angle between the normal (+z) and the half vector.
inline double half_angle_tan2(const Vec3& w_i, const Vec3& w_o) {
    const Vec3 h = w_i + w_o;
    const double hz2 = h.z() * h.z();
    const double hxy2 = h.x() * h.x() + h.y() * h.y();
    return hxy2 / hz2;
}

/// Ward BRDF for local-frame directions (normal = +z). Throws
/// Error("invalid-direction") for directions at or below the horizon.
Rgb eval_ward(const Vec3& w_i, const Vec3& w_o, const WardBRDF& brdf);

/// Same value without argument checks; cosines are floored per kGrazingCosFloor.
inline Rgb eval_ward_unchecked(const Vec3& w_i, const Vec3& w_o, const WardBRDF& brdf) {
    const double spec =
        brdf.rho_s * ward_lobe(w_i.z(), w_o.z(), half_angle_tan2(w_i, w_o), brdf.alpha);
    return (brdf.rho_d / std::numbers::pi).array() + spec;
}

template <typename Scalar>
BasicPerceptual<Scalar> perceptual_from_ward(const BasicWard<Scalar>& w) {
    BasicPerceptual<Scalar> p;
    p.lab = rgb_to_lab<Scalar>(w.rho_d);
    const Scalar half_y = luminance<Scalar>(w.rho_d) / 2.0;
    p.c = cube_root(Scalar(w.rho_s + half_y)) - cube_root(half_y);
    p.d = 1.0 - w.alpha;
    return p;
}

/// Algebraic inverse of perceptual_from_ward; rho_s may come out negative.
template <typename Scalar>
BasicWard<Scalar> ward_from_perceptual(const BasicPerceptual<Scalar>& p) {
    BasicWard<Scalar> w;
    w.rho_d = lab_to_rgb<Scalar>(p.lab);
    const Scalar half_y = luminance<Scalar>(w.rho_d) / 2.0;
    const Scalar root = p.c + cube_root(half_y);
    w.rho_s = root * root * root - half_y;
    w.alpha = 1.0 - p.d;
    return w;
}

PerceptualBRDF to_perceptual(const WardBRDF& brdf);

/// Inverse of to_perceptual. A contrast implying rho_s < 0 is clamped to 0
/// and reported through `clamped`.
WardBRDF from_perceptual(const PerceptualBRDF& p, bool* clamped = nullptr);

Vec5 to_vector(const WardBRDF& brdf);
Vec5 to_vector(const PerceptualBRDF& p);
WardBRDF ward_from_vector(const Vec5& v);
PerceptualBRDF perceptual_from_vector(const Vec5& v);

/// Equal-solid-angle grid over the upper hemisphere: midpoints of `n`
/// uniform bins in cos(theta) times `n` uniform bins in phi.
struct HemisphereGrid {
    std::vector<Vec3> directions;
    double solid_angle = 0.0;  // per cell, 2*pi / n^2
};

HemisphereGrid hemisphere_grid(int n);

/// Direction pairs of the CubeRoot quadrature. Because the Ward model is
/// isotropic and the phi bins are uniform, the n^2 x n^2 pairs collapse to
/// n^3 distinct (theta_i, theta_o, phi_i - phi_o) classes; `weight` carries
/// the multiplicity, both solid angles and the cos(theta_i) factor.
struct PairGrid {
    int n = 0;
    std::vector<double> cos_i, cos_o, tan2_h, weight;
};

const PairGrid& pair_grid(int n);

inline constexpr double kCubeRootEpsilon = 1e-12;
inline constexpr int kCubeRootGrid = 16;

template <typename Scalar>
Scalar rmse1_distance(const WardBRDF& target, const BasicWard<Scalar>& pred) {
    Scalar e = (pred.rho_d - target.rho_d.cast<Scalar>()).squaredNorm();
    const Scalar ds = pred.rho_s - target.rho_s;
    const Scalar da = pred.alpha - target.alpha;
    return e + ds * ds + da * da;
}

template <typename Scalar>
Scalar rmse2_distance(const PerceptualBRDF& target, const BasicPerceptual<Scalar>& pred,
                      double lambda_g = 1.0) {
    const Scalar dlab = (pred.lab - target.lab.cast<Scalar>()).squaredNorm();
    const Scalar dc = pred.c - target.c;
    const Scalar dd = pred.d - target.d;
    return dlab + lambda_g * (dc * dc + dd * dd);
}

/// Cube root of the cosine-weighted integral of |f - f_hat| (Euclidean over
/// RGB) over both hemispheres, shifted so that identical BRDFs give 0.
template <typename Scalar>
Scalar cube_root_distance(const WardBRDF& target, const BasicWard<Scalar>& pred,
                          const PairGrid& grid) {
    const Vector3<Scalar> d_diffuse =
        (target.rho_d.cast<Scalar>() - pred.rho_d) / std::numbers::pi;
    Scalar integral(0);
    for (std::size_t k = 0; k < grid.weight.size(); ++k) {
        const double ci = grid.cos_i[k], co = grid.cos_o[k], t2 = grid.tan2_h[k];
        const Scalar d_spec =
            target.rho_s * ward_lobe(ci, co, t2, target.alpha) - pred.rho_s * ward_lobe(ci, co, t2, pred.alpha);
        Scalar sq(0);
        for (int c = 0; c < 3; ++c) {
            const Scalar diff = d_diffuse(c) + d_spec;
            sq += diff * diff;
        }
        integral += grid.weight[k] * safe_sqrt(sq);
    }
    return cube_root(Scalar(integral + kCubeRootEpsilon)) - std::cbrt(kCubeRootEpsilon);
}

double brdf_distance(const WardBRDF& a, const WardBRDF& b, Metric metric,
                     int cube_root_grid = kCubeRootGrid, double lambda_g = 1.0);

}  // namespace brdfnet
