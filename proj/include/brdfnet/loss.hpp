#pragma once

#include <string>
#include <vector>

#include "brdfnet/autodiff.hpp"
#include "brdfnet/color.hpp"
#include "brdfnet/ward.hpp"

namespace brdfnet {

enum class Parameterization { Physical, Perceptual };

Parameterization parameterization_for(Metric metric);
std::string_view parameterization_name(Parameterization p);
Parameterization parse_parameterization(std::string_view name);

struct LossConfig {
    Metric metric = Metric::Rmse1;
    Parameterization parameterization = Parameterization::Physical;
    double lambda = 0.01;
    double lambda_g = 1.0;
    int cube_root_grid = 8;
    // Lower guard on the predicted roughness inside the cube-root loss.
    double alpha_guard = 0.01;

    static LossConfig for_metric(Metric metric, double lambda = 0.01);
    void validate() const;
};

/// Per-view mean foreground and background colours (8-bit display values in [0, 1]).
struct ViewStats {
    Rgb f_bar;
    Rgb b_bar;
};

/// sum_i |(rho_d + rho_s) * B_i^gamma - F_i^gamma|^2, rho_s broadcast over channels.
template <typename Scalar>
Scalar loss_ec(const BasicWard<Scalar>& pred, const std::vector<ViewStats>& views) {
    Scalar total(0);
    for (const ViewStats& v : views)
        for (int c = 0; c < 3; ++c) {
            const Scalar r = (pred.rho_d(c) + pred.rho_s) * std::pow(v.b_bar(c), kGamma) - std::pow(v.f_bar(c), kGamma);
            total += r * r;
        }
    return total;
}

/// Physical BRDF implied by a prediction vector in the given parameterization.
template <typename Scalar>
BasicWard<Scalar> physical_from(const Eigen::Matrix<Scalar, 5, 1>& v, Parameterization p) {
    if (p == Parameterization::Physical) return {v.template head<3>(), v(3), v(4)};
    return ward_from_perceptual(BasicPerceptual<Scalar>{v.template head<3>(), v(3), v(4)});
}

/// Identity above 2*guard, guard * (1 + exp(a / guard - 2)) below: C1, increasing, never below guard.
template <typename Scalar>
Scalar guard_alpha(const Scalar& alpha, double guard) {
    using std::exp;
    if (value_of(alpha) >= 2.0 * guard) return alpha;
    return guard * (1.0 + exp(alpha / guard - 2.0));
}

struct LossValue {
    double total = 0.0;
    double e_d = 0.0;
    double e_c = 0.0;
    Vec5 grad = Vec5::Zero();  // d total / d prediction
};

/// J = E_d + lambda * E_c for a prediction vector in the configured parameterization.
LossValue loss_total(const Vec5& prediction, const WardBRDF& target, const std::vector<ViewStats>& views,
                     const LossConfig& cfg);

/// Target expressed in the parameterization the loss operates on.
Vec5 target_vector(const WardBRDF& target, Parameterization p);

}  // namespace brdfnet
