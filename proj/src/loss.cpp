#include "brdfnet/loss.hpp"

#include "brdfnet/error.hpp"

namespace brdfnet {

Parameterization parameterization_for(Metric metric) {
    return metric == Metric::Rmse2 ? Parameterization::Perceptual : Parameterization::Physical;
}

std::string_view parameterization_name(Parameterization p) {
    return p == Parameterization::Physical ? "physical" : "perceptual";
}

Parameterization parse_parameterization(std::string_view name) {
    if (name == "physical") return Parameterization::Physical;
    if (name == "perceptual") return Parameterization::Perceptual;
    throw Error("config", "unknown parameterization '" + std::string(name) + "'");
}

LossConfig LossConfig::for_metric(Metric metric, double lambda) {
    LossConfig c;
    c.metric = metric;
    c.parameterization = parameterization_for(metric);
    c.lambda = lambda;
    return c;
}

void LossConfig::validate() const {
    require(lambda >= 0.0, "config", "lambda must be non-negative");
    require(lambda_g >= 0.0, "config", "lambda_g must be non-negative");
    require(cube_root_grid >= 2, "config", "cube_root_grid must be at least 2");
    require(alpha_guard > 0.0, "config", "alpha_guard must be positive");
    require(parameterization == parameterization_for(metric), "config",
            std::string(metric_name(metric)) + " requires the " +
                std::string(parameterization_name(parameterization_for(metric))) + " parameterization");
}

Vec5 target_vector(const WardBRDF& target, Parameterization p) {
    return p == Parameterization::Physical ? to_vector(target) : to_vector(to_perceptual(target));
}

LossValue loss_total(const Vec5& prediction, const WardBRDF& target, const std::vector<ViewStats>& views,
                     const LossConfig& cfg) {
    cfg.validate();
    Eigen::Matrix<Dual5, 5, 1> x;
    for (int i = 0; i < 5; ++i) x(i) = Dual5(prediction(i), 5, i);

    Dual5 e_d;
    switch (cfg.metric) {
        case Metric::Rmse1: e_d = rmse1_distance(target, physical_from(x, Parameterization::Physical)); break;
        case Metric::Rmse2:
            e_d = rmse2_distance(to_perceptual(target), BasicPerceptual<Dual5>{x.head<3>(), x(3), x(4)}, cfg.lambda_g);
            break;
        case Metric::CubeRoot: {
            BasicWard<Dual5> pred = physical_from(x, Parameterization::Physical);
            pred.alpha = guard_alpha(pred.alpha, cfg.alpha_guard);
            e_d = cube_root_distance(target, pred, pair_grid(cfg.cube_root_grid));
            break;
        }
    }
    LossValue out;
    out.e_d = e_d.value();
    Dual5 total = e_d;
    if (cfg.lambda > 0.0) {
        const Dual5 e_c = loss_ec(physical_from(x, cfg.parameterization), views);
        out.e_c = e_c.value();
        total += cfg.lambda * e_c;
    } else {
        out.e_c = loss_ec(physical_from<double>(prediction, cfg.parameterization), views);
    }
    out.total = total.value();
    out.grad = total.derivatives();
    if (out.grad.size() != 5) out.grad = Vec5::Zero();
    return out;
}

}  // namespace brdfnet
