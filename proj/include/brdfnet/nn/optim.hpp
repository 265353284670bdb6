#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Core>

#include "brdfnet/error.hpp"
#include "brdfnet/nn/tensor.hpp"

namespace brdfnet::nn {

template <class S>
void require_finite_grads(const ParamList<S>& params) {
    for (const auto& p : params)
        require(p.grad->allFinite(), "non-finite-gradient", "non-finite gradient in " + p.name + "; step aborted");
}

/// s <- beta*s + (1-beta)*g^2;  p <- p - lr*g/(sqrt(s) + eps)
template <class S>
struct RmsProp {
    double lr = 1e-4, beta = 0.9, eps = 1e-8;
    std::vector<Matrix<S>> state;

    void step(const ParamList<S>& params) {
        require_finite_grads(params);
        if (state.empty())
            for (const auto& p : params) state.push_back(Matrix<S>::Zero(p.value->rows(), p.value->cols()));
        require(state.size() == params.size(), "shape", "optimizer state does not match parameters");
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& s = state[i];
            const auto& g = *params[i].grad;
            s = S(beta) * s + S(1.0 - beta) * g.cwiseAbs2();
            params[i].value->array() -= S(lr) * g.array() / (s.array().sqrt() + S(eps));
        }
    }
};

/// v <- momentum*v - lr*g;  p <- p + v
template <class S>
struct SgdMomentum {
    double lr = 1e-2, momentum = 0.9;
    std::vector<Matrix<S>> state;

    void step(const ParamList<S>& params) {
        require_finite_grads(params);
        if (state.empty())
            for (const auto& p : params) state.push_back(Matrix<S>::Zero(p.value->rows(), p.value->cols()));
        require(state.size() == params.size(), "shape", "optimizer state does not match parameters");
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& v = state[i];
            v = S(momentum) * v - S(lr) * *params[i].grad;
            *params[i].value += v;
        }
    }
};

/// Max elementwise relative error between `analytic` and central differences of f at x.
inline double grad_check(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& analytic, double h = 1e-5) {
    require(analytic.size() == x.size(), "shape", "grad_check: gradient size mismatch");
    double worst = 0.0;
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + h;
        const double up = f(probe);
        probe(i) = x(i) - h;
        const double down = f(probe);
        probe(i) = x(i);
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
    }
    return worst;
}

/// Flattens every parameter (or gradient) into one vector in list order.
template <class S>
Eigen::VectorXd flatten(const ParamList<S>& params, bool gradients) {
    Eigen::VectorXd out(parameter_count(params));
    Eigen::Index k = 0;
    for (const auto& p : params) {
        const Matrix<S>& m = gradients ? *p.grad : *p.value;
        for (Eigen::Index i = 0; i < m.size(); ++i) out(k++) = double(m.data()[i]);
    }
    return out;
}

template <class S>
void unflatten(const ParamList<S>& params, const Eigen::VectorXd& values) {
    require(values.size() == parameter_count(params), "shape", "unflatten: size mismatch");
    Eigen::Index k = 0;
    for (const auto& p : params)
        for (Eigen::Index i = 0; i < p.value->size(); ++i) p.value->data()[i] = S(values(k++));
}

}  // namespace brdfnet::nn
