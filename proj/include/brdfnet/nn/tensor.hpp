#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace brdfnet::nn {

/// Row-major dense storage. Image batches are laid out as (images * H * W) x C, pixels in scan order.
template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;

/// Named view of one trainable tensor and its gradient accumulator.
template <class S>
struct ParamRef {
    std::string name;
    Matrix<S>* value;
    Matrix<S>* grad;
};

template <class S>
using ParamList = std::vector<ParamRef<S>>;

template <class S>
Eigen::Index parameter_count(const ParamList<S>& params) {
    Eigen::Index n = 0;
    for (const auto& p : params) n += p.value->size();
    return n;
}

template <class S>
void zero_grad(const ParamList<S>& params) {
    for (const auto& p : params) p.grad->setZero();
}

}  // namespace brdfnet::nn
