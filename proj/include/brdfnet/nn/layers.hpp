#pragma once

#include <cmath>
#include <vector>

#include "brdfnet/error.hpp"
#include "brdfnet/nn/tensor.hpp"
#include "brdfnet/random.hpp"

namespace brdfnet::nn {

// ---- fully connected ----------------------------------------------------

template <class S>
Matrix<S> fc_forward(const Matrix<S>& x, const Matrix<S>& w, const Matrix<S>& b) {
    require(x.cols() == w.rows() && b.rows() == 1 && b.cols() == w.cols(), "shape", "fc: dimension mismatch");
    Matrix<S> y = x * w;
    y.rowwise() += b.row(0);
    return y;
}

/// Same as fc_forward, with the product evaluated in row blocks of fixed height. Each
/// block's output then depends only on that block, not on how many blocks are stacked.
template <class S>
Matrix<S> fc_forward_blocked(const Matrix<S>& x, const Matrix<S>& w, const Matrix<S>& b, Eigen::Index block) {
    require(x.cols() == w.rows() && b.rows() == 1 && b.cols() == w.cols(), "shape", "fc: dimension mismatch");
    require(block >= 1 && x.rows() % block == 0, "shape", "fc: rows are not a multiple of the block height");
    Matrix<S> y(x.rows(), w.cols());
    for (Eigen::Index r = 0; r < x.rows(); r += block) y.middleRows(r, block).noalias() = x.middleRows(r, block) * w;
    y.rowwise() += b.row(0);
    return y;
}

/// Accumulates into dw and db; writes the input gradient to dx when given.
template <class S>
void fc_backward(const Matrix<S>& x, const Matrix<S>& w, const Matrix<S>& dy, Matrix<S>* dx, Matrix<S>& dw,
                 Matrix<S>& db) {
    require(dy.rows() == x.rows() && dy.cols() == w.cols(), "shape", "fc backward: dimension mismatch");
    dw.noalias() += x.transpose() * dy;
    db.row(0) += dy.colwise().sum();
    if (dx) *dx = dy * w.transpose();
}

// ---- 3x3 convolution, zero same-padding ----------------------------------

/// Gathers 3x3 neighbourhoods: (images*H*W) x (9*C), column order (ky, kx, channel).
template <class S>
Matrix<S> im2col3x3(const Matrix<S>& x, Eigen::Index height, Eigen::Index width) {
    const Eigen::Index hw = height * width, c = x.cols();
    require(height >= 3 && width >= 3 && x.rows() % hw == 0, "shape", "conv3x3: bad input shape");
    const Eigen::Index images = x.rows() / hw;
    Matrix<S> cols = Matrix<S>::Zero(x.rows(), 9 * c);
    for (Eigen::Index n = 0; n < images; ++n)
        for (Eigen::Index i = 0; i < height; ++i)
            for (Eigen::Index j = 0; j < width; ++j) {
                const Eigen::Index row = n * hw + i * width + j;
                for (int ky = 0; ky < 3; ++ky) {
                    const Eigen::Index si = i + ky - 1;
                    if (si < 0 || si >= height) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const Eigen::Index sj = j + kx - 1;
                        if (sj < 0 || sj >= width) continue;
                        cols.block(row, (ky * 3 + kx) * c, 1, c) = x.row(n * hw + si * width + sj);
                    }
                }
            }
    return cols;
}

template <class S>
Matrix<S> col2im3x3(const Matrix<S>& cols, Eigen::Index height, Eigen::Index width) {
    const Eigen::Index hw = height * width, c = cols.cols() / 9;
    const Eigen::Index images = cols.rows() / hw;
    Matrix<S> x = Matrix<S>::Zero(cols.rows(), c);
    for (Eigen::Index n = 0; n < images; ++n)
        for (Eigen::Index i = 0; i < height; ++i)
            for (Eigen::Index j = 0; j < width; ++j) {
                const Eigen::Index row = n * hw + i * width + j;
                for (int ky = 0; ky < 3; ++ky) {
                    const Eigen::Index si = i + ky - 1;
                    if (si < 0 || si >= height) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const Eigen::Index sj = j + kx - 1;
                        if (sj < 0 || sj >= width) continue;
                        x.row(n * hw + si * width + sj) += cols.block(row, (ky * 3 + kx) * c, 1, c);
                    }
                }
            }
    return x;
}

/// Filters are stored as a (9*C_in) x C_out matrix matching the im2col column order.
template <class S>
Matrix<S> conv3x3_forward(const Matrix<S>& x, Eigen::Index height, Eigen::Index width, const Matrix<S>& filters,
                          const Matrix<S>& bias, Matrix<S>* cols_out = nullptr) {
    require(filters.rows() == 9 * x.cols(), "shape", "conv3x3: filter/channel mismatch");
    Matrix<S> cols = im2col3x3(x, height, width);
    Matrix<S> y = fc_forward_blocked(cols, filters, bias, height * width);
    if (cols_out) *cols_out = std::move(cols);
    return y;
}

template <class S>
void conv3x3_backward(const Matrix<S>& cols, Eigen::Index height, Eigen::Index width, const Matrix<S>& filters,
                      const Matrix<S>& dy, Matrix<S>* dx, Matrix<S>& dfilters, Matrix<S>& dbias) {
    Matrix<S> dcols;
    fc_backward(cols, filters, dy, dx ? &dcols : nullptr, dfilters, dbias);
    if (dx) *dx = col2im3x3(dcols, height, width);
}

// ---- pooling and activations ----------------------------------------------

/// 2x2 max pooling; argmax holds the source row per output element (first index wins ties).
template <class S>
Matrix<S> maxpool2x2_forward(const Matrix<S>& x, Eigen::Index height, Eigen::Index width,
                             std::vector<Eigen::Index>* argmax = nullptr) {
    require(height % 2 == 0 && width % 2 == 0, "shape", "maxpool2x2: odd spatial dimensions");
    const Eigen::Index hw = height * width, c = x.cols();
    require(x.rows() % hw == 0, "shape", "maxpool2x2: bad input shape");
    const Eigen::Index images = x.rows() / hw, oh = height / 2, ow = width / 2;
    Matrix<S> y(images * oh * ow, c);
    if (argmax) argmax->assign(std::size_t(y.size()), 0);
    for (Eigen::Index n = 0; n < images; ++n)
        for (Eigen::Index i = 0; i < oh; ++i)
            for (Eigen::Index j = 0; j < ow; ++j) {
                const Eigen::Index out = (n * oh + i) * ow + j;
                for (Eigen::Index ch = 0; ch < c; ++ch) {
                    Eigen::Index best = n * hw + 2 * i * width + 2 * j;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const Eigen::Index src = n * hw + (2 * i + dy) * width + 2 * j + dx;
                            if (x(src, ch) > x(best, ch)) best = src;
                        }
                    y(out, ch) = x(best, ch);
                    if (argmax) (*argmax)[std::size_t(out * c + ch)] = best;
                }
            }
    return y;
}

template <class S>
Matrix<S> maxpool2x2_backward(const Matrix<S>& dy, const std::vector<Eigen::Index>& argmax, Eigen::Index input_rows) {
    Matrix<S> dx = Matrix<S>::Zero(input_rows, dy.cols());
    for (Eigen::Index out = 0; out < dy.rows(); ++out)
        for (Eigen::Index ch = 0; ch < dy.cols(); ++ch)
            dx(argmax[std::size_t(out * dy.cols() + ch)], ch) += dy(out, ch);
    return dx;
}

template <class S>
Matrix<S> relu(const Matrix<S>& x) {
    return x.cwiseMax(S(0));
}

template <class S>
Matrix<S> relu_backward(const Matrix<S>& x, const Matrix<S>& dy) {
    return (x.array() > S(0)).select(dy, S(0));
}

template <class S>
Matrix<S> tanh(const Matrix<S>& x) {
    return x.array().tanh().matrix();
}

/// Gradient expressed through the activation output y = tanh(x).
template <class S>
Matrix<S> tanh_backward(const Matrix<S>& y, const Matrix<S>& dy) {
    return (dy.array() * (S(1) - y.array().square())).matrix();
}

// ---- set pooling over row groups -----------------------------------------

/// Element-wise max over consecutive groups of `group` rows. argmax[g*D + d] is the winning row.
template <class S>
Matrix<S> setmax_forward(const Matrix<S>& x, Eigen::Index group, std::vector<Eigen::Index>* argmax = nullptr) {
    require(group >= 1 && x.rows() >= 1 && x.rows() % group == 0, "empty-set", "setmax: empty or ragged set");
    const Eigen::Index sets = x.rows() / group, d = x.cols();
    Matrix<S> y(sets, d);
    if (argmax) argmax->assign(std::size_t(sets * d), 0);
    for (Eigen::Index s = 0; s < sets; ++s)
        for (Eigen::Index k = 0; k < d; ++k) {
            Eigen::Index best = s * group;
            for (Eigen::Index r = best + 1; r < (s + 1) * group; ++r)
                if (x(r, k) > x(best, k)) best = r;
            y(s, k) = x(best, k);
            if (argmax) (*argmax)[std::size_t(s * d + k)] = best;
        }
    return y;
}

template <class S>
Matrix<S> setmax_backward(const Matrix<S>& dy, const std::vector<Eigen::Index>& argmax, Eigen::Index input_rows) {
    Matrix<S> dx = Matrix<S>::Zero(input_rows, dy.cols());
    for (Eigen::Index s = 0; s < dy.rows(); ++s)
        for (Eigen::Index k = 0; k < dy.cols(); ++k) dx(argmax[std::size_t(s * dy.cols() + k)], k) += dy(s, k);
    return dx;
}

/// Per group: [mean, population variance], giving 2*D columns.
template <class S>
Matrix<S> moment_pool_forward(const Matrix<S>& x, Eigen::Index group) {
    require(group >= 1 && x.rows() >= 1 && x.rows() % group == 0, "empty-set", "moment_pool: empty or ragged set");
    const Eigen::Index sets = x.rows() / group, d = x.cols();
    Matrix<S> y(sets, 2 * d);
    for (Eigen::Index s = 0; s < sets; ++s) {
        const auto block = x.middleRows(s * group, group);
        const RowVector<S> mean = block.colwise().sum() / S(group);
        y.block(s, 0, 1, d) = mean;
        y.block(s, d, 1, d) = (block.rowwise() - mean).array().square().colwise().sum().matrix() / S(group);
    }
    return y;
}

template <class S>
Matrix<S> moment_pool_backward(const Matrix<S>& x, Eigen::Index group, const Matrix<S>& dy) {
    const Eigen::Index sets = x.rows() / group, d = x.cols();
    Matrix<S> dx(x.rows(), d);
    for (Eigen::Index s = 0; s < sets; ++s) {
        const auto block = x.middleRows(s * group, group);
        const RowVector<S> mean = block.colwise().sum() / S(group);
        const RowVector<S> dmean = dy.block(s, 0, 1, d) / S(group);
        const RowVector<S> dvar = dy.block(s, d, 1, d) * (S(2) / S(group));
        auto out = dx.middleRows(s * group, group);
        out = (block.rowwise() - mean).array().rowwise() * dvar.array();
        out.rowwise() += dmean;
    }
    return dx;
}

// ---- parameters ----------------------------------------------------------

/// Weights (in x out) and bias (1 x out) with gradient accumulators.
template <class S>
struct Linear {
    Matrix<S> w, b, dw, db;

    Linear() = default;
    Linear(Eigen::Index in, Eigen::Index out) : w(Matrix<S>::Zero(in, out)), b(Matrix<S>::Zero(1, out)), dw(w), db(b) {}

    Matrix<S> forward(const Matrix<S>& x) const { return fc_forward(x, w, b); }
    void backward(const Matrix<S>& x, const Matrix<S>& dy, Matrix<S>* dx) { fc_backward(x, w, dy, dx, dw, db); }

    void append_params(ParamList<S>& list, const std::string& name) {
        list.push_back({name + ".weight", &w, &dw});
        list.push_back({name + ".bias", &b, &db});
    }
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)); biases zero.
template <class S>
void glorot_uniform(Matrix<S>& w, double fan_in, double fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = S(rng.uniform(-limit, limit));
}

}  // namespace brdfnet::nn
