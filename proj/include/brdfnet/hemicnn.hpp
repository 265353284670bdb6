#pragma once

#include <vector>

#include "brdfnet/nn/layers.hpp"
#include "brdfnet/scene.hpp"

namespace brdfnet {

inline constexpr int kHemisphereResolution = 8;
inline constexpr int kHemiCnnVoxels = 25;

/// R x R colour raster, rows along +y, columns along +x of the normal-aligned frame.
struct HemisphereImage {
    int resolution = 0;
    Eigen::Array<double, Eigen::Dynamic, 3> pixels;  // R*R rows, scan order
    Eigen::Array<bool, Eigen::Dynamic, 1> mask;       // inside the unit disk

    /// Pixel-centre coordinate along one axis.
    static double centre(int index, int resolution) { return 2.0 * (index + 0.5) / resolution - 1.0; }
};

/// Minimal-angle rotation taking `normal` to +z.
Mat3 alignment_rotation(const Vec3& normal);

/// Throws "empty-hemisphere" when no observation lies above the surface.
HemisphereImage build_hemisphere_image(const VoxelSample& voxel, int resolution = kHemisphereResolution);

/// Farthest-point sampling on normals starting from the most-observed voxel; pads with
/// uniform draws (with replacement) when fewer than `count` samples exist.
std::vector<std::size_t> select_voxels(const std::vector<VoxelSample>& samples, int count, Rng& rng);

/// Stacks a scene's selected hemisphere images into an (N*R*R) x 3 block.
nn::Matrix<double> hemisphere_input(const std::vector<VoxelSample>& samples, int count, int resolution, Rng& rng);

template <class S>
class HemiCnn {
public:
    static constexpr int kFilters = 16;
    static constexpr int kEmbedding = 64;
    static constexpr int kHidden = 32;
    static constexpr int kOutputs = 5;

    explicit HemiCnn(int resolution = kHemisphereResolution)
        : resolution_(resolution),
          conv1(9 * 3, kFilters),
          conv2(9 * kFilters, kFilters),
          fc1((resolution / 2) * (resolution / 2) * kFilters, kEmbedding),
          fc2(kEmbedding, kHidden),
          out(kHidden, kOutputs) {
        require(resolution >= 4 && resolution % 2 == 0, "config", "hemisphere resolution must be even and >= 4");
    }

    int resolution() const { return resolution_; }

    void initialize(Rng& rng) {
        nn::glorot_uniform(conv1.w, 9 * 3, 9 * kFilters, rng);
        nn::glorot_uniform(conv2.w, 9 * kFilters, 9 * kFilters, rng);
        nn::glorot_uniform(fc1.w, double(fc1.w.rows()), kEmbedding, rng);
        nn::glorot_uniform(fc2.w, kEmbedding, kHidden, rng);
        nn::glorot_uniform(out.w, kHidden, kOutputs, rng);
        for (auto* l : {&conv1, &conv2, &fc1, &fc2, &out}) l->b.setZero();
    }

    nn::ParamList<S> params() {
        nn::ParamList<S> list;
        conv1.append_params(list, "conv1");
        conv2.append_params(list, "conv2");
        fc1.append_params(list, "fc1");
        fc2.append_params(list, "fc2");
        out.append_params(list, "fc_out");
        return list;
    }

    struct Tape {
        Eigen::Index per_set = 0;
        nn::Matrix<S> cols1, a1, r1, cols2, a2, r2, flat, e, pooled, h;
        std::vector<Eigen::Index> pool_arg, set_arg;
    };

    /// images: (sets * per_set * R * R) x 3. Returns sets x 5.
    nn::Matrix<S> forward(const nn::Matrix<S>& images, Eigen::Index per_set, Tape* tape = nullptr) const {
        const Eigen::Index r = resolution_, pix = r * r;
        require(images.cols() == 3 && per_set >= 1 && images.rows() % (pix * per_set) == 0 && images.rows() > 0,
                "shape", "hemicnn: image block does not match resolution and set size");
        Tape local;
        Tape& t = tape ? *tape : local;
        t.per_set = per_set;
        t.a1 = nn::conv3x3_forward(images, r, r, conv1.w, conv1.b, &t.cols1);
        t.r1 = nn::relu(t.a1);
        t.a2 = nn::conv3x3_forward(t.r1, r, r, conv2.w, conv2.b, &t.cols2);
        t.r2 = nn::relu(t.a2);
        const nn::Matrix<S> pooled_maps = nn::maxpool2x2_forward(t.r2, r, r, &t.pool_arg);
        const Eigen::Index images_n = images.rows() / pix;
        t.flat = Eigen::Map<const nn::Matrix<S>>(pooled_maps.data(), images_n, pooled_maps.size() / images_n);
        t.e = nn::fc_forward_blocked(t.flat, fc1.w, fc1.b, 1);
        t.pooled = nn::setmax_forward(t.e, per_set, &t.set_arg);
        t.h = nn::tanh(fc2.forward(t.pooled));
        return out.forward(t.h);
    }

    /// Accumulates parameter gradients for upstream gradient dout (sets x 5).
    void backward(const Tape& t, const nn::Matrix<S>& dout) {
        const Eigen::Index r = resolution_;
        nn::Matrix<S> dh, dpooled, de, dflat, dr1;
        out.backward(t.h, dout, &dh);
        const nn::Matrix<S> dz2 = nn::tanh_backward(t.h, dh);
        fc2.backward(t.pooled, dz2, &dpooled);
        de = nn::setmax_backward(dpooled, t.set_arg, t.e.rows());
        fc1.backward(t.flat, de, &dflat);
        const nn::Matrix<S> dmaps = Eigen::Map<const nn::Matrix<S>>(dflat.data(), dflat.size() / kFilters, kFilters);
        const nn::Matrix<S> dr2 = nn::maxpool2x2_backward(dmaps, t.pool_arg, t.r2.rows());
        nn::conv3x3_backward(t.cols2, r, r, conv2.w, nn::relu_backward(t.a2, dr2), &dr1, conv2.dw, conv2.db);
        nn::conv3x3_backward<S>(t.cols1, r, r, conv1.w, nn::relu_backward(t.a1, dr1), nullptr, conv1.dw, conv1.db);
    }

private:
    int resolution_;

public:
    nn::Linear<S> conv1, conv2, fc1, fc2, out;
};

}  // namespace brdfnet
