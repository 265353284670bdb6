#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "brdfnet/dataset.hpp"
#include "brdfnet/nn/layers.hpp"

namespace brdfnet {

struct GroupletConfig {
    int nodes = 20;
    int observations = 10;

    static GroupletConfig fast() { return {20, 10}; }
    static GroupletConfig slow() { return {354, 10}; }
};

inline constexpr int kBranchInputs = 12;

/// Ascending by 1 - o.n, frame id breaking ties.
std::vector<Observation> order_observations(const VoxelSample& voxel);

/// M draws (without replacement when possible), then ordered.
std::vector<Observation> sample_node_inputs(const VoxelSample& voxel, int m, Rng& rng);

struct GroupletInput {
    nn::Matrix<double> branch;   // (nodes * M) x 12: colour, view direction, F_bar, B_bar
    nn::Matrix<double> normals;  // nodes x 3
    std::vector<int> frames;     // distinct frame ids feeding the branches, ascending
};

/// Training-time sampling: every draw comes from `rng`. Observations from frames >= max_views
/// are ignored when max_views > 0.
GroupletInput grouplet_input(const SceneRecord& scene, const GroupletConfig& cfg, Rng& rng, int max_views = 0);

/// Evaluation-time sampling: voxel subset seeded by (seed, scene), observations by (seed, scene, voxel).
GroupletInput grouplet_input(const SceneRecord& scene, const GroupletConfig& cfg, std::uint64_t seed, int max_views = 0);

template <class S>
class Grouplet {
public:
    static constexpr int kBranchHidden = 128;
    static constexpr int kBranchOut = 64;
    static constexpr int kNodeHidden = 256;
    static constexpr int kNodeOut = 128;
    static constexpr int kRegHidden = 128;
    static constexpr int kOutputs = 5;

    explicit Grouplet(int observations = 10)
        : m_(observations),
          branch1(kBranchInputs, kBranchHidden),
          branch2(kBranchHidden, kBranchHidden),
          branch3(kBranchHidden, kBranchOut),
          node1(observations * kBranchOut + 3, kNodeHidden),
          node2(kNodeHidden, kNodeOut),
          reg1(2 * kNodeOut, kRegHidden),
          reg2(kRegHidden, kRegHidden),
          out(kRegHidden, kOutputs) {
        require(observations >= 1, "config", "observations per node must be positive");
    }

    int observations() const { return m_; }

    void initialize(Rng& rng) {
        for (auto* l : layers()) {
            nn::glorot_uniform(l->w, double(l->w.rows()), double(l->w.cols()), rng);
            l->b.setZero();
        }
    }

    nn::ParamList<S> params() {
        nn::ParamList<S> list;
        const char* names[] = {"branch1", "branch2", "branch3", "node1", "node2", "reg1", "reg2", "out"};
        int i = 0;
        for (auto* l : layers()) l->append_params(list, names[i++]);
        return list;
    }

    struct Tape {
        Eigen::Index nodes = 0;
        nn::Matrix<S> x, b1, b2, b3, node_in, n1, n2, pooled, r1, r2;
    };

    /// branch: (sets * nodes * M) x 12, normals: (sets * nodes) x 3. Returns sets x 5.
    nn::Matrix<S> forward(const nn::Matrix<S>& branch, const nn::Matrix<S>& normals, Eigen::Index nodes,
                          Tape* tape = nullptr) const {
        require(nodes >= 1 && normals.rows() >= 1, "empty-set", "grouplet: no nodes");
        require(branch.cols() == kBranchInputs && normals.cols() == 3 && normals.rows() % nodes == 0 &&
                    branch.rows() == normals.rows() * m_,
                "shape", "grouplet: input blocks do not match node and observation counts");
        Tape local;
        Tape& t = tape ? *tape : local;
        t.nodes = nodes;
        t.x = branch;
        t.b1 = nn::tanh(branch1.forward(branch));
        t.b2 = nn::tanh(branch2.forward(t.b1));
        t.b3 = nn::tanh(branch3.forward(t.b2));
        const Eigen::Index total = normals.rows();
        t.node_in.resize(total, Eigen::Index(m_) * kBranchOut + 3);
        t.node_in.leftCols(Eigen::Index(m_) * kBranchOut) =
            Eigen::Map<const nn::Matrix<S>>(t.b3.data(), total, Eigen::Index(m_) * kBranchOut);
        t.node_in.rightCols(3) = normals;
        t.n1 = nn::tanh(node1.forward(t.node_in));
        t.n2 = nn::tanh(node2.forward(t.n1));
        t.pooled = nn::moment_pool_forward(t.n2, nodes);
        t.r1 = nn::tanh(reg1.forward(t.pooled));
        t.r2 = nn::tanh(reg2.forward(t.r1));
        return out.forward(t.r2);
    }

    void backward(const Tape& t, const nn::Matrix<S>& dout) {
        nn::Matrix<S> d, dprev;
        out.backward(t.r2, dout, &d);
        reg2.backward(t.r1, nn::tanh_backward(t.r2, d), &dprev);
        reg1.backward(t.pooled, nn::tanh_backward(t.r1, dprev), &d);
        d = nn::moment_pool_backward(t.n2, t.nodes, d);
        node2.backward(t.n1, nn::tanh_backward(t.n2, d), &dprev);
        node1.backward(t.node_in, nn::tanh_backward(t.n1, dprev), &d);
        const Eigen::Index width = Eigen::Index(m_) * kBranchOut;
        const nn::Matrix<S> dconcat = d.leftCols(width);
        const nn::Matrix<S> db3 = Eigen::Map<const nn::Matrix<S>>(dconcat.data(), t.b3.rows(), kBranchOut);
        branch3.backward(t.b2, nn::tanh_backward(t.b3, db3), &dprev);
        branch2.backward(t.b1, nn::tanh_backward(t.b2, dprev), &d);
        branch1.backward(t.x, nn::tanh_backward(t.b1, d), nullptr);
    }

    /// Representation of each node before pooling, (sets * nodes) x 128.
    nn::Matrix<S> node_forward(const nn::Matrix<S>& branch, const nn::Matrix<S>& normals) const {
        Tape t;
        forward(branch, normals, normals.rows(), &t);
        return t.n2;
    }

private:
    int m_;

    std::vector<nn::Linear<S>*> layers() { return {&branch1, &branch2, &branch3, &node1, &node2, &reg1, &reg2, &out}; }

public:
    nn::Linear<S> branch1, branch2, branch3, node1, node2, reg1, reg2, out;
};

}  // namespace brdfnet
