#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "brdfnet/error.hpp"
#include "brdfnet/grouplet.hpp"
#include "brdfnet/nn/optim.hpp"

using namespace brdfnet;
using M = nn::Matrix<double>;

namespace {

VoxelSample random_voxel(Rng& rng, int count) {
    VoxelSample v;
    v.position = rng.unit_vector();
    v.normal = rng.unit_vector();
    for (int k = 0; k < count; ++k) {
        Vec3 d = rng.unit_vector();
        if (d.dot(v.normal) < 0) d = -d;
        v.observations.push_back({Rgb(rng.uniform(), rng.uniform(), rng.uniform()), d, int(rng.index(40))});
    }
    return v;
}

SceneRecord random_scene(Rng& rng, int voxels, int frames) {
    SceneRecord s;
    s.id = "test";
    for (int f = 0; f < frames; ++f)
        s.frames.push_back({Rgb(rng.uniform(), rng.uniform(), rng.uniform()), Rgb(rng.uniform(), rng.uniform(), rng.uniform()),
                            Mat3::Identity(), Vec3::Zero()});
    for (int v = 0; v < voxels; ++v) {
        VoxelSample vox = random_voxel(rng, 1 + int(rng.index(20)));
        for (auto& o : vox.observations) o.frame_id = int(rng.index(std::uint64_t(frames)));
        s.voxels.push_back(vox);
    }
    return s;
}

M random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    M m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1, 1);
    return m;
}

Grouplet<double> random_net(Rng& rng, int m = 10) {
    Grouplet<double> net(m);
    net.initialize(rng);
    for (auto& p : net.params())
        if (p.name.find("bias") != std::string::npos) nn::glorot_uniform(*p.value, 16, 16, rng);
    return net;
}

}  // namespace

TEST_CASE("observation ordering") {
    Rng rng(1);
    VoxelSample v = random_voxel(rng, 5);
    v.observations.push_back({Rgb::Ones(), v.normal, 99});
    CHECK(order_observations(v).front().frame_id == 99);

    VoxelSample tie;
    tie.normal = Vec3::UnitZ();
    const double s = std::sqrt(0.5);
    tie.observations = {{Rgb::Zero(), Vec3(s, 0, s), 7}, {Rgb::Zero(), Vec3(0, s, s), 3}, {Rgb::Zero(), Vec3(-s, 0, s), 5}};
    const auto ordered = order_observations(tie);
    CHECK(ordered[0].frame_id == 3);
    CHECK(ordered[1].frame_id == 5);
    CHECK(ordered[2].frame_id == 7);

    for (int t = 0; t < 50; ++t) {
        const VoxelSample r = random_voxel(rng, 20);
        std::vector<std::tuple<double, int, std::size_t>> keys;
        for (std::size_t i = 0; i < r.observations.size(); ++i)
            keys.emplace_back(1.0 - r.observations[i].view_dir.dot(r.normal), r.observations[i].frame_id, i);
        std::sort(keys.begin(), keys.end());
        const auto got = order_observations(r);
        for (std::size_t i = 0; i < keys.size(); ++i)
            CHECK(got[i].view_dir == r.observations[std::get<2>(keys[i])].view_dir);
    }
}

TEST_CASE("node input sampling") {
    Rng rng(2);
    const VoxelSample ten = random_voxel(rng, 10);
    const auto all = sample_node_inputs(ten, 10, rng);
    const auto ordered = order_observations(ten);
    for (std::size_t i = 0; i < 10; ++i) CHECK(all[i].view_dir == ordered[i].view_dir);

    const VoxelSample one = random_voxel(rng, 1);
    const auto rep = sample_node_inputs(one, 10, rng);
    CHECK(rep.size() == 10);
    for (const auto& o : rep) CHECK(o.view_dir == one.observations[0].view_dir);

    const VoxelSample many = random_voxel(rng, 30);
    Rng a(5), b(5);
    const auto da = sample_node_inputs(many, 10, a), db = sample_node_inputs(many, 10, b);
    for (std::size_t i = 0; i < 10; ++i) CHECK(da[i].view_dir == db[i].view_dir);
    // Without replacement: no repeated observation.
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = i + 1; j < 10; ++j) CHECK(da[i].view_dir != da[j].view_dir);
}

TEST_CASE("grouplet inputs") {
    Rng rng(3);
    const SceneRecord scene = random_scene(rng, 30, 12);
    const GroupletInput in = grouplet_input(scene, GroupletConfig::fast(), std::uint64_t(9));
    CHECK(in.branch.rows() == 200);
    CHECK(in.branch.cols() == 12);
    CHECK(in.normals.rows() == 20);
    CHECK(std::is_sorted(in.frames.begin(), in.frames.end()));
    const GroupletInput again = grouplet_input(scene, GroupletConfig::fast(), std::uint64_t(9));
    CHECK(in.branch == again.branch);
    const GroupletInput big = grouplet_input(scene, GroupletConfig::slow(), std::uint64_t(9));
    CHECK(big.normals.rows() == 354);

    const GroupletInput early = grouplet_input(scene, GroupletConfig::fast(), std::uint64_t(9), 3);
    for (int f : early.frames) CHECK(f < 3);

    SceneRecord empty = scene;
    for (auto& v : empty.voxels) v.observations.clear();
    CHECK_THROWS_AS(grouplet_input(empty, GroupletConfig::fast(), std::uint64_t(1)), Error);
}

TEST_CASE("grouplet architecture") {
    Grouplet<double> net;
    CHECK(nn::parameter_count(net.params()) == 274245);
    CHECK(net.node1.w.rows() == 643);

    Rng rng(4);
    const M x = random_matrix(20, 12, rng), nrm = random_matrix(2, 3, rng);
    CHECK(net.forward(x, nrm, 2).isZero());  // zero weights and biases

    Grouplet<double> live = random_net(rng);
    M twin_x(20, 12), twin_n(2, 3);
    twin_x << x.topRows(10), x.topRows(10);
    twin_n << nrm.row(0), nrm.row(0);
    const M nodes = live.node_forward(twin_x, twin_n);
    CHECK(nodes.row(0) == nodes.row(1));

    Grouplet<double>::Tape tape;
    live.forward(twin_x, twin_n, 2, &tape);
    CHECK(tape.pooled.rightCols(128).isZero());

    CHECK_THROWS_AS(live.forward(x.topRows(15), nrm, 2), Error);
}

TEST_CASE("grouplet set invariances and variable node count") {
    Rng rng(5);
    Grouplet<double> net = random_net(rng);
    const int nodes = 7;
    const M x = random_matrix(nodes * 10, 12, rng), nrm = random_matrix(nodes, 3, rng);
    const M base = net.forward(x, nrm, nodes);

    std::vector<int> perm(nodes);
    std::iota(perm.begin(), perm.end(), 0);
    for (int t = 0; t < 10; ++t) {
        for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
        M px(nodes * 10, 12), pn(nodes, 3);
        for (int k = 0; k < nodes; ++k) {
            px.middleRows(k * 10, 10) = x.middleRows(perm[std::size_t(k)] * 10, 10);
            pn.row(k) = nrm.row(perm[std::size_t(k)]);
        }
        CHECK((net.forward(px, pn, nodes) - base).cwiseAbs().maxCoeff() < 1e-12);
    }
    M dx(2 * nodes * 10, 12), dn(2 * nodes, 3);
    dx << x, x;
    dn << nrm, nrm;
    CHECK((net.forward(dx, dn, 2 * nodes) - base).cwiseAbs().maxCoeff() < 1e-12);

    for (int n : {1, 5, 20, 50, 354, 1000}) {
        const M y = net.forward(random_matrix(n * 10, 12, rng), random_matrix(n, 3, rng), n);
        CHECK(y.rows() == 1);
        CHECK(y.allFinite());
    }
}

TEST_CASE("grouplet gradient checks") {
    Rng rng(6);
    Grouplet<double> net = random_net(rng, 3);
    const int nodes = 4, sets = 2;
    const M x = random_matrix(sets * nodes * 3, 12, rng), nrm = random_matrix(sets * nodes, 3, rng);
    const M target = random_matrix(sets, 5, rng);
    auto params = net.params();
    nn::zero_grad(params);
    Grouplet<double>::Tape tape;
    const M y = net.forward(x, nrm, nodes, &tape);
    net.backward(tape, y - target);
    const Eigen::VectorXd theta = nn::flatten(params, false), grad = nn::flatten(params, true);

    std::vector<Eigen::Index> coords;
    for (int k = 0; k < 600; ++k) coords.push_back(Eigen::Index(rng.index(std::uint64_t(theta.size()))));
    // Always include every layer's bias block start so each layer is probed.
    Eigen::Index offset = 0;
    for (const auto& p : params) {
        coords.push_back(offset);
        offset += p.value->size();
    }
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    Eigen::VectorXd sub(coords.size()), sub_grad(coords.size());
    for (std::size_t k = 0; k < coords.size(); ++k) {
        sub(Eigen::Index(k)) = theta(coords[k]);
        sub_grad(Eigen::Index(k)) = grad(coords[k]);
    }
    auto f = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd full = theta;
        for (std::size_t k = 0; k < coords.size(); ++k) full(coords[k]) = v(Eigen::Index(k));
        nn::unflatten(params, full);
        const double loss = 0.5 * (net.forward(x, nrm, nodes) - target).squaredNorm();
        nn::unflatten(params, theta);
        return loss;
    };
    CHECK(nn::grad_check(f, sub, sub_grad) < 1e-3);

    // Node representation alone, probed through a random contraction.
    const M up = random_matrix(sets * nodes, 128, rng);
    nn::zero_grad(params);
    Grouplet<double>::Tape nt;
    net.forward(x, nrm, sets * nodes, &nt);
    // Route an upstream gradient on the node outputs through the node and branch layers only.
    nn::Matrix<double> d, dprev;
    net.node2.backward(nt.n1, nn::tanh_backward(nt.n2, up), &dprev);
    net.node1.backward(nt.node_in, nn::tanh_backward(nt.n1, dprev), &d);
    std::vector<Eigen::Index> wc;
    for (int k = 0; k < 300; ++k) wc.push_back(Eigen::Index(rng.index(std::uint64_t(net.node1.w.size()))));
    std::sort(wc.begin(), wc.end());
    wc.erase(std::unique(wc.begin(), wc.end()), wc.end());
    Eigen::VectorXd w0(wc.size()), node_grad(wc.size());
    for (std::size_t k = 0; k < wc.size(); ++k) {
        w0(Eigen::Index(k)) = net.node1.w.data()[wc[k]];
        node_grad(Eigen::Index(k)) = net.node1.dw.data()[wc[k]];
    }
    auto g = [&](const Eigen::VectorXd& v) {
        const M saved = net.node1.w;
        for (std::size_t k = 0; k < wc.size(); ++k) net.node1.w.data()[wc[k]] = v(Eigen::Index(k));
        const double val = (net.node_forward(x, nrm).array() * up.array()).sum();
        net.node1.w = saved;
        return val;
    };
    CHECK(nn::grad_check(g, w0, node_grad) < 1e-3);
}
