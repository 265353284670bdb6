#include "brdfnet/gradcheck.hpp"

#include <algorithm>

#include "brdfnet/grouplet.hpp"
#include "brdfnet/hemicnn.hpp"
#include "brdfnet/loss.hpp"
#include "brdfnet/nn/optim.hpp"
#include "brdfnet/training.hpp"

namespace brdfnet {

namespace {

using M = nn::Matrix<double>;

M random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    M m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

Eigen::VectorXd vec(const M& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }
M mat(const Eigen::VectorXd& v, Eigen::Index r, Eigen::Index c) { return Eigen::Map<const M>(v.data(), r, c); }
double contract(const M& y, const M& w) { return (y.array() * w.array()).sum(); }

std::vector<ViewStats> random_views(Rng& rng, int n) {
    std::vector<ViewStats> v;
    for (int i = 0; i < n; ++i)
        v.push_back({Rgb(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)),
                     Rgb(rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9))});
    return v;
}

WardBRDF random_target(Rng& rng) {
    WardBRDF w;
    do {
        w.rho_d = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
        w.rho_s = rng.uniform(0.0, 0.4);
        w.alpha = rng.uniform(0.1, 1.0);
    } while (luminance<double>(w.rho_d) + w.rho_s > 1.0);
    return w;
}

/// Output statistics resembling the generator's distribution.
NormStats typical_stats() {
    NormStats s;
    s.mean << 0.45, 0.45, 0.45, 0.15, 0.5;
    s.std << 0.28, 0.28, 0.28, 0.1, 0.28;
    return s;
}

/// Network parameters checked on a seeded subset of coordinates through the full training loss.
template <class Net, class Forward>
double network_check(Net& net, Forward forward, const std::vector<WardBRDF>& targets,
                     const std::vector<std::vector<ViewStats>>& views, const LossConfig& loss, const NormStats& stats,
                     Rng& rng, int probes) {
    const Vec5& scale = stats.std;
    auto params = net.params();
    auto total_loss = [&](const M& z) {
        double sum = 0.0;
        for (Eigen::Index k = 0; k < z.rows(); ++k)
            sum += loss_total(stats.denormalize(z.row(k).transpose()), targets[std::size_t(k)], views[std::size_t(k)], loss).total;
        return sum;
    };
    nn::zero_grad(params);
    typename Net::Tape tape;
    const M z = forward(&tape);
    M dz(z.rows(), z.cols());
    for (Eigen::Index k = 0; k < z.rows(); ++k)
        dz.row(k) = scale.cwiseProduct(loss_total(stats.denormalize(z.row(k).transpose()), targets[std::size_t(k)],
                                                  views[std::size_t(k)], loss)
                                           .grad)
                        .transpose();
    net.backward(tape, dz);
    const Eigen::VectorXd theta = nn::flatten(params, false), grad = nn::flatten(params, true);

    std::vector<Eigen::Index> coords;
    Eigen::Index offset = 0;
    for (const auto& p : params) {
        coords.push_back(offset);  // probe every tensor at least once
        offset += p.value->size();
    }
    for (int k = 0; k < probes; ++k) coords.push_back(Eigen::Index(rng.index(std::uint64_t(theta.size()))));
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
        const double val = total_loss(forward(nullptr));
        nn::unflatten(params, theta);
        return val;
    };
    return nn::grad_check(f, sub, sub_grad);
}

}  // namespace

std::vector<GradCheckResult> run_gradchecks(std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0x67636b}));
    std::vector<GradCheckResult> out;

    {  // fc
        const M x = random_matrix(3, 5, rng), w = random_matrix(5, 7, rng), b = random_matrix(1, 7, rng), up = random_matrix(3, 7, rng);
        M gx, gw = M::Zero(5, 7), gb = M::Zero(1, 7);
        nn::fc_backward<double>(x, w, up, &gx, gw, gb);
        double e = nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::fc_forward<double>(mat(v, 3, 5), w, b), up); }, vec(x), vec(gx));
        e = std::max(e, nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::fc_forward<double>(x, mat(v, 5, 7), b), up); }, vec(w), vec(gw)));
        e = std::max(e, nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::fc_forward<double>(x, w, mat(v, 1, 7)), up); }, vec(b), vec(gb)));
        out.push_back({"fc", e, 1e-6});
    }
    {  // conv3x3
        const Eigen::Index h = 4, w = 4, ci = 3, co = 4, n = 2;
        const M x = random_matrix(n * h * w, ci, rng), f = random_matrix(9 * ci, co, rng), b = random_matrix(1, co, rng),
                up = random_matrix(n * h * w, co, rng);
        M cols, dx, df = M::Zero(9 * ci, co), db = M::Zero(1, co);
        nn::conv3x3_forward<double>(x, h, w, f, b, &cols);
        nn::conv3x3_backward<double>(cols, h, w, f, up, &dx, df, db);
        double e = nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::conv3x3_forward<double>(mat(v, n * h * w, ci), h, w, f, b), up); }, vec(x), vec(dx));
        e = std::max(e, nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::conv3x3_forward<double>(x, h, w, mat(v, 9 * ci, co), b), up); }, vec(f), vec(df)));
        e = std::max(e, nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::conv3x3_forward<double>(x, h, w, f, mat(v, 1, co)), up); }, vec(b), vec(db)));
        out.push_back({"conv3x3", e, 1e-6});
    }
    {  // maxpool away from ties
        const M x = random_matrix(2 * 16, 3, rng), up = random_matrix(2 * 4, 3, rng);
        std::vector<Eigen::Index> arg;
        nn::maxpool2x2_forward<double>(x, 4, 4, &arg);
        const M dx = nn::maxpool2x2_backward<double>(up, arg, x.rows());
        out.push_back({"maxpool2x2", nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::maxpool2x2_forward<double>(mat(v, 32, 3), 4, 4), up); }, vec(x), vec(dx), 1e-7), 1e-6});
    }
    {  // relu away from the kink
        M x = random_matrix(6, 5, rng);
        x = (x.array().abs() < 0.05).select(0.5, x);
        const M up = random_matrix(6, 5, rng);
        out.push_back({"relu", nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::relu<double>(mat(v, 6, 5)), up); }, vec(x), vec(nn::relu_backward<double>(x, up))), 1e-6});
    }
    {  // tanh
        const M x = random_matrix(6, 5, rng, -2, 2), up = random_matrix(6, 5, rng);
        out.push_back({"tanh", nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::tanh<double>(mat(v, 6, 5)), up); }, vec(x), vec(nn::tanh_backward<double>(nn::tanh<double>(x), up))), 1e-6});
    }
    {  // setmax
        const M x = random_matrix(8, 5, rng), up = random_matrix(2, 5, rng);
        std::vector<Eigen::Index> arg;
        nn::setmax_forward<double>(x, 4, &arg);
        const M dx = nn::setmax_backward<double>(up, arg, 8);
        out.push_back({"setmax", nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::setmax_forward<double>(mat(v, 8, 5), 4), up); }, vec(x), vec(dx), 1e-7), 1e-6});
    }
    {  // moment pool
        const M x = random_matrix(6, 4, rng), up = random_matrix(2, 8, rng);
        const M dx = nn::moment_pool_backward<double>(x, 3, up);
        out.push_back({"moment_pool", nn::grad_check([&](const Eigen::VectorXd& v) { return contract(nn::moment_pool_forward<double>(mat(v, 6, 4), 3), up); }, vec(x), vec(dx)), 1e-6});
    }

    // Losses with respect to the prediction vector.
    const Metric metrics[3] = {Metric::Rmse1, Metric::Rmse2, Metric::CubeRoot};
    for (Metric m : metrics) {
        double worst = 0.0;
        for (int t = 0; t < 5; ++t) {
            const WardBRDF target = random_target(rng);
            const auto views = random_views(rng, 3);
            const LossConfig cfg = LossConfig::for_metric(m, 0.5);
            WardBRDF guess = random_target(rng);
            const Vec5 x = target_vector(guess, cfg.parameterization);
            const Vec5 g = loss_total(x, target, views, cfg).grad;
            worst = std::max(worst, nn::grad_check([&](const Eigen::VectorXd& v) { return loss_total(Vec5(v), target, views, cfg).total; }, x, g));
        }
        out.push_back({"loss_" + std::string(metric_name(m)) + "_with_ec", worst, 1e-3});
    }
    {  // E_c alone
        const auto views = random_views(rng, 4);
        const Vec5 x = to_vector(random_target(rng));
        Eigen::Matrix<Dual5, 5, 1> d;
        for (int i = 0; i < 5; ++i) d(i) = Dual5(x(i), 5, i);
        const Vec5 g = loss_ec(physical_from(d, Parameterization::Physical), views).derivatives();
        out.push_back({"loss_ec", nn::grad_check([&](const Eigen::VectorXd& v) { return loss_ec(physical_from<double>(Vec5(v), Parameterization::Physical), views); }, x, g), 1e-6});
    }

    // Full networks through the training loss.
    {
        HemiCnn<double> net(8);
        net.initialize(rng);
        for (auto& p : net.params())
            if (p.name.find("bias") != std::string::npos) nn::glorot_uniform(*p.value, 8, 8, rng);
        const int n = 3, sets = 2;
        const M images = random_matrix(sets * n * 64, 3, rng, 0, 1);
        std::vector<WardBRDF> targets{random_target(rng), random_target(rng)};
        std::vector<std::vector<ViewStats>> views{random_views(rng, 2), random_views(rng, 3)};
        const double e = network_check(net, [&](HemiCnn<double>::Tape* t) { return net.forward(images, n, t); }, targets,
                                       views, LossConfig::for_metric(Metric::Rmse1), typical_stats(), rng, 400);
        out.push_back({"hemicnn_full", e, 1e-3});
    }
    {
        Grouplet<double> net(3);
        net.initialize(rng);
        for (auto& p : net.params())
            if (p.name.find("bias") != std::string::npos) nn::glorot_uniform(*p.value, 8, 8, rng);
        const int nodes = 4, sets = 2;
        const M branch = random_matrix(sets * nodes * 3, 12, rng), normals = random_matrix(sets * nodes, 3, rng);
        std::vector<WardBRDF> targets{random_target(rng), random_target(rng)};
        std::vector<std::vector<ViewStats>> views{random_views(rng, 2), random_views(rng, 3)};
        LossConfig cube = LossConfig::for_metric(Metric::CubeRoot);
        cube.cube_root_grid = 6;
        const double e = network_check(net, [&](Grouplet<double>::Tape* t) { return net.forward(branch, normals, nodes, t); },
                                       targets, views, cube, typical_stats(), rng, 400);
        out.push_back({"grouplet_full", e, 1e-3});
    }
    return out;
}

}  // namespace brdfnet
