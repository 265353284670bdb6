#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unistd.h>

#include "brdfnet/checkpoint.hpp"
#include "brdfnet/error.hpp"
#include "brdfnet/eval.hpp"
#include "brdfnet/training.hpp"

using namespace brdfnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("brdfnet_test_training_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const Dataset& small_dataset() {
    static const Dataset ds = [] {
        GenConfig g;
        g.scenes = 24;
        g.views = 8;
        g.voxels = 60;
        g.width = g.height = 32;
        g.seed = 11;
        const fs::path root = scratch("data");
        generate_dataset(g, root);
        return load_dataset(root);
    }();
    return ds;
}

TrainConfig small_train(ModelKind model, int minibatches) {
    TrainConfig c;
    c.model = model;
    c.minibatches = minibatches;
    c.batch_size = 4;
    c.validate_every = 1000;
    c.seed = 5;
    return c;
}

std::vector<double> step_losses(const TrainResult& r) {
    std::vector<double> out;
    for (const auto& line : r.log)
        if (line.contains("loss") && line.contains("step") && line["loss"].is_number()) out.push_back(line["loss"]);
    return out;
}

double moving_average(const std::vector<double>& v, std::size_t end, std::size_t window) {
    return std::accumulate(v.begin() + std::ptrdiff_t(end - window), v.begin() + std::ptrdiff_t(end), 0.0) / double(window);
}

}  // namespace

TEST_CASE("loss_ec examples") {
    WardBRDF w;
    w.rho_d = Rgb(0.7, 0.6, 0.5);
    w.rho_s = 0.3;  // rho_d + rho_s = (1, 0.9, 0.8)
    w.alpha = 0.2;

    SUBCASE("exact cancellation") {
        WardBRDF unit = w;
        unit.rho_d = Rgb(0.7, 0.7, 0.7);
        const std::vector<ViewStats> views = {{Rgb(0.3, 0.5, 0.9), Rgb(0.3, 0.5, 0.9)}, {Rgb(0.1, 0.2, 0.3), Rgb(0.1, 0.2, 0.3)}};
        CHECK(loss_ec(unit, views) < 1e-28);
    }
    SUBCASE("single black view") {
        WardBRDF unit = w;
        unit.rho_d = Rgb(0.7, 0.7, 0.7);
        const std::vector<ViewStats> views = {{Rgb::Zero(), Rgb::Constant(0.5)}};
        const double expected = 3.0 * std::pow(std::pow(0.5, 2.4), 2.0);
        CHECK(loss_ec(unit, views) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(loss_ec(unit, views) == doctest::Approx(0.10769).epsilon(1e-4));
    }
    SUBCASE("doubling the view list doubles the term") {
        std::vector<ViewStats> views = {{Rgb(0.2, 0.4, 0.1), Rgb(0.6, 0.3, 0.8)}, {Rgb(0.9, 0.1, 0.5), Rgb(0.2, 0.2, 0.7)}};
        const double once = loss_ec(w, views);
        views.insert(views.end(), views.begin(), views.end());
        CHECK(loss_ec(w, views) == doctest::Approx(2.0 * once).epsilon(1e-14));
    }
    SUBCASE("invariant to the diffuse/specular split") {
        const std::vector<ViewStats> views = {{Rgb(0.2, 0.4, 0.1), Rgb(0.6, 0.3, 0.8)}};
        WardBRDF shifted = w;
        shifted.rho_d -= Rgb::Constant(0.2);
        shifted.rho_s += 0.2;
        CHECK(loss_ec(shifted, views) == doctest::Approx(loss_ec(w, views)).epsilon(1e-14));
    }
}

TEST_CASE("loss_total decomposition") {
    WardBRDF target;
    target.rho_d = Rgb(0.4, 0.3, 0.2);
    target.rho_s = 0.1;
    target.alpha = 0.3;
    const std::vector<ViewStats> views = {{Rgb(0.4, 0.5, 0.6), Rgb(0.7, 0.7, 0.7)}, {Rgb(0.3, 0.2, 0.1), Rgb(0.5, 0.6, 0.4)}};

    for (Metric m : {Metric::Rmse1, Metric::Rmse2, Metric::CubeRoot}) {
        CAPTURE(metric_name(m));
        LossConfig cfg = LossConfig::for_metric(m, 0.01);
        const Vec5 exact = target_vector(target, cfg.parameterization);

        const LossValue at_target = loss_total(exact, target, views, cfg);
        CHECK(at_target.e_d == doctest::Approx(0.0).scale(1e-9));
        CHECK(at_target.total >= 0.0);
        CHECK(at_target.total == doctest::Approx(cfg.lambda * at_target.e_c).epsilon(1e-9).scale(1e-9));

        Vec5 off = exact;
        off(0) += 0.05;
        off(4) -= 0.04;
        cfg.lambda = 0.0;
        const LossValue no_ec = loss_total(off, target, views, cfg);
        CHECK(no_ec.total == no_ec.e_d);
        CHECK(no_ec.e_d == doctest::Approx(brdf_distance(target, physical_from<double>(off, cfg.parameterization), m,
                                                        cfg.cube_root_grid, cfg.lambda_g))
                               .epsilon(1e-9));

        // J grows monotonically with lambda at a fixed prediction.
        double prev = -1.0;
        for (double lambda : {0.0, 0.01, 0.1, 1.0}) {
            cfg.lambda = lambda;
            const double j = loss_total(off, target, views, cfg).total;
            CHECK(j >= prev);
            prev = j;
        }
    }
}

TEST_CASE("loss config consistency") {
    LossConfig cfg = LossConfig::for_metric(Metric::Rmse2);
    CHECK(cfg.parameterization == Parameterization::Perceptual);
    cfg.parameterization = Parameterization::Physical;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = LossConfig::for_metric(Metric::CubeRoot);
    cfg.parameterization = Parameterization::Perceptual;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = LossConfig::for_metric(Metric::Rmse1);
    cfg.lambda = -0.1;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("normalization statistics") {
    WardBRDF a, b;
    a.rho_d = Rgb(0.2, 0.5, 0.6);
    b.rho_d = Rgb(0.4, 0.1, 0.7);
    a.rho_s = 0.1;
    b.rho_s = 0.3;
    a.alpha = 0.2;
    b.alpha = 0.4;
    const NormStats s = compute_norm_stats({a, b}, Parameterization::Physical);
    CHECK(s.mean(4) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(s.std(4) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(s.mean(3) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(s.std(0) == doctest::Approx(0.1).epsilon(1e-12));

    const Vec5 v = to_vector(a);
    CHECK((s.denormalize(s.normalize(v)) - v).norm() < 1e-14);

    const NormStats back = norm_stats_from_json(to_json(s));
    CHECK(back.mean == s.mean);
    CHECK(back.std == s.std);

    CHECK_THROWS_AS(compute_norm_stats({a, a}, Parameterization::Physical), Error);
    CHECK_THROWS_AS(compute_norm_stats(std::vector<WardBRDF>{}, Parameterization::Physical), Error);

    const Dataset& ds = small_dataset();
    const NormStats s1 = compute_norm_stats(ds, ds.train, Parameterization::Perceptual);
    const NormStats s2 = compute_norm_stats(ds, ds.train, Parameterization::Perceptual);
    CHECK(s1.mean == s2.mean);
    CHECK(s1.std == s2.std);
}

TEST_CASE("train config") {
    TrainConfig c;
    c.model = ModelKind::HemiCnn;
    CHECK(c.resolved().optimizer == "rmsprop");
    CHECK(c.resolved().learning_rate == 1e-4);
    c.model = ModelKind::GroupletSlow;
    CHECK(c.resolved().optimizer == "sgd");
    CHECK(c.resolved().learning_rate == 1e-2);
    CHECK(TrainConfig::full_budget(ModelKind::HemiCnn) == 100000);
    CHECK(TrainConfig::full_budget(ModelKind::GroupletFast) == 13000);
    CHECK(parse_model("grouplet") == ModelKind::GroupletFast);
    CHECK_THROWS_AS(parse_model("resnet"), Error);

    const TrainConfig back = train_config_from_json(to_json(c));
    CHECK(back.model == c.model);
    CHECK(back.minibatches == c.minibatches);
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("zero budget keeps the initialization") {
    const Dataset& ds = small_dataset();
    for (ModelKind kind : {ModelKind::HemiCnn, ModelKind::GroupletFast}) {
        CAPTURE(model_name(kind));
        TrainConfig cfg = small_train(kind, 0);
        const TrainResult r = train(ds, cfg, LossConfig::for_metric(Metric::Rmse1));

        Rng init(initialization_seed(cfg.seed));
        std::vector<NamedTensor> expected;
        if (kind == ModelKind::HemiCnn) {
            HemiCnn<float> net(cfg.hemisphere_resolution);
            net.initialize(init);
            expected = export_tensors(net.params());
        } else {
            Grouplet<float> net(cfg.observations);
            net.initialize(init);
            expected = export_tensors(net.params());
        }
        REQUIRE(expected.size() == r.final_checkpoint.tensors.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            CHECK(expected[i].name == r.final_checkpoint.tensors[i].name);
            CHECK(expected[i].data == r.final_checkpoint.tensors[i].data);
        }
        CHECK(r.final_checkpoint.header["step"] == 0);
    }
}

TEST_CASE("same seed gives bit-identical 64-bit checkpoints") {
    const Dataset& ds = small_dataset();
    for (ModelKind kind : {ModelKind::HemiCnn, ModelKind::GroupletFast}) {
        CAPTURE(model_name(kind));
        TrainConfig cfg = small_train(kind, 12);
        cfg.double_precision = true;
        const fs::path a = scratch(std::string(model_name(kind)) + "_a"), b = scratch(std::string(model_name(kind)) + "_b");
        train(ds, cfg, LossConfig::for_metric(Metric::Rmse1), a);
        train(ds, cfg, LossConfig::for_metric(Metric::Rmse1), b);
        const Checkpoint ca = load_checkpoint(a / "final.ckpt"), cb = load_checkpoint(b / "final.ckpt");
        REQUIRE(ca.tensors.size() == cb.tensors.size());
        bool identical = true;
        for (std::size_t i = 0; i < ca.tensors.size(); ++i) identical = identical && ca.tensors[i].data == cb.tensors[i].data;
        CHECK(identical);

        cfg.seed += 1;
        const TrainResult other = train(ds, cfg, LossConfig::for_metric(Metric::Rmse1));
        CHECK(other.final_checkpoint.tensors[0].data != ca.tensors[0].data);
    }
}

TEST_CASE("checkpoint files") {
    const Dataset& ds = small_dataset();
    const fs::path dir = scratch("ckpt");
    const TrainResult r = train(ds, small_train(ModelKind::GroupletFast, 3), LossConfig::for_metric(Metric::Rmse1), dir);
    for (const char* f : {"final.ckpt", "best.ckpt", "train_log.jsonl", "train_summary.json"}) CHECK(fs::exists(dir / f));

    const Checkpoint c = load_checkpoint(dir / "final.ckpt");
    CHECK(c.parameter_count() == 274245);
    CHECK(c.header["architecture"] == "grouplet-fast");
    CHECK(fs::file_size(dir / "final.ckpt") == save_checkpoint(dir / "copy.ckpt", c));
    const Checkpoint again = load_checkpoint(dir / "copy.ckpt");
    CHECK(again.header == c.header);
    CHECK(again.tensors.back().data == c.tensors.back().data);

    // Truncation and a bad magic are both rejected.
    const auto size = fs::file_size(dir / "copy.ckpt");
    fs::resize_file(dir / "copy.ckpt", size - 5);
    CHECK_THROWS_AS(load_checkpoint(dir / "copy.ckpt"), Error);
    {
        std::fstream f(dir / "final.ckpt", std::ios::in | std::ios::out | std::ios::binary);
        f.put('X');
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "final.ckpt"), Error);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), Error);

    // A checkpoint whose tensors do not fit its architecture is refused.
    Checkpoint wrong = r.final_checkpoint;
    wrong.header["architecture"] = "hemicnn";
    CHECK_THROWS_AS(NetworkModel{wrong}, Error);
}

TEST_CASE("training loss decreases in the smoke configurations") {
    const Dataset& ds = small_dataset();
    struct Smoke {
        ModelKind model;
        Metric metric;
    };
    for (const Smoke& s : {Smoke{ModelKind::HemiCnn, Metric::Rmse1}, Smoke{ModelKind::HemiCnn, Metric::Rmse2},
                           Smoke{ModelKind::GroupletFast, Metric::Rmse1}, Smoke{ModelKind::GroupletFast, Metric::CubeRoot}}) {
        CAPTURE(model_name(s.model));
        CAPTURE(metric_name(s.metric));
        TrainConfig cfg = small_train(s.model, 200);
        const std::vector<double> losses = step_losses(train(ds, cfg, LossConfig::for_metric(s.metric)));
        REQUIRE(losses.size() == 200);
        CHECK(moving_average(losses, 200, 50) < moving_average(losses, 50, 50));
    }
}
