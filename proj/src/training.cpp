#include "brdfnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "brdfnet/error.hpp"
#include "brdfnet/eval.hpp"
#include "brdfnet/nn/optim.hpp"

namespace brdfnet {

namespace fs = std::filesystem;
using nlohmann::json;

ModelKind parse_model(std::string_view name) {
    if (name == "hemicnn") return ModelKind::HemiCnn;
    if (name == "grouplet-fast" || name == "grouplet") return ModelKind::GroupletFast;
    if (name == "grouplet-slow") return ModelKind::GroupletSlow;
    throw Error("config", "unknown model '" + std::string(name) + "' (expected hemicnn, grouplet-fast, grouplet-slow)");
}

std::string_view model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::HemiCnn: return "hemicnn";
        case ModelKind::GroupletFast: return "grouplet-fast";
        case ModelKind::GroupletSlow: return "grouplet-slow";
    }
    return "unknown";
}

// ---- normalization ---------------------------------------------------------

json to_json(const NormStats& s) {
    return {{"parameterization", parameterization_name(s.parameterization)},
            {"mean", std::vector<double>(s.mean.data(), s.mean.data() + 5)},
            {"std", std::vector<double>(s.std.data(), s.std.data() + 5)}};
}

NormStats norm_stats_from_json(const json& j) {
    NormStats s;
    s.parameterization = parse_parameterization(j.at("parameterization").get<std::string>());
    const auto mean = j.at("mean").get<std::vector<double>>(), sd = j.at("std").get<std::vector<double>>();
    require(mean.size() == 5 && sd.size() == 5, "checkpoint", "normalization statistics must have five entries");
    for (int i = 0; i < 5; ++i) {
        s.mean(i) = mean[std::size_t(i)];
        s.std(i) = sd[std::size_t(i)];
    }
    return s;
}

NormStats compute_norm_stats(const std::vector<WardBRDF>& targets, Parameterization p) {
    require(!targets.empty(), "degenerate-stats", "normalization statistics need at least one scene");
    NormStats s;
    s.parameterization = p;
    Vec5 sum = Vec5::Zero();
    for (const auto& t : targets) sum += target_vector(t, p);
    s.mean = sum / double(targets.size());
    Vec5 sq = Vec5::Zero();
    for (const auto& t : targets) sq += (target_vector(t, p) - s.mean).cwiseAbs2();
    s.std = (sq / double(targets.size())).cwiseSqrt();
    for (int i = 0; i < 5; ++i)
        require(s.std(i) > 1e-12, "degenerate-stats",
                "training targets have zero spread in dimension " + std::to_string(i) + "; regenerate the dataset");
    return s;
}

NormStats compute_norm_stats(const Dataset& ds, const std::vector<int>& split, Parameterization p) {
    std::vector<WardBRDF> targets;
    for (int i : split) targets.push_back(ds.scenes.at(std::size_t(i)).scene.material);
    return compute_norm_stats(targets, p);
}

// ---- configuration -----------------------------------------------------------

int TrainConfig::full_budget(ModelKind model) { return model == ModelKind::HemiCnn ? 100000 : 13000; }

TrainConfig TrainConfig::resolved() const {
    TrainConfig c = *this;
    if (c.optimizer.empty()) c.optimizer = model == ModelKind::HemiCnn ? "rmsprop" : "sgd";
    if (c.learning_rate <= 0.0) c.learning_rate = c.optimizer == "rmsprop" ? 1e-4 : 1e-2;
    return c;
}

void TrainConfig::validate() const {
    require(optimizer.empty() || optimizer == "rmsprop" || optimizer == "sgd", "config",
            "optimizer must be rmsprop or sgd");
    require(learning_rate >= 0.0 && momentum >= 0.0 && momentum < 1.0, "config", "invalid optimizer settings");
    require(minibatches >= 0, "config", "minibatches must be non-negative");
    require(batch_size >= 1, "config", "batch_size must be positive");
    require(validate_every >= 1, "config", "validate_every must be positive");
    require(hemisphere_resolution >= 4 && hemisphere_resolution % 2 == 0, "config",
            "hemisphere_resolution must be even and at least 4");
    require(hemi_voxels >= 1 && train_nodes >= 1 && observations >= 1, "config", "voxel and observation counts must be positive");
}

json to_json(const TrainConfig& c) {
    return {{"model", model_name(c.model)},
            {"optimizer", c.optimizer},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"minibatches", c.minibatches},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"validate_every", c.validate_every},
            {"hemisphere_resolution", c.hemisphere_resolution},
            {"hemi_voxels", c.hemi_voxels},
            {"train_nodes", c.train_nodes},
            {"observations", c.observations},
            {"resample_nodes", c.resample_nodes},
            {"precision", c.double_precision ? "float64" : "float32"}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    if (j.contains("model")) c.model = parse_model(j.at("model").get<std::string>());
    c.optimizer = j.value("optimizer", c.optimizer);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.minibatches = j.value("minibatches", c.minibatches);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.validate_every = j.value("validate_every", c.validate_every);
    c.hemisphere_resolution = j.value("hemisphere_resolution", c.hemisphere_resolution);
    c.hemi_voxels = j.value("hemi_voxels", c.hemi_voxels);
    c.train_nodes = j.value("train_nodes", c.train_nodes);
    c.observations = j.value("observations", c.observations);
    c.resample_nodes = j.value("resample_nodes", c.resample_nodes);
    if (j.contains("precision")) {
        const auto p = j.at("precision").get<std::string>();
        require(p == "float32" || p == "float64", "config", "precision must be float32 or float64");
        c.double_precision = p == "float64";
    }
    return c;
}

json to_json(const LossConfig& c) {
    return {{"metric", metric_name(c.metric)},
            {"parameterization", parameterization_name(c.parameterization)},
            {"lambda", c.lambda},
            {"lambda_g", c.lambda_g},
            {"cube_root_grid", c.cube_root_grid},
            {"alpha_guard", c.alpha_guard}};
}

LossConfig loss_config_from_json(const json& j) {
    LossConfig c;
    if (j.contains("metric")) c = LossConfig::for_metric(parse_metric(j.at("metric").get<std::string>()));
    if (j.contains("parameterization")) c.parameterization = parse_parameterization(j.at("parameterization").get<std::string>());
    c.lambda = j.value("lambda", c.lambda);
    c.lambda_g = j.value("lambda_g", c.lambda_g);
    c.cube_root_grid = j.value("cube_root_grid", c.cube_root_grid);
    c.alpha_guard = j.value("alpha_guard", c.alpha_guard);
    return c;
}

// ---- inference ---------------------------------------------------------------

Vec5 clamp_prediction(const Vec5& v, Parameterization p) {
    WardBRDF w = p == Parameterization::Physical ? ward_from_vector(v) : ward_from_perceptual(perceptual_from_vector(v));
    w.rho_d = w.rho_d.cwiseMax(0.0).cwiseMin(1.0);
    w.rho_s = std::clamp(w.rho_s, 0.0, 1.0);
    w.alpha = std::clamp(w.alpha, 0.03, 1.0);
    return target_vector(w, p);
}

HemiInput hemi_input(const SceneRecord& scene, int resolution, int voxels, int max_views, Rng& rng) {
    std::vector<VoxelSample> usable;
    for (const VoxelSample& v : scene.voxels) {
        VoxelSample r{v.position, v.normal, {}};
        for (const Observation& o : v.observations)
            if (max_views <= 0 || o.frame_id < max_views) r.observations.push_back(o);
        if (!r.observations.empty()) usable.push_back(std::move(r));
    }
    require(!usable.empty(), "degenerate-scene", "scene " + scene.id + " has no observed voxels");
    const auto chosen = select_voxels(usable, voxels, rng);
    const Eigen::Index pix = Eigen::Index(resolution) * resolution;
    HemiInput in;
    in.images.resize(Eigen::Index(chosen.size()) * pix, 3);
    std::vector<bool> used(scene.frames.size(), false);
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        const VoxelSample& v = usable[chosen[k]];
        in.images.middleRows(Eigen::Index(k) * pix, pix) = build_hemisphere_image(v, resolution).pixels.matrix();
        for (const Observation& o : v.observations)
            if (o.frame_id >= 0 && std::size_t(o.frame_id) < used.size()) used[std::size_t(o.frame_id)] = true;
    }
    for (std::size_t f = 0; f < used.size(); ++f)
        if (used[f]) in.frames.push_back(int(f));
    return in;
}

std::vector<ViewStats> view_stats(const SceneRecord& scene, const std::vector<int>& frames) {
    std::vector<ViewStats> out;
    for (int f : frames) {
        const FrameStats& s = scene.frames.at(std::size_t(f));
        out.push_back({s.f_bar, s.b_bar});
    }
    return out;
}

NetworkModel::NetworkModel(const Checkpoint& ckpt) {
    const json& h = ckpt.header;
    require(h.value("format", "") == "brdfnet-checkpoint", "checkpoint", "not a model checkpoint");
    kind_ = parse_model(h.at("architecture").get<std::string>());
    stats_ = norm_stats_from_json(h.at("norm_stats"));
    loss_ = loss_config_from_json(h.at("loss"));
    const json& m = h.at("model");
    if (kind_ == ModelKind::HemiCnn) {
        resolution_ = m.at("hemisphere_resolution").get<int>();
        hemi_voxels_ = m.at("hemi_voxels").get<int>();
        hemi_ = std::make_unique<HemiCnn<double>>(resolution_);
        import_tensors(hemi_->params(), ckpt.tensors);
    } else {
        nodes_ = m.at("nodes").get<int>();
        grouplet_ = std::make_unique<Grouplet<double>>(m.at("observations").get<int>());
        import_tensors(grouplet_->params(), ckpt.tensors);
    }
}

std::int64_t NetworkModel::parameter_count() const {
    return hemi_ ? std::int64_t(nn::parameter_count(hemi_->params())) : std::int64_t(nn::parameter_count(grouplet_->params()));
}

Vec5 NetworkModel::predict(const SceneRecord& scene, const EvalOptions& opt) const {
    nn::Matrix<double> z;
    if (hemi_) {
        Rng rng(derive_seed(opt.seed, {std::uint64_t(scene.index)}));
        const int voxels = opt.nodes > 0 ? opt.nodes : hemi_voxels_;
        const HemiInput in = hemi_input(scene, resolution_, voxels, opt.max_views, rng);
        z = hemi_->forward(in.images, voxels);
    } else {
        const GroupletConfig cfg{opt.nodes > 0 ? opt.nodes : nodes_, grouplet_->observations()};
        const GroupletInput in = grouplet_input(scene, cfg, opt.seed, opt.max_views);
        z = grouplet_->forward(in.branch, in.normals, cfg.nodes);
    }
    return stats_.denormalize(z.row(0).transpose());
}

// ---- training ----------------------------------------------------------------

std::uint64_t initialization_seed(std::uint64_t seed) { return derive_seed(seed, {101}); }

namespace {

enum : std::uint64_t { kBatchStream = 102, kSampleStream, kFixedInputStream };

json checkpoint_header(const TrainConfig& cfg, const LossConfig& loss, const NormStats& stats, int step) {
    json model = {{"observations", cfg.observations},
                  {"nodes", cfg.model == ModelKind::GroupletSlow ? GroupletConfig::slow().nodes : cfg.train_nodes},
                  {"hemisphere_resolution", cfg.hemisphere_resolution},
                  {"hemi_voxels", cfg.hemi_voxels}};
    return {{"format", "brdfnet-checkpoint"},
            {"version", 1},
            {"architecture", model_name(cfg.model)},
            {"model", model},
            {"norm_stats", to_json(stats)},
            {"loss", to_json(loss)},
            {"train", to_json(cfg)},
            {"step", step}};
}

struct SceneBatch {
    nn::Matrix<double> a, b;  // HemiCNN: images; Grouplet: branch rows and normals
    Eigen::Index per_set = 0;
    std::vector<std::vector<ViewStats>> views;
};

template <class S>
class Trainer {
public:
    Trainer(const Dataset& ds, const TrainConfig& cfg, const LossConfig& loss, const fs::path& out_dir)
        : ds_(ds), cfg_(cfg), loss_(loss), out_dir_(out_dir) {
        stats_ = compute_norm_stats(ds, ds.train, loss.parameterization);
        Rng init(initialization_seed(cfg.seed));
        if (cfg.model == ModelKind::HemiCnn) {
            hemi_ = std::make_unique<HemiCnn<S>>(cfg.hemisphere_resolution);
            hemi_->initialize(init);
            params_ = hemi_->params();
        } else {
            grouplet_ = std::make_unique<Grouplet<S>>(cfg.observations);
            grouplet_->initialize(init);
            params_ = grouplet_->params();
        }
        // Fixed inputs: HemiCNN always, Grouplet only without per-minibatch resampling.
        if (cfg.model == ModelKind::HemiCnn || !cfg.resample_nodes) {
            for (int idx : ds.train) {
                const SceneRecord& s = ds.scenes[std::size_t(idx)];
                const std::uint64_t seed = derive_seed(cfg.seed, {kFixedInputStream, std::uint64_t(s.index)});
                if (hemi_) {
                    Rng rng(seed);
                    fixed_hemi_.emplace(idx, hemi_input(s, cfg.hemisphere_resolution, cfg.hemi_voxels, 0, rng));
                } else {
                    fixed_grouplet_.emplace(idx, grouplet_input(s, {cfg.train_nodes, cfg.observations}, seed));
                }
            }
        }
    }

    TrainResult run() {
        TrainResult result;
        std::ofstream log_file;
        if (!out_dir_.empty()) {
            fs::create_directories(out_dir_);
            log_file.open(out_dir_ / "train_log.jsonl");
            require(bool(log_file), "io", "cannot write " + (out_dir_ / "train_log.jsonl").string());
        }
        auto emit = [&](json line) {
            if (log_file) log_file << line.dump() << '\n';
            result.log.push_back(std::move(line));
        };
        emit({{"event", "config"},
              {"train", to_json(cfg_)},
              {"loss", to_json(loss_)},
              {"norm_stats", to_json(stats_)},
              {"train_scenes", ds_.train.size()},
              {"validation_scenes", ds_.validation.size()},
              {"cube_root_training_grid", loss_.metric == Metric::CubeRoot ? loss_.cube_root_grid : 0}});

        Rng batch_rng(derive_seed(cfg_.seed, {kBatchStream}));
        Rng sample_rng(derive_seed(cfg_.seed, {kSampleStream}));
        std::vector<int> order = ds_.train;
        std::size_t cursor = order.size();

        result.best_validation_rmse = validate();
        result.best_checkpoint = snapshot(0);
        emit({{"event", "validation"}, {"step", 0}, {"val_rmse", result.best_validation_rmse}});

        nn::RmsProp<S> rmsprop;
        rmsprop.lr = cfg_.learning_rate;
        nn::SgdMomentum<S> sgd;
        sgd.lr = cfg_.learning_rate;
        sgd.momentum = cfg_.momentum;

        for (int step = 1; step <= cfg_.minibatches; ++step) {
            std::vector<int> batch;
            for (int k = 0; k < cfg_.batch_size; ++k) {
                if (cursor == order.size()) {
                    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[batch_rng.index(i)]);
                    cursor = 0;
                }
                batch.push_back(order[cursor++]);
            }
            const SceneBatch in = assemble(batch, sample_rng);

            nn::zero_grad(params_);
            const nn::Matrix<S> z = forward(in);
            nn::Matrix<S> dz(z.rows(), z.cols());
            double loss_sum = 0.0, ed_sum = 0.0, ec_sum = 0.0;
            for (std::size_t k = 0; k < batch.size(); ++k) {
                const Vec5 zk = z.row(Eigen::Index(k)).transpose().template cast<double>();
                const WardBRDF& target = ds_.scenes[std::size_t(batch[k])].scene.material;
                const LossValue lv = loss_total(stats_.denormalize(zk), target, in.views[k], loss_);
                if (!std::isfinite(lv.total) || !lv.grad.allFinite()) dump_nonfinite(step, batch, z);
                loss_sum += lv.total;
                ed_sum += lv.e_d;
                ec_sum += lv.e_c;
                const Vec5 g = stats_.std.cwiseProduct(lv.grad) / double(batch.size());
                dz.row(Eigen::Index(k)) = g.transpose().template cast<S>();
            }
            backward(dz);
            if (cfg_.optimizer == "rmsprop")
                rmsprop.step(params_);
            else
                sgd.step(params_);

            const double n = double(batch.size());
            json line = {{"step", step}, {"loss", loss_sum / n}, {"e_d", ed_sum / n}, {"e_c", ec_sum / n}};
            if (step % cfg_.validate_every == 0 || step == cfg_.minibatches) {
                const double v = validate();
                line["val_rmse"] = v;
                if (v < result.best_validation_rmse) {
                    result.best_validation_rmse = v;
                    result.best_step = step;
                    result.best_checkpoint = snapshot(step);
                }
            }
            emit(std::move(line));
        }
        result.final_checkpoint = snapshot(cfg_.minibatches);
        if (!out_dir_.empty()) {
            const auto final_bytes = save_checkpoint(out_dir_ / "final.ckpt", result.final_checkpoint);
            const auto best_bytes = save_checkpoint(out_dir_ / "best.ckpt", result.best_checkpoint);
            std::ofstream summary(out_dir_ / "train_summary.json");
            summary << json{{"model", model_name(cfg_.model)},
                            {"minibatches", cfg_.minibatches},
                            {"best_step", result.best_step},
                            {"best_validation_rmse", result.best_validation_rmse},
                            {"final_checkpoint", "final.ckpt"},
                            {"final_checkpoint_bytes", final_bytes},
                            {"best_checkpoint", "best.ckpt"},
                            {"best_checkpoint_bytes", best_bytes},
                            {"parameters", nn::parameter_count(params_)}}
                           .dump(2)
                    << '\n';
        }
        return result;
    }

private:
    SceneBatch assemble(const std::vector<int>& batch, Rng& rng) const {
        SceneBatch out;
        std::vector<const nn::Matrix<double>*> a, b;
        std::vector<GroupletInput> fresh;
        fresh.reserve(batch.size());
        for (int idx : batch) {
            const SceneRecord& s = ds_.scenes[std::size_t(idx)];
            if (hemi_) {
                const HemiInput& h = fixed_hemi_.at(idx);
                a.push_back(&h.images);
                out.views.push_back(view_stats(s, h.frames));
            } else {
                const GroupletInput* g;
                if (cfg_.resample_nodes) {
                    fresh.push_back(grouplet_input(s, {cfg_.train_nodes, cfg_.observations}, rng));
                    g = &fresh.back();
                } else {
                    g = &fixed_grouplet_.at(idx);
                }
                a.push_back(&g->branch);
                b.push_back(&g->normals);
                out.views.push_back(view_stats(s, g->frames));
            }
        }
        out.a = stack(a);
        if (!b.empty()) out.b = stack(b);
        out.per_set = hemi_ ? cfg_.hemi_voxels : cfg_.train_nodes;
        return out;
    }

    static nn::Matrix<double> stack(const std::vector<const nn::Matrix<double>*>& parts) {
        Eigen::Index rows = 0;
        for (const auto* p : parts) rows += p->rows();
        nn::Matrix<double> m(rows, parts.front()->cols());
        rows = 0;
        for (const auto* p : parts) {
            m.middleRows(rows, p->rows()) = *p;
            rows += p->rows();
        }
        return m;
    }

    nn::Matrix<S> forward(const SceneBatch& in) {
        if (hemi_) return hemi_->forward(in.a.template cast<S>(), in.per_set, &hemi_tape_);
        return grouplet_->forward(in.a.template cast<S>(), in.b.template cast<S>(), in.per_set, &grouplet_tape_);
    }

    void backward(const nn::Matrix<S>& dz) {
        if (hemi_)
            hemi_->backward(hemi_tape_, dz);
        else
            grouplet_->backward(grouplet_tape_, dz);
    }

    Checkpoint snapshot(int step) const {
        Checkpoint c;
        c.header = checkpoint_header(cfg_, loss_, stats_, step);
        c.header["precision"] = cfg_.double_precision ? "float64" : "float32";
        c.tensors = export_tensors(params_);
        return c;
    }

    double validate() const {
        if (ds_.validation.empty()) return 0.0;
        const NetworkModel model(snapshot(0));
        return eval_rmse(model, ds_, ds_.validation).rmse;
    }

    [[noreturn]] void dump_nonfinite(int step, const std::vector<int>& batch, const nn::Matrix<S>& z) const {
        json ids = json::array(), outputs = json::array();
        for (std::size_t k = 0; k < batch.size(); ++k) {
            ids.push_back(ds_.scenes[std::size_t(batch[k])].id);
            json row = json::array();
            for (Eigen::Index c = 0; c < z.cols(); ++c) row.push_back(double(z(Eigen::Index(k), c)));
            outputs.push_back(row);
        }
        const json dump = {{"step", step}, {"scenes", ids}, {"outputs", outputs}, {"train", to_json(cfg_)}, {"loss", to_json(loss_)}};
        std::string where;
        if (!out_dir_.empty()) {
            std::ofstream(out_dir_ / "nonfinite_minibatch.json") << dump.dump(2) << '\n';
            where = "; minibatch written to " + (out_dir_ / "nonfinite_minibatch.json").string();
        }
        throw Error("non-finite-loss", "non-finite loss at minibatch " + std::to_string(step) + where);
    }

    const Dataset& ds_;
    TrainConfig cfg_;
    LossConfig loss_;
    fs::path out_dir_;
    NormStats stats_;
    std::unique_ptr<HemiCnn<S>> hemi_;
    std::unique_ptr<Grouplet<S>> grouplet_;
    typename HemiCnn<S>::Tape hemi_tape_;
    typename Grouplet<S>::Tape grouplet_tape_;
    nn::ParamList<S> params_;
    std::map<int, HemiInput> fixed_hemi_;
    std::map<int, GroupletInput> fixed_grouplet_;
};

}  // namespace

TrainResult train(const Dataset& ds, const TrainConfig& config, const LossConfig& loss, const fs::path& out_dir) {
    config.validate();
    loss.validate();
    require(!ds.train.empty(), "config", "dataset has no training scenes");
    const TrainConfig cfg = config.resolved();
    if (cfg.double_precision) return Trainer<double>(ds, cfg, loss, out_dir).run();
    return Trainer<float>(ds, cfg, loss, out_dir).run();
}

}  // namespace brdfnet
