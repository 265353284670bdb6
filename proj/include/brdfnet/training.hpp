#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "brdfnet/checkpoint.hpp"
#include "brdfnet/dataset.hpp"
#include "brdfnet/grouplet.hpp"
#include "brdfnet/hemicnn.hpp"
#include "brdfnet/loss.hpp"

namespace brdfnet {

enum class ModelKind { HemiCnn, GroupletFast, GroupletSlow };

ModelKind parse_model(std::string_view name);
std::string_view model_name(ModelKind kind);
inline bool is_grouplet(ModelKind kind) { return kind != ModelKind::HemiCnn; }

/// Per-dimension mean and population standard deviation of training targets.
struct NormStats {
    Parameterization parameterization = Parameterization::Physical;
    Vec5 mean = Vec5::Zero();
    Vec5 std = Vec5::Ones();

    Vec5 normalize(const Vec5& v) const { return (v - mean).cwiseQuotient(std); }
    Vec5 denormalize(const Vec5& z) const { return mean + std.cwiseProduct(z); }
};

nlohmann::json to_json(const NormStats& s);
NormStats norm_stats_from_json(const nlohmann::json& j);

/// Throws "degenerate-stats" when a dimension has zero spread.
NormStats compute_norm_stats(const std::vector<WardBRDF>& targets, Parameterization p);
NormStats compute_norm_stats(const Dataset& ds, const std::vector<int>& split, Parameterization p);

struct TrainConfig {
    ModelKind model = ModelKind::GroupletFast;
    std::string optimizer;       // "rmsprop" | "sgd"; empty selects the model default
    double learning_rate = 0.0;  // 0 selects the model default
    double momentum = 0.9;
    int minibatches = 2000;
    int batch_size = 16;
    std::uint64_t seed = 0;
    int validate_every = 100;
    int hemisphere_resolution = kHemisphereResolution;
    int hemi_voxels = kHemiCnnVoxels;
    int train_nodes = 20;
    int observations = 10;
    bool resample_nodes = true;  // fresh node draws every minibatch; otherwise fixed per scene
    bool double_precision = false;

    /// Fills model-dependent defaults (optimizer, learning rate).
    TrainConfig resolved() const;
    void validate() const;
    /// Minibatch budget from the original schedule: 100K for HemiCNN, 13K for Grouplet.
    static int full_budget(ModelKind model);
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LossConfig& c);
LossConfig loss_config_from_json(const nlohmann::json& j);

/// Evaluation-time input options.
struct EvalOptions {
    int max_views = 0;  // 0 uses every rendered view
    int nodes = 0;      // voxels per forward pass; 0 uses the model preset
    std::uint64_t seed = 0;
};

/// Inference-time clamp of a prediction vector to the generator's ranges.
Vec5 clamp_prediction(const Vec5& v, Parameterization p);

/// Anything that maps a scene to a prediction vector in its parameterization.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual std::string name() const = 0;
    virtual const NormStats& stats() const = 0;
    /// Raw output before clamping.
    virtual Vec5 predict(const SceneRecord& scene, const EvalOptions& opt) const = 0;
};

class MeanPredictor : public Predictor {
public:
    explicit MeanPredictor(NormStats stats) : stats_(std::move(stats)) {}
    std::string name() const override { return "mean"; }
    const NormStats& stats() const override { return stats_; }
    Vec5 predict(const SceneRecord&, const EvalOptions&) const override { return stats_.mean; }

private:
    NormStats stats_;
};

class OraclePredictor : public Predictor {
public:
    explicit OraclePredictor(NormStats stats) : stats_(std::move(stats)) {}
    std::string name() const override { return "oracle"; }
    const NormStats& stats() const override { return stats_; }
    Vec5 predict(const SceneRecord& scene, const EvalOptions&) const override {
        return target_vector(scene.scene.material, stats_.parameterization);
    }

private:
    NormStats stats_;
};

/// Hemisphere images for a scene plus the frames their observations come from.
struct HemiInput {
    nn::Matrix<double> images;
    std::vector<int> frames;
};

HemiInput hemi_input(const SceneRecord& scene, int resolution, int voxels, int max_views, Rng& rng);

std::vector<ViewStats> view_stats(const SceneRecord& scene, const std::vector<int>& frames);

/// A trained network restored from a checkpoint; inference runs at 64-bit.
class NetworkModel : public Predictor {
public:
    explicit NetworkModel(const Checkpoint& ckpt);
    std::string name() const override { return std::string(model_name(kind_)); }
    const NormStats& stats() const override { return stats_; }
    Vec5 predict(const SceneRecord& scene, const EvalOptions& opt) const override;

    ModelKind kind() const { return kind_; }
    int preset_nodes() const { return nodes_; }
    std::int64_t parameter_count() const;
    const LossConfig& loss() const { return loss_; }

private:
    ModelKind kind_;
    NormStats stats_;
    LossConfig loss_;
    int resolution_ = kHemisphereResolution;
    int hemi_voxels_ = kHemiCnnVoxels;
    int nodes_ = 20;
    std::unique_ptr<HemiCnn<double>> hemi_;
    std::unique_ptr<Grouplet<double>> grouplet_;
};

/// Seed of the Rng that initializes network weights in train().
std::uint64_t initialization_seed(std::uint64_t seed);

struct TrainResult {
    Checkpoint final_checkpoint;
    Checkpoint best_checkpoint;
    double best_validation_rmse = 0.0;
    int best_step = 0;
    std::vector<nlohmann::json> log;
};

/// Trains on ds.train, validating on ds.validation. When out_dir is non-empty, writes
/// final.ckpt, best.ckpt, train_log.jsonl and train_summary.json there.
TrainResult train(const Dataset& ds, const TrainConfig& cfg, const LossConfig& loss,
                  const std::filesystem::path& out_dir = {});

}  // namespace brdfnet
