#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "brdfnet/training.hpp"

namespace brdfnet {

struct SceneScore {
    std::string id;
    double rmse = 0.0;         // over the five normalized dimensions
    double scale_error = 0.0;  // mean over channels of |(rho_d + rho_s) - truth|
};

struct EvalReport {
    std::string predictor;
    Parameterization parameterization = Parameterization::Physical;
    int scenes = 0;
    double rmse = 0.0;  // sqrt of the mean squared normalized error over scenes and dimensions
    Vec5 per_dimension = Vec5::Zero();
    double mean_scale_error = 0.0;
    std::vector<SceneScore> per_scene;

    nlohmann::json to_json() const;
};

/// Clamped predictions normalized by the predictor's statistics.
EvalReport eval_rmse(const Predictor& model, const Dataset& ds, const std::vector<int>& split,
                     const EvalOptions& opt = {});

struct CoveragePoint {
    int count = 0;
    double rmse = 0.0;
};

struct CoverageCurve {
    std::string axis;  // "views" or "voxels"
    std::vector<CoveragePoint> points;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// RMSE when each voxel keeps only observations from the first k rendered views.
CoverageCurve coverage_sweep(const Predictor& model, const Dataset& ds, const std::vector<int>& split,
                             const std::vector<int>& view_counts, const EvalOptions& opt = {});

/// RMSE as a function of the number of voxels per forward pass.
CoverageCurve voxel_sweep(const Predictor& model, const Dataset& ds, const std::vector<int>& split,
                          const std::vector<int>& voxel_counts, const EvalOptions& opt = {});

struct ModelReport {
    std::string architecture;
    std::int64_t parameters = 0;
    std::uint64_t file_bytes = 0;
    std::uint64_t blob_bytes = 0;
    std::uint64_t header_bytes = 0;
    int nodes = 0;
    double mean_forward_ms = 0.0;

    nlohmann::json to_json() const;
};

/// Parameter count, serialized size and mean wall time of 100 forward passes after 10 warmups.
ModelReport model_report(const std::filesystem::path& checkpoint, const SceneRecord& scene, int timed_runs = 100,
                         int warmups = 10);

struct RenderComparison {
    double mean_ldr_error = 0.0;  // mean absolute LDR difference over foreground pixels of both renders
};

/// Renders the scene's shape and a unit reference sphere under `env` with the true and the
/// predicted material; writes a 2x2 PPM grid (rows: shape, sphere; columns: truth, prediction).
RenderComparison render_comparison(const WardBRDF& truth, const WardBRDF& predicted, const Shape& shape,
                                   const Environment& env, const Vec3& view_dir, int resolution,
                                   const std::filesystem::path& out_ppm);

Environment parse_environment(const nlohmann::json& j);

/// Physical material predicted for a scene, after clamping.
WardBRDF predicted_material(const Predictor& model, const SceneRecord& scene, const EvalOptions& opt = {});

}  // namespace brdfnet

namespace brdfnet {

struct AblationArm {
    double lambda = 0.0;
    EvalReport report;
};

struct AblationResult {
    AblationArm with_ec;
    AblationArm without_ec;

    nlohmann::json to_json() const;
};

/// Trains the configured model with lambda and with 0 under identical seeds and budgets, then
/// evaluates both on every scene of `perturbed`. A non-null `with_ec_checkpoint` skips
/// training that arm (it must come from the same configuration).
AblationResult ablate_ec(const Dataset& train_ds, const Dataset& perturbed, const TrainConfig& cfg,
                         const LossConfig& loss, const std::filesystem::path& out_dir = {},
                         const Checkpoint* with_ec_checkpoint = nullptr);

std::vector<int> all_scenes(const Dataset& ds);

}  // namespace brdfnet
