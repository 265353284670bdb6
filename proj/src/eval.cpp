#include "brdfnet/eval.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "brdfnet/error.hpp"

namespace brdfnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vec_json(const Vec5& v) { return std::vector<double>(v.data(), v.data() + 5); }

}  // namespace

WardBRDF predicted_material(const Predictor& model, const SceneRecord& scene, const EvalOptions& opt) {
    const Parameterization p = model.stats().parameterization;
    const Vec5 v = clamp_prediction(model.predict(scene, opt), p);
    return p == Parameterization::Physical ? ward_from_vector(v) : from_perceptual(perceptual_from_vector(v));
}

json EvalReport::to_json() const {
    json scenes_json = json::array();
    for (const auto& s : per_scene) scenes_json.push_back({{"id", s.id}, {"rmse", s.rmse}, {"scale_error", s.scale_error}});
    return {{"predictor", predictor},
            {"parameterization", parameterization_name(parameterization)},
            {"scenes", scenes},
            {"rmse", rmse},
            {"per_dimension_rmse", vec_json(per_dimension)},
            {"mean_scale_error", mean_scale_error},
            {"per_scene", scenes_json}};
}

EvalReport eval_rmse(const Predictor& model, const Dataset& ds, const std::vector<int>& split, const EvalOptions& opt) {
    require(!split.empty(), "eval", "evaluation split is empty");
    const NormStats& stats = model.stats();
    EvalReport r;
    r.predictor = model.name();
    r.parameterization = stats.parameterization;
    Vec5 sq = Vec5::Zero();
    double scale = 0.0;
    for (int idx : split) {
        const SceneRecord& s = ds.scenes.at(std::size_t(idx));
        const Vec5 pred = clamp_prediction(model.predict(s, opt), stats.parameterization);
        const Vec5 target = target_vector(s.scene.material, stats.parameterization);
        const Vec5 z = (pred - target).cwiseQuotient(stats.std);
        require(z.allFinite(), "eval", "non-finite prediction for scene " + s.id);
        sq += z.cwiseAbs2();
        const WardBRDF w = stats.parameterization == Parameterization::Physical
                               ? ward_from_vector(pred)
                               : from_perceptual(perceptual_from_vector(pred));
        const Rgb sum_pred = w.rho_d.array() + w.rho_s;
        const Rgb sum_true = s.scene.material.rho_d.array() + s.scene.material.rho_s;
        const double se = (sum_pred - sum_true).cwiseAbs().mean();
        scale += se;
        r.per_scene.push_back({s.id, std::sqrt(z.squaredNorm() / 5.0), se});
    }
    r.scenes = int(split.size());
    r.per_dimension = (sq / double(split.size())).cwiseSqrt();
    r.rmse = std::sqrt(sq.sum() / (5.0 * double(split.size())));
    r.mean_scale_error = scale / double(split.size());
    return r;
}

json CoverageCurve::to_json() const {
    json pts = json::array();
    for (const auto& p : points) pts.push_back({{axis, p.count}, {"rmse", p.rmse}});
    return {{"axis", axis}, {"points", pts}};
}

std::string CoverageCurve::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << axis << ",rmse\n";
    for (const auto& p : points) out << p.count << ',' << p.rmse << '\n';
    return out.str();
}

namespace {

void require_increasing(const std::vector<int>& counts) {
    require(!counts.empty(), "config", "sweep needs at least one count");
    for (std::size_t i = 0; i < counts.size(); ++i) {
        require(counts[i] >= 1, "config", "sweep counts must be positive");
        require(i == 0 || counts[i] > counts[i - 1], "config", "sweep counts must be strictly increasing");
    }
}

}  // namespace

CoverageCurve coverage_sweep(const Predictor& model, const Dataset& ds, const std::vector<int>& split,
                             const std::vector<int>& view_counts, const EvalOptions& opt) {
    require_increasing(view_counts);
    for (int idx : split)
        require(std::size_t(view_counts.back()) <= ds.scenes.at(std::size_t(idx)).frames.size(), "coverage",
                "view count " + std::to_string(view_counts.back()) + " exceeds the rendered views of scene " +
                    ds.scenes[std::size_t(idx)].id);
    CoverageCurve c{"views", {}};
    for (int k : view_counts) {
        EvalOptions o = opt;
        o.max_views = k;
        c.points.push_back({k, eval_rmse(model, ds, split, o).rmse});
    }
    return c;
}

CoverageCurve voxel_sweep(const Predictor& model, const Dataset& ds, const std::vector<int>& split,
                          const std::vector<int>& voxel_counts, const EvalOptions& opt) {
    require_increasing(voxel_counts);
    CoverageCurve c{"voxels", {}};
    for (int n : voxel_counts) {
        EvalOptions o = opt;
        o.nodes = n;
        c.points.push_back({n, eval_rmse(model, ds, split, o).rmse});
    }
    return c;
}

json ModelReport::to_json() const {
    json reference;
    if (architecture == "hemicnn")
        reference = {{"reported_model_bytes", 56000}, {"reported_inference_ms", 16}};
    else
        reference = {{"reported_model_bytes", 339000}, {"reported_inference_ms", architecture == "grouplet-slow" ? 90 : 5}};
    reference["note"] = "reference figures echoed for comparison; the stated layer widths imply " + std::to_string(parameters) +
                    " parameters (" + std::to_string(blob_bytes) +
                    " bytes at 32-bit), which does not reconcile with the reported model size";
    return {{"architecture", architecture},
            {"parameters", parameters},
            {"file_bytes", file_bytes},
            {"blob_bytes", blob_bytes},
            {"header_bytes", header_bytes},
            {"nodes", nodes},
            {"mean_forward_ms", mean_forward_ms},
            {"reference", reference}};
}

ModelReport model_report(const fs::path& checkpoint, const SceneRecord& scene, int timed_runs, int warmups) {
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    const NetworkModel model(ckpt);
    ModelReport r;
    r.architecture = std::string(model_name(model.kind()));
    r.parameters = model.parameter_count();
    r.file_bytes = fs::file_size(checkpoint);
    r.blob_bytes = std::uint64_t(r.parameters) * sizeof(float);
    r.header_bytes = r.file_bytes - r.blob_bytes;
    r.nodes = model.kind() == ModelKind::HemiCnn ? ckpt.header.at("model").at("hemi_voxels").get<int>() : model.preset_nodes();
    const EvalOptions opt;
    Vec5 sink = Vec5::Zero();
    for (int i = 0; i < warmups; ++i) sink += model.predict(scene, opt);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < timed_runs; ++i) sink += model.predict(scene, opt);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    require(sink.allFinite(), "eval", "non-finite output during timing");
    r.mean_forward_ms = timed_runs > 0 ? ms / timed_runs : 0.0;
    return r;
}

Environment parse_environment(const json& j) {
    auto vec = [](const json& v, const char* what) {
        require(v.is_array() && v.size() == 3, "invalid-environment", std::string(what) + " must be a 3-vector");
        Vec3 out;
        for (int i = 0; i < 3; ++i) {
            require(v[std::size_t(i)].is_number(), "invalid-environment", std::string(what) + " must be numeric");
            out(i) = v[std::size_t(i)].get<double>();
        }
        return out;
    };
    Environment env;
    if (j.contains("ambient")) env.ambient = vec(j.at("ambient"), "ambient");
    require(env.ambient.minCoeff() >= 0.0, "invalid-environment", "ambient radiance must be non-negative");
    if (j.contains("lights")) {
        require(j.at("lights").is_array(), "invalid-environment", "lights must be an array");
        for (const auto& l : j.at("lights")) {
            const Vec3 d = vec(l.at("direction"), "light direction");
            const Vec3 rad = vec(l.at("radiance"), "light radiance");
            require(d.norm() > 0.0, "invalid-environment", "light direction must be non-zero");
            require(rad.minCoeff() >= 0.0, "invalid-environment", "light radiance must be non-negative");
            env.lights.push_back({d.normalized(), rad});
        }
    }
    require(env.ambient.maxCoeff() > 0.0 || !env.lights.empty(), "invalid-environment", "environment emits no light");
    return env;
}

RenderComparison render_comparison(const WardBRDF& truth, const WardBRDF& predicted, const Shape& shape,
                                   const Environment& env, const Vec3& view_dir, int resolution, const fs::path& out_ppm) {
    require(view_dir.norm() > 0.0, "invalid-environment", "view direction must be non-zero");
    require(resolution >= 8, "config", "render resolution must be at least 8");
    const Camera cam = Camera::look_at(3.5 * view_dir.normalized(), Vec3::Zero(), resolution, resolution, 45.0);
    const Shape shapes[2] = {shape, Shape::sphere(1.0)};
    const WardBRDF materials[2] = {truth, predicted};
    Frame frames[2][2];
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) frames[r][c] = render_view(Scene{shapes[r], materials[c], env}, cam);

    double err = 0.0;
    long count = 0;
    for (int r = 0; r < 2; ++r)
        for (Eigen::Index p = 0; p < frames[r][0].depth.size(); ++p)
            if (frames[r][0].depth(p) > 0.0) {
                err += (frames[r][0].ldr.row(p) - frames[r][1].ldr.row(p)).abs().mean();
                ++count;
            }

    const int w = 2 * resolution, h = 2 * resolution;
    Eigen::Array<double, Eigen::Dynamic, 3> grid(w * h, 3);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < resolution; ++y)
                for (int x = 0; x < resolution; ++x)
                    grid.row((r * resolution + y) * w + c * resolution + x) = frames[r][c].ldr.row(y * resolution + x);
    if (out_ppm.has_parent_path()) fs::create_directories(out_ppm.parent_path());
    write_ppm(out_ppm, grid, w, h);
    return {count > 0 ? err / double(count) : 0.0};
}

}  // namespace brdfnet

namespace brdfnet {

std::vector<int> all_scenes(const Dataset& ds) {
    std::vector<int> all(ds.scenes.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = int(i);
    return all;
}

nlohmann::json AblationResult::to_json() const {
    auto arm = [](const AblationArm& a) {
        return nlohmann::json{{"lambda", a.lambda},
                              {"mean_scale_error", a.report.mean_scale_error},
                              {"rmse", a.report.rmse},
                              {"scenes", a.report.scenes}};
    };
    return {{"with_ec", arm(with_ec)},
            {"without_ec", arm(without_ec)},
            {"ec_reduces_scale_error", with_ec.report.mean_scale_error < without_ec.report.mean_scale_error}};
}

AblationResult ablate_ec(const Dataset& train_ds, const Dataset& perturbed, const TrainConfig& cfg,
                         const LossConfig& loss, const std::filesystem::path& out_dir,
                         const Checkpoint* with_ec_checkpoint) {
    require(loss.lambda > 0.0, "config", "the E_c arm needs a positive lambda");
    LossConfig off = loss;
    off.lambda = 0.0;
    const auto sub = [&](const char* name) { return out_dir.empty() ? out_dir : out_dir / name; };

    const Checkpoint on_ckpt = with_ec_checkpoint ? *with_ec_checkpoint
                                                  : train(train_ds, cfg, loss, sub("with_ec")).final_checkpoint;
    const Checkpoint off_ckpt = train(train_ds, cfg, off, sub("without_ec")).final_checkpoint;
    const auto split = all_scenes(perturbed);
    AblationResult r;
    r.with_ec = {loss.lambda, eval_rmse(NetworkModel(on_ckpt), perturbed, split)};
    r.without_ec = {0.0, eval_rmse(NetworkModel(off_ckpt), perturbed, split)};
    return r;
}

}  // namespace brdfnet
