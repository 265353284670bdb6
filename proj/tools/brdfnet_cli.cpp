#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "brdfnet/dataset.hpp"
#include "brdfnet/error.hpp"
#include "brdfnet/eval.hpp"
#include "brdfnet/gradcheck.hpp"
#include "brdfnet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace brdfnet;

namespace {

// Values from --config act as defaults; explicit flags win. A key is looked up first in the
// section named after the subcommand, then at the top level.
class ConfigDefaults {
public:
    explicit ConfigDefaults(json root) : root_(std::move(root)) {}

    template <class T>
    T get(const std::string& section, const std::string& key, T fallback) const {
        try {
            if (root_.contains(section) && root_[section].is_object() && root_[section].contains(key))
                return root_[section][key].get<T>();
            if (root_.contains(key) && !root_[key].is_object()) return root_[key].get<T>();
        } catch (const json::exception& e) {
            throw Error("config", "config key '" + key + "': " + e.what());
        }
        return fallback;
    }

private:
    json root_;
};

json load_config(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string path;
        if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc)
            path = argv[i + 1];
        else if (std::strncmp(argv[i], "--config=", 9) == 0)
            path = argv[i] + 9;
        else
            continue;
        std::ifstream in(path);
        require(bool(in), "config", "cannot read config file " + path);
        try {
            json j = json::parse(in);
            require(j.is_object(), "config", "config file must hold a JSON object");
            return j;
        } catch (const json::exception& e) {
            throw Error("config", "config file " + path + ": " + e.what());
        }
    }
    return json::object();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    require(bool(out), "io", "cannot write " + path.string());
    out << text;
}

std::vector<int> parse_counts(const std::string& list) {
    std::vector<int> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw Error("config", "bad count list '" + list + "'");
        }
    }
    return out;
}

std::vector<double> parse_counts_double(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw Error("config", "bad number list '" + list + "'");
        }
    }
    return out;
}

Vec3 parse_vec3(const std::string& text) {
    const auto v = parse_counts_double(text);
    require(v.size() == 3, "config", "expected three comma-separated numbers, got '" + text + "'");
    return Vec3(v[0], v[1], v[2]);
}

std::vector<int> split_indices(const Dataset& ds, const std::string& name) {
    if (name == "validation") return ds.validation;
    if (name == "train") return ds.train;
    if (name == "all") return all_scenes(ds);
    throw Error("config", "unknown split '" + name + "' (expected validation, train, all)");
}

const SceneRecord& find_scene(const Dataset& ds, const std::string& id) {
    for (const auto& s : ds.scenes)
        if (s.id == id) return s;
    throw Error("config", "no scene '" + id + "' in " + ds.root.string());
}

json parse_json_arg(const std::string& text) {
    if (fs::exists(text)) {
        std::ifstream in(text);
        return json::parse(in);
    }
    return json::parse(text);
}

}  // namespace


int run(int argc, char** argv) {
    const ConfigDefaults cfg(load_config(argc, argv));

    CLI::App app{"Reflectance estimation toolkit: synthetic data, HemiCNN and Grouplet training, evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    std::uint64_t seed = cfg.get<std::uint64_t>("", "seed", 0);
    std::string config_path, out_dir = cfg.get<std::string>("", "out", "");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--config", config_path, "JSON file of option defaults (top-level or per-subcommand sections)");
    app.add_option("--out", out_dir, "Output directory");

    // gen-data
    GenConfig gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Render a synthetic dataset");
    gen.scenes = cfg.get("gen-data", "scenes", gen.scenes);
    gen.views = cfg.get("gen-data", "views", gen.views);
    gen.voxels = cfg.get("gen-data", "voxels", gen.voxels);
    gen.width = cfg.get("gen-data", "width", gen.width);
    gen.height = cfg.get("gen-data", "height", gen.height);
    gen.train_fraction = cfg.get("gen-data", "train_fraction", gen.train_fraction);
    gen.brightness_jitter = cfg.get("gen-data", "brightness_jitter", gen.brightness_jitter);
    gen.rho_s_max = cfg.get("gen-data", "rho_s_max", gen.rho_s_max);
    gen.alpha_min = cfg.get("gen-data", "alpha_min", gen.alpha_min);
    gen.lights_max = cfg.get("gen-data", "lights_max", gen.lights_max);
    gen.dump_images = cfg.get("gen-data", "dump_images", gen.dump_images);
    gen_cmd->add_option("--scenes", gen.scenes, "Number of scenes");
    gen_cmd->add_option("--views", gen.views, "Views per scene");
    gen_cmd->add_option("--voxels", gen.voxels, "Voxel samples per scene");
    gen_cmd->add_option("--width", gen.width, "Image width");
    gen_cmd->add_option("--height", gen.height, "Image height");
    gen_cmd->add_option("--train-fraction", gen.train_fraction, "Fraction of scenes in the training split");
    gen_cmd->add_option("--brightness-jitter", gen.brightness_jitter, "Scale illumination by U[1-j, 1+j] per scene");
    gen_cmd->add_option("--rho-s-max", gen.rho_s_max, "Upper bound of the specular albedo");
    gen_cmd->add_option("--alpha-min", gen.alpha_min, "Lower bound of the roughness");
    gen_cmd->add_option("--lights-max", gen.lights_max, "Maximum number of directional lights");
    gen_cmd->add_flag("--dump-images", gen.dump_images, "Write every rendered frame as PPM");

    // train
    TrainConfig tc;
    std::string data_dir, model = cfg.get<std::string>("train", "model", "grouplet-fast"),
                          metric = cfg.get<std::string>("train", "metric", "rmse1"),
                          precision = cfg.get<std::string>("train", "precision", "float32");
    double lambda = cfg.get("train", "lambda", 0.01), lambda_g = cfg.get("train", "lambda_g", 1.0);
    int cube_grid = cfg.get("train", "cube_root_grid", 8);
    bool full_budget = cfg.get("train", "full_budget", false), fixed_nodes = !cfg.get("train", "resample_nodes", true);
    tc.minibatches = cfg.get("train", "minibatches", tc.minibatches);
    tc.batch_size = cfg.get("train", "batch_size", tc.batch_size);
    tc.learning_rate = cfg.get("train", "learning_rate", tc.learning_rate);
    tc.optimizer = cfg.get("train", "optimizer", tc.optimizer);
    tc.momentum = cfg.get("train", "momentum", tc.momentum);
    tc.validate_every = cfg.get("train", "validate_every", tc.validate_every);
    tc.train_nodes = cfg.get("train", "train_nodes", tc.train_nodes);
    tc.hemisphere_resolution = cfg.get("train", "hemisphere_resolution", tc.hemisphere_resolution);
    auto* train_cmd = app.add_subcommand("train", "Train a model");
    train_cmd->add_option("--data", data_dir, "Dataset directory")->required();
    train_cmd->add_option("--model", model, "hemicnn | grouplet-fast | grouplet-slow");
    train_cmd->add_option("--metric", metric, "rmse1 | rmse2 | cuberoot");
    train_cmd->add_option("--lambda", lambda, "Weight of the colour-consistency term");
    train_cmd->add_option("--lambda-g", lambda_g, "Gloss weight of rmse2");
    train_cmd->add_option("--cube-root-grid", cube_grid, "Quadrature resolution of the cube-root loss");
    train_cmd->add_option("--minibatches", tc.minibatches, "Minibatch budget");
    train_cmd->add_flag("--paper-budget", full_budget, "Use the full 100K / 13K minibatch schedule");
    train_cmd->add_option("--batch-size", tc.batch_size, "Scenes per minibatch");
    train_cmd->add_option("--lr", tc.learning_rate, "Learning rate (0 selects the model default)");
    train_cmd->add_option("--optimizer", tc.optimizer, "rmsprop | sgd (empty selects the model default)");
    train_cmd->add_option("--momentum", tc.momentum, "SGD momentum");
    train_cmd->add_option("--validate-every", tc.validate_every, "Minibatches between validation passes");
    train_cmd->add_option("--train-nodes", tc.train_nodes, "Grouplet voxels per scene during training");
    train_cmd->add_option("--hemisphere-resolution", tc.hemisphere_resolution, "HemiCNN image resolution");
    train_cmd->add_flag("--fixed-nodes", fixed_nodes, "Draw Grouplet node inputs once per scene");
    train_cmd->add_option("--precision", precision, "float32 | float64");

    // eval
    std::string checkpoint, split = cfg.get<std::string>("eval", "split", "validation"), baseline;
    int nodes = cfg.get("eval", "nodes", 0), views = cfg.get("eval", "views", 0);
    auto* eval_cmd = app.add_subcommand("eval", "Normalized RMSE of a checkpoint or a baseline");
    eval_cmd->add_option("--data", data_dir, "Dataset directory")->required();
    auto* ckpt_opt = eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file");
    eval_cmd->add_option("--baseline", baseline, "mean | oracle (statistics from the training split)")->excludes(ckpt_opt);
    eval_cmd->add_option("--metric", metric, "Metric whose parameterization the baseline uses");
    eval_cmd->add_option("--split", split, "validation | train | all");
    eval_cmd->add_option("--nodes", nodes, "Voxels per forward pass (0 = model preset)");
    eval_cmd->add_option("--views", views, "Use only the first k views (0 = all)");

    // sweep
    std::string view_list = cfg.get<std::string>("sweep", "views", "1,2,5,10,20,30,40"),
                voxel_list = cfg.get<std::string>("sweep", "voxels", "1,5,20,50,100,354");
    auto* sweep_cmd = app.add_subcommand("sweep", "Coverage sweep over views and voxel counts");
    sweep_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    sweep_cmd->add_option("--data", data_dir, "Dataset directory")->required();
    sweep_cmd->add_option("--split", split, "validation | train | all");
    sweep_cmd->add_option("--views", view_list, "Comma-separated view counts");
    sweep_cmd->add_option("--voxels", voxel_list, "Comma-separated voxel counts");

    // render
    std::string scene_id_arg, env_arg = R"({"ambient":[0.3,0.3,0.3],"lights":[{"direction":[1,1,1],"radiance":[1.5,1.5,1.5]}]})",
                              view_arg = "0.3,0.4,1";
    int resolution = 128;
    bool hemispheres = false;
    auto* render_cmd = app.add_subcommand("render", "Render truth vs prediction under a novel light and view");
    render_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    render_cmd->add_option("--data", data_dir, "Dataset directory")->required();
    render_cmd->add_option("--scene", scene_id_arg, "Scene id (default: first validation scene)");
    render_cmd->add_option("--env", env_arg, "Environment JSON (inline or file): ambient and lights");
    render_cmd->add_option("--view", view_arg, "Viewing direction x,y,z");
    render_cmd->add_option("--resolution", resolution, "Render resolution");
    render_cmd->add_flag("--hemispheres", hemispheres, "Also dump the scene's hemisphere images as PPM");

    // report
    auto* report_cmd = app.add_subcommand("report", "Parameter count, serialized size and forward timing");
    report_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    report_cmd->add_option("--data", data_dir, "Dataset used for the timing scene (default: synthesized)");

    // ablate-ec
    std::string perturbed_dir;
    int perturbed_scenes = cfg.get("ablate-ec", "perturbed_scenes", 100);
    auto* ablate_cmd = app.add_subcommand("ablate-ec", "Train with and without E_c, compare scale error on a brightness-perturbed split");
    ablate_cmd->add_option("--data", data_dir, "Training dataset directory")->required();
    ablate_cmd->add_option("--perturbed", perturbed_dir, "Perturbed dataset (generated when omitted)");
    ablate_cmd->add_option("--perturbed-scenes", perturbed_scenes, "Scenes in a generated perturbed dataset");
    ablate_cmd->add_option("--model", model, "hemicnn | grouplet-fast | grouplet-slow");
    ablate_cmd->add_option("--metric", metric, "rmse1 | rmse2 | cuberoot");
    ablate_cmd->add_option("--lambda", lambda, "Weight of the E_c arm");
    ablate_cmd->add_option("--minibatches", tc.minibatches, "Minibatch budget of each arm");
    ablate_cmd->add_option("--precision", precision, "float32 | float64");

    // gradcheck
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks of every layer, network and loss");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << '\n';
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    auto require_out = [&]() -> fs::path {
        require(!out_dir.empty(), "config", "--out is required for this subcommand");
        fs::create_directories(out_dir);
        return out_dir;
    };
    auto emit = [](const json& j) { std::cout << j.dump(2) << '\n'; };
    auto train_config = [&]() {
        tc.model = parse_model(model);
        tc.seed = seed;
        require(precision == "float32" || precision == "float64", "config", "precision must be float32 or float64");
        tc.double_precision = precision == "float64";
        tc.resample_nodes = !fixed_nodes;
        if (full_budget) tc.minibatches = TrainConfig::full_budget(tc.model);
        return tc;
    };
    auto loss_config = [&]() {
        LossConfig l = LossConfig::for_metric(parse_metric(metric), lambda);
        l.lambda_g = lambda_g;
        l.cube_root_grid = cube_grid;
        return l;
    };

    if (*gen_cmd) {
        gen.seed = seed;
        const fs::path out = require_out();
        generate_dataset(gen, out);
        emit({{"dataset", out.string()}, {"scenes", gen.scenes}, {"manifest", (out / "manifest.json").string()}});
    } else if (*train_cmd) {
        const fs::path out = require_out();
        const Dataset ds = load_dataset(data_dir);
        const TrainResult r = train(ds, train_config(), loss_config(), out);
        emit({{"final_checkpoint", (out / "final.ckpt").string()},
              {"best_checkpoint", (out / "best.ckpt").string()},
              {"log", (out / "train_log.jsonl").string()},
              {"best_step", r.best_step},
              {"best_validation_rmse", r.best_validation_rmse},
              {"final_validation_rmse", r.log.back().value("val_rmse", r.best_validation_rmse)}});
    } else if (*eval_cmd) {
        const Dataset ds = load_dataset(data_dir);
        const auto idx = split_indices(ds, split);
        EvalOptions opt{views, nodes, seed};
        std::unique_ptr<Predictor> predictor;
        if (!checkpoint.empty()) {
            predictor = std::make_unique<NetworkModel>(load_checkpoint(checkpoint));
        } else {
            require(baseline == "mean" || baseline == "oracle", "config", "eval needs --checkpoint or --baseline mean|oracle");
            const NormStats stats = compute_norm_stats(ds, ds.train, parameterization_for(parse_metric(metric)));
            if (baseline == "mean")
                predictor = std::make_unique<MeanPredictor>(stats);
            else
                predictor = std::make_unique<OraclePredictor>(stats);
        }
        const EvalReport report = eval_rmse(*predictor, ds, idx, opt);
        json j = report.to_json();
        j["split"] = split;
        j["seed"] = seed;
        if (!out_dir.empty()) write_text(fs::path(out_dir) / "eval_report.json", j.dump(2) + "\n");
        j.erase("per_scene");
        emit(j);
    } else if (*sweep_cmd) {
        const fs::path out = require_out();
        const Dataset ds = load_dataset(data_dir);
        const NetworkModel m(load_checkpoint(checkpoint));
        const auto idx = split_indices(ds, split);
        EvalOptions opt;
        opt.seed = seed;
        const CoverageCurve by_views = coverage_sweep(m, ds, idx, parse_counts(view_list), opt);
        const CoverageCurve by_voxels = voxel_sweep(m, ds, idx, parse_counts(voxel_list), opt);
        write_text(out / "coverage_views.csv", by_views.to_csv());
        write_text(out / "coverage_voxels.csv", by_voxels.to_csv());
        const json j = {{"model", m.name()}, {"views_sweep", by_views.to_json()}, {"voxels_sweep", by_voxels.to_json()}};
        write_text(out / "sweep.json", j.dump(2) + "\n");
        emit(j);
    } else if (*render_cmd) {
        const fs::path out = require_out();
        const Dataset ds = load_dataset(data_dir);
        require(!ds.scenes.empty(), "config", "dataset has no scenes");
        const SceneRecord& scene = scene_id_arg.empty()
                                       ? ds.scenes[std::size_t(ds.validation.empty() ? 0 : ds.validation.front())]
                                       : find_scene(ds, scene_id_arg);
        const NetworkModel m(load_checkpoint(checkpoint));
        EvalOptions opt;
        opt.seed = seed;
        const WardBRDF pred = predicted_material(m, scene, opt);
        Environment env;
        try {
            env = parse_environment(parse_json_arg(env_arg));
        } catch (const json::exception& e) {
            throw Error("invalid-environment", e.what());
        }
        const fs::path ppm = out / ("render_" + scene.id + ".ppm");
        const RenderComparison rc = render_comparison(scene.scene.material, pred, scene.scene.shape, env,
                                                      parse_vec3(view_arg), resolution, ppm);
        json j = {{"scene", scene.id},
                  {"image", ppm.string()},
                  {"layout", "rows: scene shape, reference sphere; columns: ground truth, prediction"},
                  {"truth", to_json(scene.scene.material)},
                  {"prediction", to_json(pred)},
                  {"mean_ldr_error", rc.mean_ldr_error}};
        if (hemispheres) {
            Rng rng(derive_seed(seed, {std::uint64_t(scene.index)}));
            const auto chosen = select_voxels(scene.voxels, kHemiCnnVoxels, rng);
            json files = json::array();
            for (std::size_t k = 0; k < chosen.size(); ++k) {
                const HemisphereImage img = build_hemisphere_image(scene.voxels[chosen[k]]);
                const fs::path p = out / ("hemisphere_" + scene.id + "_" + std::to_string(k) + ".ppm");
                write_ppm(p, img.pixels, img.resolution, img.resolution);
                files.push_back(p.string());
            }
            j["hemisphere_images"] = files;
        }
        emit(j);
    } else if (*report_cmd) {
        SceneRecord scene;
        if (!data_dir.empty()) {
            const Dataset ds = load_dataset(data_dir);
            require(!ds.scenes.empty(), "config", "dataset has no scenes");
            scene = ds.scenes.front();
        } else {
            GenConfig g;
            g.seed = seed;
            scene = synthesize_scene(g, 0);
        }
        const json j = model_report(checkpoint, scene).to_json();
        if (!out_dir.empty()) write_text(fs::path(out_dir) / "model_report.json", j.dump(2) + "\n");
        emit(j);
    } else if (*ablate_cmd) {
        const fs::path out = require_out();
        const Dataset ds = load_dataset(data_dir);
        if (perturbed_dir.empty()) {
            GenConfig g = ds.manifest.at("config").get<GenConfig>();
            g.seed = seed + 1;
            g.scenes = perturbed_scenes;
            g.brightness_jitter = 0.5;
            g.dump_images = false;
            perturbed_dir = (out / "perturbed").string();
            generate_dataset(g, perturbed_dir);
        }
        const Dataset perturbed = load_dataset(perturbed_dir);
        const AblationResult r = ablate_ec(ds, perturbed, train_config(), loss_config(), out);
        json j = r.to_json();
        j["perturbed_dataset"] = perturbed_dir;
        write_text(out / "ablation.json", j.dump(2) + "\n");
        emit(j);
    } else if (*gradcheck_cmd) {
        json checks = json::array();
        bool ok = true;
        for (const auto& r : run_gradchecks(seed)) {
            checks.push_back({{"name", r.name}, {"max_relative_error", r.error}, {"tolerance", r.tolerance}, {"pass", r.pass()}});
            ok = ok && r.pass();
        }
        emit({{"checks", checks}, {"pass", ok}});
        if (!ok) {
            std::cerr << json{{"error", "gradcheck"}, {"message", "gradient check failed"}}.dump() << '\n';
            return 1;
        }
    }
    return 0;
}

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << json{{"error", e.code()}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}
