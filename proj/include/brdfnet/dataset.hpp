#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "brdfnet/scene.hpp"

namespace brdfnet {

/// Generation recipe. Every range is inclusive of its ends.
struct GenConfig {
    int scenes = 300;
    int views = 40;
    int voxels = 400;
    int width = 64;
    int height = 64;
    std::uint64_t seed = 0;
    double train_fraction = 0.92;

    double fov_degrees = 45.0;
    double camera_distance_min = 3.0;
    double camera_distance_max = 3.8;
    std::vector<std::string> shapes = {"sphere", "superellipsoid", "box"};

    double rho_s_max = 0.4;
    double alpha_min = 0.03;
    double alpha_max = 1.0;

    double ambient_min = 0.4;
    double ambient_max = 0.9;
    double tint = 0.15;  // per-channel multiplicative spread
    int lights_max = 2;
    double light_min = 0.5;
    double light_max = 1.5;
    // Illumination scaled by U[1 - j, 1 + j] per scene (0 disables).
    double brightness_jitter = 0.0;

    bool dump_images = false;

    void validate() const;
};

void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);

nlohmann::json to_json(const WardBRDF& brdf);
WardBRDF ward_from_json(const nlohmann::json& j);

/// Scene description plus its camera sequence, before rendering. Camera i
/// depends only on (seed, scene, i), so a longer sequence extends a shorter one.
struct SceneSpec {
    int index = 0;
    Scene scene;
    std::vector<Camera> cameras;
};

SceneSpec make_scene_spec(const GenConfig& config, int index);

struct FrameStats {
    Rgb f_bar = Rgb::Zero();
    Rgb b_bar = Rgb::Zero();
    Mat3 rotation = Mat3::Identity();
    Vec3 position = Vec3::Zero();
};

struct SceneRecord {
    std::string id;
    int index = 0;
    Scene scene;
    std::vector<FrameStats> frames;
    std::vector<VoxelSample> voxels;
};

struct Dataset {
    std::filesystem::path root;
    nlohmann::json manifest;
    std::vector<SceneRecord> scenes;
    std::vector<int> train;       // indices into scenes
    std::vector<int> validation;  // indices into scenes
};

inline constexpr int kFrameRecordFloats = 18;
inline constexpr int kVoxelHeaderFloats = 7;
inline constexpr int kObservationFloats = 7;

std::string scene_id(int index);

struct SplitAssignment {
    std::vector<int> train;
    std::vector<int> validation;
};

/// Seeded permutation of scene indices; the first floor(scenes * train_fraction) train.
SplitAssignment split_scenes(int scenes, double train_fraction, std::uint64_t seed);

/// Renders and writes the dataset. Regeneration from the same config is byte-identical.
void generate_dataset(const GenConfig& config, const std::filesystem::path& root);

Dataset load_dataset(const std::filesystem::path& root);

/// Renders a scene's frames and extracts its voxels in memory.
SceneRecord synthesize_scene(const GenConfig& config, int index, std::vector<Frame>* frames_out = nullptr);

void write_ppm(const std::filesystem::path& path, const Eigen::Array<double, Eigen::Dynamic, 3>& ldr, int width,
               int height);

}  // namespace brdfnet
