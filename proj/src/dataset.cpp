#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "brdfnet/color.hpp"
#include "brdfnet/dataset.hpp"
#include "brdfnet/error.hpp"
#include "brdfnet/random.hpp"

namespace brdfnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Stream : std::uint64_t { kShapeStream = 1, kMaterialStream, kLightStream, kViewStream, kVoxelStream, kSplitStream };

void write_f32(const fs::path& path, const std::vector<float>& data) {
    static_assert(std::endian::native == std::endian::little, "float arrays are written little-endian");
    std::ofstream out(path, std::ios::binary);
    require(bool(out), "io", "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * sizeof(float)));
    require(bool(out), "io", "write failed: " + path.string());
}

std::vector<float> read_f32(const fs::path& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), "io", "cannot read " + path.string());
    std::vector<float> data(expected);
    in.read(reinterpret_cast<char*>(data.data()), std::streamsize(expected * sizeof(float)));
    require(in.gcount() == std::streamsize(expected * sizeof(float)) && in.peek() == EOF, "io",
            "unexpected length of " + path.string());
    return data;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    require(bool(out), "io", "cannot write " + path.string());
    out << j.dump(2) << '\n';
    require(bool(out), "io", "write failed: " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    require(bool(in), "io", "cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("io", path.string() + ": " + e.what());
    }
}

json vec_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

Vec3 json_vec(const json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

json shape_json(const Shape& s) {
    return {{"kind", shape_kind_name(s.kind)}, {"radii", vec_json(s.radii)}, {"exponent", s.exponent}};
}

Shape shape_from_json(const json& j) {
    return {parse_shape_kind(j.at("kind").get<std::string>()), json_vec(j.at("radii")), j.at("exponent").get<double>()};
}

json environment_json(const Environment& e) {
    json lights = json::array();
    for (const auto& l : e.lights) lights.push_back({{"direction", vec_json(l.direction)}, {"radiance", vec_json(l.radiance)}});
    return {{"ambient", vec_json(e.ambient)}, {"lights", lights}};
}

Environment environment_from_json(const json& j) {
    Environment e;
    e.ambient = json_vec(j.at("ambient"));
    for (const auto& l : j.at("lights")) e.lights.push_back({json_vec(l.at("direction")), json_vec(l.at("radiance"))});
    return e;
}

Rgb tinted(Rng& rng, double intensity, double tint) {
    return Rgb(intensity * rng.uniform(1.0 - tint, 1.0 + tint), intensity * rng.uniform(1.0 - tint, 1.0 + tint),
               intensity * rng.uniform(1.0 - tint, 1.0 + tint));
}

}  // namespace

void GenConfig::validate() const {
    require(scenes >= 1 && views >= 1 && voxels >= 1, "config", "scenes, views and voxels must be positive");
    require(width >= 8 && height >= 8, "config", "image resolution must be at least 8x8");
    require(train_fraction > 0.0 && train_fraction < 1.0, "config", "train_fraction must lie in (0, 1)");
    require(camera_distance_min > 1.0 && camera_distance_max >= camera_distance_min, "config",
            "camera distances must exceed the unit shape radius");
    require(!shapes.empty(), "config", "no shapes enabled");
    for (const auto& s : shapes) parse_shape_kind(s);
    require(rho_s_max >= 0.0 && rho_s_max <= 1.0, "config", "rho_s_max must lie in [0, 1]");
    require(alpha_min > 0.0 && alpha_max <= 1.0 && alpha_min <= alpha_max, "config", "alpha range must lie in (0, 1]");
    require(ambient_min >= 0.0 && ambient_max >= ambient_min, "config", "invalid ambient range");
    require(tint >= 0.0 && tint < 1.0, "config", "tint must lie in [0, 1)");
    require(lights_max >= 0 && lights_max <= 4, "config", "lights_max must lie in [0, 4]");
    require(light_min >= 0.0 && light_max >= light_min, "config", "invalid light range");
    require(ambient_max > 0.0 || (lights_max > 0 && light_max > 0.0), "config", "illumination is empty");
    require(brightness_jitter >= 0.0 && brightness_jitter < 1.0, "config", "brightness_jitter must lie in [0, 1)");
}

void to_json(json& j, const GenConfig& c) {
    j = json{{"scenes", c.scenes},
             {"views", c.views},
             {"voxels", c.voxels},
             {"width", c.width},
             {"height", c.height},
             {"seed", c.seed},
             {"train_fraction", c.train_fraction},
             {"fov_degrees", c.fov_degrees},
             {"camera_distance_min", c.camera_distance_min},
             {"camera_distance_max", c.camera_distance_max},
             {"shapes", c.shapes},
             {"rho_s_max", c.rho_s_max},
             {"alpha_min", c.alpha_min},
             {"alpha_max", c.alpha_max},
             {"ambient_min", c.ambient_min},
             {"ambient_max", c.ambient_max},
             {"tint", c.tint},
             {"lights_max", c.lights_max},
             {"light_min", c.light_min},
             {"light_max", c.light_max},
             {"brightness_jitter", c.brightness_jitter},
             {"dump_images", c.dump_images}};
}

void from_json(const json& j, GenConfig& c) {
    GenConfig d;
    c.scenes = j.value("scenes", d.scenes);
    c.views = j.value("views", d.views);
    c.voxels = j.value("voxels", d.voxels);
    c.width = j.value("width", d.width);
    c.height = j.value("height", d.height);
    c.seed = j.value("seed", d.seed);
    c.train_fraction = j.value("train_fraction", d.train_fraction);
    c.fov_degrees = j.value("fov_degrees", d.fov_degrees);
    c.camera_distance_min = j.value("camera_distance_min", d.camera_distance_min);
    c.camera_distance_max = j.value("camera_distance_max", d.camera_distance_max);
    c.shapes = j.value("shapes", d.shapes);
    c.rho_s_max = j.value("rho_s_max", d.rho_s_max);
    c.alpha_min = j.value("alpha_min", d.alpha_min);
    c.alpha_max = j.value("alpha_max", d.alpha_max);
    c.ambient_min = j.value("ambient_min", d.ambient_min);
    c.ambient_max = j.value("ambient_max", d.ambient_max);
    c.tint = j.value("tint", d.tint);
    c.lights_max = j.value("lights_max", d.lights_max);
    c.light_min = j.value("light_min", d.light_min);
    c.light_max = j.value("light_max", d.light_max);
    c.brightness_jitter = j.value("brightness_jitter", d.brightness_jitter);
    c.dump_images = j.value("dump_images", d.dump_images);
}

json to_json(const WardBRDF& brdf) {
    return {{"rho_d", vec_json(brdf.rho_d)}, {"rho_s", brdf.rho_s}, {"alpha", brdf.alpha}};
}

WardBRDF ward_from_json(const json& j) {
    return {json_vec(j.at("rho_d")), j.at("rho_s").get<double>(), j.at("alpha").get<double>()};
}

std::string scene_id(int index) {
    std::ostringstream s;
    s << std::setw(6) << std::setfill('0') << index;
    return s.str();
}

SceneSpec make_scene_spec(const GenConfig& config, int index) {
    SceneSpec spec;
    spec.index = index;
    const auto scene_key = std::uint64_t(index);

    Rng shape_rng(derive_seed(config.seed, {scene_key, kShapeStream}));
    Shape& shape = spec.scene.shape;
    shape.kind = parse_shape_kind(config.shapes[shape_rng.index(config.shapes.size())]);
    switch (shape.kind) {
        case ShapeKind::Sphere: shape = Shape::sphere(shape_rng.uniform(0.6, 1.0)); break;
        case ShapeKind::Superellipsoid:
            shape.radii = Vec3(shape_rng.uniform(0.45, 0.8), shape_rng.uniform(0.45, 0.8), shape_rng.uniform(0.45, 0.8));
            shape.exponent = shape_rng.uniform(2.0, 4.0);
            break;
        case ShapeKind::Box:
            shape.radii = Vec3(shape_rng.uniform(0.3, 0.6), shape_rng.uniform(0.3, 0.6), shape_rng.uniform(0.3, 0.6));
            break;
    }
    if (shape.bounding_radius() > 1.0) shape.radii /= shape.bounding_radius();

    Rng material_rng(derive_seed(config.seed, {scene_key, kMaterialStream}));
    WardBRDF& m = spec.scene.material;
    do {
        m.rho_d = Vec3(material_rng.uniform(), material_rng.uniform(), material_rng.uniform());
        m.rho_s = material_rng.uniform(0.0, config.rho_s_max);
        m.alpha = material_rng.uniform(config.alpha_min, config.alpha_max);
    } while (luminance<double>(m.rho_d) + m.rho_s > 1.0);

    Rng light_rng(derive_seed(config.seed, {scene_key, kLightStream}));
    Environment& env = spec.scene.illumination;
    env.ambient = tinted(light_rng, light_rng.uniform(config.ambient_min, config.ambient_max), config.tint);
    const int lights = int(light_rng.index(std::uint64_t(config.lights_max) + 1));
    for (int l = 0; l < lights; ++l) {
        const Vec3 dir = light_rng.unit_vector();
        env.lights.push_back({dir, tinted(light_rng, light_rng.uniform(config.light_min, config.light_max), config.tint)});
    }
    // Drawn last so jitter leaves every other draw of the stream unchanged.
    if (config.brightness_jitter > 0.0)
        env = env.scaled(light_rng.uniform(1.0 - config.brightness_jitter, 1.0 + config.brightness_jitter));

    for (int v = 0; v < config.views; ++v) {
        Rng view_rng(derive_seed(config.seed, {scene_key, kViewStream, std::uint64_t(v)}));
        const Vec3 dir = view_rng.unit_vector();
        const double dist = view_rng.uniform(config.camera_distance_min, config.camera_distance_max);
        spec.cameras.push_back(Camera::look_at(dist * dir, Vec3::Zero(), config.width, config.height, config.fov_degrees));
    }
    return spec;
}

SceneRecord synthesize_scene(const GenConfig& config, int index, std::vector<Frame>* frames_out) {
    const SceneSpec spec = make_scene_spec(config, index);
    std::vector<Frame> frames;
    frames.reserve(spec.cameras.size());
    for (const Camera& cam : spec.cameras) frames.push_back(render_view(spec.scene, cam));
    SceneRecord rec;
    rec.id = scene_id(index);
    rec.index = index;
    rec.scene = spec.scene;
    for (const Frame& f : frames) rec.frames.push_back({f.f_bar, f.b_bar, f.camera.rotation, f.camera.position});
    rec.voxels = extract_voxel_samples(spec.scene, frames, config.voxels,
                                       derive_seed(config.seed, {std::uint64_t(index), kVoxelStream}));
    if (frames_out) *frames_out = std::move(frames);
    return rec;
}

void write_ppm(const fs::path& path, const Eigen::Array<double, Eigen::Dynamic, 3>& ldr, int width, int height) {
    std::ofstream out(path, std::ios::binary);
    require(bool(out), "io", "cannot write " + path.string());
    out << "P6\n" << width << ' ' << height << "\n255\n";
    for (Eigen::Index i = 0; i < Eigen::Index(width) * height; ++i)
        for (int c = 0; c < 3; ++c) out.put(char(std::lround(std::clamp(ldr(i, c), 0.0, 1.0) * 255.0)));
}

SplitAssignment split_scenes(int scenes, double train_fraction, std::uint64_t seed) {
    std::vector<int> order(static_cast<std::size_t>(scenes));
    for (int i = 0; i < scenes; ++i) order[std::size_t(i)] = i;
    Rng rng(derive_seed(seed, {kSplitStream}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    const auto n_train = std::size_t(std::floor(scenes * train_fraction + 1e-9));
    SplitAssignment split;
    split.train.assign(order.begin(), order.begin() + std::ptrdiff_t(n_train));
    split.validation.assign(order.begin() + std::ptrdiff_t(n_train), order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    return split;
}

void generate_dataset(const GenConfig& config, const fs::path& root) {
    config.validate();
    std::error_code ec;
    fs::create_directories(root / "scenes", ec);
    require(!ec, "io", "cannot create " + (root / "scenes").string() + ": " + ec.message());

    const SplitAssignment split = split_scenes(config.scenes, config.train_fraction, config.seed);
    const auto& validation = split.validation;
    const auto& train = split.train;
    std::vector<std::string> split_of(std::size_t(config.scenes), "train");
    for (int v : validation) split_of[std::size_t(v)] = "validation";

    json scene_list = json::array();
    for (int i = 0; i < config.scenes; ++i) {
        std::vector<Frame> frames;
        const SceneRecord rec = synthesize_scene(config, i, config.dump_images ? &frames : nullptr);
        const fs::path dir = root / "scenes" / rec.id;
        fs::create_directories(dir, ec);
        require(!ec, "io", "cannot create " + dir.string());

        std::vector<float> voxel_data;
        std::vector<int> counts;
        for (const VoxelSample& v : rec.voxels) {
            for (int k = 0; k < 3; ++k) voxel_data.push_back(float(v.position(k)));
            for (int k = 0; k < 3; ++k) voxel_data.push_back(float(v.normal(k)));
            voxel_data.push_back(float(v.observations.size()));
            for (const Observation& o : v.observations) {
                for (int k = 0; k < 3; ++k) voxel_data.push_back(float(o.color(k)));
                for (int k = 0; k < 3; ++k) voxel_data.push_back(float(o.view_dir(k)));
                voxel_data.push_back(float(o.frame_id));
            }
            counts.push_back(int(v.observations.size()));
        }
        std::vector<float> frame_data;
        for (const FrameStats& f : rec.frames) {
            for (int k = 0; k < 3; ++k) frame_data.push_back(float(f.f_bar(k)));
            for (int k = 0; k < 3; ++k) frame_data.push_back(float(f.b_bar(k)));
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) frame_data.push_back(float(f.rotation(r, c)));
            for (int k = 0; k < 3; ++k) frame_data.push_back(float(f.position(k)));
        }
        write_f32(dir / "voxels.f32", voxel_data);
        write_f32(dir / "frames.f32", frame_data);

        const json meta = {
            {"id", rec.id},
            {"split", split_of[std::size_t(i)]},
            {"shape", shape_json(rec.scene.shape)},
            {"material", to_json(rec.scene.material)},
            {"illumination", environment_json(rec.scene.illumination)},
            {"num_frames", rec.frames.size()},
            {"frames_f32_length", frame_data.size()},
            {"frame_record", "f_bar[3] b_bar[3] rotation[9, row-major, camera-to-world] position[3]"},
            {"num_voxels", rec.voxels.size()},
            {"observation_counts", counts},
            {"voxels_f32_length", voxel_data.size()},
            {"voxel_record", "position[3] normal[3] count[1], then count x (color[3] view_dir[3] frame_id[1])"},
        };
        write_json(dir / "meta.json", meta);
        if (config.dump_images)
            for (std::size_t f = 0; f < frames.size(); ++f)
                write_ppm(dir / ("frame_" + scene_id(int(f)) + ".ppm"), frames[f].ldr, frames[f].width(),
                          frames[f].height());
        scene_list.push_back({{"id", rec.id}, {"split", split_of[std::size_t(i)]},
                              {"shape", shape_kind_name(rec.scene.shape.kind)},
                              {"material", to_json(rec.scene.material)}});
    }

    json train_ids = json::array(), val_ids = json::array();
    for (int t : train) train_ids.push_back(scene_id(t));
    for (int v : validation) val_ids.push_back(scene_id(v));
    const json manifest = {
        {"format", "brdfnet-dataset"},
        {"version", 1},
        {"seed", config.seed},
        {"config", config},
        {"split_rule", "scene order is a seeded permutation; train = floor(scenes * train_fraction), validation = remainder"},
        {"train", train_ids},
        {"validation", val_ids},
        {"scenes", scene_list},
    };
    write_json(root / "manifest.json", manifest);
}

Dataset load_dataset(const fs::path& root) {
    Dataset ds;
    ds.root = root;
    ds.manifest = read_json(root / "manifest.json");
    require(ds.manifest.value("format", "") == "brdfnet-dataset", "io", "not a dataset manifest: " + root.string());
    const auto& list = ds.manifest.at("scenes");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string id = list[i].at("id").get<std::string>();
        const fs::path dir = root / "scenes" / id;
        const json meta = read_json(dir / "meta.json");
        SceneRecord rec;
        rec.id = id;
        rec.index = int(i);
        rec.scene.shape = shape_from_json(meta.at("shape"));
        rec.scene.material = ward_from_json(meta.at("material"));
        rec.scene.illumination = environment_from_json(meta.at("illumination"));

        const auto n_frames = meta.at("num_frames").get<std::size_t>();
        const auto frames = read_f32(dir / "frames.f32", meta.at("frames_f32_length").get<std::size_t>());
        require(frames.size() == n_frames * kFrameRecordFloats, "io", "frame array length mismatch in " + id);
        for (std::size_t f = 0; f < n_frames; ++f) {
            const float* p = frames.data() + f * kFrameRecordFloats;
            FrameStats s;
            s.f_bar = Rgb(p[0], p[1], p[2]);
            s.b_bar = Rgb(p[3], p[4], p[5]);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) s.rotation(r, c) = p[6 + 3 * r + c];
            s.position = Vec3(p[15], p[16], p[17]);
            rec.frames.push_back(s);
        }

        const auto data = read_f32(dir / "voxels.f32", meta.at("voxels_f32_length").get<std::size_t>());
        const auto counts = meta.at("observation_counts").get<std::vector<int>>();
        std::size_t pos = 0;
        for (int count : counts) {
            require(pos + kVoxelHeaderFloats + std::size_t(count) * kObservationFloats <= data.size(), "io",
                    "voxel array too short in " + id);
            const float* p = data.data() + pos;
            VoxelSample v;
            v.position = Vec3(p[0], p[1], p[2]);
            v.normal = Vec3(p[3], p[4], p[5]);
            require(int(p[6]) == count, "io", "observation count mismatch in " + id);
            pos += kVoxelHeaderFloats;
            for (int k = 0; k < count; ++k, pos += kObservationFloats) {
                const float* q = data.data() + pos;
                v.observations.push_back({Rgb(q[0], q[1], q[2]), Vec3(q[3], q[4], q[5]), int(q[6])});
            }
            rec.voxels.push_back(std::move(v));
        }
        require(pos == data.size(), "io", "trailing data in voxels of " + id);
        ds.scenes.push_back(std::move(rec));
    }
    std::map<std::string, int> by_id;
    for (const auto& s : ds.scenes) by_id[s.id] = s.index;
    for (const auto& id : ds.manifest.at("train")) ds.train.push_back(by_id.at(id.get<std::string>()));
    for (const auto& id : ds.manifest.at("validation")) ds.validation.push_back(by_id.at(id.get<std::string>()));
    return ds;
}

}  // namespace brdfnet
