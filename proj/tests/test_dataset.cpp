#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "brdfnet/color.hpp"
#include "brdfnet/dataset.hpp"
#include "brdfnet/error.hpp"

using namespace brdfnet;
namespace fs = std::filesystem;

namespace {

GenConfig small_config() {
    GenConfig c;
    c.scenes = 5;
    c.views = 6;
    c.voxels = 40;
    c.width = 32;
    c.height = 32;
    c.seed = 11;
    return c;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("brdfnet_test_dataset_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("split of 300 scenes is 276 train and 24 validation") {
    const auto split = split_scenes(300, 0.92, 7);
    CHECK(split.train.size() == 276);
    CHECK(split.validation.size() == 24);
    std::set<int> all(split.train.begin(), split.train.end());
    all.insert(split.validation.begin(), split.validation.end());
    CHECK(all.size() == 300);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 299);
    CHECK(split_scenes(200, 0.5, 1).train.size() == 100);
    CHECK(split_scenes(10, 0.92, 1).train.size() == 9);
}

TEST_CASE("scene specs respect sampling ranges") {
    GenConfig c;
    c.seed = 3;
    for (int i = 0; i < 200; ++i) {
        const SceneSpec s = make_scene_spec(c, i);
        const WardBRDF& m = s.scene.material;
        CHECK(luminance<double>(m.rho_d) + m.rho_s <= 1.0);
        CHECK(m.alpha >= 0.03);
        CHECK(m.alpha <= 1.0);
        CHECK(m.rho_d.minCoeff() >= 0.0);
        CHECK(s.scene.shape.bounding_radius() <= 1.0 + 1e-12);
        CHECK(s.scene.illumination.lights.size() <= 2);
        CHECK(s.cameras.size() == 40);
        for (const Camera& cam : s.cameras) {
            CHECK(cam.position.norm() >= 3.0 - 1e-12);
            CHECK(cam.position.norm() <= 3.8 + 1e-12);
        }
    }
}

TEST_CASE("camera sequence prefix is independent of view count") {
    GenConfig a, b;
    b.views = 10;
    const SceneSpec sa = make_scene_spec(a, 4), sb = make_scene_spec(b, 4);
    for (int v = 0; v < 10; ++v) CHECK(sa.cameras[std::size_t(v)].position == sb.cameras[std::size_t(v)].position);
    CHECK(sa.scene.material.rho_s == sb.scene.material.rho_s);
}

TEST_CASE("brightness jitter only rescales illumination") {
    GenConfig a, b;
    b.brightness_jitter = 0.5;
    for (int i = 0; i < 20; ++i) {
        const SceneSpec sa = make_scene_spec(a, i), sb = make_scene_spec(b, i);
        CHECK(sa.scene.material.rho_d == sb.scene.material.rho_d);
        const double k = sb.scene.illumination.ambient(0) / sa.scene.illumination.ambient(0);
        CHECK(k >= 0.5);
        CHECK(k <= 1.5);
        CHECK((sb.scene.illumination.ambient - k * sa.scene.illumination.ambient).norm() < 1e-12);
    }
}

TEST_CASE("generation is byte-identical and loads back") {
    const GenConfig c = small_config();
    const fs::path a = fresh_dir("a"), b = fresh_dir("b");
    generate_dataset(c, a);
    generate_dataset(c, b);
    int files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        ++files;
        const fs::path rel = fs::relative(entry.path(), a);
        CHECK(slurp(entry.path()) == slurp(b / rel));
    }
    CHECK(files == 1 + 3 * c.scenes);

    const Dataset ds = load_dataset(a);
    REQUIRE(ds.scenes.size() == std::size_t(c.scenes));
    CHECK(ds.train.size() == 4);
    CHECK(ds.validation.size() == 1);
    for (int s = 0; s < c.scenes; ++s) {
        const SceneRecord mem = synthesize_scene(c, s);
        const SceneRecord& disk = ds.scenes[std::size_t(s)];
        CHECK(disk.scene.material.rho_d == mem.scene.material.rho_d);
        CHECK(disk.scene.material.alpha == mem.scene.material.alpha);
        REQUIRE(disk.frames.size() == std::size_t(c.views));
        REQUIRE(disk.voxels.size() == mem.voxels.size());
        CHECK(!disk.voxels.empty());
        for (std::size_t v = 0; v < mem.voxels.size(); ++v) {
            REQUIRE(disk.voxels[v].observations.size() == mem.voxels[v].observations.size());
            CHECK((disk.voxels[v].normal - mem.voxels[v].normal).norm() < 1e-6);
            for (std::size_t o = 0; o < mem.voxels[v].observations.size(); ++o) {
                CHECK((disk.voxels[v].observations[o].color - mem.voxels[v].observations[o].color).norm() < 1e-6);
                CHECK(disk.voxels[v].observations[o].frame_id == mem.voxels[v].observations[o].frame_id);
            }
        }
        for (std::size_t f = 0; f < disk.frames.size(); ++f)
            CHECK((disk.frames[f].f_bar - mem.frames[f].f_bar).norm() < 1e-6);
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("image dumps and config errors") {
    GenConfig c = small_config();
    c.scenes = 1;
    c.dump_images = true;
    const fs::path dir = fresh_dir("ppm");
    generate_dataset(c, dir);
    const std::string ppm = slurp(dir / "scenes" / scene_id(0) / ("frame_" + scene_id(0) + ".ppm"));
    CHECK(ppm.rfind("P6\n32 32\n255\n", 0) == 0);
    CHECK(ppm.size() == 13 + 32 * 32 * 3);
    fs::remove_all(dir);

    GenConfig bad = small_config();
    bad.alpha_min = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = small_config();
    bad.shapes = {"torus"};
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(load_dataset(fresh_dir("missing")), Error);
}
