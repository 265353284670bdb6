#include <algorithm>
#include <functional>
#include <numeric>

#include "brdfnet/error.hpp"
#include "brdfnet/grouplet.hpp"

namespace brdfnet {

std::vector<Observation> order_observations(const VoxelSample& voxel) {
    std::vector<Observation> obs = voxel.observations;
    std::stable_sort(obs.begin(), obs.end(), [&](const Observation& a, const Observation& b) {
        const double da = 1.0 - a.view_dir.dot(voxel.normal), db = 1.0 - b.view_dir.dot(voxel.normal);
        if (da != db) return da < db;
        return a.frame_id < b.frame_id;
    });
    return obs;
}

std::vector<Observation> sample_node_inputs(const VoxelSample& voxel, int m, Rng& rng) {
    require(m >= 1, "config", "observations per node must be positive");
    require(!voxel.observations.empty(), "empty-set", "voxel has no observations");
    const std::size_t n = voxel.observations.size();
    VoxelSample drawn;
    drawn.normal = voxel.normal;
    if (n >= std::size_t(m)) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < std::size_t(m); ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
        for (std::size_t i = 0; i < std::size_t(m); ++i) drawn.observations.push_back(voxel.observations[idx[i]]);
    } else {
        for (int i = 0; i < m; ++i) drawn.observations.push_back(voxel.observations[rng.index(n)]);
    }
    return order_observations(drawn);
}

namespace {

GroupletInput assemble(const SceneRecord& scene, const GroupletConfig& cfg, int max_views, Rng& subset_rng,
                       const std::function<Rng&(std::size_t)>& voxel_rng) {
    require(cfg.nodes >= 1 && cfg.observations >= 1, "config", "grouplet node and observation counts must be positive");
    // Candidate voxels, with observations restricted to the first max_views frames.
    std::vector<VoxelSample> restricted;
    std::vector<std::size_t> source;
    for (std::size_t v = 0; v < scene.voxels.size(); ++v) {
        const VoxelSample& vox = scene.voxels[v];
        if (max_views <= 0) {
            if (!vox.observations.empty()) {
                restricted.push_back(vox);
                source.push_back(v);
            }
            continue;
        }
        VoxelSample r{vox.position, vox.normal, {}};
        for (const Observation& o : vox.observations)
            if (o.frame_id < max_views) r.observations.push_back(o);
        if (!r.observations.empty()) {
            restricted.push_back(std::move(r));
            source.push_back(v);
        }
    }
    require(!restricted.empty(), "degenerate-scene", "scene " + scene.id + " has no observed voxels");

    const std::size_t n = restricted.size(), nodes = std::size_t(cfg.nodes);
    std::vector<std::size_t> pick;
    if (n >= nodes) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < nodes; ++i) std::swap(idx[i], idx[i + subset_rng.index(n - i)]);
        pick.assign(idx.begin(), idx.begin() + std::ptrdiff_t(nodes));
    } else {
        for (std::size_t i = 0; i < nodes; ++i) pick.push_back(subset_rng.index(n));
    }

    GroupletInput in;
    const Eigen::Index m = cfg.observations;
    in.branch.resize(Eigen::Index(nodes) * m, kBranchInputs);
    in.normals.resize(Eigen::Index(nodes), 3);
    std::vector<bool> used(scene.frames.size(), false);
    for (std::size_t k = 0; k < nodes; ++k) {
        const VoxelSample& vox = restricted[pick[k]];
        in.normals.row(Eigen::Index(k)) = vox.normal.transpose();
        const auto obs = sample_node_inputs(vox, cfg.observations, voxel_rng(source[pick[k]]));
        for (Eigen::Index j = 0; j < m; ++j) {
            const Observation& o = obs[std::size_t(j)];
            require(o.frame_id >= 0 && std::size_t(o.frame_id) < scene.frames.size(), "io",
                    "observation references a missing frame in scene " + scene.id);
            const FrameStats& f = scene.frames[std::size_t(o.frame_id)];
            auto row = in.branch.row(Eigen::Index(k) * m + j);
            row.segment<3>(0) = o.color.transpose();
            row.segment<3>(3) = o.view_dir.transpose();
            row.segment<3>(6) = f.f_bar.transpose();
            row.segment<3>(9) = f.b_bar.transpose();
            used[std::size_t(o.frame_id)] = true;
        }
    }
    for (std::size_t f = 0; f < used.size(); ++f)
        if (used[f]) in.frames.push_back(int(f));
    return in;
}

}  // namespace

GroupletInput grouplet_input(const SceneRecord& scene, const GroupletConfig& cfg, Rng& rng, int max_views) {
    return assemble(scene, cfg, max_views, rng, [&](std::size_t) -> Rng& { return rng; });
}

GroupletInput grouplet_input(const SceneRecord& scene, const GroupletConfig& cfg, std::uint64_t seed, int max_views) {
    const auto scene_key = std::uint64_t(scene.index);
    Rng subset(derive_seed(seed, {scene_key}));
    Rng per_voxel(0);
    return assemble(scene, cfg, max_views, subset, [&](std::size_t voxel) -> Rng& {
        per_voxel = Rng(derive_seed(seed, {scene_key, std::uint64_t(voxel) + 1}));
        return per_voxel;
    });
}

}  // namespace brdfnet
