#include <algorithm>
#include <limits>

#include <Eigen/Geometry>

#include "brdfnet/error.hpp"
#include "brdfnet/hemicnn.hpp"

namespace brdfnet {

Mat3 alignment_rotation(const Vec3& normal) {
    return Eigen::Quaterniond::FromTwoVectors(normal.normalized(), Vec3::UnitZ()).toRotationMatrix();
}

HemisphereImage build_hemisphere_image(const VoxelSample& voxel, int resolution) {
    require(resolution >= 1, "config", "hemisphere resolution must be positive");
    require(!voxel.observations.empty(), "empty-hemisphere", "voxel has no observations");
    const Mat3 rot = alignment_rotation(voxel.normal);

    std::vector<Eigen::Vector2d> sites;
    std::vector<const Observation*> owners;
    for (const Observation& o : voxel.observations) {
        const Vec3 local = rot * o.view_dir;
        if (local.z() <= 0.0) continue;
        sites.emplace_back(local.x(), local.y());
        owners.push_back(&o);
    }
    require(!sites.empty(), "empty-hemisphere", "every observation is back-facing");

    HemisphereImage img;
    img.resolution = resolution;
    img.pixels.setZero(resolution * resolution, 3);
    img.mask.setConstant(resolution * resolution, false);
    for (int i = 0; i < resolution; ++i)
        for (int j = 0; j < resolution; ++j) {
            const Eigen::Vector2d p(HemisphereImage::centre(j, resolution), HemisphereImage::centre(i, resolution));
            if (p.squaredNorm() > 1.0) continue;
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < sites.size(); ++s) {
                const double d = (sites[s] - p).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = s;
                }
            }
            const int idx = i * resolution + j;
            img.mask(idx) = true;
            img.pixels.row(idx) = owners[best]->color.transpose().array();
        }
    return img;
}

std::vector<std::size_t> select_voxels(const std::vector<VoxelSample>& samples, int count, Rng& rng) {
    require(!samples.empty(), "empty-set", "no voxel samples to select from");
    require(count >= 1, "config", "voxel count must be positive");
    const std::size_t n = samples.size();
    std::vector<std::size_t> chosen;

    std::size_t first = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (samples[i].observations.size() > samples[first].observations.size()) first = i;
    chosen.push_back(first);

    // Distance of each sample to the chosen set, as 1 - cos between normals.
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<bool> taken(n, false);
    taken[first] = true;
    while (chosen.size() < std::min<std::size_t>(std::size_t(count), n)) {
        const Vec3& last = samples[chosen.back()].normal;
        std::size_t next = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            dist[i] = std::min(dist[i], 1.0 - samples[i].normal.dot(last));
            if (next == n || dist[i] > dist[next]) next = i;
        }
        taken[next] = true;
        chosen.push_back(next);
    }
    while (chosen.size() < std::size_t(count)) chosen.push_back(rng.index(n));
    return chosen;
}

nn::Matrix<double> hemisphere_input(const std::vector<VoxelSample>& samples, int count, int resolution, Rng& rng) {
    const auto chosen = select_voxels(samples, count, rng);
    const Eigen::Index pix = Eigen::Index(resolution) * resolution;
    nn::Matrix<double> block(Eigen::Index(chosen.size()) * pix, 3);
    for (std::size_t k = 0; k < chosen.size(); ++k)
        block.middleRows(Eigen::Index(k) * pix, pix) = build_hemisphere_image(samples[chosen[k]], resolution).pixels.matrix();
    return block;
}

}  // namespace brdfnet
