#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "brdfnet/random.hpp"
#include "brdfnet/types.hpp"
#include "brdfnet/ward.hpp"

namespace brdfnet {

enum class ShapeKind { Sphere, Superellipsoid, Box };

ShapeKind parse_shape_kind(std::string_view name);
std::string_view shape_kind_name(ShapeKind kind);

/// Convex, origin-centred, star-shaped solid. `radii` are the sphere radius
/// (all equal), superellipsoid semi-axes or box half-extents; `exponent` is
/// the superellipsoid power p in |x/a|^p + |y/b|^p + |z/c|^p = 1.
struct Shape {
    ShapeKind kind = ShapeKind::Sphere;
    Vec3 radii = Vec3::Ones();
    double exponent = 2.0;

    static Shape sphere(double radius) { return {ShapeKind::Sphere, Vec3::Constant(radius), 2.0}; }

    /// Smallest t >= t_min where origin + t*dir meets the surface.
    std::optional<double> intersect(const Vec3& origin, const Vec3& dir, double t_min = 1e-6) const;
    Vec3 normal(const Vec3& surface_point) const;
    bool contains(const Vec3& p) const;
    /// Distance from the origin to the surface along unit direction `dir`.
    double radial_distance(const Vec3& dir) const;
    double bounding_radius() const;
};

struct DirectionalLight {
    Vec3 direction;  // unit vector pointing toward the light
    Rgb radiance;
};

struct Environment {
    Rgb ambient = Rgb::Zero();
    std::vector<DirectionalLight> lights;

    Environment scaled(double factor) const;
};

struct Scene {
    Shape shape;
    WardBRDF material;
    Environment illumination;
};

/// Pinhole camera. `rotation` maps camera to world coordinates; the camera
/// looks along its +z axis with +x right and +y down in the image.
struct Camera {
    Mat3 rotation = Mat3::Identity();
    Vec3 position = Vec3::Zero();
    int width = 64;
    int height = 64;
    double focal = 1.0;  // pixels

    static Camera look_at(const Vec3& position, const Vec3& target, int width, int height,
                          double fov_y_degrees);

    /// World-space unit ray through continuous pixel coordinates (u, v).
    Vec3 ray_direction(double u, double v) const;

    struct Projection {
        double u, v, depth;
    };
    std::optional<Projection> project(const Vec3& world) const;
};

/// One rendered view. Images are stored row-major, one row per pixel.
struct Frame {
    Camera camera;
    Eigen::Array<double, Eigen::Dynamic, 3> hdr;
    Eigen::Array<double, Eigen::Dynamic, 3> ldr;  // 8-bit levels mapped to [0,1]
    Eigen::ArrayXd depth;                         // camera-space z, 0 for background
    Rgb f_bar = Rgb::Zero();
    Rgb b_bar = Rgb::Zero();

    int width() const { return camera.width; }
    int height() const { return camera.height; }
    bool foreground(int x, int y) const { return depth(y * width() + x) > 0.0; }
    /// Bilinear LDR lookup at continuous pixel coordinates (pixel centres at +0.5).
    Rgb sample_ldr(double u, double v) const;
};

inline constexpr int kAmbientGrid = 32;

Frame render_view(const Scene& scene, const Camera& camera);

/// Outgoing radiance at a surface point with world normal `normal` toward
/// world direction `to_viewer`.
Rgb shade(const Scene& scene, const Vec3& normal, const Vec3& to_viewer);

struct Observation {
    Rgb color;     // LDR color in [0,1]
    Vec3 view_dir; // unit vector from the voxel toward the camera
    int frame_id = 0;
};

struct VoxelSample {
    Vec3 position;
    Vec3 normal;
    std::vector<Observation> observations;
};

inline constexpr double kMinObservationCos = 1e-3;

/// Area-uniform surface points, drawn by rejection on the radial
/// parametrization: dA = r^2 / (n . d) dOmega.
class SurfaceSampler {
public:
    explicit SurfaceSampler(const Shape& shape);

    /// Returns (position, outward unit normal).
    std::pair<Vec3, Vec3> sample(Rng& rng) const;

private:
    double area_weight(const Vec3& dir) const;

    Shape shape_;
    double max_weight_ = 1.0;
};

/// Observation of `position` in `frame`, if it faces, sees and projects into the camera.
std::optional<Observation> observe(const Shape& shape, const Vec3& position, const Vec3& normal,
                                   const Frame& frame, int frame_id);

std::vector<VoxelSample> extract_voxel_samples(const Scene& scene, const std::vector<Frame>& frames,
                                               int count, std::uint64_t seed);

}  // namespace brdfnet
