#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "brdfnet/error.hpp"
#include "brdfnet/scene.hpp"

namespace brdfnet {

ShapeKind parse_shape_kind(std::string_view name) {
    if (name == "sphere") return ShapeKind::Sphere;
    if (name == "superellipsoid") return ShapeKind::Superellipsoid;
    if (name == "box") return ShapeKind::Box;
    throw Error("config", "unknown shape '" + std::string(name) + "'");
}

std::string_view shape_kind_name(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Sphere: return "sphere";
        case ShapeKind::Superellipsoid: return "superellipsoid";
        case ShapeKind::Box: return "box";
    }
    return "?";
}

// ---------------------------------------------------------------- Shape

namespace {

double superellipsoid_value(const Shape& s, const Vec3& p) {
    double f = 0.0;
    for (int i = 0; i < 3; ++i) f += std::pow(std::abs(p(i) / s.radii(i)), s.exponent);
    return f;
}

// Ray parameter interval inside the axis-aligned box [-r, r].
bool slab_interval(const Vec3& r, const Vec3& origin, const Vec3& dir, double& t_near, double& t_far) {
    t_near = -std::numeric_limits<double>::infinity();
    t_far = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        if (std::abs(dir(i)) < 1e-300) {
            if (std::abs(origin(i)) > r(i)) return false;
            continue;
        }
        double t1 = (-r(i) - origin(i)) / dir(i);
        double t2 = (r(i) - origin(i)) / dir(i);
        if (t1 > t2) std::swap(t1, t2);
        t_near = std::max(t_near, t1);
        t_far = std::min(t_far, t2);
    }
    return t_near <= t_far;
}

}  // namespace

std::optional<double> Shape::intersect(const Vec3& origin, const Vec3& dir, double t_min) const {
    switch (kind) {
        case ShapeKind::Sphere: {
            const double r = radii(0);
            const double b = origin.dot(dir);
            const double c = origin.squaredNorm() - r * r;
            const double a = dir.squaredNorm();
            const double disc = b * b - a * c;
            if (disc < 0.0) return std::nullopt;
            const double sq = std::sqrt(disc);
            const double t0 = (-b - sq) / a;
            const double t1 = (-b + sq) / a;
            if (t0 >= t_min) return t0;
            if (t1 >= t_min) return t1;
            return std::nullopt;
        }
        case ShapeKind::Box: {
            double t_near, t_far;
            if (!slab_interval(radii, origin, dir, t_near, t_far)) return std::nullopt;
            if (t_near >= t_min) return t_near;
            if (t_far >= t_min) return t_far;
            return std::nullopt;
        }
        case ShapeKind::Superellipsoid: {
            double t0, t1;
            if (!slab_interval(radii, origin, dir, t0, t1)) return std::nullopt;
            t0 = std::max(t0, t_min);
            if (t0 > t1) return std::nullopt;
            auto g = [&](double t) { return superellipsoid_value(*this, origin + t * dir) - 1.0; };
            if (g(t0) <= 0.0) return t0;
            // g is convex along the ray: golden-section search for its minimum.
            const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
            double a = t0, b = t1;
            double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
            double gc = g(c), gd = g(d);
            for (int it = 0; it < 80 && gc > 0.0 && gd > 0.0; ++it) {
                if (gc < gd) {
                    b = d;
                    d = c;
                    gd = gc;
                    c = b - inv_phi * (b - a);
                    gc = g(c);
                } else {
                    a = c;
                    c = d;
                    gc = gd;
                    d = a + inv_phi * (b - a);
                    gd = g(d);
                }
            }
            double hi;
            if (gc <= 0.0) hi = c;
            else if (gd <= 0.0) hi = d;
            else return std::nullopt;
            double lo = t0;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                (g(mid) > 0.0 ? lo : hi) = mid;
            }
            return hi;
        }
    }
    return std::nullopt;
}

Vec3 Shape::normal(const Vec3& p) const {
    switch (kind) {
        case ShapeKind::Sphere: return p.normalized();
        case ShapeKind::Box: {
            Vec3 q = p.cwiseQuotient(radii).cwiseAbs();
            int axis;
            q.maxCoeff(&axis);
            Vec3 n = Vec3::Zero();
            n(axis) = p(axis) >= 0.0 ? 1.0 : -1.0;
            return n;
        }
        case ShapeKind::Superellipsoid: {
            Vec3 g;
            for (int i = 0; i < 3; ++i) {
                const double q = p(i) / radii(i);
                g(i) = std::copysign(std::pow(std::abs(q), exponent - 1.0), q) / radii(i);
            }
            return g.normalized();
        }
    }
    return Vec3::UnitZ();
}

bool Shape::contains(const Vec3& p) const {
    switch (kind) {
        case ShapeKind::Sphere: return p.norm() < radii(0);
        case ShapeKind::Box: return (p.cwiseAbs().array() < radii.array()).all();
        case ShapeKind::Superellipsoid: return superellipsoid_value(*this, p) < 1.0;
    }
    return false;
}

double Shape::radial_distance(const Vec3& dir) const {
    switch (kind) {
        case ShapeKind::Sphere: return radii(0);
        case ShapeKind::Box: return 1.0 / dir.cwiseQuotient(radii).cwiseAbs().maxCoeff();
        case ShapeKind::Superellipsoid:
            return std::pow(superellipsoid_value(*this, dir), -1.0 / exponent);
    }
    return 0.0;
}

double Shape::bounding_radius() const {
    return kind == ShapeKind::Sphere ? radii(0) : radii.norm();
}

Environment Environment::scaled(double factor) const {
    Environment e = *this;
    e.ambient *= factor;
    for (auto& l : e.lights) l.radiance *= factor;
    return e;
}

// ---------------------------------------------------------------- Camera

Camera Camera::look_at(const Vec3& position, const Vec3& target, int width, int height,
                       double fov_y_degrees) {
    require(width > 0 && height > 0, "config", "camera resolution must be positive");
    require(fov_y_degrees > 0.0 && fov_y_degrees < 180.0, "config", "camera fov out of range");
    const Vec3 forward = (target - position).normalized();
    Vec3 up = Vec3::UnitZ();
    if (std::abs(forward.dot(up)) > 0.99) up = Vec3::UnitX();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Camera cam;
    cam.rotation.col(0) = right;
    cam.rotation.col(1) = down;
    cam.rotation.col(2) = forward;
    cam.position = position;
    cam.width = width;
    cam.height = height;
    cam.focal = 0.5 * height / std::tan(0.5 * fov_y_degrees * std::numbers::pi / 180.0);
    return cam;
}

Vec3 Camera::ray_direction(double u, double v) const {
    const Vec3 local((u - 0.5 * width) / focal, (v - 0.5 * height) / focal, 1.0);
    return (rotation * local).normalized();
}

std::optional<Camera::Projection> Camera::project(const Vec3& world) const {
    const Vec3 pc = rotation.transpose() * (world - position);
    if (pc.z() <= 0.0) return std::nullopt;
    return Projection{focal * pc.x() / pc.z() + 0.5 * width, focal * pc.y() / pc.z() + 0.5 * height,
                      pc.z()};
}

Rgb Frame::sample_ldr(double u, double v) const {
    const double x = u - 0.5, y = v - 0.5;
    const double fx = std::floor(x), fy = std::floor(y);
    const double tx = x - fx, ty = y - fy;
    auto at = [&](int xi, int yi) -> Rgb {
        xi = std::clamp(xi, 0, width() - 1);
        yi = std::clamp(yi, 0, height() - 1);
        return ldr.row(yi * width() + xi).transpose();
    };
    const int x0 = int(fx), y0 = int(fy);
    return (1 - ty) * ((1 - tx) * at(x0, y0) + tx * at(x0 + 1, y0)) +
           ty * ((1 - tx) * at(x0, y0 + 1) + tx * at(x0 + 1, y0 + 1));
}

// ---------------------------------------------------------------- rendering

namespace {

// Ambient quadrature directions in the local frame, split into arrays for
// vectorized evaluation.
struct AmbientGrid {
    Eigen::ArrayXd sx, sy, z;
    double solid_angle;
    double diffuse_sum;  // sum of cos * dOmega / pi; 1 up to rounding

    AmbientGrid() {
        const HemisphereGrid g = hemisphere_grid(kAmbientGrid);
        const auto n = Eigen::Index(g.directions.size());
        sx.resize(n);
        sy.resize(n);
        z.resize(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            sx(k) = g.directions[k].x();
            sy(k) = g.directions[k].y();
            z(k) = g.directions[k].z();
        }
        solid_angle = g.solid_angle;
        diffuse_sum = z.sum() * solid_angle / std::numbers::pi;
    }
};

const AmbientGrid& ambient_grid() {
    static const AmbientGrid grid;
    return grid;
}

}  // namespace

Rgb shade(const Scene& scene, const Vec3& normal, const Vec3& to_viewer) {
    const WardBRDF& m = scene.material;
    const double cos_o = std::clamp(normal.dot(to_viewer), 0.0, 1.0);
    // Local frame with the viewer in the x-z plane.
    Vec3 tangent = to_viewer - normal.dot(to_viewer) * normal;
    if (tangent.norm() < 1e-9) tangent = normal.unitOrthogonal();
    tangent.normalize();
    const Vec3 bitangent = normal.cross(tangent);
    const double sin_o = std::sqrt(std::max(0.0, 1.0 - cos_o * cos_o));
    const Vec3 w_o(sin_o, 0.0, cos_o);

    Rgb radiance = Rgb::Zero();
    const Environment& env = scene.illumination;
    if ((env.ambient.array() > 0.0).any()) {
        const AmbientGrid& g = ambient_grid();
        double spec_sum = 0.0;
        if (m.rho_s > 0.0) {
            const double a2 = m.alpha * m.alpha;
            const Eigen::ArrayXd hx = g.sx + sin_o;
            const Eigen::ArrayXd hz = g.z + cos_o;
            const Eigen::ArrayXd tan2 = (hx.square() + g.sy.square()) / hz.square();
            const double co = std::max(cos_o, kGrazingCosFloor);
            const Eigen::ArrayXd lobe =
                (-tan2 / a2).exp() / ((4.0 * std::numbers::pi * a2) * (g.z.max(kGrazingCosFloor) * co).sqrt());
            spec_sum = (lobe * g.z).sum() * g.solid_angle;
        }
        radiance += env.ambient.cwiseProduct(m.rho_d * g.diffuse_sum + Rgb::Constant(m.rho_s * spec_sum));
    }
    for (const DirectionalLight& light : env.lights) {
        const double cos_i = normal.dot(light.direction);
        if (cos_i <= 0.0) continue;
        const Vec3 w_i(tangent.dot(light.direction), bitangent.dot(light.direction), cos_i);
        radiance += light.radiance.cwiseProduct(eval_ward_unchecked(w_i, w_o, m)) * cos_i;
    }
    return radiance;
}

Frame render_view(const Scene& scene, const Camera& camera) {
    require(!scene.shape.contains(camera.position), "geometry", "camera is inside the shape");
    const int w = camera.width, h = camera.height;
    Frame frame;
    frame.camera = camera;
    frame.hdr.resize(Eigen::Index(w) * h, 3);
    frame.ldr.resize(Eigen::Index(w) * h, 3);
    frame.depth = Eigen::ArrayXd::Zero(Eigen::Index(w) * h);
    Rgb fg_sum = Rgb::Zero(), bg_sum = Rgb::Zero();
    int fg_count = 0, bg_count = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Eigen::Index idx = Eigen::Index(y) * w + x;
            const Vec3 dir = camera.ray_direction(x + 0.5, y + 0.5);
            const auto t = scene.shape.intersect(camera.position, dir, 0.0);
            Rgb value;
            if (t) {
                const Vec3 p = camera.position + *t * dir;
                value = shade(scene, scene.shape.normal(p), -dir);
                frame.depth(idx) = (camera.rotation.transpose() * (p - camera.position)).z();
            } else {
                value = scene.illumination.ambient;
            }
            frame.hdr.row(idx) = value.transpose();
            Rgb ldr;
            for (int c = 0; c < 3; ++c) ldr(c) = quantize8(srgb_encode(value(c)));
            frame.ldr.row(idx) = ldr.transpose();
            if (t) {
                fg_sum += ldr;
                ++fg_count;
            } else {
                bg_sum += ldr;
                ++bg_count;
            }
        }
    }
    require(fg_count > 0, "degenerate-frame", "rendered frame has no foreground pixels");
    require(bg_count > 0, "degenerate-frame", "rendered frame has no background pixels");
    frame.f_bar = fg_sum / fg_count;
    frame.b_bar = bg_sum / bg_count;
    return frame;
}

// ---------------------------------------------------------------- voxels

SurfaceSampler::SurfaceSampler(const Shape& shape) : shape_(shape) {
    // Bound the area weight on a Fibonacci lattice, with headroom.
    constexpr int kLattice = 20000;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    double max_w = 0.0;
    for (int i = 0; i < kLattice; ++i) {
        const double z = 1.0 - (i + 0.5) * 2.0 / kLattice;
        const double r = std::sqrt(1.0 - z * z);
        const Vec3 d(r * std::cos(golden * i), r * std::sin(golden * i), z);
        max_w = std::max(max_w, area_weight(d));
    }
    max_weight_ = 1.25 * max_w;
}

double SurfaceSampler::area_weight(const Vec3& dir) const {
    const double s = shape_.radial_distance(dir);
    const double cos_nd = std::max(shape_.normal(s * dir).dot(dir), 1e-6);
    return s * s / cos_nd;
}

std::pair<Vec3, Vec3> SurfaceSampler::sample(Rng& rng) const {
    for (;;) {
        const Vec3 d = rng.unit_vector();
        if (rng.uniform() * max_weight_ <= area_weight(d)) {
            const Vec3 p = shape_.radial_distance(d) * d;
            return {p, shape_.normal(p)};
        }
    }
}

std::optional<Observation> observe(const Shape& shape, const Vec3& position, const Vec3& normal,
                                   const Frame& frame, int frame_id) {
    Vec3 to_cam = frame.camera.position - position;
    const double dist = to_cam.norm();
    to_cam /= dist;
    if (to_cam.dot(normal) <= kMinObservationCos) return std::nullopt;
    const Vec3 origin = position + 1e-6 * normal;
    if (const auto t = shape.intersect(origin, to_cam, 0.0); t && *t < dist) return std::nullopt;
    const auto proj = frame.camera.project(position);
    if (!proj || proj->u < 0.0 || proj->v < 0.0 || proj->u >= frame.width() || proj->v >= frame.height())
        return std::nullopt;
    return Observation{frame.sample_ldr(proj->u, proj->v), to_cam, frame_id};
}

std::vector<VoxelSample> extract_voxel_samples(const Scene& scene, const std::vector<Frame>& frames,
                                               int count, std::uint64_t seed) {
    require(!frames.empty(), "config", "extract_voxel_samples: no frames");
    require(count >= 1, "config", "extract_voxel_samples: voxel count must be positive");
    const SurfaceSampler sampler(scene.shape);
    Rng rng(seed);
    std::vector<VoxelSample> voxels;
    for (int k = 0; k < count; ++k) {
        auto [p, n] = sampler.sample(rng);
        VoxelSample v{p, n, {}};
        for (std::size_t i = 0; i < frames.size(); ++i)
            if (auto obs = observe(scene.shape, p, n, frames[i], int(i))) v.observations.push_back(*obs);
        if (!v.observations.empty()) voxels.push_back(std::move(v));
    }
    require(!voxels.empty(), "degenerate-scene", "no voxel received any observation");
    return voxels;
}

}  // namespace brdfnet
