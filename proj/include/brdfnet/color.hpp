#pragma once

#include <algorithm>
#include <cmath>

#include "brdfnet/autodiff.hpp"
#include "brdfnet/types.hpp"

namespace brdfnet {

// Display gamma used both for encoding rendered HDR and for linearizing
// 8-bit observations. A pure power law, not the piecewise sRGB curve.
inline constexpr double kGamma = 2.4;

/// Rec.709 luminance of a linear RGB triple.
template <typename Scalar>
Scalar luminance(const Vector3<Scalar>& rgb) {
    return Scalar(0.2126) * rgb(0) + Scalar(0.7152) * rgb(1) + Scalar(0.0722) * rgb(2);
}

inline double srgb_encode(double linear) {
    return std::pow(std::clamp(linear, 0.0, 1.0), 1.0 / kGamma);
}

inline double srgb_decode(double encoded) { return std::pow(std::max(encoded, 0.0), kGamma); }

/// Encode then round to the nearest of 256 levels, returned in [0,1].
inline double quantize8(double encoded) { return std::round(encoded * 255.0) / 255.0; }

namespace detail {

// sRGB primaries, D65 white. The Y row is exactly Rec.709 luminance and the
// white point is the row sum, so RGB (1,1,1) maps to a = b = 0.
inline const Mat3& rgb_to_xyz_matrix() {
    static const Mat3 m = (Mat3() << 0.4124, 0.3576, 0.1805,
                                     0.2126, 0.7152, 0.0722,
                                     0.0193, 0.1192, 0.9505).finished();
    return m;
}

inline const Mat3& xyz_to_rgb_matrix() {
    static const Mat3 m = rgb_to_xyz_matrix().inverse();
    return m;
}

inline const Vec3& white_xyz() {
    static const Vec3 w = rgb_to_xyz_matrix().rowwise().sum();
    return w;
}

inline constexpr double kLabDelta = 6.0 / 29.0;

template <typename Scalar>
Scalar lab_f(const Scalar& t) {
    if (value_of(t) > kLabDelta * kLabDelta * kLabDelta) return cube_root(t);
    return t / (3.0 * kLabDelta * kLabDelta) + 4.0 / 29.0;
}

template <typename Scalar>
Scalar lab_f_inverse(const Scalar& f) {
    if (value_of(f) > kLabDelta) return f * f * f;
    return 3.0 * kLabDelta * kLabDelta * (f - 4.0 / 29.0);
}

}  // namespace detail

/// Linear RGB to CIE L*a*b* (D65).
template <typename Scalar>
Vector3<Scalar> rgb_to_lab(const Vector3<Scalar>& rgb) {
    const Mat3& m = detail::rgb_to_xyz_matrix();
    const Vec3& w = detail::white_xyz();
    Vector3<Scalar> f;
    for (int r = 0; r < 3; ++r) {
        const Scalar xyz = m(r, 0) * rgb(0) + m(r, 1) * rgb(1) + m(r, 2) * rgb(2);
        f(r) = detail::lab_f(Scalar(xyz / w(r)));
    }
    return {116.0 * f(1) - 16.0, 500.0 * (f(0) - f(1)), 200.0 * (f(1) - f(2))};
}

template <typename Scalar>
Vector3<Scalar> lab_to_rgb(const Vector3<Scalar>& lab) {
    const Scalar fy = (lab(0) + 16.0) / 116.0;
    const Scalar fx = fy + lab(1) / 500.0;
    const Scalar fz = fy - lab(2) / 200.0;
    const Vec3& w = detail::white_xyz();
    const Scalar x = w(0) * detail::lab_f_inverse(fx);
    const Scalar y = w(1) * detail::lab_f_inverse(fy);
    const Scalar z = w(2) * detail::lab_f_inverse(fz);
    const Mat3& m = detail::xyz_to_rgb_matrix();
    Vector3<Scalar> rgb;
    for (int r = 0; r < 3; ++r) rgb(r) = m(r, 0) * x + m(r, 1) * y + m(r, 2) * z;
    return rgb;
}

}  // namespace brdfnet
