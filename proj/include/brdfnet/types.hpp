#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace brdfnet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rgb = Eigen::Vector3d;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

// BRDF prediction / target vector in the active parameterization:
// physical (rho_d.r, rho_d.g, rho_d.b, rho_s, alpha) or perceptual (L, a, b, c, d).
using Vec5 = Eigen::Matrix<double, 5, 1>;

}  // namespace brdfnet
