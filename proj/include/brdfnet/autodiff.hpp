#pragma once

#include <cmath>

#include "brdfnet/types.hpp"

#include <unsupported/Eigen/AutoDiff>

namespace brdfnet {

// Forward-mode scalar carrying the derivative w.r.t. a 5-vector prediction.
using Dual5 = Eigen::AutoDiffScalar<Vec5>;

inline double value_of(double x) { return x; }
inline double value_of(const Dual5& x) { return x.value(); }

inline double cube_root(double x) { return std::cbrt(x); }

inline Dual5 cube_root(const Dual5& x) {
    const double r = std::cbrt(x.value());
    if (r == 0.0) return Dual5(0.0, Vec5::Zero());
    return Dual5(r, x.derivatives() / (3.0 * r * r));
}

// sqrt with a zero (sub)gradient at the origin.
inline double safe_sqrt(double x) { return x > 0.0 ? std::sqrt(x) : 0.0; }

inline Dual5 safe_sqrt(const Dual5& x) {
    if (!(x.value() > 0.0)) return Dual5(0.0, Vec5::Zero());
    const double r = std::sqrt(x.value());
    return Dual5(r, x.derivatives() / (2.0 * r));
}

}  // namespace brdfnet
