#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

namespace rfdiss {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Index into a system's mode list.
using ModeId = std::size_t;

/// Euclidean magnitude; overloads let signal code stay generic over values.
inline double magnitude(const Vec& v) { return v.norm(); }
inline double magnitude(double v) { return std::abs(v); }

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace rfdiss
