#pragma once

#include <complex>

#include <Eigen/Dense>

namespace ddsense {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Complex = std::complex<double>;
using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;
using VecXd = VectorX<double>;
using VecXc = VectorX<Complex>;
using MatXd = MatrixX<double>;
using MatXc = MatrixX<Complex>;

// Delay-Doppler grid, M x N: row = delay bin l, column = Doppler bin k.
using DdGrid = MatXc;
// Time-frequency grid, N x M: row = symbol n, column = subcarrier m.
using TfGrid = MatXc;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

}  // namespace ddsense
