#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "ddsense/estimator.hpp"
#include "ddsense/types.hpp"

namespace ddsense {

/// Bistatic geometry. The receiver sits at the origin.
template <typename Scalar>
struct Scene {
  std::vector<Vector2<Scalar>> tx_positions;
  std::vector<Vector2<Scalar>> tx_velocities;
  Vector2<Scalar> target = Vector2<Scalar>::Zero();
  Scalar carrier_hz = Scalar(5.6e9);
  Scalar c = Scalar(kSpeedOfLight);

  std::size_t instants() const { return tx_positions.size(); }
  void validate(std::size_t min_instants = 3) const;
};

/// Per-instant observation: NLoS range, NLoS and LoS range rates, and the
/// standard deviations of their errors.
template <typename Scalar>
struct SensingMeasurement {
  Scalar r_hat = 0;
  Scalar r_dot_hat = 0;
  Scalar d_dot_hat = 0;
  Scalar sigma_r = 0;
  Scalar sigma_rdot = 0;
  Scalar sigma_ddot = 0;
  Vector2<Scalar> tx = Vector2<Scalar>::Zero();
};

template <typename Scalar>
struct MeasurementSigmas {
  Scalar range = 0;
  Scalar range_rate = 0;
  Scalar los_rate = 0;
};

/// Tx -> target -> Rx path length.
template <typename DP, typename DS>
typename DP::Scalar nlos_range(const Eigen::MatrixBase<DP>& p, const Eigen::MatrixBase<DS>& s) {
  return (p - s).norm() + p.norm();
}

/// Projection of the Tx velocity on the target -> Tx direction.
template <typename DP, typename DS, typename DV>
typename DP::Scalar nlos_range_rate(const Eigen::MatrixBase<DP>& p, const Eigen::MatrixBase<DS>& s,
                                    const Eigen::MatrixBase<DV>& s_dot) {
  const auto diff = (s - p).eval();
  const auto len = diff.norm();
  if (!(len > 0)) throw std::domain_error("Tx coincides with the target");
  return diff.dot(s_dot) / len;
}

/// Projection of the Tx velocity on the Rx -> Tx direction.
template <typename DS, typename DV>
typename DS::Scalar los_range_rate(const Eigen::MatrixBase<DS>& s, const Eigen::MatrixBase<DV>& s_dot) {
  const auto len = s.norm();
  if (!(len > 0)) throw std::domain_error("Tx coincides with the receiver");
  return s.dot(s_dot) / len;
}

/// Angle at the Tx between the LoS and NLoS directions, folded to [0, pi/2].
template <typename DS, typename DP, typename DT>
typename DS::Scalar path_coupling_angle(const Eigen::MatrixBase<DS>& s, const Eigen::MatrixBase<DP>& p,
                                        const Eigen::MatrixBase<DT>& t) {
  using Scalar = typename DS::Scalar;
  const Scalar st = (s - t).norm();
  const Scalar sp = (s - p).norm();
  const Scalar pt = (p - t).norm();
  if (!(st > 0) || !(sp > 0)) throw std::domain_error("coupling angle undefined for coincident points");
  Scalar cosine = (st * st + sp * sp - pt * pt) / (Scalar(2) * sp * st);
  cosine = std::clamp(cosine, Scalar(-1), Scalar(1));
  return std::clamp(std::acos(cosine), Scalar(0), Scalar(kPi / 2));
}

template <typename Scalar>
void Scene<Scalar>::validate(std::size_t min_instants) const {
  if (tx_positions.size() != tx_velocities.size())
    throw std::invalid_argument("scene needs one velocity per Tx position");
  if (tx_positions.size() < min_instants) throw std::invalid_argument("at least three ellipses are required");
  if (!(target.norm() > 0)) throw std::invalid_argument("target must not sit on the receiver");
  for (const auto& s : tx_positions) {
    // distance from the target to the segment Rx -> Tx
    const Scalar len2 = s.squaredNorm();
    const Scalar u = len2 > 0 ? std::clamp(target.dot(s) / len2, Scalar(0), Scalar(1)) : Scalar(0);
    const Scalar gap = (target - u * s).norm();
    if (gap <= Scalar(1e-9) * std::max(Scalar(1), s.norm()))
      throw std::invalid_argument("target lies on the line between Tx and Rx");
  }
}

/// Truth values of one instant, no noise.
template <typename Scalar>
SensingMeasurement<Scalar> true_measurement(const Scene<Scalar>& scene, std::size_t i) {
  SensingMeasurement<Scalar> m;
  const auto& s = scene.tx_positions.at(i);
  const auto& v = scene.tx_velocities.at(i);
  m.tx = s;
  m.r_hat = nlos_range(scene.target, s);
  m.r_dot_hat = nlos_range_rate(scene.target, s, v);
  m.d_dot_hat = los_range_rate(s, v);
  return m;
}

/// Truth plus independent zero-mean Gaussian errors, seeded.
template <typename Scalar>
std::vector<SensingMeasurement<Scalar>> synthesize_measurements(const Scene<Scalar>& scene,
                                                                const MeasurementSigmas<Scalar>& sigmas,
                                                                std::uint64_t seed) {
  if (sigmas.range < 0 || sigmas.range_rate < 0 || sigmas.los_rate < 0)
    throw std::invalid_argument("standard deviations must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<SensingMeasurement<Scalar>> out;
  out.reserve(scene.instants());
  for (std::size_t i = 0; i < scene.instants(); ++i) {
    auto m = true_measurement(scene, i);
    m.r_hat += sigmas.range * Scalar(gauss(rng));
    m.r_dot_hat += sigmas.range_rate * Scalar(gauss(rng));
    m.d_dot_hat += sigmas.los_rate * Scalar(gauss(rng));
    m.sigma_r = sigmas.range;
    m.sigma_rdot = sigmas.range_rate;
    m.sigma_ddot = sigmas.los_rate;
    out.push_back(m);
  }
  return out;
}

/// Constant-velocity straight-line Tx track sampled every `interval_s`.
template <typename Scalar>
void straight_line_track(Scene<Scalar>& scene, const Vector2<Scalar>& start, const Vector2<Scalar>& velocity,
                         std::size_t count, Scalar interval_s) {
  scene.tx_positions.clear();
  scene.tx_velocities.clear();
  for (std::size_t i = 0; i < count; ++i) {
    scene.tx_positions.push_back(start + velocity * (Scalar(i) * interval_s));
    scene.tx_velocities.push_back(velocity);
  }
}

/// Tx samples on the circle through the Rx (origin) and the target on which
/// the inscribed angle Rx-Tx-target equals acos(cos_theta), so every instant
/// sees the same LoS/NLoS coupling angle. The Tx moves at constant speed
/// along the arc on the left of the Rx -> target direction, centred on the
/// point farthest from that chord; velocities are tangent to the arc.
template <typename Scalar>
void constant_angle_track(Scene<Scalar>& scene, Scalar cos_theta, Scalar speed, std::size_t count,
                          Scalar interval_s) {
  const Scalar chord = scene.target.norm();
  if (!(chord > 0)) throw std::invalid_argument("target must not sit on the receiver");
  if (!(cos_theta >= 0 && cos_theta < 1)) throw std::invalid_argument("cos(theta) must lie in [0, 1)");
  const Scalar theta = std::acos(cos_theta);
  const Scalar radius = chord / (Scalar(2) * std::sin(theta));
  const Vector2<Scalar> left(-scene.target.y() / chord, scene.target.x() / chord);
  const Scalar offset = std::sqrt(std::max(radius * radius - chord * chord / Scalar(4), Scalar(0)));
  const Vector2<Scalar> centre = scene.target / Scalar(2) + offset * left;
  // the farthest arc point lies along +left from the centre
  const Scalar phi_mid = std::atan2(left.y(), left.x());
  const Scalar span = speed * interval_s * Scalar(count > 0 ? count - 1 : 0) / radius;
  // the constant-angle arc ends at the chord endpoints, 2*theta short of a full turn
  if (span >= Scalar(2) * (Scalar(kPi) - theta))
    throw std::invalid_argument("track does not fit on the constant-angle arc");
  scene.tx_positions.clear();
  scene.tx_velocities.clear();
  for (std::size_t i = 0; i < count; ++i) {
    const Scalar phi = phi_mid + speed * interval_s * (Scalar(i) - Scalar(count - 1) / Scalar(2)) / radius;
    scene.tx_positions.push_back(centre + radius * Vector2<Scalar>(std::cos(phi), std::sin(phi)));
    scene.tx_velocities.push_back(speed * Vector2<Scalar>(-std::sin(phi), std::cos(phi)));
  }
}

/// Converts the estimated paths of one frame into a measurement. The path
/// with the shortest delay is the LoS path, the one with the longest the
/// NLoS path. Throws when fewer than two paths are given.
inline SensingMeasurement<double> measurements_from_paths(std::span<const PathEstimate> paths, const Vec2& tx,
                                                          double carrier_hz, double c = kSpeedOfLight) {
  if (paths.size() < 2) throw std::invalid_argument("need a LoS and an NLoS path estimate");
  if (!(carrier_hz > 0)) throw std::invalid_argument("carrier frequency must be positive");
  const auto by_delay = [](const PathEstimate& a, const PathEstimate& b) { return a.delay_s < b.delay_s; };
  const PathEstimate& los = *std::min_element(paths.begin(), paths.end(), by_delay);
  const PathEstimate& nlos = *std::max_element(paths.begin(), paths.end(), by_delay);
  SensingMeasurement<double> m;
  m.tx = tx;
  m.r_hat = c * nlos.delay_s;
  m.r_dot_hat = -c * nlos.doppler_hz / carrier_hz;
  m.d_dot_hat = -c * los.doppler_hz / carrier_hz;
  return m;
}

}  // namespace ddsense
