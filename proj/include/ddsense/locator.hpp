#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "ddsense/scene.hpp"

namespace ddsense {

template <typename Scalar>
struct LinearSystem {
  VectorX<Scalar> alpha;
  MatrixX<Scalar> A;  // N1 x 3, row i = [-s_x, -s_y, r_i]
};

template <typename Scalar>
struct CoarseEstimate {
  Vector3<Scalar> z_hat = Vector3<Scalar>::Zero();  // [x, y, |p|]
  Matrix3<Scalar> cov_z = Matrix3<Scalar>::Zero();
  int iterations = 0;
  bool converged = false;
};

template <typename Scalar>
struct RefinedEstimate {
  Vector2<Scalar> upsilon = Vector2<Scalar>::Zero();  // [x^2, y^2]
  bool clamped = false;
  bool regularized = false;
};

template <typename Scalar>
struct SignChoice {
  Vector2<Scalar> p_hat = Vector2<Scalar>::Zero();
  Scalar loss = 0;
  std::array<int, 2> signs{1, 1};
};

template <typename Scalar>
struct VelocityEstimate {
  Vector2<Scalar> velocity = Vector2<Scalar>::Zero();
  Scalar condition = 0;
  bool ill_conditioned = false;
};

template <typename Scalar>
struct LocalizationResult {
  Vector2<Scalar> p_hat = Vector2<Scalar>::Zero();
  Vector2<Scalar> upsilon_hat = Vector2<Scalar>::Zero();
  Scalar loss_L = 0;
  std::array<int, 2> sign_choice{1, 1};
  std::vector<VelocityEstimate<Scalar>> velocities;
  CoarseEstimate<Scalar> coarse;
  bool clamped = false;
  bool regularized = false;
};

template <typename Scalar>
struct LocateOptions {
  Scalar eps = Scalar(1e-6);
  int max_iter = 50;
  // Lower bound on the per-instant range standard deviation used when the
  // weights are taken from the measurements themselves.
  Scalar sigma_floor = Scalar(1e-6);
};

template <typename Scalar>
struct SolverResult {
  Vector2<Scalar> p = Vector2<Scalar>::Zero();
  Scalar loss = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<Vector2<Scalar>> trace;  // iterates, filled when requested
};

template <typename Scalar>
struct LmOptions {
  int max_iter = 200;
  Scalar damping = Scalar(1e-3);
  Scalar xtol = Scalar(1e-12);
  bool keep_trace = false;
};

template <typename Scalar>
struct DfpOptions {
  int max_iter = 200;
  // Forward-difference step for the gradient, metres.
  Scalar gradient_step = Scalar(1e-7);
  Scalar gtol = Scalar(1e-12);
  Scalar xtol = Scalar(1e-12);
  Scalar armijo = Scalar(1e-4);
  int max_backtracks = 60;
  bool keep_trace = false;
};

/// Sum of squared bistatic range residuals.
template <typename Scalar, typename D>
Scalar ellipse_loss(const Eigen::MatrixBase<D>& p, const std::vector<SensingMeasurement<Scalar>>& meas) {
  Scalar loss = 0;
  for (const auto& m : meas) {
    const Scalar f = (p - m.tx).norm() + p.norm() - m.r_hat;
    loss += f * f;
  }
  return loss;
}

template <typename Scalar>
LinearSystem<Scalar> build_system(const std::vector<SensingMeasurement<Scalar>>& meas) {
  if (meas.size() < 3) throw std::invalid_argument("at least three ellipses are required");
  const Eigen::Index n = Eigen::Index(meas.size());
  LinearSystem<Scalar> sys;
  sys.alpha.resize(n);
  sys.A.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& m = meas[std::size_t(i)];
    sys.alpha[i] = Scalar(0.5) * (m.r_hat * m.r_hat - m.tx.squaredNorm());
    sys.A.row(i) << -m.tx.x(), -m.tx.y(), m.r_hat;
  }
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(sys.A);
  const auto& sv = svd.singularValues();
  if (!(sv(2) > std::numeric_limits<Scalar>::epsilon() * Scalar(64) * sv(0)))
    throw std::invalid_argument("degenerate geometry: measurement matrix is rank deficient");
  return sys;
}

namespace detail {

template <typename Scalar>
Vector3<Scalar> weighted_solve(const MatrixX<Scalar>& A, const VectorX<Scalar>& alpha, const VectorX<Scalar>& w,
                               Matrix3<Scalar>* normal_inverse) {
  const Matrix3<Scalar> normal = A.transpose() * w.asDiagonal() * A;
  Eigen::LDLT<Matrix3<Scalar>> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > Scalar(1e-14)))
    throw std::invalid_argument("weighted normal matrix is singular (collinear Tx positions?)");
  if (normal_inverse) *normal_inverse = ldlt.solve(Matrix3<Scalar>::Identity());
  return ldlt.solve(A.transpose() * w.asDiagonal() * alpha);
}

}  // namespace detail

/// Two-stage WLS for z = [x, y, |p|]. `q` holds the diagonal of Q, the
/// range-error variances. The weight matrix starts at Q and is rebuilt from
/// the latest |p| estimate until successive iterates move by at most `eps`.
template <typename Scalar, typename DQ>
CoarseEstimate<Scalar> coarse_wls(const VectorX<Scalar>& alpha, const MatrixX<Scalar>& A,
                                  const Eigen::MatrixBase<DQ>& q, Scalar eps = Scalar(1e-6), int max_iter = 50) {
  if (A.rows() != alpha.size() || A.cols() != 3 || q.size() != alpha.size())
    throw std::invalid_argument("coarse_wls: inconsistent dimensions");
  if (alpha.size() < 3) throw std::invalid_argument("at least three ellipses are required");
  if (!((q.array() > Scalar(0)).all())) throw std::invalid_argument("Q must be positive definite");
  if (max_iter < 0) throw std::invalid_argument("max_iter must be non-negative");

  CoarseEstimate<Scalar> out;
  VectorX<Scalar> w = q.cwiseInverse();
  out.z_hat = detail::weighted_solve(A, alpha, w, &out.cov_z);
  const VectorX<Scalar> r = A.col(2);
  for (int it = 0; it < max_iter; ++it) {
    VectorX<Scalar> R(alpha.size());
    for (Eigen::Index i = 0; i < R.size(); ++i) {
      const Scalar b = out.z_hat(2) - r(i);
      R(i) = b * b * q(i);
    }
    // an instant whose B entry vanishes would get infinite weight
    const Scalar floor = std::max(R.maxCoeff(), std::numeric_limits<Scalar>::min()) * Scalar(1e-12);
    w = R.cwiseMax(floor).cwiseInverse();
    Matrix3<Scalar> cov;
    const Vector3<Scalar> next = detail::weighted_solve(A, alpha, w, &cov);
    const Scalar step = (next - out.z_hat).norm();
    out.z_hat = next;
    out.cov_z = cov;
    out.iterations = it + 1;
    if (step <= eps) {
      out.converged = true;
      break;
    }
  }
  out.cov_z = Scalar(0.5) * (out.cov_z + out.cov_z.transpose());
  return out;
}

/// Second WLS stage on the squared coordinates, enforcing x^2 + y^2 = |p|^2.
template <typename Scalar>
RefinedEstimate<Scalar> refine_wls(const CoarseEstimate<Scalar>& coarse) {
  RefinedEstimate<Scalar> out;
  const Vector3<Scalar>& z = coarse.z_hat;
  const Vector3<Scalar> theta = z.cwiseProduct(z);
  Eigen::Matrix<Scalar, 3, 2> S;
  S << 1, 0, 0, 1, 1, 1;
  Matrix3<Scalar> omega = Scalar(4) * z.asDiagonal() * coarse.cov_z * z.asDiagonal();
  if ((z.cwiseAbs().array() < Scalar(1e-6)).any()) {
    const Scalar tr = omega.trace();
    omega += (tr > 0 ? Scalar(1e-9) * tr / Scalar(3) : Scalar(1)) * Matrix3<Scalar>::Identity();
    out.regularized = true;
  }
  Eigen::LDLT<Matrix3<Scalar>> ldlt(omega);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > Scalar(1e-15))) {
    // fall back to ordinary LS on the squared coordinates
    omega = Matrix3<Scalar>::Identity();
    ldlt.compute(omega);
    out.regularized = true;
  }
  const Eigen::Matrix<Scalar, 3, 2> wS = ldlt.solve(S);
  const Matrix2<Scalar> normal = S.transpose() * wS;
  out.upsilon = normal.ldlt().solve(wS.transpose() * theta);
  for (int j = 0; j < 2; ++j) {
    if (out.upsilon(j) < 0) {
      out.upsilon(j) = 0;
      out.clamped = true;
    }
  }
  return out;
}

/// Picks the sign pattern of [sqrt(u1), sqrt(u2)] with the smallest loss.
/// A zero component contributes one candidate only; ties keep (+, +).
template <typename Scalar>
SignChoice<Scalar> resolve_sign(const Vector2<Scalar>& upsilon, const std::vector<SensingMeasurement<Scalar>>& meas) {
  if ((upsilon.array() < Scalar(0)).any()) throw std::invalid_argument("squared coordinates must be non-negative");
  const Vector2<Scalar> mag = upsilon.cwiseSqrt();
  SignChoice<Scalar> best;
  bool first = true;
  for (int sx : {1, -1}) {
    if (sx < 0 && mag.x() == 0) continue;
    for (int sy : {1, -1}) {
      if (sy < 0 && mag.y() == 0) continue;
      const Vector2<Scalar> p(sx * mag.x(), sy * mag.y());
      const Scalar loss = ellipse_loss(p, meas);
      if (first || loss < best.loss) {
        best.p_hat = p;
        best.loss = loss;
        best.signs = {sx, sy};
        first = false;
      }
    }
  }
  return best;
}

/// Per-instant Tx velocity from the NLoS and LoS range rates at position p.
template <typename Scalar>
VelocityEstimate<Scalar> estimate_velocity(const Vector2<Scalar>& p_hat, const SensingMeasurement<Scalar>& m) {
  VelocityEstimate<Scalar> out;
  const Vector2<Scalar> a = m.tx - p_hat;
  const Vector2<Scalar> b = m.tx;
  if (!(a.norm() > 0) || !(b.norm() > 0)) {
    out.condition = std::numeric_limits<Scalar>::infinity();
    out.ill_conditioned = true;
    return out;
  }
  Matrix2<Scalar> C;
  C.row(0) = a.transpose() / a.norm();
  C.row(1) = b.transpose() / b.norm();
  const Vector2<Scalar> u(m.r_dot_hat, m.d_dot_hat);
  Eigen::JacobiSVD<Matrix2<Scalar>> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  out.condition = sv(1) > 0 ? sv(0) / sv(1) : std::numeric_limits<Scalar>::infinity();
  out.ill_conditioned = !(out.condition <= Scalar(1e6));
  if (out.ill_conditioned) {
    // minimum-norm answer so that callers still get something finite
    svd.setThreshold(Scalar(1e-6));
    out.velocity = svd.solve(u);
  } else {
    out.velocity = (C.transpose() * C).ldlt().solve(C.transpose() * u);
  }
  return out;
}

/// Range-error variances from the measurements, floored.
template <typename Scalar>
VectorX<Scalar> range_variances(const std::vector<SensingMeasurement<Scalar>>& meas, Scalar sigma_floor) {
  VectorX<Scalar> q(Eigen::Index(meas.size()));
  for (std::size_t i = 0; i < meas.size(); ++i) {
    const Scalar s = std::max(meas[i].sigma_r, sigma_floor);
    q(Eigen::Index(i)) = s * s;
  }
  return q;
}

/// Double-WLS localisation followed by per-instant velocity estimates.
template <typename Scalar, typename DQ>
LocalizationResult<Scalar> locate(const std::vector<SensingMeasurement<Scalar>>& meas, const Eigen::MatrixBase<DQ>& q,
                                  const LocateOptions<Scalar>& opts = {}) {
  const LinearSystem<Scalar> sys = build_system(meas);
  LocalizationResult<Scalar> out;
  out.coarse = coarse_wls(sys.alpha, sys.A, q, opts.eps, opts.max_iter);
  const RefinedEstimate<Scalar> refined = refine_wls(out.coarse);
  out.upsilon_hat = refined.upsilon;
  out.clamped = refined.clamped;
  out.regularized = refined.regularized;
  const SignChoice<Scalar> choice = resolve_sign(refined.upsilon, meas);
  out.p_hat = choice.p_hat;
  out.loss_L = choice.loss;
  out.sign_choice = choice.signs;
  out.velocities.reserve(meas.size());
  for (const auto& m : meas) out.velocities.push_back(estimate_velocity(out.p_hat, m));
  return out;
}

/// Same, with Q taken from the measurements' sigma_r.
template <typename Scalar>
LocalizationResult<Scalar> locate(const std::vector<SensingMeasurement<Scalar>>& meas,
                                  const LocateOptions<Scalar>& opts = {}) {
  return locate(meas, range_variances(meas, opts.sigma_floor), opts);
}

/// Shared starting point of the iterative baselines.
template <typename Scalar>
Vector2<Scalar> tx_centroid(const std::vector<SensingMeasurement<Scalar>>& meas) {
  if (meas.empty()) throw std::invalid_argument("no measurements");
  Vector2<Scalar> c = Vector2<Scalar>::Zero();
  for (const auto& m : meas) c += m.tx;
  return c / Scalar(meas.size());
}

namespace detail {

template <typename Scalar>
void range_residuals(const Vector2<Scalar>& p, const std::vector<SensingMeasurement<Scalar>>& meas, VectorX<Scalar>& f,
                     MatrixX<Scalar>* J) {
  const Eigen::Index n = Eigen::Index(meas.size());
  f.resize(n);
  if (J) J->resize(n, 2);
  const Scalar pn = p.norm();
  const Vector2<Scalar> up = pn > 0 ? Vector2<Scalar>(p / pn) : Vector2<Scalar>::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& m = meas[std::size_t(i)];
    const Vector2<Scalar> d = p - m.tx;
    const Scalar dn = d.norm();
    f(i) = dn + pn - m.r_hat;
    if (J) J->row(i) = (dn > 0 ? Vector2<Scalar>(d / dn) : Vector2<Scalar>::Zero()).transpose() + up.transpose();
  }
}

}  // namespace detail

/// Levenberg-Marquardt on the unweighted bistatic range residuals.
template <typename Scalar>
SolverResult<Scalar> locate_lm(const std::vector<SensingMeasurement<Scalar>>& meas, const Vector2<Scalar>& init,
                               const LmOptions<Scalar>& opts = {}) {
  if (meas.empty()) throw std::invalid_argument("no measurements");
  SolverResult<Scalar> out;
  out.p = init;
  VectorX<Scalar> f, f_new;
  MatrixX<Scalar> J;
  detail::range_residuals(out.p, meas, f, &J);
  Scalar cost = f.squaredNorm();
  Scalar mu = opts.damping;
  if (opts.keep_trace) out.trace.push_back(out.p);
  for (int it = 0; it < opts.max_iter; ++it) {
    out.iterations = it + 1;
    const Matrix2<Scalar> H = J.transpose() * J;
    const Vector2<Scalar> g = J.transpose() * f;
    Matrix2<Scalar> damped = H;
    damped.diagonal() += mu * H.diagonal().cwiseMax(Scalar(1e-12));
    const Vector2<Scalar> delta = damped.ldlt().solve(-g);
    const Vector2<Scalar> trial = out.p + delta;
    detail::range_residuals<Scalar>(trial, meas, f_new, nullptr);
    const Scalar cost_new = f_new.squaredNorm();
    if (cost_new <= cost) {
      out.p = trial;
      cost = cost_new;
      detail::range_residuals(out.p, meas, f, &J);
      mu = std::max(mu * Scalar(0.1), Scalar(1e-12));
      if (opts.keep_trace) out.trace.push_back(out.p);
      if (delta.norm() <= opts.xtol * (Scalar(1) + out.p.norm())) {
        out.converged = true;
        break;
      }
    } else {
      mu *= Scalar(10);
      if (mu > Scalar(1e12)) break;
    }
  }
  out.loss = cost;
  return out;
}

/// Davidon-Fletcher-Powell quasi-Newton on the loss, with forward-difference
/// gradients and Armijo backtracking.
template <typename Scalar>
SolverResult<Scalar> locate_dfp(const std::vector<SensingMeasurement<Scalar>>& meas, const Vector2<Scalar>& init,
                                const DfpOptions<Scalar>& opts = {}) {
  if (meas.empty()) throw std::invalid_argument("no measurements");
  if (!(opts.gradient_step > 0)) throw std::invalid_argument("gradient step must be positive");
  const auto loss = [&](const Vector2<Scalar>& p) { return ellipse_loss(p, meas); };
  const auto gradient = [&](const Vector2<Scalar>& p, Scalar fp) {
    Vector2<Scalar> g;
    for (int j = 0; j < 2; ++j) {
      Vector2<Scalar> q = p;
      q(j) += opts.gradient_step;
      g(j) = (loss(q) - fp) / opts.gradient_step;
    }
    return g;
  };

  SolverResult<Scalar> out;
  out.p = init;
  Scalar fx = loss(out.p);
  Vector2<Scalar> g = gradient(out.p, fx);
  Matrix2<Scalar> Hinv = Matrix2<Scalar>::Identity();
  if (opts.keep_trace) out.trace.push_back(out.p);
  for (int it = 0; it < opts.max_iter; ++it) {
    out.iterations = it + 1;
    if (g.norm() <= opts.gtol) {
      out.converged = true;
      break;
    }
    Vector2<Scalar> dir = -Hinv * g;
    Scalar slope = g.dot(dir);
    if (!(slope < 0)) {
      Hinv.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    Scalar step = 1;
    Vector2<Scalar> trial = out.p + dir;
    Scalar f_trial = loss(trial);
    int backtracks = 0;
    while (f_trial > fx + opts.armijo * step * slope && backtracks < opts.max_backtracks) {
      step *= Scalar(0.5);
      trial = out.p + step * dir;
      f_trial = loss(trial);
      ++backtracks;
    }
    if (f_trial > fx) break;  // no descent along the approximate gradient
    const Vector2<Scalar> s = trial - out.p;
    const Vector2<Scalar> g_new = gradient(trial, f_trial);
    const Vector2<Scalar> y = g_new - g;
    out.p = trial;
    fx = f_trial;
    g = g_new;
    if (opts.keep_trace) out.trace.push_back(out.p);
    if (s.norm() <= opts.xtol * (Scalar(1) + out.p.norm())) {
      out.converged = true;
      break;
    }
    const Scalar sy = s.dot(y);
    if (sy > std::numeric_limits<Scalar>::epsilon() * s.norm() * y.norm()) {
      const Vector2<Scalar> Hy = Hinv * y;
      Hinv += s * s.transpose() / sy - Hy * Hy.transpose() / y.dot(Hy);
    }
  }
  out.loss = fx;
  return out;
}

/// Exhaustive grid minimisation of the loss over [lo, hi]. Test oracle.
template <typename Scalar>
Vector2<Scalar> brute_force_locate(const std::vector<SensingMeasurement<Scalar>>& meas, const Vector2<Scalar>& lo,
                                   const Vector2<Scalar>& hi, Scalar step) {
  if (!(step > 0)) throw std::invalid_argument("grid step must be positive");
  if (!(hi.x() >= lo.x()) || !(hi.y() >= lo.y())) throw std::invalid_argument("empty search box");
  const long nx = long(std::floor((hi.x() - lo.x()) / step)) + 1;
  const long ny = long(std::floor((hi.y() - lo.y()) / step)) + 1;
  Vector2<Scalar> best = lo;
  Scalar best_loss = std::numeric_limits<Scalar>::infinity();
  for (long ix = 0; ix < nx; ++ix) {
    for (long iy = 0; iy < ny; ++iy) {
      const Vector2<Scalar> p(lo.x() + Scalar(ix) * step, lo.y() + Scalar(iy) * step);
      const Scalar l = ellipse_loss(p, meas);
      if (l < best_loss) {
        best_loss = l;
        best = p;
      }
    }
  }
  return best;
}

}  // namespace ddsense
