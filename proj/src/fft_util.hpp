#pragma once

#include <algorithm>
#include <complex>

#include <unsupported/Eigen/FFT>

#include "ddsense/types.hpp"

namespace ddsense::detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::Unscaled);
    return f;
  }();
  return engine;
}

// Unscaled forward (e^{-j}) or inverse (e^{+j}) DFT of a vector.
inline VecXc dft(const VecXc& x, bool inverse) {
  VecXc out(x.size());
  if (x.size() == 0) return out;
  if (inverse) {
    fft_engine().inv(out, x);
  } else {
    fft_engine().fwd(out, x);
  }
  return out;
}

// Unscaled DFT of every column, in place.
inline void dft_columns(MatXc& m, bool inverse) {
  VecXc col(m.rows());
  auto& engine = fft_engine();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    col = m.col(c);
    if (inverse) {
      engine.inv(m.col(c).data(), col.data(), m.rows());
    } else {
      engine.fwd(m.col(c).data(), col.data(), m.rows());
    }
  }
}

// exp(j(phase0 + t*step)) for t = 0..n-1. Runs a phasor recurrence and
// re-seeds it exactly every 256 samples, so drift stays near 1e-14.
inline VecXc phasor_ramp(Eigen::Index n, double phase0, double step) {
  VecXc out(n);
  const Complex w = std::polar(1.0, step);
  for (Eigen::Index start = 0; start < n; start += 256) {
    Complex z = std::polar(1.0, phase0 + double(start) * step);
    const Eigen::Index stop = std::min(n, start + 256);
    for (Eigen::Index t = start; t < stop; ++t) {
      out[t] = z;
      z *= w;
    }
  }
  return out;
}

}  // namespace ddsense::detail
