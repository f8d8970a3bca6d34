#include "ddsense/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddsense {

MatXc extract_pilot_region(const DdGrid& rx, const PilotConfig& pc) {
  if (pc.k_p - pc.k_max < 0 || pc.k_p + pc.k_max >= rx.cols() || pc.l_p < 0 || pc.l_p + pc.l_max >= rx.rows())
    throw std::invalid_argument("pilot guard region does not fit the received grid");
  if (pc.pilot_amplitude <= 0.0) throw std::invalid_argument("pilot amplitude must be positive to normalise");
  return rx.block(pc.l_p, pc.k_p - pc.k_max, pc.l_max + 1, 2 * pc.k_max + 1) / pc.pilot_amplitude;
}

PeakSearch find_integer_taps(const MatXc& patch, int count, double peak_to_median) {
  if (count < 1) throw std::invalid_argument("path count must be at least 1");
  if (patch.rows() < 3 || patch.cols() < 3) throw std::invalid_argument("patch must be at least 3x3");

  const MatXd mag = patch.cwiseAbs();
  double threshold = 0.0;
  if (peak_to_median > 0.0) {
    std::vector<double> values(mag.data(), mag.data() + mag.size());
    auto mid = values.begin() + values.size() / 2;
    std::nth_element(values.begin(), mid, values.end());
    threshold = peak_to_median * *mid;
  }

  PeakSearch out;
  for (Eigen::Index k = 0; k < mag.cols(); ++k) {
    for (Eigen::Index l = 0; l < mag.rows(); ++l) {
      const double v = mag(l, k);
      if (v <= 0.0 || v < threshold) continue;
      bool is_max = true;
      for (Eigen::Index dk = -1; dk <= 1 && is_max; ++dk) {
        for (Eigen::Index dl = -1; dl <= 1; ++dl) {
          if (dk == 0 && dl == 0) continue;
          const Eigen::Index kk = k + dk, ll = l + dl;
          if (kk < 0 || ll < 0 || kk >= mag.cols() || ll >= mag.rows()) continue;
          if (!(v > mag(ll, kk))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) out.peaks.push_back({int(k), int(l), v});
    }
  }
  std::stable_sort(out.peaks.begin(), out.peaks.end(),
                   [](const TapIndex& a, const TapIndex& b) { return a.magnitude > b.magnitude; });
  if (int(out.peaks.size()) > count) out.peaks.resize(count);
  out.incomplete = int(out.peaks.size()) < count;
  return out;
}

namespace {

// Ratio on a fixed side (+1 or -1) of the peak; `at(i)` reads |H| along
// the axis.
template <typename Read>
double ratio_on_side(Read at, int peak, int side) {
  const double centre = at(peak);
  const double neighbour = at(peak + side);
  const double denom = centre + neighbour;
  return denom > 0.0 ? std::clamp(side * neighbour / denom, -0.5, 0.5) : 0.0;
}

// Shared by both axes: `size` bounds the axis.
template <typename Read>
FractionalTap fractional_along(Read at, int peak, int size) {
  const bool has_up = peak + 1 < size;
  const bool has_down = peak - 1 >= 0;
  if (!has_up && !has_down) return {0.0, true};
  int side = +1;
  if (!has_up) {
    side = -1;
  } else if (has_down && at(peak - 1) > at(peak + 1)) {
    side = -1;
  }
  FractionalTap out;
  out.missing_neighbor = !(has_up && has_down);
  out.value = ratio_on_side(at, peak, side);
  return out;
}

}  // namespace

FractionalTap estimate_fractional_doppler(const MatXc& patch, int k, int l) {
  if (l < 0 || l >= patch.rows() || k < 0 || k >= patch.cols()) throw std::out_of_range("peak outside patch");
  return fractional_along([&](int i) { return std::abs(patch(l, i)); }, k, int(patch.cols()));
}

FractionalTap estimate_fractional_delay(const MatXc& patch, int k, int l) {
  if (l < 0 || l >= patch.rows() || k < 0 || k >= patch.cols()) throw std::out_of_range("peak outside patch");
  return fractional_along([&](int i) { return std::abs(patch(i, k)); }, l, int(patch.rows()));
}

namespace {

PathEstimate from_taps(const TapIndex& peak, double kappa, double iota, bool flagged, const PilotConfig& pc,
                       const FrameConfig& cfg) {
  PathEstimate e;
  e.k = peak.k - pc.k_max;
  e.l = peak.l;
  e.kappa = kappa;
  e.iota = iota;
  e.peak_magnitude = peak.magnitude;
  e.flagged = flagged;
  const PhysicalShift phys = physical_from_taps(e.delay_tap(), e.doppler_tap(), cfg);
  e.delay_s = phys.delay_s;
  e.doppler_hz = phys.doppler_hz;
  return e;
}

PathEstimate describe(const TapIndex& peak, const MatXc& patch, const PilotConfig& pc, const FrameConfig& cfg) {
  // Doppler first along the peak's delay row, then delay along its Doppler column.
  const FractionalTap kappa = estimate_fractional_doppler(patch, peak.k, peak.l);
  const FractionalTap iota = estimate_fractional_delay(patch, peak.k, peak.l);
  return from_taps(peak, kappa.value, iota.value, kappa.missing_neighbor || iota.missing_neighbor, pc, cfg);
}

MatXc unit_response(const PathEstimate& e, const PilotConfig& pc, const FrameConfig& cfg) {
  return frame_referenced_response(ChannelPath{Complex(1.0, 0.0), e.delay_s, e.doppler_hz}, cfg, pc);
}

// Least-squares complex gain of one path's model response in the patch.
MatXc fitted_response(const PathEstimate& e, const MatXc& patch, const PilotConfig& pc, const FrameConfig& cfg) {
  const MatXc unit = unit_response(e, pc, cfg);
  const double energy = unit.squaredNorm();
  if (!(energy > 0.0)) return MatXc::Zero(patch.rows(), patch.cols());
  const Complex gain = (unit.conjugate().array() * patch.array()).sum() / energy;
  return gain * unit;
}

// Energy the least-squares fit of `e` explains in the patch.
double explained_energy(const PathEstimate& e, const MatXc& patch, const PilotConfig& pc, const FrameConfig& cfg) {
  const MatXc unit = unit_response(e, pc, cfg);
  const double energy = unit.squaredNorm();
  if (!(energy > 0.0)) return 0.0;
  return std::norm((unit.conjugate().array() * patch.array()).sum()) / energy;
}

// Near an integer tap both neighbours are almost equal and the larger one
// may sit on the wrong side. Try the ratio on each side of both axes and
// keep the candidate whose model explains most of the patch.
PathEstimate describe_by_fit(const TapIndex& peak, const MatXc& patch, const PilotConfig& pc,
                             const FrameConfig& cfg) {
  const PathEstimate plain = describe(peak, patch, pc, cfg);
  if (plain.flagged) return plain;
  const auto along_k = [&](int i) { return std::abs(patch(peak.l, i)); };
  const auto along_l = [&](int i) { return std::abs(patch(i, peak.k)); };
  PathEstimate best = plain;
  double best_energy = explained_energy(plain, patch, pc, cfg);
  for (int side_k : {-1, 1}) {
    for (int side_l : {-1, 1}) {
      const PathEstimate e = from_taps(peak, ratio_on_side(along_k, peak.k, side_k),
                                       ratio_on_side(along_l, peak.l, side_l), false, pc, cfg);
      const double energy = explained_energy(e, patch, pc, cfg);
      if (energy > best_energy) {
        best = e;
        best_energy = energy;
      }
    }
  }
  return best;
}

// Strongest cell in the 3x3 block around `near`, used to re-seat a peak.
TapIndex reseat(const MatXc& patch, const TapIndex& near) {
  TapIndex best = near;
  best.magnitude = -1.0;
  for (int dk = -1; dk <= 1; ++dk) {
    for (int dl = -1; dl <= 1; ++dl) {
      const int k = near.k + dk, l = near.l + dl;
      if (k < 0 || l < 0 || k >= patch.cols() || l >= patch.rows()) continue;
      const double v = std::abs(patch(l, k));
      if (v > best.magnitude) best = {k, l, v};
    }
  }
  return best;
}

PathEstimates cancel_successively(const MatXc& patch, const PilotConfig& pc, const FrameConfig& cfg,
                                  const EstimatorOptions& opts) {
  PathEstimates out;
  std::vector<TapIndex> peaks;
  std::vector<MatXc> fits;
  MatXc residual = patch;
  for (int j = 0; j < opts.paths; ++j) {
    const PeakSearch search = find_integer_taps(residual, 1, opts.peak_to_median);
    if (search.peaks.empty()) {
      out.incomplete = true;
      break;
    }
    peaks.push_back(search.peaks.front());
    out.paths.push_back(describe_by_fit(peaks.back(), residual, pc, cfg));
    fits.push_back(fitted_response(out.paths.back(), residual, pc, cfg));
    residual -= fits.back();
  }
  for (int round = 0; round < opts.cancellation_rounds; ++round) {
    for (std::size_t j = 0; j < out.paths.size(); ++j) {
      const MatXc own = residual + fits[j];
      peaks[j] = reseat(own, peaks[j]);
      out.paths[j] = describe_by_fit(peaks[j], own, pc, cfg);
      fits[j] = fitted_response(out.paths[j], own, pc, cfg);
      residual = own - fits[j];
    }
  }
  return out;
}

}  // namespace

PathEstimates estimate_paths_from_patch(const MatXc& patch, const PilotConfig& pc, const FrameConfig& cfg,
                                        const EstimatorOptions& opts) {
  if (opts.cancellation_rounds < 0) throw std::invalid_argument("cancellation rounds must be non-negative");
  PathEstimates out;
  if (opts.cancellation_rounds > 0) {
    out = cancel_successively(patch, pc, cfg, opts);
  } else {
    const PeakSearch search = find_integer_taps(patch, opts.paths, opts.peak_to_median);
    out.incomplete = search.incomplete;
    for (const auto& peak : search.peaks) out.paths.push_back(describe(peak, patch, pc, cfg));
  }
  std::stable_sort(out.paths.begin(), out.paths.end(),
                   [](const PathEstimate& a, const PathEstimate& b) { return a.delay_s < b.delay_s; });
  return out;
}

PathEstimates estimate_paths(const DdGrid& rx, const PilotConfig& pc, const FrameConfig& cfg,
                             const EstimatorOptions& opts) {
  if (rx.rows() != cfg.M || rx.cols() != cfg.N) throw std::invalid_argument("received grid does not match the frame");
  return estimate_paths_from_patch(extract_pilot_region(rx, pc), pc, cfg, opts);
}

}  // namespace ddsense
