#pragma once

#include <cstdint>

#include "ddsense/types.hpp"

namespace ddsense {

/// OTFS frame geometry. Sampling runs at the signal bandwidth M * delta_f,
/// so one delay bin is one time sample.
struct FrameConfig {
  int M = 256;              // delay bins (subcarriers)
  int N = 256;              // Doppler bins (symbols)
  double delta_f = 93.75e3; // subcarrier spacing, Hz
  double carrier_hz = 5.6e9;
  int cp_len = 16;          // frame-level cyclic prefix, samples

  double symbol_period() const { return 1.0 / delta_f; }
  double bandwidth() const { return M * delta_f; }
  double sample_rate() const { return bandwidth(); }
  double frame_duration() const { return N * symbol_period(); }
  double delay_resolution() const { return 1.0 / bandwidth(); }
  double doppler_resolution() const { return delta_f / N; }
  int frame_samples() const { return M * N + cp_len; }

  /// Throws std::invalid_argument when the geometry is unusable.
  void validate() const;
};

/// Embedded-pilot layout. The zero guard spans Doppler bins
/// [k_p - k_max - doppler_margin, k_p + k_max + doppler_margin] and delay
/// bins [l_p - lead_guard, l_p + l_max]. With both extras at 0 the guard is
/// exactly the estimation window; positive values also blank the data that
/// the channel's delay and Doppler shifts would otherwise move into it.
struct PilotConfig {
  int k_p = 128;
  int l_p = 128;
  int k_max = 16;
  int l_max = 16;
  int lead_guard = 0;
  int doppler_margin = 0;
  double pilot_amplitude = 31.622776601683793;  // 30 dB over unit data power
  double data_power = 1.0;

  bool in_guard(int l, int k) const {
    return k >= k_p - k_max - doppler_margin && k <= k_p + k_max + doppler_margin && l >= l_p - lead_guard &&
           l <= l_p + l_max;
  }
  void validate(const FrameConfig& cfg) const;
};

/// Sampled baseband signal. Carries the cyclic-prefix length so that
/// downstream stages can find the frame body.
struct TimeSignal {
  VecXc samples;
  double sample_rate = 0.0;
  int cp_len = 0;

  Eigen::Index body_size() const { return samples.size() - cp_len; }
  auto body() const { return samples.tail(body_size()); }
};

TfGrid isfft(const DdGrid& dd, const FrameConfig& cfg);
DdGrid sfft(const TfGrid& tf, const FrameConfig& cfg);

/// Rectangular-pulse Heisenberg transform: a unitary M-point inverse DFT
/// per symbol block, followed by a frame-level cyclic prefix.
TimeSignal heisenberg(const TfGrid& tf, const FrameConfig& cfg);

/// Matched-filter counterpart of heisenberg(). Strips the cyclic prefix.
TfGrid wigner(const TimeSignal& sig, const FrameConfig& cfg);

/// Pilot frame: pilot at (k_p, l_p), zero guard, seeded unit-power QPSK
/// (scaled to data_power) everywhere else.
DdGrid place_pilot(const FrameConfig& cfg, const PilotConfig& pc, std::uint64_t payload_seed);

TimeSignal modulate(const DdGrid& dd, const FrameConfig& cfg);
DdGrid demodulate(const TimeSignal& sig, const FrameConfig& cfg);

/// Mean per-sample power of a modulated pilot frame (frame body only).
double frame_mean_power(const FrameConfig& cfg, const PilotConfig& pc);

}  // namespace ddsense
