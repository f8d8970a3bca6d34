#pragma once

#include <cstdint>
#include <span>

#include "ddsense/modem.hpp"

namespace ddsense {

/// One propagation path of the doubly dispersive channel.
struct ChannelPath {
  Complex gain{1.0, 0.0};
  double delay_s = 0.0;
  double doppler_hz = 0.0;
};

/// Continuous grid coordinates of a path: delay tap l_tau = tau * B and
/// Doppler tap k_nu = nu * N * T. Either may be off-grid.
struct GridTaps {
  double delay = 0.0;
  double doppler = 0.0;
};

/// Integer part plus fractional residual in [-0.5, 0.5].
struct TapDecomposition {
  int l = 0;
  int k = 0;
  double iota = 0.0;
  double kappa = 0.0;
};

struct PhysicalShift {
  double delay_s = 0.0;
  double doppler_hz = 0.0;
};

GridTaps taps_from_physical(double delay_s, double doppler_hz, const FrameConfig& cfg);
PhysicalShift physical_from_taps(double delay_tap, double doppler_tap, const FrameConfig& cfg);
TapDecomposition decompose(const GridTaps& taps);

/// Multipath channel over a CP-extended frame. Each path delays the frame
/// body with a circular phase ramp exp(-j 2 pi f tau), f in [0, B), rebuilds
/// the prefix from the delayed body, and rotates by exp(j 2 pi nu (t - tau))
/// with t counted from the first prefix sample.
/// Throws when a path delay exceeds the cyclic prefix.
TimeSignal apply_channel(const TimeSignal& sig, std::span<const ChannelPath> paths);

/// Adds circular complex Gaussian noise of the given per-sample variance.
TimeSignal add_awgn(const TimeSignal& sig, double noise_power, std::uint64_t seed);

/// sum_{n=0}^{L-1} exp(j 2 pi n x / L)
Complex dirichlet(double x, int L);

/// Analytic pilot response of one path over the guard patch, pilot at the
/// local origin: row = delay offset 0..l_max, column = Doppler offset + k_max.
/// H[k,l] = h/(MN) D_N(k_nu - k) D_M(l - l_tau) exp(-j 2 pi k_nu l_tau / (MN)).
MatXc dd_response_model(const ChannelPath& path, const FrameConfig& cfg, const PilotConfig& pc);

/// dd_response_model() times the unit-modulus factor that the simulated
/// frame attaches to each cell: the Zak twist of the pilot position plus the
/// Doppler phase accumulated from the frame start (prefix included).
MatXc frame_referenced_response(const ChannelPath& path, const FrameConfig& cfg, const PilotConfig& pc);

}  // namespace ddsense
