#pragma once

#include <vector>

#include "ddsense/channel.hpp"

namespace ddsense {

/// Patch coordinates: row l = delay offset from the pilot (0..l_max),
/// column k = Doppler offset + k_max.
struct TapIndex {
  int k = 0;
  int l = 0;
  double magnitude = 0.0;
};

struct PeakSearch {
  std::vector<TapIndex> peaks;  // descending magnitude
  bool incomplete = false;      // fewer qualifying maxima than requested
};

struct FractionalTap {
  double value = 0.0;           // in [-0.5, 0.5]
  bool missing_neighbor = false;
};

struct PathEstimate {
  int k = 0;          // integer Doppler tap, relative to the pilot
  int l = 0;          // integer delay tap, relative to the pilot
  double kappa = 0.0;
  double iota = 0.0;
  double delay_s = 0.0;
  double doppler_hz = 0.0;
  double peak_magnitude = 0.0;
  bool flagged = false;

  double delay_tap() const { return l + iota; }
  double doppler_tap() const { return k + kappa; }
};

struct EstimatorOptions {
  int paths = 2;
  // Keep only maxima at or above this multiple of the patch median
  // magnitude; zero disables the filter.
  double peak_to_median = 6.0;
  // Zero runs the plain peak search. A positive value switches to
  // successive cancellation: each detected path is fitted with the analytic
  // pilot response and subtracted before the next search, then every path is
  // re-estimated this many times against the others' fits. In this mode the
  // side of each fractional ratio is chosen by model fit rather than by the
  // larger neighbour.
  int cancellation_rounds = 0;
};

struct PathEstimates {
  std::vector<PathEstimate> paths;  // ascending delay: first entry is the LoS path
  bool incomplete = false;
};

/// Guard patch of the received grid divided by the pilot symbol.
MatXc extract_pilot_region(const DdGrid& rx, const PilotConfig& pc);

/// Strict 3x3 local maxima of |H|, the `count` largest first. Border cells
/// compete only with their in-bounds neighbours.
PeakSearch find_integer_taps(const MatXc& patch, int count, double peak_to_median = 0.0);

/// Fractional Doppler tap at the peak (k, l). The larger of the two Doppler
/// neighbours k' sets the side; kappa = (k' - k) |H[k']| / (|H[k]| + |H[k']|).
/// Ties pick k + 1.
FractionalTap estimate_fractional_doppler(const MatXc& patch, int k, int l);

/// Delay-axis counterpart of estimate_fractional_doppler().
FractionalTap estimate_fractional_delay(const MatXc& patch, int k, int l);

PathEstimates estimate_paths(const DdGrid& rx, const PilotConfig& pc, const FrameConfig& cfg,
                             const EstimatorOptions& opts = {});

/// Same pipeline on an already extracted patch.
PathEstimates estimate_paths_from_patch(const MatXc& patch, const PilotConfig& pc, const FrameConfig& cfg,
                                        const EstimatorOptions& opts = {});

}  // namespace ddsense
