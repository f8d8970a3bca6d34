#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ddsense/modem.hpp"

namespace ddsense {

/// Raw complex baseband record. `format` is the tag it was read with.
struct Capture {
  VecXc samples;
  double sample_rate = 1.0;
  std::string format = "f32iq";

  void validate() const;
};

/// Known tags: "f32iq" (interleaved little-endian float32 I, Q) and "csv"
/// (one "re,im" pair per line, optional header). Anything else throws.
Capture read_capture(const std::filesystem::path& path, std::string_view format, double sample_rate = 1.0);
void write_capture(const std::filesystem::path& path, const VecXc& samples, std::string_view format);

/// Unit-modulus sequence with independent uniform phases.
VecXc generate_preamble(int length, std::uint64_t seed);

/// Normalised correlation |sum_k x[n + k] conj(p[k])| / (|p| |x[n, n + P)|)
/// for every full overlap n, in [0, 1]; zero where the window is silent.
/// Dividing by the window energy keeps the noise statistics the same inside
/// and outside frames. Computed with fixed-size overlap-save blocks, so the
/// output does not depend on how long the capture is.
VecXd preamble_correlation(const VecXc& x, const VecXc& preamble);

struct FrameIndex {
  std::vector<long> start_indices;         // first preamble sample of each frame
  std::vector<double> correlation_peaks;   // matching correlation values
  double threshold = 0.0;
  double noise_scale = 0.0;                // Rayleigh scale estimate
  long lags = 0;                           // correlation values examined
  long exceedances = 0;                    // values above threshold before suppression
  int preamble_length = 0;
};

/// CFAR frame detection. The correlation noise scale comes from the median
/// of the correlation magnitudes (Rayleigh: median = s sqrt(2 ln 2)); the
/// threshold s sqrt(-2 ln p_fa) then has exceedance probability p_fa under
/// noise alone. Peaks closer than `min_separation` to a stronger one are
/// suppressed (defaults to the preamble length).
FrameIndex detect_frames(const Capture& cap, const VecXc& preamble, double p_fa, long min_separation = 0);

struct Segmentation {
  std::vector<TimeSignal> frames;
  std::vector<std::string> warnings;
};

/// Cuts `frame_len` samples following each detected preamble. Frames that
/// run past the end of the capture are dropped with a warning.
Segmentation segment_frames(const Capture& cap, const FrameIndex& idx, long frame_len, int cp_len);

}  // namespace ddsense
