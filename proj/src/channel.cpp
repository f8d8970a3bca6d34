#include "ddsense/channel.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "fft_util.hpp"

namespace ddsense {

GridTaps taps_from_physical(double delay_s, double doppler_hz, const FrameConfig& cfg) {
  return {delay_s * cfg.bandwidth(), doppler_hz * cfg.N * cfg.symbol_period()};
}

PhysicalShift physical_from_taps(double delay_tap, double doppler_tap, const FrameConfig& cfg) {
  const double mn = double(cfg.M) * cfg.N;
  return {delay_tap / cfg.bandwidth(), doppler_tap * cfg.bandwidth() / mn};
}

TapDecomposition decompose(const GridTaps& taps) {
  TapDecomposition d;
  d.l = int(std::lround(taps.delay));
  d.k = int(std::lround(taps.doppler));
  d.iota = taps.delay - d.l;
  d.kappa = taps.doppler - d.k;
  return d;
}

TimeSignal apply_channel(const TimeSignal& sig, std::span<const ChannelPath> paths) {
  if (!(sig.sample_rate > 0.0)) throw std::invalid_argument("signal sample rate must be positive");
  if (sig.cp_len < 0 || sig.body_size() <= 0) throw std::invalid_argument("signal has no frame body");

  const Eigen::Index total = sig.samples.size();
  const Eigen::Index body_len = sig.body_size();
  const double fs = sig.sample_rate;

  TimeSignal out;
  out.sample_rate = fs;
  out.cp_len = sig.cp_len;
  out.samples = VecXc::Zero(total);
  if (paths.empty()) return out;

  for (const auto& p : paths) {
    if (p.delay_s < 0.0) throw std::invalid_argument("path delay must be non-negative");
    if (p.delay_s * fs > sig.cp_len + 1e-9)
      throw std::invalid_argument("path delay of " + std::to_string(p.delay_s * fs) +
                                  " samples exceeds the cyclic prefix (" + std::to_string(sig.cp_len) + ")");
  }

  const VecXc spectrum = detail::dft(VecXc(sig.body()), false);
  for (const auto& p : paths) {
    const double delay_taps = p.delay_s * fs;
    const VecXc ramp = detail::phasor_ramp(body_len, 0.0, -2.0 * kPi * delay_taps / double(body_len));
    const VecXc delayed = detail::dft(spectrum.cwiseProduct(ramp), true) / double(body_len);
    const VecXc doppler =
        detail::phasor_ramp(total, -2.0 * kPi * p.doppler_hz * p.delay_s, 2.0 * kPi * p.doppler_hz / fs);
    for (Eigen::Index t = 0; t < total; ++t) {
      Eigen::Index idx = (t - sig.cp_len) % body_len;
      if (idx < 0) idx += body_len;
      out.samples[t] += p.gain * delayed[idx] * doppler[t];
    }
  }
  return out;
}

TimeSignal add_awgn(const TimeSignal& sig, double noise_power, std::uint64_t seed) {
  if (noise_power < 0.0) throw std::invalid_argument("noise power must be non-negative");
  TimeSignal out = sig;
  if (noise_power == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));
  for (auto& s : out.samples) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    s += Complex(re, im);
  }
  return out;
}

Complex dirichlet(double x, int L) {
  const Complex phase = std::polar(1.0, kPi * x * (L - 1) / L);
  const double den = std::sin(kPi * x / L);
  if (std::abs(den) < 1e-12) return phase * (L * std::cos(kPi * x) / std::cos(kPi * x / L));
  return phase * (std::sin(kPi * x) / den);
}

MatXc dd_response_model(const ChannelPath& path, const FrameConfig& cfg, const PilotConfig& pc) {
  const GridTaps taps = taps_from_physical(path.delay_s, path.doppler_hz, cfg);
  const double mn = double(cfg.M) * cfg.N;
  const Complex twist = std::polar(1.0, -2.0 * kPi * taps.doppler * taps.delay / mn);
  MatXc patch(pc.l_max + 1, 2 * pc.k_max + 1);
  for (int l = 0; l <= pc.l_max; ++l) {
    const Complex delay_kernel = dirichlet(l - taps.delay, cfg.M);
    for (int k = -pc.k_max; k <= pc.k_max; ++k) {
      patch(l, k + pc.k_max) = path.gain / mn * dirichlet(taps.doppler - k, cfg.N) * delay_kernel * twist;
    }
  }
  return patch;
}

MatXc frame_referenced_response(const ChannelPath& path, const FrameConfig& cfg, const PilotConfig& pc) {
  MatXc patch = dd_response_model(path, cfg, pc);
  const GridTaps taps = taps_from_physical(path.delay_s, path.doppler_hz, cfg);
  const double mn = double(cfg.M) * cfg.N;
  for (int l = 0; l <= pc.l_max; ++l) {
    const double cycles = (pc.k_p * (l - taps.delay) + taps.doppler * (pc.l_p + l + cfg.cp_len)) / mn;
    patch.row(l) *= std::polar(1.0, 2.0 * kPi * cycles);
  }
  return patch;
}

}  // namespace ddsense
