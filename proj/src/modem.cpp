#include "ddsense/modem.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "fft_util.hpp"

namespace ddsense {

void FrameConfig::validate() const {
  if (M < 2 || N < 2) throw std::invalid_argument("frame needs M >= 2 and N >= 2");
  if (!(delta_f > 0.0)) throw std::invalid_argument("subcarrier spacing must be positive");
  if (!(carrier_hz > 0.0)) throw std::invalid_argument("carrier frequency must be positive");
  if (cp_len < 0 || cp_len > M * N) throw std::invalid_argument("cyclic prefix length out of range");
}

void PilotConfig::validate(const FrameConfig& cfg) const {
  if (k_max < 0 || l_max < 0 || lead_guard < 0 || doppler_margin < 0)
    throw std::invalid_argument("guard extents must be non-negative");
  if (k_p - k_max - doppler_margin < 0 || k_p + k_max + doppler_margin > cfg.N - 1)
    throw std::invalid_argument("pilot guard leaves the grid along Doppler");
  if (l_p - lead_guard < 0 || l_p + l_max > cfg.M - 1)
    throw std::invalid_argument("pilot guard leaves the grid along delay");
  if (pilot_amplitude < 0.0 || data_power < 0.0) throw std::invalid_argument("pilot amplitude and data power must be >= 0");
  if (pilot_amplitude * pilot_amplitude < data_power)
    throw std::invalid_argument("pilot power must not fall below the data power");
}

namespace {

void check_dd(const DdGrid& dd, const FrameConfig& cfg) {
  if (dd.rows() != cfg.M || dd.cols() != cfg.N)
    throw std::invalid_argument("DD grid is " + std::to_string(dd.rows()) + "x" + std::to_string(dd.cols()) +
                                ", frame expects " + std::to_string(cfg.M) + "x" + std::to_string(cfg.N));
}

void check_tf(const TfGrid& tf, const FrameConfig& cfg) {
  if (tf.rows() != cfg.N || tf.cols() != cfg.M)
    throw std::invalid_argument("TF grid is " + std::to_string(tf.rows()) + "x" + std::to_string(tf.cols()) +
                                ", frame expects " + std::to_string(cfg.N) + "x" + std::to_string(cfg.M));
}

}  // namespace

TfGrid isfft(const DdGrid& dd, const FrameConfig& cfg) {
  cfg.validate();
  check_dd(dd, cfg);
  // delay l -> subcarrier m (forward), then Doppler k -> symbol n (inverse)
  MatXc work = dd;
  detail::dft_columns(work, false);
  MatXc by_symbol = work.transpose();
  detail::dft_columns(by_symbol, true);
  return by_symbol / std::sqrt(double(cfg.M) * cfg.N);
}

DdGrid sfft(const TfGrid& tf, const FrameConfig& cfg) {
  cfg.validate();
  check_tf(tf, cfg);
  MatXc work = tf;
  detail::dft_columns(work, false);
  MatXc by_delay = work.transpose();
  detail::dft_columns(by_delay, true);
  return by_delay / std::sqrt(double(cfg.M) * cfg.N);
}

TimeSignal heisenberg(const TfGrid& tf, const FrameConfig& cfg) {
  cfg.validate();
  check_tf(tf, cfg);
  MatXc blocks = tf.transpose();  // column n = subcarriers of symbol n
  detail::dft_columns(blocks, true);
  blocks /= std::sqrt(double(cfg.M));

  const Eigen::Index body = Eigen::Index(cfg.M) * cfg.N;
  TimeSignal sig;
  sig.sample_rate = cfg.sample_rate();
  sig.cp_len = cfg.cp_len;
  sig.samples.resize(body + cfg.cp_len);
  sig.samples.tail(body) = Eigen::Map<const VecXc>(blocks.data(), body);
  sig.samples.head(cfg.cp_len) = sig.samples.tail(cfg.cp_len);
  return sig;
}

TfGrid wigner(const TimeSignal& sig, const FrameConfig& cfg) {
  cfg.validate();
  const Eigen::Index body = Eigen::Index(cfg.M) * cfg.N;
  if (sig.samples.size() != body + cfg.cp_len)
    throw std::invalid_argument("time signal holds " + std::to_string(sig.samples.size()) + " samples, frame expects " +
                                std::to_string(body + cfg.cp_len));
  MatXc blocks = Eigen::Map<const MatXc>(sig.samples.data() + cfg.cp_len, cfg.M, cfg.N);
  detail::dft_columns(blocks, false);
  blocks /= std::sqrt(double(cfg.M));
  return blocks.transpose();
}

DdGrid place_pilot(const FrameConfig& cfg, const PilotConfig& pc, std::uint64_t payload_seed) {
  cfg.validate();
  pc.validate(cfg);
  std::mt19937_64 rng(payload_seed);
  const double a = std::sqrt(pc.data_power / 2.0);
  DdGrid dd(cfg.M, cfg.N);
  // column-major walk keeps the payload sequence independent of the pilot layout's shape
  for (int k = 0; k < cfg.N; ++k) {
    for (int l = 0; l < cfg.M; ++l) {
      const auto bits = rng();
      if (pc.in_guard(l, k)) {
        dd(l, k) = Complex(0.0, 0.0);
      } else {
        dd(l, k) = Complex((bits & 1) ? a : -a, (bits & 2) ? a : -a);
      }
    }
  }
  dd(pc.l_p, pc.k_p) = Complex(pc.pilot_amplitude, 0.0);
  return dd;
}

TimeSignal modulate(const DdGrid& dd, const FrameConfig& cfg) { return heisenberg(isfft(dd, cfg), cfg); }

DdGrid demodulate(const TimeSignal& sig, const FrameConfig& cfg) { return sfft(wigner(sig, cfg), cfg); }

double frame_mean_power(const FrameConfig& cfg, const PilotConfig& pc) {
  const double guard_cells = double(2 * (pc.k_max + pc.doppler_margin) + 1) * (pc.l_max + pc.lead_guard + 1);
  const double data_cells = double(cfg.M) * cfg.N - guard_cells;
  return (pc.pilot_amplitude * pc.pilot_amplitude + data_cells * pc.data_power) / (double(cfg.M) * cfg.N);
}

}  // namespace ddsense
