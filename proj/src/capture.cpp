#include "ddsense/capture.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "fft_util.hpp"

namespace ddsense {

namespace {

static_assert(sizeof(float) == 4, "f32iq needs 32-bit floats");

float load_le_float(const unsigned char* b) {
  std::uint32_t u = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
                    (std::uint32_t(b[3]) << 24);
  return std::bit_cast<float>(u);
}

void store_le_float(float f, unsigned char* b) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  b[0] = static_cast<unsigned char>(u & 0xff);
  b[1] = static_cast<unsigned char>((u >> 8) & 0xff);
  b[2] = static_cast<unsigned char>((u >> 16) & 0xff);
  b[3] = static_cast<unsigned char>((u >> 24) & 0xff);
}

void check_format(std::string_view format) {
  if (format != "f32iq" && format != "csv") throw std::invalid_argument("unknown capture format '" + std::string(format) + "'");
}

VecXc read_f32iq(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open capture " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) throw std::runtime_error("capture size is not a whole number of float32 values");
  const std::size_t floats = bytes.size() / 4;
  if (floats % 2 != 0) throw std::runtime_error("truncated capture: odd number of float32 values");
  VecXc out(Eigen::Index(floats / 2));
  for (std::size_t i = 0; i < floats / 2; ++i) {
    out[Eigen::Index(i)] = Complex(load_le_float(&bytes[8 * i]), load_le_float(&bytes[8 * i + 4]));
  }
  return out;
}

VecXc read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open capture " + path.string());
  std::vector<Complex> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("capture line " + std::to_string(line_no) + " has no comma");
    try {
      std::size_t used_re = 0, used_im = 0;
      const std::string re_s = line.substr(0, comma), im_s = line.substr(comma + 1);
      const double re = std::stod(re_s, &used_re);
      const double im = std::stod(im_s, &used_im);
      values.emplace_back(re, im);
    } catch (const std::invalid_argument&) {
      if (values.empty() && line_no == 1) continue;  // header row
      throw std::runtime_error("capture line " + std::to_string(line_no) + " is not numeric");
    }
  }
  VecXc out(Eigen::Index(values.size()));
  std::copy(values.begin(), values.end(), out.begin());
  return out;
}

}  // namespace

void Capture::validate() const {
  if (!(sample_rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (!samples.allFinite()) throw std::invalid_argument("capture contains non-finite samples");
}

Capture read_capture(const std::filesystem::path& path, std::string_view format, double sample_rate) {
  check_format(format);
  Capture cap;
  cap.format = std::string(format);
  cap.sample_rate = sample_rate;
  cap.samples = format == "f32iq" ? read_f32iq(path) : read_csv(path);
  cap.validate();
  return cap;
}

void write_capture(const std::filesystem::path& path, const VecXc& samples, std::string_view format) {
  check_format(format);
  if (format == "f32iq") {
    std::vector<unsigned char> bytes(std::size_t(samples.size()) * 8);
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
      store_le_float(float(samples[i].real()), &bytes[std::size_t(8 * i)]);
      store_le_float(float(samples[i].imag()), &bytes[std::size_t(8 * i + 4)]);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "re,im\n";
  char buf[96];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", s.real(), s.imag());
    out << buf;
  }
}

VecXc generate_preamble(int length, std::uint64_t seed) {
  if (length < 1) throw std::invalid_argument("preamble length must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  VecXc out(length);
  for (auto& s : out) s = std::polar(1.0, phase(rng));
  return out;
}

VecXd preamble_correlation(const VecXc& x, const VecXc& preamble) {
  const Eigen::Index P = preamble.size();
  if (P == 0) throw std::invalid_argument("empty preamble");
  if (x.size() == 0) return VecXd();
  if (P > x.size()) throw std::invalid_argument("preamble longer than capture");
  const Eigen::Index lags = x.size() - P + 1;

  Eigen::Index F = 4096;
  while (F < 2 * P) F *= 2;
  const Eigen::Index step = F - P + 1;
  const double norm = preamble.norm();

  VecXc padded = VecXc::Zero(F);
  padded.head(P) = preamble;
  const VecXc pref = detail::dft(padded, false).conjugate();

  // running window energy
  std::vector<double> energy(std::size_t(x.size()) + 1, 0.0);
  for (Eigen::Index n = 0; n < x.size(); ++n) energy[std::size_t(n) + 1] = energy[std::size_t(n)] + std::norm(x[n]);

  VecXd out(lags);
  VecXc block(F);
  for (Eigen::Index start = 0; start < lags; start += step) {
    const Eigen::Index avail = std::min(F, x.size() - start);
    block.setZero();
    block.head(avail) = x.segment(start, avail);
    const VecXc spec = detail::dft(block, false).cwiseProduct(pref);
    const VecXc corr = detail::dft(spec, true);
    const Eigen::Index count = std::min(step, lags - start);
    for (Eigen::Index j = 0; j < count; ++j) {
      const std::size_t n = std::size_t(start + j);
      const double window = std::max(energy[n + std::size_t(P)] - energy[n], 0.0);
      out[start + j] = window > 0.0 ? std::min(std::abs(corr[j]) / double(F) / norm / std::sqrt(window), 1.0) : 0.0;
    }
  }
  return out;
}

FrameIndex detect_frames(const Capture& cap, const VecXc& preamble, double p_fa, long min_separation) {
  if (!(p_fa > 0.0 && p_fa < 1.0)) throw std::invalid_argument("p_fa must lie in (0, 1)");
  if (preamble.size() == 0) throw std::invalid_argument("empty preamble");
  FrameIndex idx;
  idx.preamble_length = int(preamble.size());
  if (cap.samples.size() == 0) return idx;
  if (preamble.size() > cap.samples.size()) throw std::invalid_argument("preamble longer than capture");
  if (min_separation <= 0) min_separation = long(preamble.size());

  const VecXd corr = preamble_correlation(cap.samples, preamble);
  idx.lags = long(corr.size());

  std::vector<double> sorted(corr.data(), corr.data() + corr.size());
  const auto mid = sorted.begin() + std::ptrdiff_t(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  idx.noise_scale = *mid / std::sqrt(2.0 * std::log(2.0));
  idx.threshold = idx.noise_scale * std::sqrt(-2.0 * std::log(p_fa));

  std::vector<long> hits;
  for (Eigen::Index n = 0; n < corr.size(); ++n) {
    if (corr[n] > idx.threshold) hits.push_back(long(n));
  }
  idx.exceedances = long(hits.size());

  // strongest first; ties keep the earlier lag
  std::stable_sort(hits.begin(), hits.end(), [&](long a, long b) { return corr[a] > corr[b]; });
  std::vector<long> kept;
  for (long h : hits) {
    const bool close = std::any_of(kept.begin(), kept.end(), [&](long k) { return std::labs(k - h) < min_separation; });
    if (!close) kept.push_back(h);
  }
  std::sort(kept.begin(), kept.end());
  for (long k : kept) {
    idx.start_indices.push_back(k);
    idx.correlation_peaks.push_back(corr[k]);
  }
  return idx;
}

Segmentation segment_frames(const Capture& cap, const FrameIndex& idx, long frame_len, int cp_len) {
  if (frame_len <= 0) throw std::invalid_argument("frame length must be positive");
  if (cp_len < 0 || cp_len >= frame_len) throw std::invalid_argument("cyclic prefix must be shorter than the frame");
  Segmentation out;
  for (long start : idx.start_indices) {
    const long first = start + idx.preamble_length;
    if (first + frame_len > long(cap.samples.size())) {
      out.warnings.push_back("frame at sample " + std::to_string(start) + " is truncated; dropped");
      continue;
    }
    TimeSignal sig;
    sig.samples = cap.samples.segment(first, frame_len);
    sig.sample_rate = cap.sample_rate;
    sig.cp_len = cp_len;
    out.frames.push_back(std::move(sig));
  }
  return out;
}

}  // namespace ddsense
