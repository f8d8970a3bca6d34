#include <doctest.h>

#include <cmath>

#include "ddsense/modem.hpp"
#include "support.hpp"

using namespace ddsense;
using ddsense::test::random_grid;
using ddsense::test::rel_err;

namespace {

FrameConfig frame(int M, int N, int cp = 0) {
  FrameConfig f;
  f.M = M;
  f.N = N;
  f.cp_len = cp;
  return f;
}

// Direct double sum, no FFT: X_tf[n, m] = sum_{k,l} X[l, k] e^{j2pi(nk/N - ml/M)} / sqrt(MN).
TfGrid isfft_direct(const DdGrid& dd) {
  const int M = int(dd.rows()), N = int(dd.cols());
  TfGrid tf = TfGrid::Zero(N, M);
  for (int n = 0; n < N; ++n)
    for (int m = 0; m < M; ++m) {
      Complex acc = 0.0;
      for (int k = 0; k < N; ++k)
        for (int l = 0; l < M; ++l)
          acc += dd(l, k) * std::polar(1.0, 2.0 * kPi * (double(n) * k / N - double(m) * l / M));
      tf(n, m) = acc / std::sqrt(double(M) * N);
    }
  return tf;
}

}  // namespace

TEST_SUITE("modem") {
  TEST_CASE("isfft of zeros and of a unit impulse") {
    const FrameConfig f = frame(8, 6);
    CHECK(isfft(DdGrid::Zero(8, 6), f).norm() == 0.0);
    DdGrid impulse = DdGrid::Zero(8, 6);
    impulse(0, 0) = 1.0;
    const TfGrid tf = isfft(impulse, f);
    const double expect = 1.0 / std::sqrt(48.0);
    for (Eigen::Index i = 0; i < tf.size(); ++i) CHECK(std::abs(tf.data()[i] - Complex(expect, 0)) < 1e-15);
  }

  TEST_CASE("isfft matches the direct double sum on a non-square grid") {
    const FrameConfig f = frame(8, 4);
    const DdGrid x = random_grid(8, 4, 3);
    CHECK(rel_err(isfft(x, f), isfft_direct(x)) < 1e-12);
  }

  TEST_CASE("sfft inverts isfft") {
    const FrameConfig f = frame(8, 8);
    const DdGrid x = random_grid(8, 8, 11);
    CHECK(rel_err(sfft(isfft(x, f), f), x) < 1e-12);
    TfGrid flat = TfGrid::Constant(8, 8, Complex(1.0 / 8.0, 0.0));
    DdGrid back = sfft(flat, f);
    CHECK(std::abs(back(0, 0) - 1.0) < 1e-14);
    back(0, 0) = 0.0;
    CHECK(back.norm() < 1e-14);
    CHECK(sfft(TfGrid::Zero(8, 8), f).norm() == 0.0);
  }

  TEST_CASE("heisenberg of a single tone is a pure exponential in the first block") {
    const FrameConfig f = frame(16, 4, 3);
    TfGrid tf = TfGrid::Zero(4, 16);
    const int m0 = 5;
    tf(0, m0) = 1.0;
    const TimeSignal sig = heisenberg(tf, f);
    REQUIRE(sig.samples.size() == 16 * 4 + 3);
    for (int t = 0; t < 16; ++t) {
      const Complex expect = std::polar(1.0 / 4.0, 2.0 * kPi * m0 * t / 16.0);
      CHECK(std::abs(sig.samples[3 + t] - expect) < 1e-14);
    }
    CHECK(sig.samples.tail(48).norm() < 1e-14);
    CHECK(heisenberg(TfGrid::Zero(4, 16), f).samples.norm() == 0.0);
  }

  TEST_CASE("frame prefix copies the body tail") {
    const FrameConfig f = frame(8, 8, 5);
    const TimeSignal sig = modulate(random_grid(8, 8, 2), f);
    CHECK((sig.samples.head(5) - sig.samples.tail(5)).norm() == 0.0);
  }

  TEST_CASE("wigner inverts heisenberg") {
    const FrameConfig f = frame(16, 8, 4);
    const TfGrid tf = random_grid(8, 16, 5);
    CHECK(rel_err(wigner(heisenberg(tf, f), f), tf) < 1e-12);
    CHECK(wigner(heisenberg(TfGrid::Zero(8, 16), f), f).norm() == 0.0);
  }

  TEST_CASE("modulation is unitary and linear") {
    const FrameConfig f = frame(32, 16, 8);
    const DdGrid a = random_grid(32, 16, 7), b = random_grid(32, 16, 8);
    const TimeSignal sa = modulate(a, f);
    CHECK(std::abs(sa.body().squaredNorm() - a.squaredNorm()) / a.squaredNorm() < 1e-10);
    const Complex alpha(0.3, -1.2);
    const TimeSignal mixed = modulate(alpha * a + b, f);
    CHECK((mixed.samples - (alpha * sa.samples + modulate(b, f).samples)).norm() / mixed.samples.norm() < 1e-12);
    CHECK(modulate(DdGrid::Zero(32, 16), f).samples.norm() == 0.0);
  }

  TEST_CASE("round trip through an identity channel") {
    for (int size : {8, 64}) {
      const FrameConfig f = frame(size, size, 4);
      const DdGrid x = random_grid(size, size, 100 + size);
      CHECK(rel_err(demodulate(modulate(x, f), f), x) < 1e-10);
    }
  }

  TEST_CASE("pilot guard of a 64x64 frame with a 32x32 guard holds only the pilot") {
    const FrameConfig f = frame(64, 64);
    PilotConfig pc;
    pc.k_p = pc.l_p = 32;
    pc.k_max = pc.l_max = 16;
    pc.lead_guard = 16;
    const DdGrid x = place_pilot(f, pc, 1);
    int nonzero = 0;
    for (int k = 0; k < 64; ++k)
      for (int l = 0; l < 64; ++l)
        if (pc.in_guard(l, k) && std::abs(x(l, k)) > 0) ++nonzero;
    CHECK(nonzero == 1);
    CHECK(x(32, 32) == Complex(pc.pilot_amplitude, 0.0));
  }

  TEST_CASE("degenerate guard reserves only the pilot cell") {
    const FrameConfig f = frame(16, 16);
    PilotConfig pc;
    pc.k_p = pc.l_p = 8;
    pc.k_max = pc.l_max = 0;
    const DdGrid x = place_pilot(f, pc, 9);
    int zero = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x.data()[i] == Complex(0, 0)) ++zero;
    CHECK(zero == 0);
    for (int k = 0; k < 16; ++k)
      for (int l = 0; l < 16; ++l)
        if (k != 8 || l != 8) CHECK(std::abs(std::norm(x(l, k)) - 1.0) < 1e-12);
  }

  TEST_CASE("payload is deterministic under the seed") {
    const FrameConfig f = frame(32, 32);
    PilotConfig pc;
    pc.k_p = pc.l_p = 16;
    pc.k_max = pc.l_max = 4;
    CHECK(place_pilot(f, pc, 4) == place_pilot(f, pc, 4));
    CHECK(place_pilot(f, pc, 4) != place_pilot(f, pc, 5));
  }

  TEST_CASE("frame mean power counts pilot and data cells") {
    const FrameConfig f = frame(32, 32);
    PilotConfig pc;
    pc.k_p = pc.l_p = 16;
    pc.k_max = pc.l_max = 4;
    pc.lead_guard = 2;
    pc.doppler_margin = 1;
    const DdGrid x = place_pilot(f, pc, 6);
    CHECK(std::abs(frame_mean_power(f, pc) - x.squaredNorm() / (32.0 * 32.0)) < 1e-12);
  }

  TEST_CASE("shape and parameter errors") {
    const FrameConfig f = frame(8, 8);
    CHECK_THROWS_AS(isfft(DdGrid::Zero(8, 4), f), std::invalid_argument);
    CHECK_THROWS_AS(sfft(TfGrid::Zero(4, 8), f), std::invalid_argument);
    TimeSignal short_sig;
    short_sig.samples = VecXc::Zero(10);
    CHECK_THROWS_AS(wigner(short_sig, f), std::invalid_argument);
    CHECK_THROWS_AS(frame(1, 8).validate(), std::invalid_argument);
    PilotConfig pc;
    pc.k_p = pc.l_p = 2;
    pc.k_max = 4;
    CHECK_THROWS_AS(pc.validate(f), std::invalid_argument);
  }
}
