#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddsense/channel.hpp"
#include "ddsense/estimator.hpp"
#include "ddsense/locator.hpp"
#include "ddsense/scene.hpp"

namespace ddsense {

/// Simulated environment for the Monte Carlo chain, receiver at the origin.
/// The Tx moves on a straight line, except in a cos(theta) sweep where it
/// runs at the same speed along the constant-angle arc through the target.
struct SceneConfig {
  Vec2 target{25.0, -35.0};
  Vec2 track_start{-70.0, 55.0};
  Vec2 track_velocity{72.0, 0.0};  // 260 km/h
  int instants = 5;
  double interval_s = 0.4;
  // Each trial shifts the whole track by a uniform offset in [-j, j]^2.
  double track_jitter_m = 2.0;
  // Radar cross-section of the reflector; sets the NLoS path gain.
  double rcs_m2 = 4000.0;
  double noise_floor_dbm = -90.0;
  // Transmit power held fixed while cos(theta) is swept.
  double tx_power_dbm = 17.0;
  // Error model for measurement-level simulation (simulate subcommand).
  MeasurementSigmas<double> sigmas{0.1, 0.05, 0.05};

  Scene<double> scene(const FrameConfig& frame) const;
  void validate() const;
};

struct LocatorSettings {
  LocateOptions<double> wls;
  LmOptions<double> lm;
  DfpOptions<double> dfp;
  // Power-independent part of the per-instant tap spread, added in
  // quadrature to the noise term when weighting ranges.
  double sigma_floor_taps = 0.02;
};

enum class SweepVariable { TxPowerDbm, CosTheta };

struct ExperimentConfig {
  FrameConfig frame;
  PilotConfig pilot;
  std::vector<ChannelPath> channel;  // explicit channel for simulate/estimate
  SceneConfig scene;
  EstimatorOptions estimator;
  LocatorSettings locator;
  SweepVariable sweep = SweepVariable::TxPowerDbm;
  std::vector<double> grid{3, 5, 7, 9, 11, 13, 15, 17};
  int trials = 100;
  std::uint64_t master_seed = 1;
  std::string output_dir;  // empty: DDSENSE_OUT_DIR, then "out"

  void validate() const;
};

std::string sweep_variable_name(SweepVariable v);
SweepVariable parse_sweep_variable(const std::string& name);

/// Deterministic 64-bit seed mixing (SplitMix64 finaliser over the inputs).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

/// LoS and NLoS paths of instant i: delays and Dopplers from the geometry,
/// free-space LoS gain, bistatic radar-equation NLoS gain, carrier phase.
std::array<ChannelPath, 2> geometric_channel(const Scene<double>& scene, std::size_t i, double rcs_m2);

struct FrameRun {
  PathEstimates estimates;
  double noise_power = 0.0;
};

/// One pilot frame through the channel at the given transmit power.
/// Frame power is normalised to one; the gains are absolute amplitudes and
/// the noise power is noise_floor / tx_power.
FrameRun simulate_frame(const ExperimentConfig& cfg, std::span<const ChannelPath> paths, double tx_power_dbm,
                        std::uint64_t seed);

struct TrialOutcome {
  bool failed = false;
  std::string reason;
  // squared tap errors summed over the instants
  double se_los_delay = 0, se_los_doppler = 0, se_nlos_delay = 0, se_nlos_doppler = 0;
  int instants = 0;
  std::array<double, 3> position_se{};  // double WLS, LM, DFP
  std::array<double, 3> velocity_se{};  // mean over instants of |v_hat - v|^2
  std::vector<SensingMeasurement<double>> measurements;
  Vec2 truth = Vec2::Zero();
  std::array<Vec2, 3> positions{};
};

/// Full chain for one trial at one sweep value.
TrialOutcome run_trial(const ExperimentConfig& cfg, double sweep_value, std::uint64_t seed);

struct SweepPoint {
  double value = 0.0;
  double snr_db = 0.0;
  bool skipped = false;
  std::string note;
  int trials = 0;
  int failures = 0;
  double mse_los_delay = 0, mse_los_doppler = 0, mse_nlos_delay = 0, mse_nlos_doppler = 0;
  std::array<double, 3> rmse_position{};
  std::array<double, 3> rmse_velocity{};
};

struct SweepResult {
  SweepVariable variable = SweepVariable::TxPowerDbm;
  std::vector<SweepPoint> points;
};

inline constexpr std::array<const char*, 3> kMethodNames{"wls", "lm", "dfp"};

SweepResult run_sweep(const ExperimentConfig& cfg);

std::string sweep_csv(const SweepResult& result);
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);
SweepResult read_sweep_csv(const std::filesystem::path& path);

/// Configured output directory, else $DDSENSE_OUT_DIR, else "out".
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

}  // namespace ddsense
