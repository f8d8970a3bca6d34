#include "ddsense/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ddsense {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

void check_taps(const ChannelPath& p, const ExperimentConfig& cfg, const char* which) {
  const GridTaps taps = taps_from_physical(p.delay_s, p.doppler_hz, cfg.frame);
  const double delay_limit = std::min<double>(cfg.frame.cp_len, cfg.pilot.l_max - 1);
  if (taps.delay > delay_limit + 0.5 || std::abs(taps.doppler) > cfg.pilot.k_max - 1 + 0.5)
    throw std::domain_error(std::string(which) + " path at delay tap " + std::to_string(taps.delay) +
                            ", Doppler tap " + std::to_string(taps.doppler) + " falls outside the guard region");
  if (p.delay_s * cfg.frame.sample_rate() > cfg.frame.cp_len)
    throw std::domain_error(std::string(which) + " path delay exceeds the cyclic prefix");
}

Scene<double> trial_scene(const ExperimentConfig& cfg, double sweep_value, const Vec2& jitter) {
  Scene<double> scene = cfg.scene.scene(cfg.frame);
  if (cfg.sweep == SweepVariable::CosTheta) {
    constant_angle_track(scene, sweep_value, cfg.scene.track_velocity.norm(), std::size_t(cfg.scene.instants),
                         cfg.scene.interval_s);
  }
  for (auto& s : scene.tx_positions) s += jitter;
  return scene;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Scene<double> SceneConfig::scene(const FrameConfig& frame) const {
  Scene<double> s;
  s.carrier_hz = frame.carrier_hz;
  s.target = target;
  straight_line_track(s, track_start, track_velocity, std::size_t(std::max(instants, 0)), interval_s);
  return s;
}

void SceneConfig::validate() const {
  if (instants < 3) throw std::invalid_argument("scene needs at least three instants");
  if (!(interval_s > 0)) throw std::invalid_argument("instant interval must be positive");
  if (track_jitter_m < 0) throw std::invalid_argument("track jitter must be non-negative");
  if (!(rcs_m2 > 0)) throw std::invalid_argument("radar cross-section must be positive");
  if (sigmas.range < 0 || sigmas.range_rate < 0 || sigmas.los_rate < 0)
    throw std::invalid_argument("standard deviations must be non-negative");
}

void ExperimentConfig::validate() const {
  frame.validate();
  pilot.validate(frame);
  scene.validate();
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("sweep grid must be strictly increasing");
  if (sweep == SweepVariable::CosTheta)
    for (double c : grid)
      if (!(c >= 0.0 && c < 1.0)) throw std::invalid_argument("cos(theta) grid values must lie in [0, 1)");
  if (estimator.paths < 2) throw std::invalid_argument("the sensing chain needs two paths per frame");
}

std::string sweep_variable_name(SweepVariable v) {
  return v == SweepVariable::TxPowerDbm ? "tx_power_dbm" : "cos_theta";
}

SweepVariable parse_sweep_variable(const std::string& name) {
  if (name == "tx_power_dbm") return SweepVariable::TxPowerDbm;
  if (name == "cos_theta") return SweepVariable::CosTheta;
  throw std::invalid_argument("unknown sweep variable '" + name + "'");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

std::array<ChannelPath, 2> geometric_channel(const Scene<double>& scene, std::size_t i, double rcs_m2) {
  const Vec2& s = scene.tx_positions.at(i);
  const Vec2& v = scene.tx_velocities.at(i);
  const double lambda = scene.c / scene.carrier_hz;
  const double d = s.norm();
  const double r1 = (scene.target - s).norm();
  const double r2 = scene.target.norm();
  if (!(d > 0 && r1 > 0 && r2 > 0)) throw std::domain_error("degenerate geometry at instant " + std::to_string(i));

  std::array<ChannelPath, 2> out;
  ChannelPath& los = out[0];
  los.delay_s = d / scene.c;
  los.doppler_hz = -los_range_rate(s, v) * scene.carrier_hz / scene.c;
  los.gain = std::polar(lambda / (4 * kPi * d), -2 * kPi * scene.carrier_hz * los.delay_s);

  ChannelPath& nlos = out[1];
  nlos.delay_s = (r1 + r2) / scene.c;
  nlos.doppler_hz = -nlos_range_rate(scene.target, s, v) * scene.carrier_hz / scene.c;
  const double amp = std::sqrt(lambda * lambda * rcs_m2 / (std::pow(4 * kPi, 3) * r1 * r1 * r2 * r2));
  nlos.gain = std::polar(amp, -2 * kPi * scene.carrier_hz * nlos.delay_s);
  return out;
}

FrameRun simulate_frame(const ExperimentConfig& cfg, std::span<const ChannelPath> paths, double tx_power_dbm,
                        std::uint64_t seed) {
  const DdGrid x = place_pilot(cfg.frame, cfg.pilot, mix_seed(seed, 1));
  const TimeSignal tx = modulate(x, cfg.frame);
  FrameRun run;
  // Unit-power frame at tx_power, noise at the floor: scale the noise
  // instead of the frame so the pilot amplitude stays as configured.
  run.noise_power = frame_mean_power(cfg.frame, cfg.pilot) * dbm_to_mw(cfg.scene.noise_floor_dbm - tx_power_dbm);
  const TimeSignal rx = add_awgn(apply_channel(tx, paths), run.noise_power, mix_seed(seed, 2));
  run.estimates = estimate_paths(demodulate(rx, cfg.frame), cfg.pilot, cfg.frame, cfg.estimator);
  return run;
}

TrialOutcome run_trial(const ExperimentConfig& cfg, double sweep_value, std::uint64_t seed) {
  TrialOutcome out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter_dist(-cfg.scene.track_jitter_m, cfg.scene.track_jitter_m);
  const double jx = jitter_dist(rng);
  const double jy = jitter_dist(rng);
  const Scene<double> scene = trial_scene(cfg, sweep_value, Vec2(jx, jy));
  const double power = cfg.sweep == SweepVariable::TxPowerDbm ? sweep_value : cfg.scene.tx_power_dbm;
  out.truth = scene.target;

  const double tap_m = scene.c / cfg.frame.bandwidth();
  const double rate_per_tap = scene.c * cfg.frame.doppler_resolution() / cfg.frame.carrier_hz;

  try {
    scene.validate();
    for (std::size_t i = 0; i < scene.instants(); ++i) {
      const auto paths = geometric_channel(scene, i, cfg.scene.rcs_m2);
      check_taps(paths[0], cfg, "LoS");
      check_taps(paths[1], cfg, "NLoS");
      const FrameRun run = simulate_frame(cfg, paths, power, mix_seed(seed, 100 + i));
      const auto& est = run.estimates.paths;
      if (est.size() < 2) {
        out.failed = true;
        out.reason = "fewer than two paths detected at instant " + std::to_string(i);
        return out;
      }
      const GridTaps los = taps_from_physical(paths[0].delay_s, paths[0].doppler_hz, cfg.frame);
      const GridTaps nlos = taps_from_physical(paths[1].delay_s, paths[1].doppler_hz, cfg.frame);
      const PathEstimate& e_los = est.front();
      const PathEstimate& e_nlos = est.back();
      out.se_los_delay += std::pow(e_los.delay_tap() - los.delay, 2);
      out.se_los_doppler += std::pow(e_los.doppler_tap() - los.doppler, 2);
      out.se_nlos_delay += std::pow(e_nlos.delay_tap() - nlos.delay, 2);
      out.se_nlos_doppler += std::pow(e_nlos.doppler_tap() - nlos.doppler, 2);
      ++out.instants;

      SensingMeasurement<double> m = measurements_from_paths(est, scene.tx_positions[i], scene.carrier_hz, scene.c);
      // Fractional-tap spread: the noise term scales with the pilot-referenced
      // noise level over the peak height, the floor covers errors that do not
      // shrink with power (payload leakage, residual path coupling).
      const double noise_in_patch = std::sqrt(run.noise_power) / cfg.pilot.pilot_amplitude;
      const double floor = cfg.locator.sigma_floor_taps;
      const double sigma_nlos = std::hypot(noise_in_patch / e_nlos.peak_magnitude, floor);
      const double sigma_los = std::hypot(noise_in_patch / e_los.peak_magnitude, floor);
      m.sigma_r = tap_m * sigma_nlos;
      m.sigma_rdot = rate_per_tap * sigma_nlos;
      m.sigma_ddot = rate_per_tap * sigma_los;
      out.measurements.push_back(m);
    }

    const auto wls = locate(out.measurements, cfg.locator.wls);
    const Vec2 init = tx_centroid(out.measurements);
    const auto lm = locate_lm(out.measurements, init, cfg.locator.lm);
    const auto dfp = locate_dfp(out.measurements, init, cfg.locator.dfp);
    out.positions = {wls.p_hat, lm.p, dfp.p};
    for (int k = 0; k < 3; ++k) {
      out.position_se[k] = (out.positions[k] - scene.target).squaredNorm();
      double acc = 0.0;
      for (std::size_t i = 0; i < scene.instants(); ++i) {
        const Vec2 v = k == 0 ? wls.velocities[i].velocity
                              : estimate_velocity(out.positions[k], out.measurements[i]).velocity;
        acc += (v - scene.tx_velocities[i]).squaredNorm();
      }
      out.velocity_se[k] = acc / double(scene.instants());
    }
  } catch (const std::domain_error&) {
    throw;
  } catch (const std::exception& e) {
    out.failed = true;
    out.reason = e.what();
  }
  return out;
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  SweepResult result;
  result.variable = cfg.sweep;
  for (std::size_t pi = 0; pi < cfg.grid.size(); ++pi) {
    SweepPoint pt;
    pt.value = cfg.grid[pi];
    const double power = cfg.sweep == SweepVariable::TxPowerDbm ? pt.value : cfg.scene.tx_power_dbm;
    pt.snr_db = power - cfg.scene.noise_floor_dbm;

    double se_ld = 0, se_lk = 0, se_nd = 0, se_nk = 0;
    long tap_count = 0;
    std::array<double, 3> pos{}, vel{};
    int ok = 0;
    try {
      for (int t = 0; t < cfg.trials; ++t) {
        const TrialOutcome o = run_trial(cfg, pt.value, mix_seed(cfg.master_seed, pi, std::uint64_t(t)));
        ++pt.trials;
        se_ld += o.se_los_delay;
        se_lk += o.se_los_doppler;
        se_nd += o.se_nlos_delay;
        se_nk += o.se_nlos_doppler;
        tap_count += o.instants;
        if (o.failed) {
          ++pt.failures;
          continue;
        }
        ++ok;
        for (int k = 0; k < 3; ++k) {
          pos[k] += o.position_se[k];
          vel[k] += o.velocity_se[k];
        }
      }
    } catch (const std::domain_error& e) {
      pt.skipped = true;
      pt.note = e.what();
      std::fprintf(stderr, "sweep point %s = %g skipped: %s\n", sweep_variable_name(cfg.sweep).c_str(), pt.value,
                   e.what());
      result.points.push_back(pt);
      continue;
    }
    if (tap_count > 0) {
      pt.mse_los_delay = se_ld / double(tap_count);
      pt.mse_los_doppler = se_lk / double(tap_count);
      pt.mse_nlos_delay = se_nd / double(tap_count);
      pt.mse_nlos_doppler = se_nk / double(tap_count);
    }
    if (ok > 0) {
      for (int k = 0; k < 3; ++k) {
        pt.rmse_position[k] = std::sqrt(pos[k] / ok);
        pt.rmse_velocity[k] = std::sqrt(vel[k] / ok);
      }
    } else {
      pt.note = "every trial failed";
    }
    result.points.push_back(pt);
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "# ddsense sweep v1\n";
  out << "variable,value,snr_db,trials,failures,skipped,mse_los_delay,mse_los_doppler,mse_nlos_delay,"
         "mse_nlos_doppler,rmse_pos_wls,rmse_pos_lm,rmse_pos_dfp,rmse_vel_wls,rmse_vel_lm,rmse_vel_dfp\n";
  for (const auto& p : result.points) {
    out << sweep_variable_name(result.variable) << ',' << fmt(p.value) << ',' << fmt(p.snr_db) << ',' << p.trials
        << ',' << p.failures << ',' << (p.skipped ? 1 : 0) << ',' << fmt(p.mse_los_delay) << ','
        << fmt(p.mse_los_doppler) << ',' << fmt(p.mse_nlos_delay) << ',' << fmt(p.mse_nlos_doppler);
    for (double v : p.rmse_position) out << ',' << fmt(v);
    for (double v : p.rmse_velocity) out << ',' << fmt(v);
    out << '\n';
  }
  return out.str();
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << sweep_csv(result);
}

SweepResult read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  SweepResult result;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 16) throw std::runtime_error("sweep CSV row has " + std::to_string(cells.size()) + " columns");
    result.variable = parse_sweep_variable(cells[0]);
    SweepPoint p;
    p.value = std::stod(cells[1]);
    p.snr_db = std::stod(cells[2]);
    p.trials = std::stoi(cells[3]);
    p.failures = std::stoi(cells[4]);
    p.skipped = cells[5] == "1";
    p.mse_los_delay = std::stod(cells[6]);
    p.mse_los_doppler = std::stod(cells[7]);
    p.mse_nlos_delay = std::stod(cells[8]);
    p.mse_nlos_doppler = std::stod(cells[9]);
    for (int k = 0; k < 3; ++k) {
      p.rmse_position[k] = std::stod(cells[10 + k]);
      p.rmse_velocity[k] = std::stod(cells[13 + k]);
    }
    result.points.push_back(p);
  }
  return result;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("DDSENSE_OUT_DIR"); env && *env) return env;
  return "out";
}

}  // namespace ddsense
