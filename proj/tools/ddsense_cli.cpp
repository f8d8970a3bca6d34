#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddsense/bench.hpp"
#include "ddsense/capture.hpp"
#include "ddsense/config.hpp"
#include "ddsense/grid_io.hpp"
#include "ddsense/locator.hpp"
#include "ddsense/plots.hpp"

namespace fs = std::filesystem;
using namespace ddsense;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.master_seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

fs::path out_dir(const ExperimentConfig& cfg) {
  const fs::path dir = resolve_output_dir(cfg);
  fs::create_directories(dir);
  return dir;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "master seed (overrides the config)");
  sub->add_option("--out", c.out, "output directory");
}

void write_paths_csv(const fs::path& path, const PathEstimates& est) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "delay_tap,doppler_tap,delay_s,doppler_hz,peak_magnitude,flagged\n";
  char buf[200];
  for (const auto& p : est.paths) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g,%d\n", p.delay_tap(), p.doppler_tap(), p.delay_s,
                  p.doppler_hz, p.peak_magnitude, p.flagged ? 1 : 0);
    f << buf;
  }
}

nlohmann::json vec_json(const Vec2& v) { return nlohmann::json::array({v.x(), v.y()}); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay-Doppler sensing toolkit: OTFS modem, channel estimation, bistatic localisation"};
  app.require_subcommand(1);

  Common common;
  std::string input, format = "f32iq";

  auto* modulate_cmd = app.add_subcommand("modulate", "Build a pilot frame and write its time signal");
  add_common(modulate_cmd, common);
  modulate_cmd->add_option("--format", format, "capture format: f32iq or csv");

  auto* demodulate_cmd = app.add_subcommand("demodulate", "Demodulate a captured frame into a DD grid CSV");
  add_common(demodulate_cmd, common);
  demodulate_cmd->add_option("--input", input, "capture file holding one CP-extended frame")->required();
  demodulate_cmd->add_option("--format", format, "capture format: f32iq or csv");

  bool frame_only = false;
  auto* simulate_cmd = app.add_subcommand("simulate", "Pass a pilot frame through the configured channel and "
                                                      "synthesise scene measurements");
  add_common(simulate_cmd, common);
  simulate_cmd->add_option("--format", format, "capture format: f32iq or csv");
  simulate_cmd->add_flag("--frame-only", frame_only, "skip the measurement CSV");

  auto* estimate_cmd = app.add_subcommand("estimate", "Estimate path delays and Dopplers from a received frame");
  add_common(estimate_cmd, common);
  estimate_cmd->add_option("--input", input, "received capture (one frame) or DD grid CSV (*.csv with --grid)")
      ->required();
  estimate_cmd->add_option("--format", format, "capture format: f32iq or csv");
  bool input_is_grid = false;
  estimate_cmd->add_flag("--grid", input_is_grid, "input is a DD grid CSV");

  double p_fa = 1e-5;
  int preamble_length = 512;
  std::uint64_t preamble_seed = 7;
  long frame_len = 0;
  double sample_rate = 0.0;
  auto* frames_cmd = app.add_subcommand("frames", "Detect preamble-marked frames in a capture");
  add_common(frames_cmd, common);
  frames_cmd->add_option("--input", input, "capture file")->required();
  frames_cmd->add_option("--format", format, "capture format: f32iq or csv");
  frames_cmd->add_option("--pfa", p_fa, "false-alarm probability");
  frames_cmd->add_option("--preamble-length", preamble_length, "preamble length in samples");
  frames_cmd->add_option("--preamble-seed", preamble_seed, "preamble seed");
  frames_cmd->add_option("--frame-len", frame_len, "frame length after the preamble (default: configured frame)");
  frames_cmd->add_option("--sample-rate", sample_rate, "capture sample rate, Hz (default: configured bandwidth)");

  bool trace = false;
  auto* locate_cmd = app.add_subcommand("locate", "Localise the target from a measurement CSV");
  add_common(locate_cmd, common);
  locate_cmd->add_option("--input", input, "measurement CSV")->required();
  locate_cmd->add_flag("--trace", trace, "include LM and DFP baselines with their iterates");

  int trials_override = 0;
  bool no_plots = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a Monte Carlo sweep and write CSV plus charts");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--trials", trials_override, "trials per point (overrides the config)");
  sweep_cmd->add_flag("--no-plots", no_plots, "write the CSV only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ExperimentConfig cfg = load(common);

    if (*modulate_cmd) {
      cfg.frame.validate();
      cfg.pilot.validate(cfg.frame);
      const fs::path dir = out_dir(cfg);
      const DdGrid x = place_pilot(cfg.frame, cfg.pilot, cfg.master_seed);
      const TimeSignal sig = modulate(x, cfg.frame);
      write_dd_grid(dir / "tx_grid.csv", x);
      const fs::path cap = dir / (format == "csv" ? "frame.csv" : "frame.f32iq");
      write_capture(cap, sig.samples, format);
      std::cout << "wrote " << cap.string() << " (" << sig.samples.size() << " samples)\n";
    } else if (*demodulate_cmd) {
      cfg.frame.validate();
      const Capture cap = read_capture(input, format, cfg.frame.sample_rate());
      if (cap.samples.size() != cfg.frame.frame_samples())
        throw std::invalid_argument("capture holds " + std::to_string(cap.samples.size()) + " samples, frame needs " +
                                    std::to_string(cfg.frame.frame_samples()));
      TimeSignal sig{cap.samples, cap.sample_rate, cfg.frame.cp_len};
      const fs::path dir = out_dir(cfg);
      write_dd_grid(dir / "rx_grid.csv", demodulate(sig, cfg.frame));
      std::cout << "wrote " << (dir / "rx_grid.csv").string() << "\n";
    } else if (*simulate_cmd) {
      cfg.frame.validate();
      cfg.pilot.validate(cfg.frame);
      if (cfg.channel.empty()) throw std::invalid_argument("config has no channel paths to simulate");
      const fs::path dir = out_dir(cfg);
      const DdGrid x = place_pilot(cfg.frame, cfg.pilot, mix_seed(cfg.master_seed, 1));
      const double noise = frame_mean_power(cfg.frame, cfg.pilot) *
                           std::pow(10.0, (cfg.scene.noise_floor_dbm - cfg.scene.tx_power_dbm) / 10.0);
      const TimeSignal rx =
          add_awgn(apply_channel(modulate(x, cfg.frame), cfg.channel), noise, mix_seed(cfg.master_seed, 2));
      const fs::path cap = dir / (format == "csv" ? "rx.csv" : "rx.f32iq");
      write_capture(cap, rx.samples, format);
      std::cout << "wrote " << cap.string() << "\n";
      if (!frame_only) {
        Scene<double> scene = cfg.scene.scene(cfg.frame);
        scene.validate();
        const auto meas = synthesize_measurements(scene, cfg.scene.sigmas, mix_seed(cfg.master_seed, 3));
        write_measurements(dir / "measurements.csv", meas);
        std::cout << "wrote " << (dir / "measurements.csv").string() << "\n";
      }
    } else if (*estimate_cmd) {
      cfg.frame.validate();
      cfg.pilot.validate(cfg.frame);
      DdGrid rx;
      if (input_is_grid) {
        rx = read_dd_grid(input);
      } else {
        const Capture cap = read_capture(input, format, cfg.frame.sample_rate());
        if (cap.samples.size() != cfg.frame.frame_samples())
          throw std::invalid_argument("capture does not hold exactly one frame");
        rx = demodulate(TimeSignal{cap.samples, cap.sample_rate, cfg.frame.cp_len}, cfg.frame);
      }
      const PathEstimates est = estimate_paths(rx, cfg.pilot, cfg.frame, cfg.estimator);
      const fs::path dir = out_dir(cfg);
      write_paths_csv(dir / "paths.csv", est);
      std::cout << "wrote " << (dir / "paths.csv").string() << " (" << est.paths.size() << " paths"
                << (est.incomplete ? ", fewer than requested" : "") << ")\n";
    } else if (*frames_cmd) {
      const double fs_hz = sample_rate > 0 ? sample_rate : cfg.frame.sample_rate();
      const Capture cap = read_capture(input, format, fs_hz);
      const VecXc preamble = generate_preamble(preamble_length, preamble_seed);
      const long flen = frame_len > 0 ? frame_len : cfg.frame.frame_samples();
      const FrameIndex idx = detect_frames(cap, preamble, p_fa, flen);
      const fs::path dir = out_dir(cfg);
      std::ofstream f(dir / "frames.csv");
      if (!f) throw std::runtime_error("cannot write frames.csv");
      f << "start_index,correlation_peak\n";
      char buf[64];
      for (std::size_t i = 0; i < idx.start_indices.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%ld,%.10g\n", idx.start_indices[i], idx.correlation_peaks[i]);
        f << buf;
      }
      const Segmentation seg = segment_frames(cap, idx, flen, cfg.frame.cp_len);
      for (const auto& w : seg.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << idx.start_indices.size() << " frames detected (threshold " << idx.threshold << "), "
                << seg.frames.size() << " complete\n";
    } else if (*locate_cmd) {
      const auto meas = read_measurements(input);
      const LocalizationResult<double> res = locate(meas, cfg.locator.wls);
      nlohmann::json j;
      j["p_hat"] = vec_json(res.p_hat);
      j["upsilon_hat"] = vec_json(res.upsilon_hat);
      j["loss"] = res.loss_L;
      j["sign_choice"] = {res.sign_choice[0], res.sign_choice[1]};
      j["coarse"] = {{"z_hat", {res.coarse.z_hat(0), res.coarse.z_hat(1), res.coarse.z_hat(2)}},
                     {"iterations", res.coarse.iterations},
                     {"converged", res.coarse.converged}};
      j["clamped"] = res.clamped;
      j["regularized"] = res.regularized;
      nlohmann::json vels = nlohmann::json::array();
      for (const auto& v : res.velocities)
        vels.push_back({{"velocity", vec_json(v.velocity)}, {"condition", v.condition}, {"flagged", v.ill_conditioned}});
      j["velocities"] = vels;
      if (trace) {
        auto lm_opts = cfg.locator.lm;
        auto dfp_opts = cfg.locator.dfp;
        lm_opts.keep_trace = dfp_opts.keep_trace = true;
        const Vec2 init = tx_centroid(meas);
        for (const auto& [name, r] : {std::pair{"lm", locate_lm(meas, init, lm_opts)},
                                      std::pair{"dfp", locate_dfp(meas, init, dfp_opts)}}) {
          nlohmann::json t = nlohmann::json::array();
          for (const auto& p : r.trace) t.push_back(vec_json(p));
          j[name] = {{"p", vec_json(r.p)}, {"loss", r.loss}, {"iterations", r.iterations}, {"converged", r.converged},
                     {"trace", t}};
        }
      }
      const fs::path dir = out_dir(cfg);
      std::ofstream(dir / "locate.json") << j.dump(2) << "\n";
      std::cout << j.dump(2) << "\n";
    } else if (*sweep_cmd) {
      if (common.config.empty()) throw std::invalid_argument("sweep needs --config");
      if (trials_override > 0) cfg.trials = trials_override;
      const SweepResult res = run_sweep(cfg);
      const fs::path dir = out_dir(cfg);
      const fs::path csv = dir / ("sweep_" + sweep_variable_name(cfg.sweep) + ".csv");
      write_sweep_csv(csv, res);
      std::cout << "wrote " << csv.string() << "\n";
      if (!no_plots)
        for (const auto& p : emit_plots(res, dir)) std::cout << "wrote " << p.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
