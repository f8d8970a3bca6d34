#include "ddsense/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ddsense {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& block, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw std::invalid_argument("config block '" + block + "' must be an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw std::invalid_argument("unknown key '" + key + "' in config block '" + block + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_vec2(const json& j, const char* key, Vec2& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2) throw std::invalid_argument(std::string("'") + key + "' must be [x, y]");
  out = Vec2(a[0].get<double>(), a[1].get<double>());
}

json vec2(const Vec2& v) { return json::array({v.x(), v.y()}); }

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, "top level", {"frame", "pilot", "channel", "scene", "estimator", "locator", "experiment"});

  ExperimentConfig cfg;
  try {
    if (root.contains("frame")) {
      const auto& j = root["frame"];
      reject_unknown(j, "frame", {"M", "N", "delta_f_hz", "carrier_hz", "cp_len"});
      read(j, "M", cfg.frame.M);
      read(j, "N", cfg.frame.N);
      read(j, "delta_f_hz", cfg.frame.delta_f);
      read(j, "carrier_hz", cfg.frame.carrier_hz);
      read(j, "cp_len", cfg.frame.cp_len);
      // keep the pilot centred unless the pilot block says otherwise
      cfg.pilot.k_p = cfg.frame.N / 2;
      cfg.pilot.l_p = cfg.frame.M / 2;
    }
    if (root.contains("pilot")) {
      const auto& j = root["pilot"];
      reject_unknown(j, "pilot", {"k_p", "l_p", "k_max", "l_max", "lead_guard", "doppler_margin", "pilot_power_db",
                                   "data_power"});
      read(j, "k_p", cfg.pilot.k_p);
      read(j, "l_p", cfg.pilot.l_p);
      read(j, "k_max", cfg.pilot.k_max);
      read(j, "l_max", cfg.pilot.l_max);
      read(j, "lead_guard", cfg.pilot.lead_guard);
      read(j, "doppler_margin", cfg.pilot.doppler_margin);
      read(j, "data_power", cfg.pilot.data_power);
      if (j.contains("pilot_power_db"))
        cfg.pilot.pilot_amplitude = std::sqrt(cfg.pilot.data_power * std::pow(10.0, j["pilot_power_db"].get<double>() / 10.0));
    }
    if (root.contains("channel")) {
      const auto& arr = root["channel"];
      if (!arr.is_array()) throw std::invalid_argument("'channel' must be a list of paths");
      for (const auto& j : arr) {
        reject_unknown(j, "channel", {"gain_re", "gain_im", "delay_ns", "doppler_hz"});
        ChannelPath p;
        double re = 1.0, im = 0.0, delay_ns = 0.0;
        read(j, "gain_re", re);
        read(j, "gain_im", im);
        read(j, "delay_ns", delay_ns);
        read(j, "doppler_hz", p.doppler_hz);
        p.gain = Complex(re, im);
        p.delay_s = delay_ns * 1e-9;
        cfg.channel.push_back(p);
      }
    }
    if (root.contains("scene")) {
      const auto& j = root["scene"];
      reject_unknown(j, "scene",
                     {"target", "track_start", "track_velocity", "instants", "interval_s", "track_jitter_m", "rcs_m2",
                      "noise_floor_dbm", "tx_power_dbm", "sigma_r_m", "sigma_rdot_mps",
                      "sigma_ddot_mps"});
      auto& s = cfg.scene;
      read_vec2(j, "target", s.target);
      read_vec2(j, "track_start", s.track_start);
      read_vec2(j, "track_velocity", s.track_velocity);
      read(j, "instants", s.instants);
      read(j, "interval_s", s.interval_s);
      read(j, "track_jitter_m", s.track_jitter_m);
      read(j, "rcs_m2", s.rcs_m2);
      read(j, "noise_floor_dbm", s.noise_floor_dbm);
      read(j, "tx_power_dbm", s.tx_power_dbm);
      read(j, "sigma_r_m", s.sigmas.range);
      read(j, "sigma_rdot_mps", s.sigmas.range_rate);
      read(j, "sigma_ddot_mps", s.sigmas.los_rate);
    }
    if (root.contains("estimator")) {
      const auto& j = root["estimator"];
      reject_unknown(j, "estimator", {"paths", "peak_to_median", "cancellation_rounds"});
      read(j, "paths", cfg.estimator.paths);
      read(j, "peak_to_median", cfg.estimator.peak_to_median);
      read(j, "cancellation_rounds", cfg.estimator.cancellation_rounds);
    }
    if (root.contains("locator")) {
      const auto& j = root["locator"];
      reject_unknown(j, "locator",
                     {"eps", "max_iter", "sigma_floor_taps", "lm_damping", "lm_max_iter", "dfp_max_iter",
                      "dfp_gradient_step_m"});
      auto& l = cfg.locator;
      read(j, "eps", l.wls.eps);
      read(j, "max_iter", l.wls.max_iter);
      read(j, "sigma_floor_taps", l.sigma_floor_taps);
      read(j, "lm_damping", l.lm.damping);
      read(j, "lm_max_iter", l.lm.max_iter);
      read(j, "dfp_max_iter", l.dfp.max_iter);
      read(j, "dfp_gradient_step_m", l.dfp.gradient_step);
    }
    if (root.contains("experiment")) {
      const auto& j = root["experiment"];
      reject_unknown(j, "experiment", {"sweep", "grid", "trials", "seed", "output_dir"});
      if (j.contains("sweep")) cfg.sweep = parse_sweep_variable(j["sweep"].get<std::string>());
      read(j, "grid", cfg.grid);
      read(j, "trials", cfg.trials);
      read(j, "seed", cfg.master_seed);
      read(j, "output_dir", cfg.output_dir);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
  json root;
  root["frame"] = {{"M", cfg.frame.M},
                   {"N", cfg.frame.N},
                   {"delta_f_hz", cfg.frame.delta_f},
                   {"carrier_hz", cfg.frame.carrier_hz},
                   {"cp_len", cfg.frame.cp_len}};
  const double pilot_db =
      cfg.pilot.data_power > 0 ? 10.0 * std::log10(cfg.pilot.pilot_amplitude * cfg.pilot.pilot_amplitude / cfg.pilot.data_power) : 0.0;
  root["pilot"] = {{"k_p", cfg.pilot.k_p},         {"l_p", cfg.pilot.l_p},
                   {"k_max", cfg.pilot.k_max},     {"l_max", cfg.pilot.l_max},
                   {"lead_guard", cfg.pilot.lead_guard}, {"doppler_margin", cfg.pilot.doppler_margin},
                   {"pilot_power_db", pilot_db},
                   {"data_power", cfg.pilot.data_power}};
  json paths = json::array();
  for (const auto& p : cfg.channel)
    paths.push_back({{"gain_re", p.gain.real()},
                     {"gain_im", p.gain.imag()},
                     {"delay_ns", p.delay_s * 1e9},
                     {"doppler_hz", p.doppler_hz}});
  root["channel"] = paths;
  const auto& s = cfg.scene;
  root["scene"] = {{"target", vec2(s.target)},
                   {"track_start", vec2(s.track_start)},
                   {"track_velocity", vec2(s.track_velocity)},
                   {"instants", s.instants},
                   {"interval_s", s.interval_s},
                   {"track_jitter_m", s.track_jitter_m},
                   {"rcs_m2", s.rcs_m2},
                   {"noise_floor_dbm", s.noise_floor_dbm},
                   {"tx_power_dbm", s.tx_power_dbm},
                   {"sigma_r_m", s.sigmas.range},
                   {"sigma_rdot_mps", s.sigmas.range_rate},
                   {"sigma_ddot_mps", s.sigmas.los_rate}};
  root["estimator"] = {{"paths", cfg.estimator.paths},
                       {"peak_to_median", cfg.estimator.peak_to_median},
                       {"cancellation_rounds", cfg.estimator.cancellation_rounds}};
  const auto& l = cfg.locator;
  root["locator"] = {{"eps", l.wls.eps},
                     {"max_iter", l.wls.max_iter},
                     {"sigma_floor_taps", l.sigma_floor_taps},
                     {"lm_damping", l.lm.damping},
                     {"lm_max_iter", l.lm.max_iter},
                     {"dfp_max_iter", l.dfp.max_iter},
                     {"dfp_gradient_step_m", l.dfp.gradient_step}};
  root["experiment"] = {{"sweep", sweep_variable_name(cfg.sweep)},
                        {"grid", cfg.grid},
                        {"trials", cfg.trials},
                        {"seed", cfg.master_seed},
                        {"output_dir", cfg.output_dir}};
  return root.dump(2);
}

}  // namespace ddsense
