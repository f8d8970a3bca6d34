#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "ddsense/bench.hpp"

namespace ddsense {

/// JSON configuration. Every block and key is optional and falls back to
/// the struct defaults; unknown keys are rejected so typos do not pass
/// silently. Layout:
///
///   frame:      M, N, delta_f_hz, carrier_hz, cp_len
///   pilot:      k_p, l_p, k_max, l_max, lead_guard, doppler_margin,
///               pilot_power_db, data_power
///   channel:    [ { gain_re, gain_im, delay_ns, doppler_hz }, ... ]
///   scene:      target, track_start, track_velocity ([x, y]), instants,
///               interval_s, track_jitter_m, rcs_m2, noise_floor_dbm,
///               tx_power_dbm, sigma_r_m, sigma_rdot_mps, sigma_ddot_mps
///   estimator:  paths, peak_to_median, cancellation_rounds
///   locator:    eps, max_iter, sigma_floor_taps, lm_damping, lm_max_iter,
///               dfp_max_iter, dfp_gradient_step_m
///   experiment: sweep ("tx_power_dbm" | "cos_theta"), grid, trials, seed,
///               output_dir
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace ddsense
