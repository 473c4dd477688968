// SPDX-License-Identifier: Apache-2.0

// Run configuration and its JSON file format. Every section and key is
// optional; absent keys keep their defaults and unknown keys are rejected.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "proctrace/calibration.hpp"
#include "proctrace/detectors.hpp"
#include "proctrace/scoring.hpp"
#include "proctrace/synth.hpp"

namespace proctrace {

struct SplitConfig {
    std::array<double, 3> ratios{0.4, 0.2, 0.4};  // dev, cal, eval
    std::uint64_t seed = 0;
};

struct EvaluationConfig {
    std::size_t bootstrap_replicates = 1000;
    double confidence = 0.95;
    double eta_step = 0.05;
    std::size_t ece_bins = 10;
};

struct PathsConfig {
    std::string model;
    std::string annotations;
    std::string split;
    std::string output_dir;
};

struct RunConfig {
    DetectorConfig detectors;
    CalibrationMethod method = CalibrationMethod::beta_smoothed;
    FitOptions fit;  // threshold is taken per defect from the detector thresholds
    HorizonCuts horizons;
    ScoringConfig scoring;
    SplitConfig split;
    EvaluationConfig evaluation;
    PathsConfig paths;
    std::uint64_t seed = 0;

    // Throws ConfigError when a sub-config is invalid.
    void validate() const;
};

inline constexpr std::string_view kConfigEnvVar = "PROCTRACE_CONFIG";

// Throws ConfigError naming the offending key.
RunConfig parse_run_config(std::string_view json_text);
std::string serialize_run_config(const RunConfig& cfg);

// Reads `path`, or the file named by PROCTRACE_CONFIG when set; an empty
// path with no override yields the defaults.
RunConfig load_run_config(const std::string& path);

SynthSpec parse_synth_spec(std::string_view json_text);
std::string serialize_synth_spec(const SynthSpec& spec);

// Part sizes for `total` cases under `ratios` by largest remainder; ties go
// to the earlier part. Throws ConfigError for negative or all-zero ratios.
std::array<std::size_t, 3> split_sizes(std::size_t total, const std::array<double, 3>& ratios);

}  // namespace proctrace
