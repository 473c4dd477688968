// SPDX-License-Identifier: Apache-2.0

// Versioned JSON documents written and read by the command layer:
// scorecards, calibration models, synthetic ground truth and split files.

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "proctrace/calibration.hpp"
#include "proctrace/scoring.hpp"
#include "proctrace/synth.hpp"

namespace proctrace {

inline constexpr std::string_view kScorecardFormat = "proctrace.scorecard";
inline constexpr std::string_view kModelFormat = "proctrace.calibration";
inline constexpr std::string_view kGroundTruthFormat = "proctrace.ground_truth";
inline constexpr int kReportVersion = 1;

// Throws ConfigError when the document does not match the schema.
std::string serialize_scorecard(const Scorecard& card);
Scorecard parse_scorecard(std::string_view bytes);

std::string serialize_models(const std::map<DefectClass, CalibrationModel>& models);
std::map<DefectClass, CalibrationModel> parse_models(std::string_view bytes);

std::string serialize_ground_truth(const std::string& trajectory_id, const GroundTruth& truth);
GroundTruth parse_ground_truth(std::string_view bytes);

enum class SplitPart { dev, cal, eval };

std::string_view to_string(SplitPart p);
std::optional<SplitPart> parse_split_part(std::string_view s);

using SplitAssignment = std::map<std::string, SplitPart>;  // trajectory id -> part

// Schema-versioned CSV with columns trajectory_id, part.
std::string serialize_split(const SplitAssignment& split);
SplitAssignment parse_split(std::string_view bytes);

}  // namespace proctrace
