// SPDX-License-Identifier: Apache-2.0

// Command implementations behind the proctrace executable. Each command is a
// function of its arguments and writes its outputs atomically; the result
// lists the files written and one line per item-level error.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proctrace/config.hpp"

namespace proctrace {

struct CommandResult {
    int exit_code = 0;
    std::vector<std::string> outputs;  // written files, sorted
    std::vector<std::string> errors;   // "<item>: <reason>"
    std::vector<std::string> notes;
};

struct IngestArgs {
    std::vector<std::string> inputs;
    std::string adapter = "chatlog";
    std::string output_dir;
};

// One "<stem>.trajectory.jsonl" per readable input; nonzero exit when any
// input fails.
CommandResult cmd_ingest(const IngestArgs& args);

struct AnalyzeArgs {
    std::vector<std::string> inputs;  // canonical trajectory files
    std::string output_dir;
    std::string model;                // required unless the method is hard_threshold
    bool strict = false;              // abort without outputs on the first invalid trajectory
    RunConfig config;
};

// One "<trajectory_id>.scorecard.json" per trajectory plus run_summary.csv.
CommandResult cmd_analyze(const AnalyzeArgs& args);

struct CalibrateArgs {
    std::vector<std::string> scorecards;
    std::string annotations;
    std::string split;
    std::string output;  // model file
    RunConfig config;
};

// Fits one model per defect from calibration-split cases. Any case assigned
// to another part is a hard error.
CommandResult cmd_calibrate(const CalibrateArgs& args);

struct EvaluateArgs {
    std::vector<std::string> scorecards;
    std::string annotations;  // optional for analyses that do not need labels
    std::string split;        // optional; with `part`, restricts the cases
    std::string part;
    std::vector<std::string> analyses{"metrics"};
    std::string output_dir;
    RunConfig config;
};

// Analysis names accepted by cmd_evaluate.
const std::vector<std::string>& evaluation_analyses();

CommandResult cmd_evaluate(const EvaluateArgs& args);

struct SynthArgs {
    std::string spec;  // synth spec file; empty uses the defaults
    std::size_t count = 1;
    std::uint64_t seed = 0;
    std::string output_dir;
};

// "synth-<k>.trajectory.jsonl" and "synth-<k>.truth.json" for k < count.
CommandResult cmd_synth(const SynthArgs& args);

struct SplitArgs {
    std::vector<std::string> inputs;  // canonical trajectory files
    std::string output;               // split file
    RunConfig config;
};

// Stratified dev/cal/eval assignment by (source, outcome).
CommandResult cmd_split(const SplitArgs& args);

}  // namespace proctrace
