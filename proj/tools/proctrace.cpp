// SPDX-License-Identifier: Apache-2.0

// proctrace: ingest agent logs, score trajectories, calibrate and evaluate.

#include <CLI11.hpp>
#include <iostream>

#include "proctrace/cli.hpp"
#include "proctrace/errors.hpp"

using namespace proctrace;

namespace {

int report(const CommandResult& r) {
    for (const std::string& e : r.errors) std::cerr << "error: " << e << "\n";
    for (const std::string& n : r.notes) std::cerr << "note: " << n << "\n";
    for (const std::string& o : r.outputs) std::cout << o << "\n";
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Process-defect analysis for coding-agent trajectories"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "Run config file (JSON); PROCTRACE_CONFIG overrides it");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Map raw logs to canonical trajectory files");
    ingest_cmd->add_option("inputs", ingest.inputs, "Raw log files")->required();
    ingest_cmd->add_option("--adapter", ingest.adapter, "Log adapter (chatlog, canonical)")->capture_default_str();
    ingest_cmd->add_option("-o,--output-dir", ingest.output_dir, "Output directory")->required();

    AnalyzeArgs analyze;
    auto* analyze_cmd = app.add_subcommand("analyze", "Detect, calibrate and score trajectories");
    analyze_cmd->add_option("inputs", analyze.inputs, "Canonical trajectory files")->required();
    analyze_cmd->add_option("-o,--output-dir", analyze.output_dir, "Output directory");
    analyze_cmd->add_option("--model", analyze.model, "Calibration model file");
    analyze_cmd->add_flag("--strict", analyze.strict, "Abort on the first invalid trajectory");

    CalibrateArgs calibrate;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit risk models on the calibration split");
    calibrate_cmd->add_option("scorecards", calibrate.scorecards, "Scorecard files")->required();
    calibrate_cmd->add_option("--annotations", calibrate.annotations, "Annotation file");
    calibrate_cmd->add_option("--split", calibrate.split, "Split file");
    calibrate_cmd->add_option("-o,--output", calibrate.output, "Model file")->required();

    EvaluateArgs evaluate;
    std::vector<std::string> analyses;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Emit evaluation tables");
    evaluate_cmd->add_option("scorecards", evaluate.scorecards, "Scorecard files")->required();
    evaluate_cmd->add_option("--annotations", evaluate.annotations, "Annotation file");
    evaluate_cmd->add_option("--split", evaluate.split, "Split file");
    evaluate_cmd->add_option("--part", evaluate.part, "Restrict to one split part (dev, cal, eval)");
    evaluate_cmd->add_option("--analysis", analyses, "Analyses to run (default: metrics)")
        ->check(CLI::IsMember(evaluation_analyses()));
    evaluate_cmd->add_option("-o,--output-dir", evaluate.output_dir, "Output directory");

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic trajectories with ground truth");
    synth_cmd->add_option("--spec", synth.spec, "Synth spec file (JSON); defaults when omitted");
    synth_cmd->add_option("--count", synth.count, "Trajectories to generate")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "Seed")->capture_default_str();
    synth_cmd->add_option("-o,--output-dir", synth.output_dir, "Output directory")->required();

    SplitArgs split;
    auto* split_cmd = app.add_subcommand("split", "Assign trajectories to dev/cal/eval parts");
    split_cmd->add_option("inputs", split.inputs, "Canonical trajectory files")->required();
    split_cmd->add_option("-o,--output", split.output, "Split file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = load_run_config(config_path);
        if (*ingest_cmd) return report(cmd_ingest(ingest));
        if (*analyze_cmd) {
            analyze.config = cfg;
            if (analyze.model.empty()) analyze.model = cfg.paths.model;
            if (analyze.output_dir.empty()) analyze.output_dir = cfg.paths.output_dir;
            return report(cmd_analyze(analyze));
        }
        if (*calibrate_cmd) {
            calibrate.config = cfg;
            if (calibrate.annotations.empty()) calibrate.annotations = cfg.paths.annotations;
            if (calibrate.split.empty()) calibrate.split = cfg.paths.split;
            return report(cmd_calibrate(calibrate));
        }
        if (*evaluate_cmd) {
            evaluate.config = cfg;
            if (!analyses.empty()) evaluate.analyses = analyses;
            if (evaluate.annotations.empty()) evaluate.annotations = cfg.paths.annotations;
            if (evaluate.split.empty()) evaluate.split = cfg.paths.split;
            if (evaluate.output_dir.empty()) evaluate.output_dir = cfg.paths.output_dir;
            return report(cmd_evaluate(evaluate));
        }
        if (*synth_cmd) return report(cmd_synth(synth));
        if (*split_cmd) {
            split.config = cfg;
            return report(cmd_split(split));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
