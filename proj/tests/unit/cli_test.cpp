// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "proctrace/canonical.hpp"
#include "proctrace/cli.hpp"
#include "proctrace/errors.hpp"
#include "proctrace/io.hpp"
#include "proctrace/report.hpp"
#include "support.hpp"

using namespace proctrace;
using proctrace::testing::fixture_dir;
using proctrace::testing::ScratchDir;

namespace fs = std::filesystem;

namespace {

const char* kStems[] = {"a-task1", "a-task2", "a-task3", "b-task1", "b-task2", "b-task3"};

std::vector<std::string> golden_inputs() {
    std::vector<std::string> out;
    for (const char* s : kStems) out.push_back((fixture_dir() / "golden" / (std::string(s) + ".trajectory.jsonl")).string());
    return out;
}

std::string annotations() { return (fixture_dir() / "annotations.jsonl").string(); }

std::size_t file_count(const fs::path& dir) {
    if (!fs::exists(dir)) return 0;
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
    return n;
}

std::string write_split(const ScratchDir& dir, SplitPart part_of_first, SplitPart rest) {
    SplitAssignment split;
    for (const char* s : kStems) split[s] = rest;
    split[kStems[0]] = part_of_first;
    const std::string path = dir / "split.csv";
    write_file_atomic(path, serialize_split(split));
    return path;
}

// Scorecards for the six fixtures under hard-threshold calibration.
std::vector<std::string> hard_scorecards(const ScratchDir& dir) {
    AnalyzeArgs a;
    a.inputs = golden_inputs();
    a.output_dir = dir / "cards";
    a.config.method = CalibrationMethod::hard_threshold;
    const CommandResult r = cmd_analyze(a);
    REQUIRE(r.exit_code == 0);
    std::vector<std::string> cards;
    for (const std::string& o : r.outputs) {
        if (o.ends_with(".scorecard.json")) cards.push_back(o);
    }
    return cards;
}

}  // namespace

TEST_SUITE("ingest command") {
    TEST_CASE("one broken input among three fails the run but keeps the good outputs") {
        ScratchDir dir("ingest-mixed");
        IngestArgs a;
        for (const char* f : {"ok-1", "broken", "ok-2"}) a.inputs.push_back((fixture_dir() / "malformed" / (std::string(f) + ".jsonl")).string());
        a.output_dir = dir / "out";
        const CommandResult r = cmd_ingest(a);
        CHECK(r.exit_code != 0);
        CHECK(r.outputs.size() == 2);
        REQUIRE(r.errors.size() == 1);
        CHECK(r.errors[0].find("broken") != std::string::npos);
        CHECK(file_count(dir.path() / "out") == 2);
    }

    TEST_CASE("rerunning ingest gives byte-identical files") {
        ScratchDir a_dir("ingest-a"), b_dir("ingest-b");
        IngestArgs a;
        for (const char* s : kStems) a.inputs.push_back((fixture_dir() / "chatlog" / (std::string(s) + ".jsonl")).string());
        a.output_dir = a_dir / "out";
        IngestArgs b = a;
        b.output_dir = b_dir / "out";
        const CommandResult ra = cmd_ingest(a), rb = cmd_ingest(b);
        REQUIRE(ra.exit_code == 0);
        REQUIRE(ra.outputs.size() == 6);
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(read_file(ra.outputs[i]) == read_file(rb.outputs[i]));
        }
    }

    TEST_CASE("an unknown adapter is a configuration error") {
        ScratchDir dir("ingest-adapter");
        IngestArgs a;
        a.inputs = {(fixture_dir() / "chatlog" / "a-task1.jsonl").string()};
        a.adapter = "nope";
        a.output_dir = dir / "out";
        CHECK_THROWS_AS(cmd_ingest(a), ConfigError);
    }
}

TEST_SUITE("analyze command") {
    TEST_CASE("strict mode stops without writing anything") {
        ScratchDir dir("analyze-strict");
        write_file_atomic(dir / "bad.trajectory.jsonl", "{\"record\": \"header\"}\n");
        AnalyzeArgs a;
        a.inputs = golden_inputs();
        a.inputs.insert(a.inputs.begin() + 2, dir / "bad.trajectory.jsonl");
        a.output_dir = dir / "out";
        a.strict = true;
        a.config.method = CalibrationMethod::hard_threshold;
        const CommandResult r = cmd_analyze(a);
        CHECK(r.exit_code != 0);
        CHECK(r.outputs.empty());
        CHECK(file_count(dir.path() / "out") == 0);
    }

    TEST_CASE("a smoothed method without a model file is rejected") {
        ScratchDir dir("analyze-model");
        AnalyzeArgs a;
        a.inputs = golden_inputs();
        a.output_dir = dir / "out";
        try {
            cmd_analyze(a);
            FAIL("expected a configuration error");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("model") != std::string::npos);
        }
    }

    TEST_CASE("hard thresholds score every fixture and write a summary") {
        ScratchDir dir("analyze-hard");
        const auto cards = hard_scorecards(dir);
        CHECK(cards.size() == 6);
        CHECK(fs::exists(dir.path() / "cards" / "run_summary.csv"));
        for (const std::string& c : cards) {
            const Scorecard s = parse_scorecard(read_file(c));
            CHECK(s.findings.size() == kDefectCount);
            CHECK(s.pb == doctest::Approx(s.eta * s.q_def + (1.0 - s.eta) * s.cp));
        }
        const Table summary = parse_csv(read_file(dir.path() / "cards" / "run_summary.csv"));
        CHECK(summary.columns == std::vector<std::string>{"group", "count", "mean_pb", "fragile_success_rate"});
        CHECK(summary.rows.back()[0] == "overall");
        CHECK(summary.rows.back()[1] == "6");
    }
}

TEST_SUITE("calibrate command") {
    TEST_CASE("a case outside the calibration part is split leakage") {
        ScratchDir dir("calibrate-leak");
        const auto cards = hard_scorecards(dir);
        CalibrateArgs a;
        a.scorecards = cards;
        a.annotations = annotations();
        a.split = write_split(dir, SplitPart::eval, SplitPart::cal);
        a.output = dir / "model.json";
        try {
            cmd_calibrate(a);
            FAIL("expected split leakage");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("leakage") != std::string::npos);
        }
        CHECK_FALSE(fs::exists(dir.path() / "model.json"));
    }

    TEST_CASE("a fitted model round-trips and drives a later analysis") {
        ScratchDir dir("calibrate-fit");
        CalibrateArgs a;
        a.scorecards = hard_scorecards(dir);
        a.annotations = annotations();
        a.split = write_split(dir, SplitPart::cal, SplitPart::cal);
        a.output = dir / "model.json";
        const CommandResult r = cmd_calibrate(a);
        REQUIRE(r.exit_code == 0);
        const std::string bytes = read_file(a.output);
        const auto models = parse_models(bytes);
        CHECK(models.size() == kDefectCount);
        CHECK(serialize_models(models) == bytes);

        AnalyzeArgs an;
        an.inputs = golden_inputs();
        an.model = a.output;
        an.output_dir = dir / "calibrated";
        const CommandResult ar = cmd_analyze(an);
        CHECK(ar.exit_code == 0);
        CHECK(ar.outputs.size() == 7);
    }

    TEST_CASE("a missing split file is rejected") {
        ScratchDir dir("calibrate-nosplit");
        CalibrateArgs a;
        a.scorecards = hard_scorecards(dir);
        a.annotations = annotations();
        a.output = dir / "model.json";
        CHECK_THROWS_AS(cmd_calibrate(a), ConfigError);
    }
}

TEST_SUITE("evaluate command") {
    TEST_CASE("metrics table has one row per defect with the frozen columns") {
        ScratchDir dir("evaluate-metrics");
        EvaluateArgs a;
        a.scorecards = hard_scorecards(dir);
        a.annotations = annotations();
        a.output_dir = dir / "eval";
        const CommandResult r = cmd_evaluate(a);
        REQUIRE(r.exit_code == 0);
        const Table t = parse_csv(read_file(dir.path() / "eval" / "metrics.csv"));
        CHECK(t.rows.size() == kDefectCount);
        CHECK(t.columns.front() == "defect");
        CHECK(std::find(t.columns.begin(), t.columns.end(), "precision") != t.columns.end());
        CHECK(std::find(t.columns.begin(), t.columns.end(), "auroc") != t.columns.end());
    }

    TEST_CASE("kappa without a second annotator is an error") {
        ScratchDir dir("evaluate-kappa");
        std::vector<AnnotationRecord> single;
        for (const char* s : kStems) {
            AnnotationRecord rec;
            rec.trajectory_id = s;
            rec.labels.fill(AnnotationLabel::absent);
            rec.annotator_id = "solo";
            single.push_back(rec);
        }
        write_file_atomic(dir / "single.jsonl", serialize_annotations(single));
        EvaluateArgs a;
        a.scorecards = hard_scorecards(dir);
        a.annotations = dir / "single.jsonl";
        a.analyses = {"kappa"};
        a.output_dir = dir / "eval";
        CHECK_THROWS_AS(cmd_evaluate(a), ConfigError);

        a.annotations = annotations();
        CHECK(cmd_evaluate(a).exit_code == 0);
    }

    TEST_CASE("label-free analyses run without annotations and labelled ones refuse") {
        ScratchDir dir("evaluate-nolabels");
        EvaluateArgs a;
        a.scorecards = hard_scorecards(dir);
        a.analyses = {"scenario", "rank_shift", "eta_sweep", "defect_correlation", "failure_correlation"};
        a.output_dir = dir / "eval";
        const CommandResult r = cmd_evaluate(a);
        CHECK(r.exit_code == 0);
        CHECK(r.outputs.size() == 6);
        a.analyses = {"metrics"};
        CHECK_THROWS_AS(cmd_evaluate(a), ConfigError);
        a.analyses = {"nonsense"};
        CHECK_THROWS_AS(cmd_evaluate(a), ConfigError);
    }

    TEST_CASE("bootstrap output is identical across reruns") {
        ScratchDir dir("evaluate-boot");
        EvaluateArgs a;
        a.scorecards = hard_scorecards(dir);
        a.analyses = {"bootstrap"};
        a.config.evaluation.bootstrap_replicates = 200;
        a.output_dir = dir / "one";
        EvaluateArgs b = a;
        b.output_dir = dir / "two";
        cmd_evaluate(a);
        cmd_evaluate(b);
        const std::string one = read_file(dir.path() / "one" / "bootstrap.csv");
        CHECK(one == read_file(dir.path() / "two" / "bootstrap.csv"));
        CHECK(parse_csv(one).rows.size() == 2);
    }
}

TEST_SUITE("synth command") {
    TEST_CASE("a count of zero writes nothing") {
        ScratchDir dir("synth-zero");
        SynthArgs a;
        a.count = 0;
        a.output_dir = dir / "out";
        const CommandResult r = cmd_synth(a);
        CHECK(r.exit_code == 0);
        CHECK(r.outputs.empty());
        CHECK(file_count(dir.path() / "out") == 0);
    }

    TEST_CASE("ten trajectories are deterministic and their truth lists the injected class") {
        ScratchDir dir("synth-ten");
        SynthSpec spec;
        spec.injections = {{DefectClass::weak_tool, 1.0, std::nullopt, false}};
        write_file_atomic(dir / "spec.json", serialize_synth_spec(spec));
        SynthArgs a;
        a.spec = dir / "spec.json";
        a.count = 10;
        a.seed = 3;
        a.output_dir = dir / "one";
        SynthArgs b = a;
        b.output_dir = dir / "two";
        const CommandResult ra = cmd_synth(a), rb = cmd_synth(b);
        REQUIRE(ra.outputs.size() == 20);
        for (std::size_t i = 0; i < 20; ++i) {
            CHECK(fs::path(ra.outputs[i]).filename() == fs::path(rb.outputs[i]).filename());
            CHECK(read_file(ra.outputs[i]) == read_file(rb.outputs[i]));
        }
        for (const std::string& o : ra.outputs) {
            if (!o.ends_with(".truth.json")) continue;
            CHECK(parse_ground_truth(read_file(o)).label(DefectClass::weak_tool) == AnnotationLabel::present);
        }
    }
}

TEST_SUITE("split command") {
    TEST_CASE("every trajectory lands in exactly one part with the configured sizes") {
        ScratchDir dir("split");
        SplitArgs a;
        for (int i = 0; i < 20; ++i) {
            proctrace::testing::Builder b("case-" + std::to_string(i), i % 2 ? Source::terminal : Source::swebench);
            b.outcome(i % 4 < 2 ? Outcome::success : Outcome::failure);
            b.message("work");
            const std::string path = dir / ("case-" + std::to_string(i) + ".trajectory.jsonl");
            write_file_atomic(path, canonical_serialize(b.build()));
            a.inputs.push_back(path);
        }
        a.output = dir / "split.csv";
        REQUIRE(cmd_split(a).exit_code == 0);
        const SplitAssignment s = parse_split(read_file(a.output));
        CHECK(s.size() == 20);
        std::map<SplitPart, std::size_t> counts;
        for (const auto& [id, part] : s) ++counts[part];
        CHECK(counts[SplitPart::dev] == 8);
        CHECK(counts[SplitPart::cal] == 4);
        CHECK(counts[SplitPart::eval] == 8);
    }

    TEST_CASE("strata smaller than the part count are rejected") {
        ScratchDir dir("split-small");
        SplitArgs a;
        a.inputs = golden_inputs();
        a.output = dir / "split.csv";
        CHECK_THROWS_AS(cmd_split(a), ConfigError);
    }
}
