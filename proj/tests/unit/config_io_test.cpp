// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <string>

#include "proctrace/config.hpp"
#include "proctrace/errors.hpp"
#include "proctrace/io.hpp"
#include "proctrace/report.hpp"
#include "support.hpp"

using namespace proctrace;
using proctrace::testing::ScratchDir;

namespace {

// Restores the override variable on scope exit.
struct EnvGuard {
    EnvGuard() {
        if (const char* v = std::getenv(std::string(kConfigEnvVar).c_str())) saved = v;
    }
    ~EnvGuard() {
        if (saved.empty()) unsetenv(std::string(kConfigEnvVar).c_str());
        else setenv(std::string(kConfigEnvVar).c_str(), saved.c_str(), 1);
    }
    std::string saved;
};

}  // namespace

TEST_SUITE("run configuration") {
    TEST_CASE("defaults serialize, parse and serialize to the same text") {
        const std::string text = serialize_run_config(RunConfig{});
        CHECK(serialize_run_config(parse_run_config(text)) == text);
    }

    TEST_CASE("partial documents keep defaults elsewhere") {
        const RunConfig c = parse_run_config(R"({"scoring": {"eta": 0.7}, "detectors": {"thresholds": {"weak_tool": 0.6}}})");
        CHECK(c.scoring.eta == 0.7);
        CHECK(c.scoring.lambda == 0.2);
        CHECK(c.detectors.threshold(DefectClass::weak_tool) == 0.6);
        CHECK(c.detectors.threshold(DefectClass::dead_step) == 0.5);
        CHECK(c.method == CalibrationMethod::beta_smoothed);
    }

    TEST_CASE("changed values survive a round trip") {
        RunConfig c;
        c.method = CalibrationMethod::monotone_map;
        c.scoring.eta = 0.3;
        c.scoring.bands = {0.3, 0.9};
        c.detectors.duplicate.time_varying_tools = {"clock", "poll_status"};
        c.split.ratios = {0.5, 0.25, 0.25};
        c.evaluation.bootstrap_replicates = 250;
        const RunConfig back = parse_run_config(serialize_run_config(c));
        CHECK(back.method == CalibrationMethod::monotone_map);
        CHECK(back.scoring.eta == 0.3);
        CHECK(back.scoring.bands.error == 0.9);
        CHECK(back.detectors.duplicate.time_varying_tools == c.detectors.duplicate.time_varying_tools);
        CHECK(back.split.ratios == c.split.ratios);
        CHECK(back.evaluation.bootstrap_replicates == 250);
    }

    TEST_CASE("unknown keys are rejected by name") {
        try {
            parse_run_config(R"({"scoring": {"etta": 0.5}})");
            FAIL("expected a configuration error");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("etta") != std::string::npos);
        }
        CHECK_THROWS_AS(parse_run_config(R"({"nonsense": 1})"), ConfigError);
    }

    TEST_CASE("values outside their domains are rejected") {
        CHECK_THROWS_AS(parse_run_config(R"({"scoring": {"eta": 1.5}})"), ConfigError);
        CHECK_THROWS_AS(parse_run_config(R"({"scoring": {"severity": {"warning": 0.9, "error": 0.4}}})"), ConfigError);
        CHECK_THROWS_AS(parse_run_config(R"({"calibration": {"method": "magic"}})"), ConfigError);
        CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
    }

    TEST_CASE("the environment override replaces the named file") {
        EnvGuard guard;
        ScratchDir dir("config-env");
        write_file_atomic(dir / "named.json", R"({"scoring": {"eta": 0.1}})");
        write_file_atomic(dir / "override.json", R"({"scoring": {"eta": 0.9}})");
        unsetenv(std::string(kConfigEnvVar).c_str());
        CHECK(load_run_config(dir / "named.json").scoring.eta == 0.1);
        CHECK(load_run_config("").scoring.eta == 0.5);
        setenv(std::string(kConfigEnvVar).c_str(), (dir / "override.json").c_str(), 1);
        CHECK(load_run_config(dir / "named.json").scoring.eta == 0.9);
        CHECK(load_run_config("").scoring.eta == 0.9);
    }

    TEST_CASE("split sizes use largest remainders") {
        CHECK(split_sizes(200, {0.4, 0.2, 0.4}) == std::array<std::size_t, 3>{80, 40, 80});
        CHECK(split_sizes(10, {1, 1, 1}) == std::array<std::size_t, 3>{4, 3, 3});
        CHECK(split_sizes(0, {1, 1, 1}) == std::array<std::size_t, 3>{0, 0, 0});
        CHECK_THROWS_AS(split_sizes(10, {0, 0, 0}), ConfigError);
        CHECK_THROWS_AS(split_sizes(10, {-1, 1, 1}), ConfigError);
    }

    TEST_CASE("synth specs round-trip") {
        SynthSpec spec;
        spec.topology = Topology::cyclic;
        spec.units = 4;
        spec.injections = {{DefectClass::ghost_context, 0.75, 0.3, true}};
        const std::string text = serialize_synth_spec(spec);
        const SynthSpec back = parse_synth_spec(text);
        CHECK(back.topology == Topology::cyclic);
        CHECK(back.units == 4);
        REQUIRE(back.injections.size() == 1);
        CHECK(back.injections[0].intensity == 0.75);
        CHECK(back.injections[0].location == 0.3);
        CHECK(back.injections[0].exempt_variant);
        CHECK(serialize_synth_spec(back) == text);
    }
}

TEST_SUITE("tables and files") {
    TEST_CASE("cells with commas, quotes and newlines round-trip") {
        Table t;
        t.columns = {"name", "note"};
        t.add({"plain", "a, b"});
        t.add({"quoted", "say \"hi\""});
        t.add({"multi", "line one\nline two"});
        t.add({"empty", ""});
        const std::string csv = to_csv(t);
        CHECK(csv.rfind("# schema_version: 1\n", 0) == 0);
        const Table back = parse_csv(csv);
        CHECK(back.columns == t.columns);
        CHECK(back.rows == t.rows);
    }

    TEST_CASE("a missing schema line or ragged row is a parse error") {
        CHECK_THROWS_AS(parse_csv("a,b\n1,2\n"), ParseError);
        CHECK_THROWS_AS(parse_csv("# schema_version: 9\na,b\n1,2\n"), ParseError);
        CHECK_THROWS_AS(parse_csv("# schema_version: 1\na,b\n1\n"), ParseError);
        Table t;
        t.columns = {"a", "b"};
        CHECK_THROWS_AS(t.add({"1"}), ConfigError);
    }

    TEST_CASE("numbers print in their shortest round-trip form") {
        CHECK(format_number(0.1) == "0.1");
        CHECK(format_number(1.0) == "1");
        CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
        CHECK(format_number(std::optional<double>{}) == "");
    }

    TEST_CASE("atomic writes create parents and replace content") {
        ScratchDir dir("atomic");
        const std::string path = dir / "deep/nested/file.txt";
        write_file_atomic(path, "first");
        write_file_atomic(path, "second");
        CHECK(read_file(path) == "second");
        CHECK_THROWS_AS(read_file(dir / "missing.txt"), ConfigError);
    }

    TEST_CASE("split files round-trip") {
        const SplitAssignment s{{"a", SplitPart::dev}, {"b", SplitPart::cal}, {"c", SplitPart::eval}};
        CHECK(parse_split(serialize_split(s)) == s);
    }
}
