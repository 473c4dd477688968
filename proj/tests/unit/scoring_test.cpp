// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <map>
#include <vector>

#include "proctrace/errors.hpp"
#include "proctrace/report.hpp"
#include "proctrace/rng.hpp"
#include "proctrace/scoring.hpp"
#include "support.hpp"

using namespace proctrace;
using proctrace::testing::Builder;
using proctrace::testing::calibrated;
using proctrace::testing::uniform_findings;

namespace {

std::vector<CalibratedFinding> context_risks(double ghost, double rules, double thrash) {
    std::vector<CalibratedFinding> f = uniform_findings(0.0);
    f[ordinal(DefectClass::ghost_context)].posterior_risk = ghost;
    f[ordinal(DefectClass::oversized_rules)].posterior_risk = rules;
    f[ordinal(DefectClass::cw_thrashing)].posterior_risk = thrash;
    return f;
}

// Short trajectory with a marker in its only window and nothing to repair.
Trajectory controlled(Outcome outcome = Outcome::success) {
    Builder b("ctl", Source::terminal);
    b.outcome(outcome);
    b.marker("stage: inspect");
    b.step("read_file", {{"path", "a.c"}}, "contents");
    return b.build();
}

// Many windows, each opened by a stage marker, with no mutations.
Trajectory marked_long(std::size_t n) {
    Builder b("marked", Source::swebench);
    b.outcome(Outcome::success);
    while (b.size() < n) {
        if (b.size() % 25 == 0) b.marker("stage");
        else b.message("work");
    }
    return b.build();
}

Scorecard card(const std::string& source_group, double pb) {
    Scorecard c;
    c.trajectory_id = source_group + std::to_string(pb);
    c.pb = pb;
    return c;
}

}  // namespace

TEST_SUITE("dimension quality") {
    TEST_CASE("no risk gives quality one and full risk gives zero") {
        for (Dimension d : kAllDimensions) {
            CHECK(dimension_quality(uniform_findings(0.0), d) == 1.0);
            CHECK(dimension_quality(uniform_findings(1.0), d) == 0.0);
        }
    }

    TEST_CASE("context risks 0.2, 0.4 and 0.6 give 0.6") {
        CHECK(dimension_quality(context_risks(0.2, 0.4, 0.6), Dimension::context_mgmt) == doctest::Approx(0.6));
        CHECK(dimension_quality(context_risks(0.2, 0.4, 0.6), Dimension::tool_use) == 1.0);
    }

    TEST_CASE("a missing class of the dimension is an error") {
        std::vector<CalibratedFinding> f = uniform_findings(0.1);
        f.erase(f.begin() + static_cast<long>(ordinal(DefectClass::weak_tool)));
        CHECK_THROWS_AS(dimension_quality(f, Dimension::tool_ecosystem), ConfigError);
        CHECK_NOTHROW(dimension_quality(f, Dimension::context_mgmt));
    }
}

TEST_SUITE("overall defect quality") {
    TEST_CASE("equal dimensions give that value") {
        CHECK(overall_defect_quality(0.42, 0.42, 0.42, 0.42) == doctest::Approx(0.42));
    }

    TEST_CASE("dimensions 0.78, 0.74, 0.71 and 0.69 average to 0.73") {
        CHECK(overall_defect_quality(0.78, 0.74, 0.71, 0.69) == doctest::Approx(0.73));
    }

    TEST_CASE("one-hot weights select a dimension") {
        const std::array<double, 4> q{0.1, 0.2, 0.3, 0.4};
        for (std::size_t k = 0; k < 4; ++k) {
            std::array<double, 4> w{};
            w[k] = 1.0;
            CHECK(overall_defect_quality(q[0], q[1], q[2], q[3], w) == doctest::Approx(q[k]));
        }
    }

    TEST_CASE("negative weights or weights off one are rejected") {
        CHECK_THROWS_AS(overall_defect_quality(0.5, 0.5, 0.5, 0.5, {0.5, 0.5, 0.5, -0.5}), ConfigError);
        CHECK_THROWS_AS(overall_defect_quality(0.5, 0.5, 0.5, 0.5, {0.3, 0.3, 0.3, 0.3}), ConfigError);
    }
}

TEST_SUITE("control preservation") {
    TEST_CASE("subscores of 0.75 without errors give 0.75") {
        const ControlSubscores s{0.75, 0.75, 0.75, 0.75, 0.75};
        CHECK(control_preservation(s, uniform_findings(0.9, Severity::warning), 0.2) == doctest::Approx(0.75));
    }

    TEST_CASE("an error finding at risk one with lambda 0.2 gives 0.60") {
        const ControlSubscores s{0.75, 0.75, 0.75, 0.75, 0.75};
        std::vector<CalibratedFinding> f = uniform_findings(0.0);
        f[3] = calibrated(DefectClass::duplicate_step, 1.0, Severity::error);
        CHECK(control_preservation(s, f, 0.2) == doctest::Approx(0.60));
    }

    TEST_CASE("full coverage without mutations or deviations is perfect") {
        const Trajectory t = controlled();
        const ControlFeatures f = control_features(t);
        CHECK(f.stage_marker_coverage == 1.0);
        CHECK(f.interruption_point_density > 1.0);
        const ControlPreservation cp = control_preservation(t, uniform_findings(0.0));
        CHECK(cp.cp == 1.0);
        CHECK(cp.r_max == 0.0);
    }

    TEST_CASE("a repaired failure counts only without an intervening restart") {
        Builder b;
        b.marker();
        b.step("run_tests", {}, "1 failed", Validation::fail);
        b.step("run_tests", {}, "all passed", Validation::pass);
        CHECK(control_features(b.build()).repair_without_restart_rate == 1.0);

        Builder r;
        r.marker();
        r.step("run_tests", {}, "1 failed", Validation::fail);
        r.marker("restart from scratch");
        r.step("run_tests", {}, "all passed", Validation::pass);
        CHECK(control_features(r.build()).repair_without_restart_rate == 0.0);
    }

    TEST_CASE("mutations are reversible only under an earlier checkpoint") {
        Builder b;
        b.op(OpKind::checkpoint, "src/");
        b.op(OpKind::file_write, "src/a.c");
        b.op(OpKind::file_write, "docs/x.md");
        CHECK(control_features(b.build()).reversible_mutation_rate == doctest::Approx(0.5));
    }

    TEST_CASE("a handoff is honored when no mutation precedes the confirmation") {
        Builder ok;
        ok.op(OpKind::handoff_request);
        ok.op(OpKind::confirmation_point);
        ok.op(OpKind::file_write, "a");
        CHECK(control_features(ok.build()).handoff_honored_rate == 1.0);

        Builder bad;
        bad.op(OpKind::handoff_request);
        bad.op(OpKind::file_write, "a");
        bad.op(OpKind::confirmation_point);
        CHECK(control_features(bad.build()).handoff_honored_rate == 0.0);
    }

    TEST_CASE("control can exceed one minus the mean defect risk") {
        const Trajectory t = marked_long(200);
        const std::vector<CalibratedFinding> f = uniform_findings(0.7, Severity::warning);
        double mean_risk = 0.0;
        for (const CalibratedFinding& x : f) mean_risk += x.posterior_risk / static_cast<double>(f.size());
        const ControlPreservation cp = control_preservation(t, f);
        CHECK(cp.cp > 1.0 - mean_risk);
        CHECK(cp.cp == 1.0);
    }

    TEST_CASE("subscores stay in the unit interval on generated trajectories") {
        Rng rng(12);
        for (int trial = 0; trial < 100; ++trial) {
            const Trajectory t = proctrace::testing::random_tool_trajectory(rng, 5 + rng.index(60));
            const ControlSubscores s = control_subscores(control_features(t));
            for (double v : {s.interpretability, s.interruptibility, s.correctability, s.reversibility,
                             s.authority_handoff}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
}

TEST_SUITE("summary score") {
    TEST_CASE("eta endpoints select one component") {
        CHECK(summary_score(0.3, 0.9, 1.0) == 0.3);
        CHECK(summary_score(0.3, 0.9, 0.0) == 0.9);
    }

    TEST_CASE("quality 0.70 and control 0.75 at eta 0.5 give 0.725") {
        CHECK(summary_score(0.70, 0.75, 0.5) == doctest::Approx(0.725));
    }

    TEST_CASE("eta outside the unit interval is rejected") {
        CHECK_THROWS_AS(summary_score(0.5, 0.5, 1.01), ConfigError);
        CHECK_THROWS_AS(summary_score(0.5, 0.5, -0.01), ConfigError);
    }

    TEST_CASE("summary lies between its components and is monotone in both") {
        Rng rng(5);
        for (int i = 0; i < 1000; ++i) {
            const double q = rng.uniform(), c = rng.uniform(), eta = rng.uniform();
            const double pb = summary_score(q, c, eta);
            CHECK(pb >= std::min(q, c) - 1e-12);
            CHECK(pb <= std::max(q, c) + 1e-12);
            const double dq = rng.uniform(0.0, 1.0 - q), dc = rng.uniform(0.0, 1.0 - c);
            CHECK(summary_score(q + dq, c, eta) >= pb - 1e-12);
            CHECK(summary_score(q, c + dc, eta) >= pb - 1e-12);
        }
    }
}

TEST_SUITE("fragile success") {
    TEST_CASE("failures carry no flag") {
        CHECK_FALSE(fragile_success(Outcome::failure, uniform_findings(1.0, Severity::error), 0.0).has_value());
        CHECK_FALSE(fragile_success(Outcome::unknown, uniform_findings(0.0), 0.9).has_value());
    }

    TEST_CASE("a clean success with quality 0.9 is not fragile") {
        CHECK(fragile_success(Outcome::success, uniform_findings(0.1), 0.9) == false);
    }

    TEST_CASE("one error-severity finding makes a success fragile") {
        std::vector<CalibratedFinding> f = uniform_findings(0.0);
        f[5] = calibrated(DefectClass::dead_step, 0.85, Severity::error);
        CHECK(fragile_success(Outcome::success, f, 0.95) == true);
    }

    TEST_CASE("quality below the cut makes a success fragile") {
        CHECK(fragile_success(Outcome::success, uniform_findings(0.0), 0.59) == true);
        CHECK(fragile_success(Outcome::success, uniform_findings(0.0), 0.6) == false);
    }

    TEST_CASE("rate is flagged successes over successes") {
        std::vector<Scorecard> cards(4);
        cards[0].fragile_success = true;
        cards[1].fragile_success = false;
        cards[2].fragile_success = false;
        CHECK(fragile_success_rate(cards) == doctest::Approx(1.0 / 3.0));
        CHECK(fragile_success_rate({}) == 0.0);
        cards[0].fragile_success = false;
        CHECK(fragile_success_rate(cards) == 0.0);
    }
}

TEST_SUITE("scorecard") {
    TEST_CASE("zero risk and perfect control give one for every eta") {
        for (double eta : {0.0, 0.3, 0.5, 1.0}) {
            const Scorecard s = build_scorecard(controlled(), uniform_findings(0.0), eta);
            CHECK(s.pb == 1.0);
            CHECK(s.q_def == 1.0);
            CHECK(s.cp == 1.0);
            CHECK(s.fragile_success == false);
        }
    }

    TEST_CASE("identical inputs build identical scorecards") {
        const auto f = uniform_findings(0.3, Severity::none);
        CHECK(build_scorecard(controlled(), f, 0.5) == build_scorecard(controlled(), f, 0.5));
    }

    TEST_CASE("mixed findings give a consistent summary") {
        std::vector<CalibratedFinding> f;
        const double risks[] = {0.1, 0.9, 0.2, 0.85, 0.0, 0.3, 0.5, 0.45, 0.05, 0.95, 0.6};
        for (std::size_t i = 0; i < kDefectCount; ++i) {
            f.push_back(calibrated(kAllDefects[i], risks[i], band_severity(risks[i], SeverityBands{})));
        }
        std::reverse(f.begin(), f.end());  // order must not matter
        const Trajectory t = marked_long(60);
        const Scorecard s = build_scorecard(t, f, 0.4);
        // Hand recomputation.
        const double q_ctx = 1.0 - (0.1 + 0.9 + 0.2) / 3.0;
        const double q_tool = 1.0 - (0.85 + 0.0 + 0.3 + 0.5) / 4.0;
        const double q_wf = 1.0 - (0.45 + 0.05) / 2.0;
        const double q_eco = 1.0 - (0.95 + 0.6) / 2.0;
        const double q_def = (q_ctx + q_tool + q_wf + q_eco) / 4.0;
        const double cp = 1.0 * (1.0 - 0.2 * 0.95);
        CHECK(s.q_ctx == doctest::Approx(q_ctx));
        CHECK(s.q_tool == doctest::Approx(q_tool));
        CHECK(s.q_wf == doctest::Approx(q_wf));
        CHECK(s.q_eco == doctest::Approx(q_eco));
        CHECK(s.q_def == doctest::Approx(q_def));
        CHECK(s.cp == doctest::Approx(cp));
        CHECK(s.pb == doctest::Approx(0.4 * q_def + 0.6 * cp));
        CHECK(s.fragile_success == true);
        for (std::size_t i = 0; i < kDefectCount; ++i) CHECK(s.findings[i].raw.defect == kAllDefects[i]);
    }

    TEST_CASE("task and system come from metadata") {
        Builder b("traj-1");
        b.meta("task", "fix-bug-7").meta("system", "sys-a");
        b.message("hi");
        const Scorecard s = build_scorecard(b.build(), uniform_findings(0.0), 0.5);
        CHECK(s.task == "fix-bug-7");
        CHECK(s.system == "sys-a");
        Builder plain("traj-2");
        plain.message("hi");
        CHECK(build_scorecard(plain.build(), uniform_findings(0.0), 0.5).task == "traj-2");
    }

    TEST_CASE("missing or repeated findings are rejected") {
        std::vector<CalibratedFinding> f = uniform_findings(0.0);
        f.pop_back();
        CHECK_THROWS_AS(build_scorecard(controlled(), f, 0.5), ConfigError);
        f.push_back(f.front());
        CHECK_THROWS_AS(build_scorecard(controlled(), f, 0.5), ConfigError);
    }

    TEST_CASE("scalars stay in range and the summary identity holds on random inputs") {
        Rng rng(31);
        for (int trial = 0; trial < 200; ++trial) {
            const Trajectory t = proctrace::testing::random_tool_trajectory(rng, 3 + rng.index(40));
            std::vector<CalibratedFinding> f;
            for (DefectClass d : kAllDefects) {
                const double r = rng.uniform();
                f.push_back(calibrated(d, r, band_severity(r, SeverityBands{})));
            }
            const double eta = rng.uniform();
            const Scorecard s = build_scorecard(t, f, eta);
            for (double v : {s.q_ctx, s.q_tool, s.q_wf, s.q_eco, s.q_def, s.cp, s.pb}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
            CHECK(s.pb == doctest::Approx(eta * s.q_def + (1.0 - eta) * s.cp).epsilon(1e-12));
            CHECK(s.pb >= std::min(s.q_def, s.cp) - 1e-12);
            CHECK(s.pb <= std::max(s.q_def, s.cp) + 1e-12);
        }
    }

    TEST_CASE("scorecards round-trip through their file format") {
        Rng rng(77);
        for (int trial = 0; trial < 20; ++trial) {
            const Trajectory t = proctrace::testing::random_tool_trajectory(rng, 10);
            std::vector<CalibratedFinding> f;
            for (DefectClass d : kAllDefects) {
                const double r = rng.uniform();
                CalibratedFinding x = calibrated(d, r, band_severity(r, SeverityBands{}));
                x.raw.evidence.score = rng.uniform();
                x.raw.evidence.features["k"] = rng.uniform();
                x.raw.evidence.supporting_spans = {{1, 3}};
                x.raw.threshold = 0.5;
                x.raw.triggered = x.raw.evidence.score >= 0.5;
                f.push_back(x);
            }
            const Scorecard s = build_scorecard(t, f, rng.uniform());
            const std::string bytes = serialize_scorecard(s);
            const Scorecard back = parse_scorecard(bytes);
            CHECK(back == s);
            CHECK(serialize_scorecard(back) == bytes);
        }
    }
}

TEST_SUITE("scenario scores") {
    TEST_CASE("a single trajectory reports its own summary") {
        const ScenarioTable t = scenario_scores(std::map<std::string, std::vector<Scorecard>>{{"web", {card("w", 0.61)}}});
        REQUIRE(t.rows.size() == 1);
        CHECK(t.rows[0].mean_pb == doctest::Approx(0.61));
        CHECK(t.overall.mean_pb == doctest::Approx(0.61));
    }

    TEST_CASE("two equal-size groups at 0.7 and 0.8 give 0.75 overall") {
        std::map<std::string, std::vector<Scorecard>> g;
        g["a"] = {card("a", 0.6), card("a", 0.8)};
        g["b"] = {card("b", 0.75), card("b", 0.85)};
        const ScenarioTable t = scenario_scores(g);
        REQUIRE(t.rows.size() == 2);
        CHECK(t.rows[0].mean_pb == doctest::Approx(0.7));
        CHECK(t.rows[1].mean_pb == doctest::Approx(0.8));
        CHECK(t.overall.mean_pb == doctest::Approx(0.75));
        CHECK(t.overall.count == 4);
    }

    TEST_CASE("an empty group is skipped with a note") {
        std::map<std::string, std::vector<Scorecard>> g;
        g["a"] = {card("a", 0.5)};
        g["empty"] = {};
        const ScenarioTable t = scenario_scores(g);
        CHECK(t.rows.size() == 1);
        REQUIRE(t.notes.size() == 1);
        CHECK(t.notes[0].find("empty") != std::string::npos);
    }

    TEST_CASE("identical scorecards give identical group means") {
        std::vector<Scorecard> cards;
        for (Source s : {Source::terminal, Source::swebench, Source::android}) {
            Scorecard c = card("x", 0.66);
            c.source = s;
            cards.push_back(c);
        }
        const ScenarioTable t = scenario_scores(cards);
        CHECK(t.rows.size() == 3);
        for (const ScenarioRow& r : t.rows) CHECK(r.mean_pb == doctest::Approx(0.66));
        CHECK(t.overall.mean_pb == doctest::Approx(0.66));
    }
}
