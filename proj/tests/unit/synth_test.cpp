// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "proctrace/canonical.hpp"
#include "proctrace/detectors.hpp"
#include "proctrace/errors.hpp"
#include "proctrace/graph.hpp"
#include "proctrace/report.hpp"
#include "proctrace/synth.hpp"
#include "support.hpp"

using namespace proctrace;

namespace {

SynthSpec with(DefectClass d, double intensity, bool exempt = false) {
    SynthSpec spec;
    spec.injections = {{d, intensity, std::nullopt, exempt}};
    return spec;
}

double mean_score(DefectClass d, double intensity, std::uint64_t seeds) {
    const SynthSpec spec = with(d, intensity);
    const DetectorConfig cfg = detector_config_for(spec);
    double sum = 0.0;
    for (std::uint64_t s = 0; s < seeds; ++s) sum += detect(d, generate_trajectory(spec, s).trajectory, cfg).evidence.score;
    return sum / static_cast<double>(seeds);
}

}  // namespace

TEST_SUITE("synthetic generation") {
    TEST_CASE("no injections give an all-absent truth") {
        const Generated g = generate_trajectory(SynthSpec{}, 3);
        for (DefectClass d : kAllDefects) CHECK(g.truth.label(d) == AnnotationLabel::absent);
        CHECK(g.truth.spans.empty());
    }

    TEST_CASE("an injected duplicate leaves an exact pair the oracle finds") {
        const SynthSpec spec = with(DefectClass::duplicate_step, 1.0);
        const DetectorConfig cfg = detector_config_for(spec);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Generated g = generate_trajectory(spec, seed);
            CHECK(proctrace::testing::duplicate_calls_oracle(g.trajectory, cfg.duplicate) >= 2);
            CHECK(g.truth.label(DefectClass::duplicate_step) == AnnotationLabel::present);
            REQUIRE(g.truth.spans.count(DefectClass::duplicate_step) == 1);
            CHECK_FALSE(g.truth.spans.at(DefectClass::duplicate_step).empty());
        }
    }

    TEST_CASE("an injected ghost segment is never referenced and stays for most events") {
        const SynthSpec spec = with(DefectClass::ghost_context, 1.0);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Trajectory t = generate_trajectory(spec, seed).trajectory;
            bool found = false;
            for (const SegmentStats& s : context_segment_stats(t)) {
                if (s.tag != SegmentTag::raw_content || s.reference_rate != 0.0) continue;
                if (static_cast<double>(s.persistence) >= 0.8 * static_cast<double>(t.events.size() - 1)) found = true;
            }
            CHECK(found);
        }
    }

    TEST_CASE("intensity zero leaves the trajectory unchanged") {
        const Trajectory clean = generate_clean(SynthSpec{}, 11);
        for (DefectClass d : kAllDefects) CHECK(inject_defect(clean, d, 0.0, 5).trajectory == clean);
    }

    TEST_CASE("coupling cannot be injected into a flat single-unit trajectory") {
        SynthSpec spec;
        spec.topology = Topology::flat;
        spec.units = 1;
        const Trajectory flat = generate_clean(spec, 2);
        CHECK_THROWS_AS(inject_defect(flat, DefectClass::context_coupling, 1.0, 2), ConfigError);
    }

    TEST_CASE("a cyclic topology with one unit is infeasible") {
        SynthSpec spec;
        spec.topology = Topology::cyclic;
        spec.units = 1;
        CHECK_THROWS_AS(spec.validate(), ConfigError);
        CHECK_THROWS_AS(generate_trajectory(spec, 0), ConfigError);
    }

    TEST_CASE("exempt variants exist only for ghost and duplicate") {
        for (DefectClass d : kAllDefects) {
            const bool supported = d == DefectClass::ghost_context || d == DefectClass::duplicate_step;
            CHECK(has_exempt_variant(d) == supported);
            if (!supported) CHECK_THROWS_AS(with(d, 1.0, true).validate(), ConfigError);
        }
    }

    TEST_CASE("the same spec and seed give identical output") {
        SynthSpec spec;
        spec.injections = {{DefectClass::dead_step, 0.8}, {DefectClass::long_chain, 1.0}};
        const Generated a = generate_trajectory(spec, 42), b = generate_trajectory(spec, 42);
        CHECK(canonical_serialize(a.trajectory) == canonical_serialize(b.trajectory));
        CHECK(a.truth == b.truth);
        CHECK(canonical_serialize(generate_trajectory(spec, 43).trajectory) != canonical_serialize(a.trajectory));
    }

    TEST_CASE("every injection at every intensity keeps the trajectory valid") {
        for (DefectClass d : kAllDefects) {
            for (double x : {0.25, 0.5, 0.75, 1.0}) {
                for (std::uint64_t seed = 0; seed < 5; ++seed) {
                    const Generated g = generate_trajectory(with(d, x), seed);
                    CHECK_NOTHROW(validate_trajectory(g.trajectory));
                    for (const Span& s : g.truth.spans.count(d) ? g.truth.spans.at(d) : std::vector<Span>{}) {
                        CHECK(s.first <= s.last);
                        CHECK(s.last < g.trajectory.events.size());
                    }
                }
            }
        }
    }

    TEST_CASE("labels follow the injection floor") {
        SynthSpec spec = with(DefectClass::dead_step, 0.5);
        CHECK(generate_trajectory(spec, 1).truth.label(DefectClass::dead_step) == AnnotationLabel::absent);
        spec.injections[0].intensity = 0.75;
        CHECK(generate_trajectory(spec, 1).truth.label(DefectClass::dead_step) == AnnotationLabel::present);
        spec = with(DefectClass::duplicate_step, 1.0, true);
        CHECK(generate_trajectory(spec, 1).truth.label(DefectClass::duplicate_step) == AnnotationLabel::exempt);
    }

    TEST_CASE("exempt look-alikes are recognized as exempt by the detectors") {
        for (DefectClass d : {DefectClass::ghost_context, DefectClass::duplicate_step}) {
            const SynthSpec spec = with(d, 1.0, true);
            const DetectorConfig cfg = detector_config_for(spec);
            for (std::uint64_t seed = 0; seed < 20; ++seed) {
                const RawFinding f = detect(d, generate_trajectory(spec, seed).trajectory, cfg);
                CHECK_FALSE(f.triggered);
                CHECK(f.exempted);
            }
        }
    }

    TEST_CASE("mean detector score does not fall as intensity rises") {
        for (DefectClass d : kAllDefects) {
            double prev = -1.0;
            for (double x : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                const double m = mean_score(d, x, 20);
                CHECK_MESSAGE(m >= prev - 1e-12, to_string(d), " at ", x);
                prev = m;
            }
        }
    }

    TEST_CASE("ground truth round-trips through its file format") {
        SynthSpec spec;
        spec.injections = {{DefectClass::weak_tool, 1.0}, {DefectClass::duplicate_step, 1.0, std::nullopt, true}};
        const Generated g = generate_trajectory(spec, 8);
        const std::string bytes = serialize_ground_truth(g.trajectory.trajectory_id, g.truth);
        CHECK(parse_ground_truth(bytes) == g.truth);
    }
}

TEST_SUITE("labeled scores") {
    TEST_CASE("generation is deterministic and labels follow the link on average") {
        const auto a = generate_labeled_scores(20000, 5), b = generate_labeled_scores(20000, 5);
        REQUIRE(a.size() == 20000);
        double expected = 0.0, observed = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].score == b[i].score);
            CHECK(a[i].label == b[i].label);
            expected += labeled_score_link(a[i].defect, a[i].context, a[i].score);
            observed += a[i].label;
        }
        CHECK(std::abs(expected - observed) / static_cast<double>(a.size()) < 0.01);
    }
}
