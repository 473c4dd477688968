// SPDX-License-Identifier: Apache-2.0

// Synthetic trajectories with labeled defect injection. A clean baseline
// keeps every detector below its default threshold; each injector then
// builds a minimal instance of one defect pattern whose strength grows
// with the injection intensity.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "proctrace/calibration.hpp"
#include "proctrace/defect.hpp"
#include "proctrace/detectors.hpp"
#include "proctrace/evaluation.hpp"
#include "proctrace/trajectory.hpp"

namespace proctrace {

enum class Topology { flat, tree, cyclic };

std::string_view to_string(Topology t);
std::optional<Topology> parse_topology(std::string_view s);

enum class ParamKind { path, symbol, directory, text };

struct PaletteTool {
    std::string name;
    std::string description;
    std::vector<std::pair<std::string, ParamKind>> params;
    std::set<std::string> capabilities;
    std::string verb;  // intent word used in the message that precedes a call
    std::optional<OpKind> op;          // external op performed by the call
    std::optional<Validation> verdict;  // verdict attached to the result
};

// read_file, search_code, run_tests, write_file, list_dir.
std::vector<PaletteTool> default_palette();
std::map<std::string, std::set<std::string>> default_intent_keywords();

struct Injection {
    DefectClass defect = DefectClass::duplicate_step;
    double intensity = 1.0;
    std::optional<double> location;  // preferred position as a fraction of the trajectory
    bool exempt_variant = false;     // build the exempted look-alike instead
};

struct SynthSpec {
    std::size_t min_events = 40;
    std::size_t max_events = 56;
    std::vector<PaletteTool> palette = default_palette();
    std::map<std::string, std::set<std::string>> intent_keywords = default_intent_keywords();
    Topology topology = Topology::tree;
    std::size_t units = 3;  // including the root unit
    std::uint64_t capacity = 100000;
    Source source = Source::synthetic;
    std::vector<Injection> injections;
    double injection_floor = 0.5;
    std::uint64_t seed = 0;

    // Throws ConfigError for an infeasible spec.
    void validate() const;
};

struct GroundTruth {
    std::array<AnnotationLabel, kDefectCount> labels = [] {
        std::array<AnnotationLabel, kDefectCount> l{};
        l.fill(AnnotationLabel::absent);
        return l;
    }();
    std::map<DefectClass, std::vector<Span>> spans;

    AnnotationLabel label(DefectClass d) const { return labels[ordinal(d)]; }
    bool operator==(const GroundTruth&) const = default;
};

struct Generated {
    Trajectory trajectory;
    GroundTruth truth;
};

// Deterministic in (spec, seed). Throws ConfigError for infeasible specs or
// injections that do not fit the generated shape.
Generated generate_trajectory(const SynthSpec& spec, std::uint64_t seed);

// Clean trajectory only (no injections).
Trajectory generate_clean(const SynthSpec& spec, std::uint64_t seed);

struct InjectionResult {
    Trajectory trajectory;
    std::vector<Span> spans;
};

// Defects with an exempted look-alike generator: ghost_context (retained
// summary segment) and duplicate_step (mutation between the calls).
bool has_exempt_variant(DefectClass d);

// Intensity 0 returns `t` unchanged. Throws ConfigError when the defect
// cannot be injected into this shape (e.g. coupling needs two units) or an
// exempt variant is requested for a defect without one.
InjectionResult inject_defect(const Trajectory& t, DefectClass defect, double intensity, std::uint64_t seed,
                              bool exempt_variant = false, std::optional<double> location = std::nullopt);

// Name and capability tags of the tool shadowed by weak_tool injection.
inline constexpr const char* kShadowedTool = "grep_lookup";

// Default detector config extended with the palette's capability tags and
// intent keywords, plus the shadowed tool when weak_tool is injected.
DetectorConfig detector_config_for(const SynthSpec& spec, const DetectorConfig& base = {});

// Inserts events before position `pos` (>= 1), shifting later indices,
// parents and segment positions. New events take the context of the event
// before `pos`; their parent_index values are final indices. Spans in
// `spans` are shifted alongside.
void insert_events(Trajectory& t, std::size_t pos, std::vector<Event> events,
                   std::vector<std::vector<Span>*> spans = {});

// Labeled (score, context, label) tuples for calibration studies. Labels
// follow a context-dependent logistic link of the score.
struct LabeledScore {
    DefectClass defect = DefectClass::ghost_context;
    double score = 0.0;
    CalibrationContext context;
    int label = 0;
};

std::vector<LabeledScore> generate_labeled_scores(std::size_t count, std::uint64_t seed);

// Probability of a positive label under the generator's link.
double labeled_score_link(DefectClass d, const CalibrationContext& ctx, double score);

}  // namespace proctrace
