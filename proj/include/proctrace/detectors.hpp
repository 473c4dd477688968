// SPDX-License-Identifier: Apache-2.0

// Evidence extraction, scoring and activation for the eleven defect
// classes. Every detector is a pure function of (trajectory, config) that
// returns a score in [0, 1]; a finding triggers when the score reaches the
// class threshold and no exemption applies.

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "proctrace/defect.hpp"
#include "proctrace/graph.hpp"
#include "proctrace/trajectory.hpp"

namespace proctrace {

// Inclusive range of event indices.
struct Span {
    std::size_t first = 0;
    std::size_t last = 0;

    bool operator==(const Span&) const = default;
};

struct EvidenceRecord {
    DefectClass defect = DefectClass::ghost_context;
    std::map<std::string, double> features;
    double score = 0.0;
    std::vector<Span> supporting_spans;

    bool operator==(const EvidenceRecord&) const = default;
};

struct RawFinding {
    DefectClass defect = DefectClass::ghost_context;
    EvidenceRecord evidence;
    double threshold = 0.5;
    bool exempted = false;
    // Exemption rationale, or a note when the detector is inapplicable.
    std::string rationale;
    bool triggered = false;

    bool operator==(const RawFinding&) const = default;
};

struct GhostContextConfig {
    double occupancy_cap = 0.25;   // occupancy at which the occupancy term saturates
    double persistence_cap = 30;   // events
    double reference_cap = 0.20;   // references per event of persistence
    std::size_t reference_overlap_tokens = 5;
};

struct OversizedRulesConfig {
    double base = 0.25;
    double span = 0.50;
};

struct ThrashingConfig {
    double saturation = 0.90;  // fraction of window capacity
    double drop = 0.30;        // relative fall from the peak
    std::size_t delta = 3;     // events allowed between crossing and fall
    double cycle_cap = 5;      // cycles for a score of 1
};

struct DuplicateStepConfig {
    std::size_t window = 20;  // max event distance between the two calls
    double similarity = 0.9;  // token Jaccard
    std::set<std::string> time_varying_tools;
    std::set<std::string> batch_units;
};

struct ToolCallChainConfig {
    std::size_t max_period = 4;
    std::size_t min_reps = 3;
};

struct LongChainConfig {
    std::map<Source, double> baseline{
        {Source::android, 60}, {Source::terminal, 40}, {Source::swebench, 80},
        {Source::synthetic, 60}, {Source::other, 60},
    };
    double consolidation_unit = 25;  // events per expected stage marker or checkpoint
};

struct WrapperWorkflowConfig {
    std::size_t min_invocations = 3;
};

struct ContextCouplingConfig {
    double bidirectional_cap = 2;
    double pingpong_cap = 6;
    double scc_cap = 3;
    double w_bidirectional = 0.3;
    double w_pingpong = 0.3;
    double w_scc = 0.4;
    // A unit SCC of at least this size lifts the score to the threshold.
    std::size_t scc_force_size = 3;
};

struct ToolInterfaceConfig {
    double cluster_similarity = 0.5;
};

struct WeakToolConfig {
    // tool name -> capability tags
    std::map<std::string, std::set<std::string>> capabilities;
    // capability tag -> keywords that mark a message as an appropriate context
    std::map<std::string, std::set<std::string>> intent_keywords;
    double low_rate = 0.05;
    double alt_rate = 0.80;
};

struct DetectorConfig {
    std::array<double, kDefectCount> thresholds = [] {
        std::array<double, kDefectCount> t{};
        t.fill(0.5);
        return t;
    }();
    GraphOptions graph;
    GhostContextConfig ghost;
    OversizedRulesConfig rules;
    ThrashingConfig thrashing;
    DuplicateStepConfig duplicate;
    ToolCallChainConfig chain;
    LongChainConfig long_chain;
    WrapperWorkflowConfig wrapper;
    ContextCouplingConfig coupling;
    ToolInterfaceConfig interface;
    WeakToolConfig weak_tool;

    double threshold(DefectClass d) const { return thresholds[ordinal(d)]; }
    // Throws ConfigError when a threshold leaves [0, 1] or a window is zero.
    void validate() const;
};

RawFinding detect_ghost_context(const Trajectory& t, const DetectorConfig& cfg);
RawFinding detect_oversized_rules(const Trajectory& t, const DetectorConfig& cfg);
RawFinding detect_cw_thrashing(const Trajectory& t, const DetectorConfig& cfg);
RawFinding detect_duplicate_step(const Trajectory& t, const DetectorConfig& cfg);
RawFinding detect_tool_call_chain(const Trajectory& t, const DetectorConfig& cfg);
RawFinding detect_dead_step(const Trajectory& t, const DetectorConfig& cfg);
RawFinding detect_long_chain(const Trajectory& t, const DetectorConfig& cfg);
RawFinding detect_wrapper_workflow(const Trajectory& t, const DetectorConfig& cfg);
RawFinding detect_context_coupling(const Trajectory& t, const DetectorConfig& cfg);
RawFinding detect_inconsistent_tool_interface(const Trajectory& t, const DetectorConfig& cfg);
RawFinding detect_weak_tool(const Trajectory& t, const DetectorConfig& cfg);

RawFinding detect(DefectClass d, const Trajectory& t, const DetectorConfig& cfg);

// One finding per class, in kAllDefects order.
std::vector<RawFinding> detect_all(const Trajectory& t, const DetectorConfig& cfg);

// Building blocks exposed for tests and the synthetic generator.

// Longest run of the sequence that repeats a block of period <= max_period
// at least min_reps times; {length, period}, {0, 0} when none.
std::pair<std::size_t, std::size_t> longest_periodic_run(const std::vector<std::string>& seq,
                                                         std::size_t max_period, std::size_t min_reps);

// Saturation/compression cycles of the context series.
std::vector<Span> thrash_cycles(const Trajectory& t, const ThrashingConfig& cfg);

struct DuplicatePair {
    std::size_t first = 0;   // event index of the earlier tool_call
    std::size_t second = 0;  // event index of the later tool_call
    bool exempt = false;
    std::string reason;      // exemption reason when exempt
};

// Similar tool_call pairs inside the window, exempt or not.
std::vector<DuplicatePair> duplicate_pairs(const Trajectory& t, const DuplicateStepConfig& cfg);

struct UnitInvocation {
    std::string unit;
    std::size_t start = 0;  // event index of the delegation into the unit
    std::size_t end = 0;    // last event index attributed to the invocation
    std::size_t child_calls = 0;
    bool validates = false;
    bool routes = false;
    bool pass_through() const { return child_calls == 1 && !validates && !routes; }
};

std::vector<UnitInvocation> unit_invocations(const Trajectory& t);

struct CouplingFeatures {
    std::size_t bidirectional_pairs = 0;
    std::size_t longest_pingpong = 0;
    std::size_t largest_scc = 0;
};

CouplingFeatures coupling_features(const Trajectory& t);

}  // namespace proctrace
