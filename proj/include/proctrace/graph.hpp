// SPDX-License-Identifier: Apache-2.0

// Structures derived from a trajectory: the event/unit dependency graph,
// the ordered list of unit delegations, and per-segment context statistics.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proctrace/trajectory.hpp"

namespace proctrace {

enum class EdgeKind { data_flow, parent, unit_call };
std::string_view to_string(EdgeKind k);

struct GraphEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    EdgeKind kind = EdgeKind::parent;

    bool operator==(const GraphEdge&) const = default;
};

// Nodes [0, event_count) are events; node event_count + k is units[k].
struct DependencyGraph {
    std::size_t event_count = 0;
    std::vector<std::string> units;  // sorted
    std::vector<GraphEdge> edges;

    std::size_t node_count() const { return event_count + units.size(); }
    std::size_t unit_node(std::size_t k) const { return event_count + k; }
    std::optional<std::size_t> unit_position(std::string_view unit) const;
    bool has_edge(std::size_t from, std::size_t to, EdgeKind kind) const;
    std::size_t count(EdgeKind kind) const;
    // Targets of data_flow edges leaving event `i`.
    std::vector<std::size_t> data_flow_targets(std::size_t i) const;
};

struct GraphOptions {
    // Minimum overlap coefficient between a result's tokens and a later
    // event's payload/argument tokens for a data_flow edge.
    double data_flow_overlap = 0.6;
    // A data_flow edge also needs at least min(this, |result tokens|) shared tokens.
    std::size_t min_shared_tokens = 2;
};

// A delegation happens at event `event_index` whose unit differs from the
// unit of its parent event.
struct Delegation {
    std::size_t event_index = 0;
    std::string from_unit;
    std::string to_unit;

    bool operator==(const Delegation&) const = default;
};

std::vector<Delegation> unit_delegations(const Trajectory& t);

DependencyGraph build_dependency_graph(const Trajectory& t, const GraphOptions& opts = {});

// Tarjan's algorithm over an adjacency list; components are returned with
// their members sorted and the list ordered by smallest member.
std::vector<std::vector<std::size_t>> strongly_connected_components(
    const std::vector<std::vector<std::size_t>>& adjacency);

struct SegmentStats {
    std::string segment_id;
    SegmentTag tag = SegmentTag::raw_content;
    std::size_t created_at = 0;
    std::size_t last_present = 0;
    std::size_t present_events = 0;
    std::size_t references = 0;
    double occupancy = 0.0;       // mean token_count / window_capacity while present
    double reference_rate = 0.0;  // references / max(persistence, 1)
    std::size_t persistence = 0;  // last_present - created_at
};

struct SegmentStatsOptions {
    // Token overlap with the creating event's payload that counts as a reference.
    std::size_t reference_overlap_tokens = 5;
};

// One record per segment id, in order of first appearance.
std::vector<SegmentStats> context_segment_stats(const Trajectory& t, const SegmentStatsOptions& opts = {});

}  // namespace proctrace
