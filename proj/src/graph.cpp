// SPDX-License-Identifier: Apache-2.0

#include "proctrace/graph.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "proctrace/text.hpp"

namespace proctrace {

std::string_view to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::data_flow: return "data_flow";
        case EdgeKind::parent: return "parent";
        case EdgeKind::unit_call: return "unit_call";
    }
    return "?";
}

std::optional<std::size_t> DependencyGraph::unit_position(std::string_view unit) const {
    auto it = std::lower_bound(units.begin(), units.end(), unit);
    if (it == units.end() || *it != unit) return std::nullopt;
    return static_cast<std::size_t>(it - units.begin());
}

bool DependencyGraph::has_edge(std::size_t from, std::size_t to, EdgeKind kind) const {
    return std::find(edges.begin(), edges.end(), GraphEdge{from, to, kind}) != edges.end();
}

std::size_t DependencyGraph::count(EdgeKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [kind](const GraphEdge& e) { return e.kind == kind; }));
}

std::vector<std::size_t> DependencyGraph::data_flow_targets(std::size_t i) const {
    std::vector<std::size_t> out;
    for (const GraphEdge& e : edges) {
        if (e.kind == EdgeKind::data_flow && e.from == i) out.push_back(e.to);
    }
    return out;
}

std::vector<Delegation> unit_delegations(const Trajectory& t) {
    std::vector<Delegation> out;
    for (const Event& e : t.events) {
        const auto& parent = e.dependency.parent_index;
        if (!parent || !e.dependency.unit_id) continue;
        const auto& parent_unit = t.events[*parent].dependency.unit_id;
        if (parent_unit && *parent_unit != *e.dependency.unit_id) {
            out.push_back({e.index, *parent_unit, *e.dependency.unit_id});
        }
    }
    return out;
}

DependencyGraph build_dependency_graph(const Trajectory& t, const GraphOptions& opts) {
    DependencyGraph g;
    g.event_count = t.events.size();

    std::set<std::string> units;
    for (const Event& e : t.events) {
        if (e.dependency.unit_id) units.insert(*e.dependency.unit_id);
    }
    g.units.assign(units.begin(), units.end());

    for (const Event& e : t.events) {
        if (e.dependency.parent_index) g.edges.push_back({*e.dependency.parent_index, e.index, EdgeKind::parent});
    }

    std::vector<TokenSet> consumers;
    consumers.reserve(t.events.size());
    for (const Event& e : t.events) consumers.push_back(consumer_tokens(e));

    for (const Event& r : t.events) {
        if (r.type != EventType::tool_result) continue;
        const TokenSet produced = normalize_tokens(r.payload);
        if (produced.empty()) continue;
        const std::size_t need = std::min(opts.min_shared_tokens, produced.size());
        for (std::size_t j = r.index + 1; j < t.events.size(); ++j) {
            if (t.events[j].type == EventType::tool_result) continue;
            const TokenSet& consumed = consumers[j];
            if (consumed.empty()) continue;
            if (intersection_size(produced, consumed) < need) continue;
            if (overlap_coefficient(produced, consumed) >= opts.data_flow_overlap) {
                g.edges.push_back({r.index, j, EdgeKind::data_flow});
            }
        }
    }

    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const Delegation& d : unit_delegations(t)) {
        const std::size_t from = g.unit_node(*g.unit_position(d.from_unit));
        const std::size_t to = g.unit_node(*g.unit_position(d.to_unit));
        if (seen.insert({from, to}).second) g.edges.push_back({from, to, EdgeKind::unit_call});
    }
    return g;
}

std::vector<std::vector<std::size_t>> strongly_connected_components(
    const std::vector<std::vector<std::size_t>>& adjacency) {
    const std::size_t n = adjacency.size();
    constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
    std::vector<std::size_t> number(n, kUnvisited), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> components;
    std::size_t counter = 0;

    // Explicit call stack of (vertex, next successor position).
    std::vector<std::pair<std::size_t, std::size_t>> frames;
    for (std::size_t root = 0; root < n; ++root) {
        if (number[root] != kUnvisited) continue;
        frames.push_back({root, 0});
        number[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;

        while (!frames.empty()) {
            auto& [v, pos] = frames.back();
            if (pos < adjacency[v].size()) {
                const std::size_t w = adjacency[v][pos++];
                if (number[w] == kUnvisited) {
                    number[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], number[w]);
                }
                continue;
            }
            const std::size_t done = v;
            frames.pop_back();
            if (!frames.empty()) low[frames.back().first] = std::min(low[frames.back().first], low[done]);
            if (low[done] == number[done]) {
                std::vector<std::size_t> comp;
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp.push_back(w);
                } while (w != done);
                std::sort(comp.begin(), comp.end());
                components.push_back(std::move(comp));
            }
        }
    }
    std::sort(components.begin(), components.end());
    return components;
}

std::vector<SegmentStats> context_segment_stats(const Trajectory& t, const SegmentStatsOptions& opts) {
    struct Accumulator {
        SegmentStats stats;
        double occupancy_sum = 0.0;
    };
    std::vector<Accumulator> acc;
    std::map<std::string, std::size_t> position;

    for (const Event& e : t.events) {
        const double capacity = static_cast<double>(e.context.window_capacity);
        for (const ContextSegment& s : e.context.segments) {
            auto [it, inserted] = position.try_emplace(s.segment_id, acc.size());
            if (inserted) {
                Accumulator a;
                a.stats.segment_id = s.segment_id;
                a.stats.tag = s.tag;
                a.stats.created_at = s.created_at;
                acc.push_back(std::move(a));
            }
            Accumulator& a = acc[it->second];
            a.stats.last_present = e.index;
            a.stats.present_events += 1;
            a.occupancy_sum += static_cast<double>(s.token_count) / capacity;
        }
    }

    std::vector<TokenSet> consumers;
    consumers.reserve(t.events.size());
    for (const Event& e : t.events) consumers.push_back(consumer_tokens(e));

    std::vector<SegmentStats> out;
    out.reserve(acc.size());
    for (Accumulator& a : acc) {
        SegmentStats& s = a.stats;
        s.occupancy = a.occupancy_sum / static_cast<double>(s.present_events);
        s.persistence = s.last_present >= s.created_at ? s.last_present - s.created_at : 0;

        const TokenSet id_tokens = normalize_tokens(s.segment_id);
        const TokenSet content =
            s.created_at < t.events.size() ? normalize_tokens(t.events[s.created_at].payload) : TokenSet{};
        for (std::size_t j = s.created_at + 1; j <= s.last_present; ++j) {
            const TokenSet& c = consumers[j];
            const bool by_id = !id_tokens.empty() && intersection_size(id_tokens, c) == id_tokens.size();
            const bool by_content = content.size() >= opts.reference_overlap_tokens &&
                                    intersection_size(content, c) >= opts.reference_overlap_tokens;
            if (by_id || by_content) ++s.references;
        }
        s.reference_rate =
            static_cast<double>(s.references) / static_cast<double>(std::max<std::size_t>(s.persistence, 1));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace proctrace
