// SPDX-License-Identifier: Apache-2.0

#include "proctrace/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "proctrace/errors.hpp"
#include "proctrace/text.hpp"

namespace proctrace {

namespace {

double clamp01(double x) {
    if (!(x > 0.0)) return 0.0;
    return x > 1.0 ? 1.0 : x;
}

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// `score` is the post-exemption score and `raw` the score before exemptions.
RawFinding make_finding(DefectClass d, const DetectorConfig& cfg, double score, double raw,
                        std::map<std::string, double> features, std::vector<Span> spans,
                        std::string exempt_reason = {}) {
    RawFinding f;
    f.defect = d;
    f.threshold = cfg.threshold(d);
    f.evidence.defect = d;
    f.evidence.score = clamp01(score);
    f.evidence.features = std::move(features);
    f.evidence.supporting_spans = std::move(spans);
    f.exempted = clamp01(raw) >= f.threshold && f.evidence.score < f.threshold;
    if (f.exempted) f.rationale = std::move(exempt_reason);
    f.triggered = f.evidence.score >= f.threshold && !f.exempted;
    return f;
}

double utilization(const Event& e) {
    return static_cast<double>(e.context.tokens_used) / static_cast<double>(e.context.window_capacity);
}

}  // namespace

void DetectorConfig::validate() const {
    for (DefectClass d : kAllDefects) {
        const double t = threshold(d);
        if (!(t >= 0.0 && t <= 1.0)) {
            throw ConfigError("threshold for " + std::string(to_string(d)) + " must lie in [0, 1]");
        }
    }
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
    };
    auto at_least_one = [](std::size_t v, const char* name) {
        if (v < 1) throw ConfigError(std::string(name) + " must be at least 1");
    };
    positive(ghost.occupancy_cap, "ghost.occupancy_cap");
    positive(ghost.persistence_cap, "ghost.persistence_cap");
    positive(ghost.reference_cap, "ghost.reference_cap");
    at_least_one(ghost.reference_overlap_tokens, "ghost.reference_overlap_tokens");
    positive(rules.span, "rules.span");
    positive(thrashing.saturation, "thrashing.saturation");
    positive(thrashing.cycle_cap, "thrashing.cycle_cap");
    at_least_one(thrashing.delta, "thrashing.delta");
    at_least_one(duplicate.window, "duplicate.window");
    at_least_one(chain.max_period, "chain.max_period");
    at_least_one(chain.min_reps, "chain.min_reps");
    positive(long_chain.consolidation_unit, "long_chain.consolidation_unit");
    for (const auto& [source, n] : long_chain.baseline) positive(n, "long_chain.baseline");
    at_least_one(wrapper.min_invocations, "wrapper.min_invocations");
    positive(coupling.bidirectional_cap, "coupling.bidirectional_cap");
    positive(coupling.pingpong_cap, "coupling.pingpong_cap");
    if (!(coupling.scc_cap > 1.0)) throw ConfigError("coupling.scc_cap must exceed 1");
    if (!(coupling.w_bidirectional + coupling.w_pingpong + coupling.w_scc > 0.0)) {
        throw ConfigError("coupling weights must not all be zero");
    }
    for (double s : {graph.data_flow_overlap, duplicate.similarity, interface.cluster_similarity,
                     thrashing.drop, weak_tool.low_rate, weak_tool.alt_rate}) {
        if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("similarity thresholds and rates must lie in [0, 1]");
    }
}

// ---------------------------------------------------------------- context

RawFinding detect_ghost_context(const Trajectory& t, const DetectorConfig& cfg) {
    const GhostContextConfig& g = cfg.ghost;
    const auto stats = context_segment_stats(t, {g.reference_overlap_tokens});

    double best = 0.0, best_raw = 0.0;
    const SegmentStats* best_seg = nullptr;
    const SegmentStats* best_raw_seg = nullptr;
    std::size_t exempt_segments = 0;
    for (const SegmentStats& s : stats) {
        const double occ = std::min(1.0, s.occupancy / g.occupancy_cap);
        const double per = std::min(1.0, static_cast<double>(s.persistence) / g.persistence_cap);
        const double ref = std::min(1.0, s.reference_rate / g.reference_cap);
        const double score = occ * per * (1.0 - ref);
        if (!best_raw_seg || score > best_raw) {
            best_raw = score;
            best_raw_seg = &s;
        }
        if (s.tag != SegmentTag::raw_content) {
            ++exempt_segments;
            continue;
        }
        if (!best_seg || score > best) {
            best = score;
            best_seg = &s;
        }
    }

    std::map<std::string, double> features{
        {"segments", static_cast<double>(stats.size())},
        {"exempt_segments", static_cast<double>(exempt_segments)},
    };
    const SegmentStats* shown = best_seg ? best_seg : best_raw_seg;
    std::vector<Span> spans;
    if (shown) {
        features["occupancy"] = shown->occupancy;
        features["persistence"] = static_cast<double>(shown->persistence);
        features["reference_rate"] = shown->reference_rate;
        features["references"] = static_cast<double>(shown->references);
    }
    features["raw_score"] = best_raw;
    const bool exempt_wins = best_raw_seg && best_raw > best;
    const SegmentStats* span_seg = exempt_wins ? best_raw_seg : best_seg;
    if (span_seg && std::max(best, best_raw) > 0.0) spans.push_back({span_seg->created_at, span_seg->last_present});

    std::string reason;
    if (exempt_wins) {
        reason = "segment '" + best_raw_seg->segment_id + "' is tagged " + std::string(to_string(best_raw_seg->tag));
    }
    return make_finding(DefectClass::ghost_context, cfg, best, best_raw, std::move(features), std::move(spans),
                        std::move(reason));
}

RawFinding detect_oversized_rules(const Trajectory& t, const DetectorConfig& cfg) {
    std::set<std::string> initial_rules;
    for (const ContextSegment& s : t.events.front().context.segments) {
        if (s.tag == SegmentTag::rule_text) initial_rules.insert(s.segment_id);
    }
    double total = 0.0;
    for (const Event& e : t.events) {
        std::uint64_t tokens = 0;
        for (const ContextSegment& s : e.context.segments) {
            if (s.tag == SegmentTag::rule_text && initial_rules.count(s.segment_id)) tokens += s.token_count;
        }
        total += static_cast<double>(tokens) / static_cast<double>(e.context.window_capacity);
    }
    const double rho = total / static_cast<double>(t.events.size());
    const double score = clamp01((rho - cfg.rules.base) / cfg.rules.span);
    std::vector<Span> spans;
    if (score > 0.0) spans.push_back({0, t.events.size() - 1});
    return make_finding(DefectClass::oversized_rules, cfg, score, score,
                        {{"rule_occupancy", rho}, {"rule_segments", static_cast<double>(initial_rules.size())}},
                        std::move(spans));
}

std::vector<Span> thrash_cycles(const Trajectory& t, const ThrashingConfig& cfg) {
    const std::size_t n = t.events.size();
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = utilization(t.events[i]);

    std::vector<Span> cycles;
    std::size_t i = 0;
    while (i < n) {
        const bool crossing = u[i] > cfg.saturation && (i == 0 || u[i - 1] <= cfg.saturation);
        if (crossing) {
            double peak = u[i];
            std::optional<std::size_t> fall;
            for (std::size_t j = i + 1; j < n && j <= i + cfg.delta; ++j) {
                if (u[j] <= (1.0 - cfg.drop) * peak) {
                    fall = j;
                    break;
                }
                peak = std::max(peak, u[j]);
            }
            if (fall) {
                cycles.push_back({i, *fall});
                i = *fall + 1;
                continue;
            }
        }
        ++i;
    }
    return cycles;
}

RawFinding detect_cw_thrashing(const Trajectory& t, const DetectorConfig& cfg) {
    std::vector<Span> cycles = thrash_cycles(t, cfg.thrashing);
    double peak = 0.0;
    for (const Event& e : t.events) peak = std::max(peak, utilization(e));
    const double count = static_cast<double>(cycles.size());
    const double score = std::min(1.0, count / cfg.thrashing.cycle_cap);
    return make_finding(DefectClass::cw_thrashing, cfg, score, score, {{"cycles", count}, {"peak_utilization", peak}},
                        std::move(cycles));
}

// ---------------------------------------------------------------- tool use

std::vector<DuplicatePair> duplicate_pairs(const Trajectory& t, const DuplicateStepConfig& cfg) {
    const std::size_t n = t.events.size();
    std::vector<std::size_t> calls;
    std::vector<std::optional<std::size_t>> result_of(n);
    for (const Event& e : t.events) {
        if (e.type == EventType::tool_call) calls.push_back(e.index);
        if (e.type == EventType::tool_result && !result_of[*e.dependency.parent_index]) {
            result_of[*e.dependency.parent_index] = e.index;
        }
    }
    std::vector<TokenSet> tokens(n);
    for (std::size_t c : calls) tokens[c] = tool_tokens(*t.events[c].tool);

    // Prefix counts of mutating ops for O(1) "mutation between" checks.
    std::vector<std::size_t> mutations(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& op = t.events[i].external;
        mutations[i + 1] = mutations[i] + (op && is_mutation(op->kind) ? 1 : 0);
    }

    std::vector<DuplicatePair> out;
    for (std::size_t x = 0; x < calls.size(); ++x) {
        for (std::size_t y = x + 1; y < calls.size(); ++y) {
            const std::size_t a = calls[x], b = calls[y];
            if (b - a > cfg.window) break;
            if (jaccard(tokens[a], tokens[b]) < cfg.similarity) continue;

            DuplicatePair p{a, b, false, {}};
            bool saw_pass = false, saw_fail = false;
            auto note = [&](const Event& e) {
                if (!e.validation) return;
                saw_pass |= e.validation->status == Validation::pass;
                saw_fail |= e.validation->status == Validation::fail;
            };
            for (std::size_t k = a + 1; k < b; ++k) note(t.events[k]);
            if (result_of[b]) note(t.events[*result_of[b]]);

            const Event& eb = t.events[b];
            const Event& ea = t.events[a];
            if (mutations[b] - mutations[a + 1] > 0) {
                p.exempt = true;
                p.reason = "rerun after a workspace mutation";
            } else if (saw_pass && saw_fail) {
                p.exempt = true;
                p.reason = "validation result changed between calls";
            } else if (cfg.time_varying_tools.count(eb.tool->tool_name)) {
                p.exempt = true;
                p.reason = "tool '" + eb.tool->tool_name + "' is time-varying";
            } else if (ea.dependency.unit_id && eb.dependency.unit_id &&
                       cfg.batch_units.count(*ea.dependency.unit_id) &&
                       cfg.batch_units.count(*eb.dependency.unit_id)) {
                p.exempt = true;
                p.reason = "calls inside batch unit '" + *eb.dependency.unit_id + "'";
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

RawFinding detect_duplicate_step(const Trajectory& t, const DetectorConfig& cfg) {
    std::size_t calls = 0;
    for (const Event& e : t.events) calls += e.type == EventType::tool_call ? 1 : 0;
    const auto pairs = duplicate_pairs(t, cfg.duplicate);

    std::set<std::size_t> dup_calls, all_calls;
    std::size_t dup_pairs = 0, exempt_pairs = 0;
    std::vector<Span> spans;
    std::string reason;
    for (const DuplicatePair& p : pairs) {
        all_calls.insert(p.first);
        all_calls.insert(p.second);
        if (p.exempt) {
            ++exempt_pairs;
            if (reason.empty()) reason = p.reason;
            continue;
        }
        ++dup_pairs;
        dup_calls.insert(p.first);
        dup_calls.insert(p.second);
        spans.push_back({p.first, p.second});
    }
    const double score = ratio(dup_calls.size(), calls);
    const double raw = ratio(all_calls.size(), calls);
    return make_finding(DefectClass::duplicate_step, cfg, score, raw,
                        {{"tool_calls", static_cast<double>(calls)},
                         {"duplicate_pairs", static_cast<double>(dup_pairs)},
                         {"duplicate_calls", static_cast<double>(dup_calls.size())},
                         {"exempt_pairs", static_cast<double>(exempt_pairs)},
                         {"raw_score", raw}},
                        std::move(spans), std::move(reason));
}

std::pair<std::size_t, std::size_t> longest_periodic_run(const std::vector<std::string>& seq,
                                                         std::size_t max_period, std::size_t min_reps) {
    std::pair<std::size_t, std::size_t> best{0, 0};
    const std::size_t m = seq.size();
    for (std::size_t p = 1; p <= max_period && p < m; ++p) {
        std::size_t run = 0;
        for (std::size_t k = 0; k + p < m; ++k) {
            run = seq[k] == seq[k + p] ? run + 1 : 0;
            const std::size_t length = run + p;
            if (run > 0 && length >= min_reps * p && length > best.first) best = {length, p};
        }
    }
    return best;
}

RawFinding detect_tool_call_chain(const Trajectory& t, const DetectorConfig& cfg) {
    std::vector<std::string> names;
    std::vector<std::size_t> where;
    for (const Event& e : t.events) {
        if (e.type != EventType::tool_call) continue;
        names.push_back(e.tool->tool_name);
        where.push_back(e.index);
    }
    const auto [length, period] = longest_periodic_run(names, cfg.chain.max_period, cfg.chain.min_reps);
    std::vector<Span> spans;
    if (length > 0) {
        // Locate the run again to report its event span.
        for (std::size_t start = 0; start + length <= names.size(); ++start) {
            bool periodic = true;
            for (std::size_t k = start; k + period < start + length && periodic; ++k) {
                periodic = names[k] == names[k + period];
            }
            if (periodic) {
                spans.push_back({where[start], where[start + length - 1]});
                break;
            }
        }
    }
    const double score = ratio(length, names.size());
    return make_finding(DefectClass::tool_call_chain, cfg, score, score,
                        {{"tool_calls", static_cast<double>(names.size())},
                         {"longest_run", static_cast<double>(length)},
                         {"period", static_cast<double>(period)}},
                        std::move(spans));
}

RawFinding detect_dead_step(const Trajectory& t, const DetectorConfig& cfg) {
    const DependencyGraph g = build_dependency_graph(t, cfg.graph);
    std::vector<bool> has_flow(t.events.size(), false), has_child(t.events.size(), false);
    for (const GraphEdge& e : g.edges) {
        if (e.kind == EdgeKind::data_flow) has_flow[e.from] = true;
        if (e.kind == EdgeKind::parent) has_child[e.from] = true;
    }

    std::size_t results = 0, dead = 0;
    std::vector<Span> spans;
    for (const Event& r : t.events) {
        if (r.type != EventType::tool_result) continue;
        ++results;
        const Event& call = t.events[*r.dependency.parent_index];
        const bool alive = has_flow[r.index] || has_child[r.index] || r.external || call.external ||
                           r.dependency.branch_id || call.dependency.branch_id || r.has_verdict();
        if (alive) continue;
        ++dead;
        spans.push_back({call.index, r.index});
    }
    const double score = ratio(dead, results);
    return make_finding(DefectClass::dead_step, cfg, score, score,
                        {{"tool_results", static_cast<double>(results)},
                         {"dead_results", static_cast<double>(dead)},
                         {"data_flow_edges", static_cast<double>(g.count(EdgeKind::data_flow))}},
                        std::move(spans));
}

RawFinding detect_long_chain(const Trajectory& t, const DetectorConfig& cfg) {
    const double n = static_cast<double>(t.events.size());
    auto it = cfg.long_chain.baseline.find(t.source);
    const double n_ref = it != cfg.long_chain.baseline.end() ? it->second : 60.0;
    std::size_t markers = 0;
    for (const Event& e : t.events) {
        if (e.has_op(OpKind::stage_marker) || e.has_op(OpKind::checkpoint)) ++markers;
    }
    const double expected = n / cfg.long_chain.consolidation_unit;
    const double consolidation = clamp01(static_cast<double>(markers) / expected);
    const double elongation = clamp01((n - n_ref) / n_ref);
    const double score = elongation * (1.0 - consolidation);
    std::vector<Span> spans;
    if (score > 0.0) spans.push_back({0, t.events.size() - 1});
    return make_finding(DefectClass::long_chain, cfg, score, score,
                        {{"events", n},
                         {"baseline", n_ref},
                         {"markers", static_cast<double>(markers)},
                         {"consolidation_rate", consolidation}},
                        std::move(spans));
}

// ---------------------------------------------------------------- workflow

std::vector<UnitInvocation> unit_invocations(const Trajectory& t) {
    const auto delegations = unit_delegations(t);
    std::vector<UnitInvocation> out;
    for (std::size_t d = 0; d < delegations.size(); ++d) {
        const std::string& unit = delegations[d].to_unit;
        UnitInvocation inv;
        inv.unit = unit;
        inv.start = delegations[d].event_index;
        // The invocation lasts until the next delegation into the same unit.
        std::size_t stop = t.events.size();
        for (std::size_t k = d + 1; k < delegations.size(); ++k) {
            if (delegations[k].to_unit == unit) {
                stop = delegations[k].event_index;
                break;
            }
        }
        inv.end = inv.start;
        for (std::size_t i = inv.start; i < stop; ++i) {
            const Event& e = t.events[i];
            const auto& u = e.dependency.unit_id;
            if (u && *u == unit) {
                inv.end = i;
                if (e.type == EventType::tool_call) ++inv.child_calls;
                if (e.has_verdict()) inv.validates = true;
                if (e.dependency.branch_id) inv.routes = true;
            }
        }
        for (std::size_t k = d + 1; k < delegations.size(); ++k) {
            const Delegation& out_d = delegations[k];
            if (out_d.event_index >= stop) break;
            if (out_d.from_unit == unit) {
                ++inv.child_calls;
                inv.end = std::max(inv.end, out_d.event_index);
            }
        }
        out.push_back(std::move(inv));
    }
    return out;
}

RawFinding detect_wrapper_workflow(const Trajectory& t, const DetectorConfig& cfg) {
    const auto invocations = unit_invocations(t);
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_unit;  // unit -> (invocations, pass-through)
    for (const UnitInvocation& inv : invocations) {
        auto& [count, pass] = per_unit[inv.unit];
        ++count;
        pass += inv.pass_through() ? 1 : 0;
    }
    double best = 0.0;
    std::string best_unit;
    std::size_t evaluated = 0;
    for (const auto& [unit, counts] : per_unit) {
        if (counts.first < cfg.wrapper.min_invocations) continue;
        ++evaluated;
        const double s = ratio(counts.second, counts.first);
        if (best_unit.empty() || s > best) {
            best = s;
            best_unit = unit;
        }
    }
    std::vector<Span> spans;
    std::size_t best_pass = 0, best_total = 0;
    for (const UnitInvocation& inv : invocations) {
        if (inv.unit != best_unit) continue;
        ++best_total;
        if (inv.pass_through()) {
            ++best_pass;
            if (best > 0.0) spans.push_back({inv.start, inv.end});
        }
    }
    return make_finding(DefectClass::wrapper_workflow, cfg, best, best,
                        {{"units_evaluated", static_cast<double>(evaluated)},
                         {"invocations", static_cast<double>(best_total)},
                         {"pass_through", static_cast<double>(best_pass)}},
                        std::move(spans));
}

CouplingFeatures coupling_features(const Trajectory& t) {
    const auto delegations = unit_delegations(t);
    std::map<std::string, std::size_t> ids;
    for (const Delegation& d : delegations) {
        ids.try_emplace(d.from_unit, 0);
        ids.try_emplace(d.to_unit, 0);
    }
    std::size_t next = 0;
    for (auto& [_, id] : ids) id = next++;

    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (const Delegation& d : delegations) edges.insert({ids[d.from_unit], ids[d.to_unit]});

    CouplingFeatures f;
    for (const auto& [a, b] : edges) {
        if (a < b && edges.count({b, a})) ++f.bidirectional_pairs;
    }

    std::size_t run = 0;
    for (std::size_t k = 0; k < delegations.size(); ++k) {
        const bool reverses = k > 0 && delegations[k].from_unit == delegations[k - 1].to_unit &&
                              delegations[k].to_unit == delegations[k - 1].from_unit;
        run = reverses ? run + 1 : 1;
        if (run >= 2) f.longest_pingpong = std::max(f.longest_pingpong, run);
    }

    std::vector<std::vector<std::size_t>> adjacency(ids.size());
    for (const auto& [a, b] : edges) adjacency[a].push_back(b);
    for (const auto& comp : strongly_connected_components(adjacency)) {
        f.largest_scc = std::max(f.largest_scc, comp.size());
    }
    return f;
}

RawFinding detect_context_coupling(const Trajectory& t, const DetectorConfig& cfg) {
    const ContextCouplingConfig& c = cfg.coupling;
    const CouplingFeatures f = coupling_features(t);
    const double bidir = std::min(1.0, static_cast<double>(f.bidirectional_pairs) / c.bidirectional_cap);
    const double pingpong = std::min(1.0, static_cast<double>(f.longest_pingpong) / c.pingpong_cap);
    const double scc =
        f.largest_scc <= 1 ? 0.0 : std::min(1.0, (static_cast<double>(f.largest_scc) - 1.0) / (c.scc_cap - 1.0));
    const double wsum = c.w_bidirectional + c.w_pingpong + c.w_scc;
    double score = (c.w_bidirectional * bidir + c.w_pingpong * pingpong + c.w_scc * scc) / wsum;
    if (f.largest_scc >= c.scc_force_size) score = std::max(score, cfg.threshold(DefectClass::context_coupling));

    std::vector<Span> spans;
    if (score > 0.0) {
        const auto delegations = unit_delegations(t);
        for (std::size_t k = 1; k < delegations.size(); ++k) {
            const Delegation& a = delegations[k - 1];
            const Delegation& b = delegations[k];
            if (b.from_unit == a.to_unit && b.to_unit == a.from_unit) spans.push_back({a.event_index, b.event_index});
        }
    }
    return make_finding(DefectClass::context_coupling, cfg, score, score,
                        {{"bidirectional_pairs", static_cast<double>(f.bidirectional_pairs)},
                         {"longest_pingpong", static_cast<double>(f.longest_pingpong)},
                         {"largest_scc", static_cast<double>(f.largest_scc)}},
                        std::move(spans));
}

// ---------------------------------------------------------------- ecosystem

namespace {

std::string value_type(const std::string& v) {
    if (v == "true" || v == "false") return "boolean";
    if (v.empty()) return "string";
    std::size_t pos = 0;
    if (v[0] == '-' || v[0] == '+') pos = 1;
    if (pos == v.size()) return "string";
    bool digits = true, dot = false;
    for (std::size_t i = pos; i < v.size(); ++i) {
        if (v[i] == '.' && !dot) {
            dot = true;
        } else if (v[i] < '0' || v[i] > '9') {
            digits = false;
            break;
        }
    }
    if (!digits) return "string";
    return dot ? "number" : "integer";
}

std::string output_shape(const std::string& payload) {
    const auto j = nlohmann::json::parse(payload, nullptr, false);
    if (j.is_discarded()) return "text";
    if (j.is_object()) {
        std::string keys;
        for (const auto& [k, _] : j.items()) keys += (keys.empty() ? "" : ",") + k;
        return "object{" + keys + "}";
    }
    if (j.is_array()) return "array";
    return "text";
}

template <typename C>
std::string join(const C& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
    return out;
}

struct Facets {
    std::map<std::string, std::size_t> names, types, output, error;
    std::size_t first_call = 0;
};

std::optional<std::string> mode(const std::map<std::string, std::size_t>& votes) {
    std::optional<std::string> best;
    std::size_t count = 0;
    for (const auto& [v, c] : votes) {
        if (c > count) {
            best = v;
            count = c;
        }
    }
    return best;
}

}  // namespace

RawFinding detect_inconsistent_tool_interface(const Trajectory& t, const DetectorConfig& cfg) {
    std::map<std::string, Facets> tools;
    for (const Event& e : t.events) {
        if (e.type == EventType::tool_call) {
            auto [it, inserted] = tools.try_emplace(e.tool->tool_name);
            if (inserted) it->second.first_call = e.index;
            std::vector<std::string> names, types;
            for (const auto& [k, v] : e.tool->arguments) {
                names.push_back(k);
                types.push_back(value_type(v));
            }
            std::sort(types.begin(), types.end());
            ++it->second.names[join(names)];
            ++it->second.types[join(types)];
        } else if (e.type == EventType::tool_result) {
            const Event& call = t.events[*e.dependency.parent_index];
            Facets& f = tools[call.tool->tool_name];
            const bool failed = e.validation && e.validation->status == Validation::fail;
            ++(failed ? f.error : f.output)[output_shape(e.payload)];
        }
    }

    std::vector<std::string> names;
    for (const auto& [name, _] : tools) names.push_back(name);
    const std::size_t m = names.size();

    auto description = [&](const std::string& tool) -> std::optional<std::string> {
        auto it = t.metadata.find("tool." + tool + ".description");
        if (it == t.metadata.end()) return std::nullopt;
        return it->second;
    };

    // Union-find over tools whose name or description similarity clears the bar.
    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            double sim = jaccard(identifier_words(names[a]), identifier_words(names[b]));
            const auto da = description(names[a]), db = description(names[b]);
            if (da && db) sim = std::max(sim, jaccard(normalize_tokens(*da), normalize_tokens(*db)));
            if (sim >= cfg.interface.cluster_similarity) parent[find(a)] = find(b);
        }
    }
    std::map<std::size_t, std::vector<std::size_t>> clusters;
    for (std::size_t a = 0; a < m; ++a) clusters[find(a)].push_back(a);

    double best = 0.0;
    std::size_t best_mismatched = 0, best_compared = 0, clustered = 0;
    const std::vector<std::size_t>* best_cluster = nullptr;
    for (const auto& [_, members] : clusters) {
        if (members.size() < 2) continue;
        clustered += members.size();
        std::size_t compared = 0, mismatched = 0;
        for (std::size_t x = 0; x < members.size(); ++x) {
            for (std::size_t y = x + 1; y < members.size(); ++y) {
                const Facets& fa = tools[names[members[x]]];
                const Facets& fb = tools[names[members[y]]];
                for (auto facet : {&Facets::names, &Facets::types, &Facets::output, &Facets::error}) {
                    const auto va = mode(fa.*facet), vb = mode(fb.*facet);
                    if (!va || !vb) continue;
                    ++compared;
                    mismatched += *va != *vb ? 1 : 0;
                }
            }
        }
        const double r = ratio(mismatched, compared);
        if (!best_cluster || r > best) {
            best = r;
            best_cluster = &members;
            best_mismatched = mismatched;
            best_compared = compared;
        }
    }
    std::vector<Span> spans;
    if (best_cluster && best > 0.0) {
        for (std::size_t k : *best_cluster) {
            const std::size_t i = tools[names[k]].first_call;
            spans.push_back({i, i});
        }
    }
    return make_finding(DefectClass::inconsistent_tool_interface, cfg, best, best,
                        {{"tools", static_cast<double>(m)},
                         {"clustered_tools", static_cast<double>(clustered)},
                         {"mismatched_facets", static_cast<double>(best_mismatched)},
                         {"compared_facets", static_cast<double>(best_compared)}},
                        std::move(spans));
}

RawFinding detect_weak_tool(const Trajectory& t, const DetectorConfig& cfg) {
    const WeakToolConfig& w = cfg.weak_tool;
    if (w.capabilities.empty() || w.intent_keywords.empty()) {
        RawFinding f = make_finding(DefectClass::weak_tool, cfg, 0.0, 0.0, {{"tools_evaluated", 0.0}}, {});
        f.rationale = "inapplicable";
        return f;
    }

    // A context is a message together with the tool calls that follow it
    // before the next message.
    struct Context {
        std::size_t message = 0;
        std::size_t end = 0;
        std::set<std::string> intents;
        std::set<std::string> invoked;
    };
    std::vector<Context> contexts;
    for (const Event& e : t.events) {
        if (e.type == EventType::message) {
            Context c;
            c.message = c.end = e.index;
            const TokenSet words = normalize_tokens(e.payload);
            for (const auto& [tag, keywords] : w.intent_keywords) {
                for (const std::string& k : keywords) {
                    if (std::binary_search(words.begin(), words.end(), k)) {
                        c.intents.insert(tag);
                        break;
                    }
                }
            }
            contexts.push_back(std::move(c));
        } else if (!contexts.empty()) {
            contexts.back().end = e.index;
            if (e.type == EventType::tool_call) contexts.back().invoked.insert(e.tool->tool_name);
        }
    }

    auto overlaps = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        return std::any_of(a.begin(), a.end(), [&](const std::string& s) { return b.count(s) > 0; });
    };

    double best = 0.0, best_own = 0.0, best_alt = 0.0;
    std::size_t evaluated = 0, weak = 0;
    std::string best_tool;
    for (const auto& [tool, tags] : w.capabilities) {
        std::vector<const Context*> relevant;
        for (const Context& c : contexts) {
            if (overlaps(c.intents, tags)) relevant.push_back(&c);
        }
        if (relevant.empty()) continue;
        ++evaluated;
        std::size_t used = 0;
        for (const Context* c : relevant) used += c->invoked.count(tool);
        const double own = ratio(used, relevant.size());
        double alt = 0.0;
        for (const auto& [other, other_tags] : w.capabilities) {
            if (other == tool || !overlaps(tags, other_tags)) continue;
            std::size_t covered = 0;
            for (const Context* c : relevant) covered += c->invoked.count(other);
            alt = std::max(alt, ratio(covered, relevant.size()));
        }
        if (own < w.low_rate && alt > w.alt_rate) ++weak;
        const double contribution = clamp01(alt - own);
        if (best_tool.empty() || contribution > best) {
            best = contribution;
            best_tool = tool;
            best_own = own;
            best_alt = alt;
        }
    }

    std::vector<Span> spans;
    if (best > 0.0) {
        const auto& tags = w.capabilities.at(best_tool);
        for (const Context& c : contexts) {
            if (overlaps(c.intents, tags) && !c.invoked.count(best_tool)) spans.push_back({c.message, c.end});
        }
    }
    return make_finding(DefectClass::weak_tool, cfg, best, best,
                        {{"tools_evaluated", static_cast<double>(evaluated)},
                         {"weak_tools", static_cast<double>(weak)},
                         {"own_rate", best_own},
                         {"alternative_coverage", best_alt}},
                        std::move(spans));
}

// ---------------------------------------------------------------- dispatch

RawFinding detect(DefectClass d, const Trajectory& t, const DetectorConfig& cfg) {
    switch (d) {
        case DefectClass::ghost_context: return detect_ghost_context(t, cfg);
        case DefectClass::oversized_rules: return detect_oversized_rules(t, cfg);
        case DefectClass::cw_thrashing: return detect_cw_thrashing(t, cfg);
        case DefectClass::duplicate_step: return detect_duplicate_step(t, cfg);
        case DefectClass::tool_call_chain: return detect_tool_call_chain(t, cfg);
        case DefectClass::dead_step: return detect_dead_step(t, cfg);
        case DefectClass::long_chain: return detect_long_chain(t, cfg);
        case DefectClass::wrapper_workflow: return detect_wrapper_workflow(t, cfg);
        case DefectClass::context_coupling: return detect_context_coupling(t, cfg);
        case DefectClass::inconsistent_tool_interface: return detect_inconsistent_tool_interface(t, cfg);
        case DefectClass::weak_tool: return detect_weak_tool(t, cfg);
    }
    return {};
}

std::vector<RawFinding> detect_all(const Trajectory& t, const DetectorConfig& cfg) {
    std::vector<RawFinding> out;
    out.reserve(kDefectCount);
    for (DefectClass d : kAllDefects) out.push_back(detect(d, t, cfg));
    return out;
}

}  // namespace proctrace
