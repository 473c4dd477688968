// SPDX-License-Identifier: Apache-2.0

#include "proctrace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "proctrace/errors.hpp"
#include "proctrace/rng.hpp"

namespace proctrace {

std::string_view to_string(Topology t) {
    switch (t) {
        case Topology::flat: return "flat";
        case Topology::tree: return "tree";
        case Topology::cyclic: return "cyclic";
    }
    return "?";
}

std::optional<Topology> parse_topology(std::string_view s) {
    if (s == "flat") return Topology::flat;
    if (s == "tree") return Topology::tree;
    if (s == "cyclic") return Topology::cyclic;
    return std::nullopt;
}

std::vector<PaletteTool> default_palette() {
    return {
        {"read_file", "Return the contents of one file", {{"path", ParamKind::path}}, {"read"}, "inspect",
         std::nullopt, std::nullopt},
        {"search_code", "Look up where a symbol occurs", {{"query", ParamKind::symbol}}, {"search"}, "locate",
         std::nullopt, std::nullopt},
        {"run_tests", "Execute the suite for a target", {{"target", ParamKind::path}}, {"test"}, "verify",
         std::nullopt, Validation::pass},
        {"write_file", "Replace a file on disk", {{"path", ParamKind::path}, {"content", ParamKind::text}}, {"edit"},
         "modify", OpKind::file_write, std::nullopt},
        {"list_dir", "Enumerate a directory", {{"path", ParamKind::directory}}, {"navigate"}, "browse", std::nullopt,
         std::nullopt},
    };
}

std::map<std::string, std::set<std::string>> default_intent_keywords() {
    return {
        {"read", {"inspect", "read", "open"}},     {"search", {"locate", "search", "find"}},
        {"test", {"verify", "test"}},              {"edit", {"modify", "edit", "change"}},
        {"navigate", {"browse", "list"}},
    };
}

void SynthSpec::validate() const {
    if (min_events < 3) throw ConfigError("synth: event_count must be at least 3");
    if (max_events < min_events) throw ConfigError("synth: max_events must not be below min_events");
    if (palette.empty()) throw ConfigError("synth: tool palette is empty");
    std::set<std::string> names;
    for (const PaletteTool& tool : palette) {
        if (tool.name.empty() || !names.insert(tool.name).second) {
            throw ConfigError("synth: palette tool names must be non-empty and unique");
        }
        if (tool.params.empty()) throw ConfigError("synth: palette tool '" + tool.name + "' has no parameters");
    }
    if (units < 1) throw ConfigError("synth: at least one unit is required");
    if (topology == Topology::cyclic && units < 2) throw ConfigError("synth: cyclic topology needs at least 2 units");
    if (capacity < 1000) throw ConfigError("synth: capacity must be at least 1000 tokens");
    if (!(injection_floor >= 0.0 && injection_floor <= 1.0)) throw ConfigError("synth: injection_floor must lie in [0, 1]");
    for (const Injection& inj : injections) {
        if (!(inj.intensity >= 0.0 && inj.intensity <= 1.0)) throw ConfigError("synth: intensities must lie in [0, 1]");
        if (inj.location && !(*inj.location >= 0.0 && *inj.location <= 1.0)) {
            throw ConfigError("synth: injection location must lie in [0, 1]");
        }
        if (inj.exempt_variant && !has_exempt_variant(inj.defect)) {
            throw ConfigError("synth: " + std::string(to_string(inj.defect)) + " has no exempt variant");
        }
    }
}

bool has_exempt_variant(DefectClass d) {
    return d == DefectClass::ghost_context || d == DefectClass::duplicate_step;
}

namespace {

constexpr std::uint64_t kRuleShare = 5;      // percent of capacity held by rules in a clean run
constexpr std::uint64_t kObservationTokens = 1200;
constexpr std::size_t kObservationLife = 4;  // events an observation stays in context
constexpr std::size_t kReviewEvery = 12;     // events between review markers

std::string hex_token(Rng& rng) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%06llx", static_cast<unsigned long long>(rng.bits() & 0xffffffULL));
    return buf;
}

[[noreturn]] void uninjectable(DefectClass d, const std::string& why) {
    throw ConfigError("uninjectable " + std::string(to_string(d)) + ": " + why);
}

Event make_event(EventType type, std::string payload, std::optional<std::string> unit) {
    Event e;
    e.type = type;
    e.payload = std::move(payload);
    e.dependency.unit_id = std::move(unit);
    return e;
}

std::string root_unit(const Trajectory& t) { return t.events.front().dependency.unit_id.value_or("main"); }

bool in_unit(const Event& e, const std::string& unit) { return e.dependency.unit_id && *e.dependency.unit_id == unit; }

std::optional<std::size_t> result_of(const Trajectory& t, std::size_t call) {
    for (std::size_t j = call + 1; j < t.events.size(); ++j) {
        const Event& e = t.events[j];
        if (e.type == EventType::tool_result && e.dependency.parent_index == call) return j;
    }
    return std::nullopt;
}

// Messages of the root unit that start a fresh step (no delegation into them).
std::vector<std::size_t> root_slots(const Trajectory& t) {
    const std::string root = root_unit(t);
    std::vector<std::size_t> out;
    for (const Event& e : t.events) {
        if (e.index < 2 || e.type != EventType::message || !in_unit(e, root)) continue;
        if (e.dependency.parent_index && !in_unit(t.events[*e.dependency.parent_index], root)) continue;
        out.push_back(e.index);
    }
    return out;
}

std::size_t last_root_before(const Trajectory& t, std::size_t pos) {
    const std::string root = root_unit(t);
    for (std::size_t i = pos; i-- > 0;) {
        if (in_unit(t.events[i], root)) return i;
    }
    return 0;
}

std::size_t pick_slot(const std::vector<std::size_t>& slots, Rng& rng, std::optional<double> location,
                      std::size_t n) {
    if (!location) return slots[rng.index(slots.size())];
    const double target = *location * static_cast<double>(n);
    return *std::min_element(slots.begin(), slots.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(static_cast<double>(a) - target) < std::abs(static_cast<double>(b) - target);
    });
}

// Arguments of an existing call of `tool`, for reusing its key set.
std::vector<std::string> argument_keys(const Trajectory& t, const std::string& tool) {
    for (const Event& e : t.events) {
        if (e.type != EventType::tool_call || e.tool->tool_name != tool) continue;
        std::vector<std::string> keys;
        for (const auto& [k, _] : e.tool->arguments) keys.push_back(k);
        return keys;
    }
    return {"target"};
}

// Tools whose calls carry no op and whose results carry no verdict.
std::vector<std::string> plain_tools(const Trajectory& t) {
    std::set<std::string> all, tainted;
    for (const Event& e : t.events) {
        if (e.type == EventType::tool_call) {
            all.insert(e.tool->tool_name);
            if (e.external) tainted.insert(e.tool->tool_name);
        } else if (e.type == EventType::tool_result) {
            const Event& call = t.events[*e.dependency.parent_index];
            if (e.has_verdict() || e.external) tainted.insert(call.tool->tool_name);
        }
    }
    std::vector<std::string> out;
    for (const std::string& name : all) {
        if (!tainted.count(name)) out.push_back(name);
    }
    return out;
}

void check_capacity(const Trajectory& t, DefectClass d) {
    for (const Event& e : t.events) {
        std::uint64_t sum = 0;
        for (const ContextSegment& s : e.context.segments) sum += s.token_count;
        if (sum > e.context.tokens_used || e.context.tokens_used > e.context.window_capacity) {
            uninjectable(d, "context would exceed the window capacity");
        }
    }
}

// Context after event i for generated events: rule segments carried from
// event 0 plus the observations of recent tool results.
void assign_context(Trajectory& t, std::size_t from, std::uint64_t capacity, const std::string& obs_suffix) {
    std::vector<ContextSegment> rules;
    if (from > 0) {
        for (const ContextSegment& s : t.events.front().context.segments) {
            if (s.tag == SegmentTag::rule_text) rules.push_back(s);
        }
    } else {
        rules.push_back({"rules", capacity * kRuleShare / 100, 0, std::nullopt, SegmentTag::rule_text});
    }
    for (std::size_t i = from; i < t.events.size(); ++i) {
        ContextState c;
        c.window_capacity = capacity;
        c.segments = rules;
        const std::size_t lo = i + 1 >= kObservationLife ? i + 1 - kObservationLife : 0;
        for (std::size_t r = std::max(lo, from); r <= i; ++r) {
            if (t.events[r].type != EventType::tool_result) continue;
            c.segments.push_back({"obs-" + std::to_string(r) + obs_suffix, kObservationTokens, r, std::nullopt,
                                  SegmentTag::raw_content});
        }
        std::uint64_t sum = 0;
        for (const ContextSegment& s : c.segments) sum += s.token_count;
        c.tokens_used = std::min<std::uint64_t>(capacity, sum + capacity / 40 + 30 * i);
        t.events[i].context = std::move(c);
    }
}

// Appends clean steps to a trajectory; shared by the generator and the
// long-chain injector.
class StepWriter {
public:
    StepWriter(Trajectory& t, const std::vector<PaletteTool>& palette, Rng& rng, std::string tag)
        : t_(t), palette_(palette), rng_(rng), tag_(std::move(tag)) {
        for (const Event& e : t.events) {
            if (e.type == EventType::tool_call) names_.push_back(e.tool->tool_name);
        }
        counts_.assign(palette.size(), 0);
        for (std::size_t k = 0; k < palette.size(); ++k) {
            counts_[k] = static_cast<std::size_t>(std::count(names_.begin(), names_.end(), palette[k].name));
        }
        // An unquoted trailing result is quoted by the next message.
        for (std::size_t i = t.events.size(); i-- > 0;) {
            const Event& e = t.events[i];
            if (e.type == EventType::message) break;
            if (e.type == EventType::tool_result) {
                pending_ = e.payload;
                break;
            }
        }
    }

    std::size_t push(Event e) {
        e.index = t_.events.size();
        t_.events.push_back(std::move(e));
        return t_.events.size() - 1;
    }

    // message + tool_call + tool_result in `unit`; returns the result index.
    std::size_t step(const std::string& unit, std::optional<std::size_t> parent) {
        const PaletteTool& tool = palette_[choose_tool()];
        ToolInvocation inv;
        inv.tool_name = tool.name;
        std::string primary;
        for (const auto& [key, kind] : tool.params) {
            const std::string v = value(kind);
            if (primary.empty()) primary = v;
            inv.arguments[key] = v;
        }
        Event m = make_event(EventType::message, take_quote() + "next: " + tool.verb + " " + primary, unit);
        m.dependency.parent_index = parent;
        const std::size_t mi = push(std::move(m));

        Event c = make_event(EventType::tool_call, "", unit);
        c.tool = std::move(inv);
        c.dependency.parent_index = mi;
        if (tool.op) c.external = ExternalOperation{*tool.op, primary};
        const std::size_t ci = push(std::move(c));

        Event r = make_event(EventType::tool_result, result_payload(tool, primary), unit);
        r.dependency.parent_index = ci;
        if (tool.verdict) r.validation = ValidationResult{*tool.verdict, "ok"};
        pending_ = r.payload;
        names_.push_back(tool.name);
        return push(std::move(r));
    }

    std::size_t message(const std::string& unit, const std::string& text, std::optional<std::size_t> parent) {
        Event m = make_event(EventType::message, take_quote() + text, unit);
        m.dependency.parent_index = parent;
        return push(std::move(m));
    }

    std::size_t marker(const std::string& unit, const std::string& text) {
        return push(make_event(EventType::control_marker, text, unit));
    }

private:
    std::string take_quote() {
        if (!pending_) return "";
        std::string q = "noted: " + *pending_ + ". ";
        pending_.reset();
        return q;
    }

    std::string value(ParamKind kind) {
        const std::string k = tag_ + std::to_string(++counter_);
        switch (kind) {
            case ParamKind::path: return "src/mod_" + k + ".py";
            case ParamKind::symbol: return "sym_" + k;
            case ParamKind::directory: return "pkg_" + k;
            case ParamKind::text: return "patch_" + k;
        }
        return k;
    }

    std::string result_payload(const PaletteTool& tool, const std::string& primary) {
        const std::string n = std::to_string(3 + rng_.index(400));
        const std::string h = hex_token(rng_);
        if (tool.verdict) return "suite " + primary + " finished " + n + " cases digest " + h;
        if (tool.op) return "stored " + n + " bytes at " + primary + " digest " + h;
        switch (tool.params.front().second) {
            case ParamKind::symbol: return "symbol " + primary + " appears at line " + n + " of module " + h;
            case ParamKind::directory: return "directory " + primary + " has " + n + " entries digest " + h;
            default: return "file " + primary + " holds " + n + " lines checksum " + h;
        }
    }

    // Random tool that keeps the call sequence free of periodic runs, leaning
    // towards the least used tools so every tool shows up.
    std::size_t choose_tool() {
        std::vector<std::size_t> allowed;
        for (std::size_t k = 0; k < palette_.size(); ++k) {
            std::vector<std::string> tail(names_.size() > 12 ? names_.end() - 12 : names_.begin(), names_.end());
            tail.push_back(palette_[k].name);
            if (longest_periodic_run(tail, 4, 3).first == 0) allowed.push_back(k);
        }
        if (allowed.empty()) {
            for (std::size_t k = 0; k < palette_.size(); ++k) allowed.push_back(k);
        }
        std::size_t pick = allowed[rng_.index(allowed.size())];
        if (rng_.bernoulli(0.5)) {
            pick = *std::min_element(allowed.begin(), allowed.end(),
                                     [&](std::size_t a, std::size_t b) { return counts_[a] < counts_[b]; });
        }
        ++counts_[pick];
        return pick;
    }

    Trajectory& t_;
    const std::vector<PaletteTool>& palette_;
    Rng& rng_;
    std::string tag_;
    std::vector<std::string> names_;
    std::vector<std::size_t> counts_;
    std::optional<std::string> pending_;
    std::size_t counter_ = 0;
};

// ---------------------------------------------------------------- injectors

std::vector<Span> inject_ghost(Trajectory& t, double x, Rng& rng, bool exempt, std::optional<double> location) {
    const std::size_t n = t.events.size();
    if (n < 4) uninjectable(DefectClass::ghost_context, "trajectory too short");
    std::size_t s = location ? static_cast<std::size_t>(std::lround(*location * static_cast<double>(n)))
                             : 1 + rng.index(std::max<std::size_t>(1, n / 20));
    s = std::clamp<std::size_t>(s, 1, n - 2);
    const std::string id = "ghost-" + std::to_string(s);
    insert_events(t, s, {make_event(EventType::context_op, "load " + id + " blob", root_unit(t))});

    const std::size_t total = t.events.size();
    const std::size_t last = std::max(s, total - 1 - total / 20);
    const std::uint64_t capacity = t.events[s].context.window_capacity;
    const auto tokens = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(0.3 * x * x * static_cast<double>(capacity))));
    for (std::size_t i = s; i <= last; ++i) {
        ContextState& c = t.events[i].context;
        c.segments.push_back({id, tokens, s, std::nullopt, exempt ? SegmentTag::retained_summary : SegmentTag::raw_content});
        c.tokens_used += tokens;
    }
    check_capacity(t, DefectClass::ghost_context);
    return {{s, last}};
}

std::vector<Span> inject_rules(Trajectory& t, double x) {
    const std::uint64_t capacity = t.events.front().context.window_capacity;
    const auto target = static_cast<std::uint64_t>(std::llround((0.05 + 0.55 * x) * static_cast<double>(capacity)));
    std::optional<std::string> id;
    for (const ContextSegment& s : t.events.front().context.segments) {
        if (s.tag == SegmentTag::rule_text) {
            id = s.segment_id;
            break;
        }
    }
    for (Event& e : t.events) {
        ContextState& c = e.context;
        auto it = id ? std::find_if(c.segments.begin(), c.segments.end(),
                                    [&](const ContextSegment& s) { return s.segment_id == *id; })
                     : c.segments.end();
        if (it == c.segments.end()) {
            if (id) continue;
            c.segments.push_back({"rules", target, 0, std::nullopt, SegmentTag::rule_text});
            c.tokens_used += target;
        } else {
            c.tokens_used = c.tokens_used - it->token_count + target;
            it->token_count = target;
        }
    }
    check_capacity(t, DefectClass::oversized_rules);
    return {{0, t.events.size() - 1}};
}

std::vector<Span> inject_thrash(Trajectory& t, double x) {
    const std::size_t cycles = static_cast<std::size_t>(std::floor(5.0 * x + 1e-9));
    const std::size_t n = t.events.size();
    std::vector<Span> spans;
    if (cycles == 0) return spans;
    const ThrashingConfig cfg;
    std::size_t prev = 0;
    for (std::size_t k = 0; k < cycles; ++k) {
        std::size_t i = static_cast<std::size_t>((static_cast<double>(k) + 0.5) * static_cast<double>(n) /
                                                 static_cast<double>(cycles));
        i = std::max<std::size_t>({i, 1, k == 0 ? 1 : prev + 3});
        if (i + 1 >= n) uninjectable(DefectClass::cw_thrashing, "trajectory too short for the requested cycles");
        ContextState& c = t.events[i].context;
        const auto spike = static_cast<std::uint64_t>(std::ceil(0.95 * static_cast<double>(c.window_capacity)));
        const auto util = [&](std::size_t j) {
            return static_cast<double>(t.events[j].context.tokens_used) /
                   static_cast<double>(t.events[j].context.window_capacity);
        };
        if (util(i - 1) > cfg.saturation || util(i + 1) > (1.0 - cfg.drop) * 0.95) {
            uninjectable(DefectClass::cw_thrashing, "context is already too full for a saw-tooth");
        }
        c.tokens_used = std::max(c.tokens_used, spike);
        spans.push_back({i, i + 1});
        prev = i;
    }
    check_capacity(t, DefectClass::cw_thrashing);
    return spans;
}

std::vector<Span> inject_duplicates(Trajectory& t, double x, Rng& rng, bool exempt) {
    std::vector<std::size_t> calls;
    for (const Event& e : t.events) {
        if (e.type == EventType::tool_call && result_of(t, e.index)) calls.push_back(e.index);
    }
    if (calls.empty()) uninjectable(DefectClass::duplicate_step, "no tool calls");
    const auto k = std::min(calls.size(), static_cast<std::size_t>(std::lround(x * x * static_cast<double>(calls.size()))));
    rng.shuffle(calls);
    calls.resize(k);
    std::sort(calls.rbegin(), calls.rend());

    std::vector<Span> spans;
    for (std::size_t c : calls) {
        const std::size_t r = *result_of(t, c);
        const std::size_t pos = r + 1;
        std::vector<Event> block;
        if (exempt) {
            Event w = make_event(EventType::external_op, "apply fix", t.events[c].dependency.unit_id);
            w.external = ExternalOperation{OpKind::file_write, "src/fix_" + std::to_string(c) + ".py"};
            block.push_back(std::move(w));
        }
        Event call = t.events[c];
        const std::size_t call_at = pos + block.size();
        block.push_back(call);
        Event result = t.events[r];
        result.dependency.parent_index = call_at;
        block.push_back(std::move(result));
        std::vector<Span>* tracked = &spans;
        insert_events(t, pos, std::move(block), {tracked});
        spans.push_back({c, call_at});
    }
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.first < b.first; });
    return spans;
}

// Stage markers at random root slots so long insertions keep the base
// trajectory's consolidation density.
void add_stage_markers(Trajectory& t, std::size_t inserted, Rng& rng, std::vector<Span>& spans) {
    const std::size_t count = (inserted + 23) / 24;
    for (std::size_t k = 0; k < count; ++k) {
        const auto slots = root_slots(t);
        if (slots.empty()) return;
        const std::size_t pos = slots[rng.index(slots.size())];
        Event stage = make_event(EventType::external_op, "stage closed", root_unit(t));
        stage.external = ExternalOperation{OpKind::stage_marker, ""};
        insert_events(t, pos, {std::move(stage)}, {&spans});
    }
}

std::vector<Span> inject_chain(Trajectory& t, double x, Rng& rng, std::optional<double> location) {
    std::size_t calls = 0;
    std::set<std::string> names;
    for (const Event& e : t.events) {
        if (e.type != EventType::tool_call) continue;
        ++calls;
        names.insert(e.tool->tool_name);
    }
    const auto slots = root_slots(t);
    if (names.empty() || slots.empty()) uninjectable(DefectClass::tool_call_chain, "no tool calls to repeat");
    const auto length = static_cast<std::size_t>(std::lround(2.0 * x * x * static_cast<double>(calls)));
    if (length == 0) return {};
    std::vector<std::string> pool(names.begin(), names.end());
    rng.shuffle(pool);
    const std::string a = pool[0];
    const std::string b = pool.size() > 1 ? pool[1] : pool[0];

    const std::size_t pos = pick_slot(slots, rng, location, t.events.size());
    const std::string unit = root_unit(t);
    const std::string target = "loop_" + hex_token(rng);
    std::vector<Event> block;
    for (std::size_t j = 0; j < length; ++j) {
        Event c = make_event(EventType::tool_call, "", unit);
        c.tool = ToolInvocation{j % 2 == 0 ? a : b, {{"attempt", std::to_string(j)}, {"target", target}}};
        block.push_back(std::move(c));
        Event r = make_event(EventType::tool_result, "attempt " + std::to_string(j) + " rejected", unit);
        r.dependency.parent_index = pos + 2 * j;
        r.validation = ValidationResult{Validation::fail, "rejected"};
        block.push_back(std::move(r));
    }
    insert_events(t, pos, std::move(block));
    std::vector<Span> spans{{pos, pos + 2 * length - 1}};
    add_stage_markers(t, 2 * length, rng, spans);
    return spans;
}

std::vector<Span> inject_dead(Trajectory& t, double x, Rng& rng) {
    std::size_t results = 0;
    for (const Event& e : t.events) results += e.type == EventType::tool_result ? 1 : 0;
    const auto tools = plain_tools(t);
    const auto slots = root_slots(t);
    if (tools.empty() || slots.empty()) uninjectable(DefectClass::dead_step, "no side-effect-free tool to orphan");
    const auto k = static_cast<std::size_t>(std::lround(2.0 * x * x * static_cast<double>(results)));

    std::vector<std::size_t> chosen;
    for (std::size_t j = 0; j < k; ++j) chosen.push_back(slots[j % slots.size()]);
    rng.shuffle(chosen);
    std::sort(chosen.rbegin(), chosen.rend());

    std::vector<Span> spans;
    const std::string unit = root_unit(t);
    for (std::size_t pos : chosen) {
        const std::string tool = tools[rng.index(tools.size())];
        ToolInvocation inv{tool, {}};
        for (const std::string& key : argument_keys(t, tool)) inv.arguments[key] = "orphan_" + hex_token(rng);
        Event c = make_event(EventType::tool_call, "", unit);
        c.tool = std::move(inv);
        Event r = make_event(EventType::tool_result, "orphan " + hex_token(rng) + " " + hex_token(rng) + " " +
                                                         hex_token(rng),
                             unit);
        r.dependency.parent_index = pos;
        insert_events(t, pos, {std::move(c), std::move(r)}, {&spans});
        spans.push_back({pos, pos + 1});
    }
    add_stage_markers(t, 2 * k, rng, spans);
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.first < b.first; });
    return spans;
}

std::vector<Span> inject_long_chain(Trajectory& t, double x, Rng& rng) {
    const double n_ref = DetectorConfig{}.long_chain.baseline.at(t.source);
    const auto target = static_cast<std::size_t>(std::ceil(n_ref * (1.0 + 1.5 * x * x)));

    // Drop consolidation markers, remapping indices.
    std::vector<std::size_t> remap(t.events.size());
    std::vector<Event> kept;
    for (Event& e : t.events) {
        const bool marker = e.has_op(OpKind::stage_marker) || e.has_op(OpKind::checkpoint);
        remap[e.index] = kept.size() > 0 ? kept.size() - (marker ? 1 : 0) : 0;
        if (!marker) kept.push_back(std::move(e));
    }
    for (Event& e : kept) {
        e.index = remap[e.index];
        if (e.dependency.parent_index) e.dependency.parent_index = remap[*e.dependency.parent_index];
        for (ContextSegment& s : e.context.segments) {
            s.created_at = std::min(remap[s.created_at], e.index);
            if (s.last_referenced_at) s.last_referenced_at = std::max(remap[*s.last_referenced_at], s.created_at);
        }
    }
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i].index = i;
    t.events = std::move(kept);

    const std::size_t start = t.events.size();
    if (start >= target) return {{0, t.events.size() - 1}};
    const auto palette = default_palette();
    StepWriter w(t, palette, rng, "x");
    const std::string unit = root_unit(t);
    while (t.events.size() + 4 <= target) w.step(unit, std::nullopt);
    while (t.events.size() + 1 < target) w.marker(unit, "review " + std::to_string(t.events.size()));
    w.message(unit, "done", std::nullopt);
    assign_context(t, start, t.events.front().context.window_capacity, "x");
    return {{0, t.events.size() - 1}};
}

std::vector<Span> inject_wrapper(Trajectory& t, double x, Rng& rng, std::optional<double> location) {
    constexpr std::size_t kInvocations = 6;
    const auto pass_count = static_cast<std::size_t>(std::floor(6.0 * x * x + 0.5));
    if (pass_count == 0) return {};
    const auto tools = plain_tools(t);
    const auto slots = root_slots(t);
    if (tools.empty() || slots.empty()) uninjectable(DefectClass::wrapper_workflow, "no slot or plain tool available");

    std::set<std::string> units;
    for (const Event& e : t.events) {
        if (e.dependency.unit_id) units.insert(*e.dependency.unit_id);
    }
    std::string relay = "relay";
    for (int k = 2; units.count(relay); ++k) relay = "relay" + std::to_string(k);

    std::vector<bool> pass(kInvocations, false);
    for (std::size_t j = 0; j < pass_count && j < kInvocations; ++j) pass[j] = true;
    rng.shuffle(pass);

    std::vector<std::size_t> positions;
    const std::size_t first = pick_slot(slots, rng, location, t.events.size());
    positions.push_back(first);
    std::vector<std::size_t> rest = slots;
    rng.shuffle(rest);
    for (std::size_t s : rest) {
        if (positions.size() >= kInvocations) break;
        if (s != first) positions.push_back(s);
    }
    while (positions.size() < kInvocations) positions.push_back(positions[positions.size() % slots.size()]);
    std::sort(positions.rbegin(), positions.rend());

    const std::string root = root_unit(t);
    std::vector<Span> spans;
    for (std::size_t j = 0; j < kInvocations; ++j) {
        const std::size_t pos = positions[j];
        std::vector<Event> block;
        Event m = make_event(EventType::message, "relay forwards job " + hex_token(rng), relay);
        m.dependency.parent_index = last_root_before(t, pos);
        block.push_back(std::move(m));
        std::string quote;
        const std::size_t calls = pass[j] ? 1 : 2;
        for (std::size_t c = 0; c < calls; ++c) {
            const std::string tool = tools[rng.index(tools.size())];
            ToolInvocation inv{tool, {}};
            for (const std::string& key : argument_keys(t, tool)) inv.arguments[key] = "relay_" + hex_token(rng);
            Event call = make_event(EventType::tool_call, "", relay);
            call.tool = std::move(inv);
            call.dependency.parent_index = pos;
            block.push_back(std::move(call));
            Event r = make_event(EventType::tool_result, "relayed " + hex_token(rng) + " " + hex_token(rng), relay);
            r.dependency.parent_index = pos + block.size() - 1;
            quote += r.payload + " ";
            block.push_back(std::move(r));
        }
        const std::size_t end = pos + block.size() - 1;
        block.push_back(make_event(EventType::message, "noted: " + quote, root));
        insert_events(t, pos, std::move(block), {&spans});
        if (pass[j]) spans.push_back({pos, end});
    }
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.first < b.first; });
    return spans;
}

std::vector<Span> inject_coupling(Trajectory& t, double x, Rng& rng, std::optional<double> location) {
    const std::string root = root_unit(t);
    std::set<std::string> children;
    for (const Event& e : t.events) {
        if (e.dependency.unit_id && *e.dependency.unit_id != root) children.insert(*e.dependency.unit_id);
    }
    if (children.empty()) uninjectable(DefectClass::context_coupling, "needs at least two units");
    const auto slots = root_slots(t);
    if (slots.empty()) uninjectable(DefectClass::context_coupling, "no slot available");
    const auto rounds = static_cast<std::size_t>(std::lround(6.0 * x * x));
    if (rounds == 0) return {};

    auto it = children.begin();
    std::string a = *it, b;
    if (children.size() >= 2) {
        b = *std::next(it);
    } else {
        b = a;
        a = root;
    }
    const std::size_t pos = pick_slot(slots, rng, location, t.events.size());
    std::vector<Event> block;
    Event first = make_event(EventType::message, "handoff 0 from " + a, a);
    if (a != root) first.dependency.parent_index = last_root_before(t, pos);
    first.dependency.branch_id = "route-0";
    block.push_back(std::move(first));
    for (std::size_t j = 1; j <= rounds; ++j) {
        const std::string& unit = j % 2 == 1 ? b : a;
        Event m = make_event(EventType::message, "handoff " + std::to_string(j) + " from " + unit, unit);
        m.dependency.parent_index = pos + j - 1;
        m.dependency.branch_id = "route-" + std::to_string(j);
        block.push_back(std::move(m));
    }
    const std::size_t end = pos + block.size() - 1;
    insert_events(t, pos, std::move(block));
    (void)rng;
    return {{pos, end}};
}

std::vector<Span> inject_interface(Trajectory& t, double x, Rng& rng, std::optional<double> location) {
    const auto slots = root_slots(t);
    if (slots.empty()) uninjectable(DefectClass::inconsistent_tool_interface, "no slot available");
    const auto mismatches = std::min<std::size_t>(4, static_cast<std::size_t>(std::floor(4.0 * x * x + 0.5)));
    std::vector<std::size_t> facets{0, 1, 2, 3};  // names, types, output, error
    rng.shuffle(facets);
    std::set<std::size_t> differ(facets.begin(), facets.begin() + static_cast<long>(mismatches));

    std::set<std::string> existing;
    for (const Event& e : t.events) {
        if (e.type == EventType::tool_call) existing.insert(e.tool->tool_name);
    }
    std::string base = "record";
    for (int k = 2; existing.count("fetch_" + base) || existing.count(base + "_fetch"); ++k) {
        base = "record" + std::to_string(k);
    }
    const std::string twin_a = "fetch_" + base, twin_b = base + "_fetch";

    const std::string unit = root_unit(t);
    const std::size_t pos = pick_slot(slots, rng, location, t.events.size());
    std::vector<Event> block;
    auto add = [&](Event e) {
        block.push_back(std::move(e));
        return pos + block.size() - 1;
    };
    auto use = [&](const std::string& tool, bool mismatched_twin) {
        const std::size_t id_ok = 10 + rng.index(900), id_bad = 1000 + rng.index(9000);
        const bool names = mismatched_twin && differ.count(0);
        const bool types = mismatched_twin && differ.count(1);
        const bool output = mismatched_twin && differ.count(2);
        const bool error = mismatched_twin && differ.count(3);
        auto args = [&](std::size_t id) {
            return std::map<std::string, std::string>{
                {names ? "record_id" : "id", types ? "r" + std::to_string(id) : std::to_string(id)}};
        };
        const std::size_t m = add(make_event(EventType::message, "next: consult record " + std::to_string(id_ok), unit));
        Event c1 = make_event(EventType::tool_call, "", unit);
        c1.tool = ToolInvocation{tool, args(id_ok)};
        c1.dependency.parent_index = m;
        const std::size_t c1i = add(std::move(c1));
        const std::string value = "v" + hex_token(rng);
        Event r1 = make_event(EventType::tool_result,
                              output ? "[" + std::to_string(id_ok) + ",\"" + value + "\"]"
                                     : "{\"id\":" + std::to_string(id_ok) + ",\"value\":\"" + value + "\"}",
                              unit);
        r1.dependency.parent_index = c1i;
        const std::string quote = r1.payload;
        add(std::move(r1));
        const std::size_t m2 = add(make_event(EventType::message, "noted: " + quote, unit));
        Event c2 = make_event(EventType::tool_call, "", unit);
        c2.tool = ToolInvocation{tool, args(id_bad)};
        c2.dependency.parent_index = m2;
        const std::size_t c2i = add(std::move(c2));
        Event r2 = make_event(EventType::tool_result,
                              error ? "failure: missing " + std::to_string(id_bad)
                                    : "{\"error\":\"missing " + std::to_string(id_bad) + "\"}",
                              unit);
        r2.dependency.parent_index = c2i;
        r2.validation = ValidationResult{Validation::fail, "missing record"};
        add(std::move(r2));
    };
    use(twin_a, false);
    use(twin_b, true);
    const std::size_t end = pos + block.size() - 1;
    insert_events(t, pos, std::move(block));
    t.metadata["tool." + twin_a + ".description"] = "Fetch one record by id";
    t.metadata["tool." + twin_b + ".description"] = "Fetch one record by id";
    return {{pos, end}};
}

std::vector<Span> inject_weak(Trajectory& t, double x, Rng& rng) {
    std::vector<std::pair<std::size_t, std::size_t>> contexts;  // (call, result)
    for (const Event& e : t.events) {
        if (e.type != EventType::tool_call || e.tool->tool_name != "search_code") continue;
        if (auto r = result_of(t, e.index)) contexts.push_back({e.index, *r});
    }
    if (contexts.empty()) uninjectable(DefectClass::weak_tool, "no search_code calls to shadow");
    const auto dropped = static_cast<std::size_t>(std::lround(x * x * static_cast<double>(contexts.size())));
    std::vector<bool> drop(contexts.size(), false);
    for (std::size_t j = 0; j < dropped; ++j) drop[j] = true;
    rng.shuffle(drop);

    std::vector<Span> spans;
    for (std::size_t j = contexts.size(); j-- > 0;) {
        const auto [c, r] = contexts[j];
        if (drop[j]) {
            spans.push_back({c, r});
            continue;
        }
        const Event& call = t.events[c];
        Event w = make_event(EventType::tool_call, "", call.dependency.unit_id);
        std::string query = call.tool->arguments.empty() ? "sym" : call.tool->arguments.begin()->second;
        w.tool = ToolInvocation{kShadowedTool, {{"pattern", query}}};
        w.dependency.parent_index = call.dependency.parent_index;
        Event res = make_event(EventType::tool_result, t.events[r].payload, call.dependency.unit_id);
        res.dependency.parent_index = r + 1;
        insert_events(t, r + 1, {std::move(w), std::move(res)}, {&spans});
    }
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.first < b.first; });
    return spans;
}

}  // namespace

void insert_events(Trajectory& t, std::size_t pos, std::vector<Event> events, std::vector<std::vector<Span>*> spans) {
    if (pos < 1 || pos > t.events.size()) throw ConfigError("insert position out of range");
    const std::size_t k = events.size();
    if (k == 0) return;
    auto shift = [&](std::size_t i) { return i >= pos ? i + k : i; };
    for (Event& e : t.events) {
        e.index = shift(e.index);
        if (e.dependency.parent_index) e.dependency.parent_index = shift(*e.dependency.parent_index);
        for (ContextSegment& s : e.context.segments) {
            s.created_at = shift(s.created_at);
            if (s.last_referenced_at) s.last_referenced_at = shift(*s.last_referenced_at);
        }
    }
    for (std::vector<Span>* list : spans) {
        for (Span& s : *list) {
            s.first = shift(s.first);
            s.last = shift(s.last);
        }
    }
    const ContextState context = t.events[pos - 1].context;
    for (std::size_t j = 0; j < k; ++j) {
        events[j].index = pos + j;
        events[j].context = context;
    }
    t.events.insert(t.events.begin() + static_cast<long>(pos), std::make_move_iterator(events.begin()),
                    std::make_move_iterator(events.end()));
}

InjectionResult inject_defect(const Trajectory& t, DefectClass defect, double intensity, std::uint64_t seed,
                              bool exempt_variant, std::optional<double> location) {
    if (!(intensity >= 0.0 && intensity <= 1.0)) throw ConfigError("intensity must lie in [0, 1]");
    if (exempt_variant && !has_exempt_variant(defect)) {
        throw ConfigError(std::string(to_string(defect)) + " has no exempt variant");
    }
    InjectionResult out{t, {}};
    if (intensity == 0.0) return out;
    Rng rng(seed, stream_id(to_string(defect)));
    Trajectory& u = out.trajectory;
    const double x = intensity;
    switch (defect) {
        case DefectClass::ghost_context: out.spans = inject_ghost(u, x, rng, exempt_variant, location); break;
        case DefectClass::oversized_rules: out.spans = inject_rules(u, x); break;
        case DefectClass::cw_thrashing: out.spans = inject_thrash(u, x); break;
        case DefectClass::duplicate_step: out.spans = inject_duplicates(u, x, rng, exempt_variant); break;
        case DefectClass::tool_call_chain: out.spans = inject_chain(u, x, rng, location); break;
        case DefectClass::dead_step: out.spans = inject_dead(u, x, rng); break;
        case DefectClass::long_chain: out.spans = inject_long_chain(u, x, rng); break;
        case DefectClass::wrapper_workflow: out.spans = inject_wrapper(u, x, rng, location); break;
        case DefectClass::context_coupling: out.spans = inject_coupling(u, x, rng, location); break;
        case DefectClass::inconsistent_tool_interface: out.spans = inject_interface(u, x, rng, location); break;
        case DefectClass::weak_tool: out.spans = inject_weak(u, x, rng); break;
    }
    validate_trajectory(u);
    return out;
}

Trajectory generate_clean(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed, stream_id("clean"));
    const std::size_t target = spec.min_events + rng.index(spec.max_events - spec.min_events + 1);
    const std::string root = "main";

    Trajectory t;
    t.trajectory_id = "synth-" + std::to_string(seed);
    t.source = spec.source;
    t.outcome = rng.bernoulli(0.7) ? Outcome::success : Outcome::failure;
    t.metadata["system"] = "synthetic";
    for (const PaletteTool& tool : spec.palette) {
        if (!tool.description.empty()) t.metadata["tool." + tool.name + ".description"] = tool.description;
    }

    StepWriter w(t, spec.palette, rng, "");
    w.push(make_event(EventType::message, "task: update module set " + hex_token(rng), root));
    if (target < 8) {
        while (t.events.size() < target) w.push(make_event(EventType::message, "note " + std::to_string(t.events.size()), root));
        assign_context(t, 0, spec.capacity, "");
        return t;
    }
    Event checkpoint = make_event(EventType::external_op, "checkpoint workspace", root);
    checkpoint.external = ExternalOperation{OpKind::checkpoint, ""};
    w.push(std::move(checkpoint));

    std::vector<std::string> children;
    if (spec.topology != Topology::flat) {
        for (std::size_t k = 1; k < spec.units; ++k) children.push_back("worker" + std::to_string(k));
    }
    const bool cyclic = spec.topology == Topology::cyclic;
    // A cyclic run ends with one worker handing control back to the root.
    const std::size_t reserve = 2 + (cyclic ? 6 : 0);
    std::size_t last_review = 0, reviews = 0;
    std::optional<std::size_t> last_root;
    std::set<std::string> idle_children(children.begin(), children.end());

    auto invoke_child = [&](std::string child) {
        idle_children.erase(child);
        w.step(child, *last_root);
        return w.step(child, std::nullopt);
    };

    while (true) {
        const std::size_t used = t.events.size();
        if (used + reserve >= target) break;
        const std::size_t room = target - reserve - used;
        if (used - last_review >= kReviewEvery) {
            // Every review point is an interruption point; every other one
            // also closes a stage.
            last_review = w.marker(root, "review point " + std::to_string(used));
            if (reviews++ % 2 == 1 && room >= 2) {
                Event stage = make_event(EventType::external_op, "stage " + std::to_string(reviews / 2) + " closed", root);
                stage.external = ExternalOperation{OpKind::stage_marker, ""};
                w.push(std::move(stage));
            }
            continue;
        }
        if (!children.empty() && last_root && room >= 6) {
            // Every worker is invoked at least once while room remains.
            const bool forced = !idle_children.empty() && room <= 6 * idle_children.size() + 3;
            if (forced || rng.bernoulli(0.3)) {
                invoke_child(forced ? *idle_children.begin() : children[rng.index(children.size())]);
                continue;
            }
        }
        if (room >= 3) {
            last_root = w.step(root, std::nullopt);
            continue;
        }
        w.marker(root, "idle " + std::to_string(used));
    }

    std::optional<std::size_t> final_parent;
    if (cyclic) {
        if (!last_root) {
            w.step(root, std::nullopt);
            last_root = t.events.size() - 1;
        }
        final_parent = invoke_child(children[rng.index(children.size())]);
    }
    w.message(root, "done", final_parent);
    w.marker(root, "session end");
    assign_context(t, 0, spec.capacity, "");
    validate_trajectory(t);
    return t;
}

Generated generate_trajectory(const SynthSpec& spec, std::uint64_t seed) {
    Generated g{generate_clean(spec, seed), {}};

    // Length changes first, then event insertions, then context-series edits.
    auto phase = [](DefectClass d) {
        if (d == DefectClass::long_chain) return 0;
        if (d == DefectClass::oversized_rules || d == DefectClass::cw_thrashing) return 2;
        return 1;
    };
    std::vector<std::size_t> order(spec.injections.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return phase(spec.injections[a].defect) < phase(spec.injections[b].defect);
    });

    for (std::size_t k : order) {
        const Injection& inj = spec.injections[k];
        const std::size_t before = g.trajectory.events.size();
        InjectionResult r = inject_defect(g.trajectory, inj.defect, inj.intensity, substream_seed(seed, k + 1),
                                          inj.exempt_variant, inj.location);
        // Earlier spans move with any events inserted before them.
        if (r.trajectory.events.size() != before) {
            for (auto& [d, spans] : g.truth.spans) {
                for (Span& s : spans) {
                    // Positions only move for insertion-style injectors, which
                    // keep original events in order; map by event identity.
                    auto relocate = [&](std::size_t i) {
                        const Event& old = g.trajectory.events[std::min(i, before - 1)];
                        for (std::size_t j = std::min(i, r.trajectory.events.size() - 1); j < r.trajectory.events.size(); ++j) {
                            Event probe = r.trajectory.events[j];
                            probe.index = old.index;
                            if (probe.type == old.type && probe.payload == old.payload && probe.tool == old.tool) return j;
                        }
                        return i;
                    };
                    s.first = relocate(s.first);
                    s.last = relocate(s.last);
                }
            }
        }
        g.trajectory = std::move(r.trajectory);
        auto& spans = g.truth.spans[inj.defect];
        spans.insert(spans.end(), r.spans.begin(), r.spans.end());
        AnnotationLabel label = AnnotationLabel::absent;
        if (inj.intensity > spec.injection_floor) {
            label = inj.exempt_variant ? AnnotationLabel::exempt : AnnotationLabel::present;
        }
        AnnotationLabel& slot = g.truth.labels[ordinal(inj.defect)];
        if (label == AnnotationLabel::present || (label == AnnotationLabel::exempt && slot == AnnotationLabel::absent)) {
            slot = label;
        }
    }
    return g;
}

DetectorConfig detector_config_for(const SynthSpec& spec, const DetectorConfig& base) {
    DetectorConfig cfg = base;
    for (const PaletteTool& tool : spec.palette) {
        if (!tool.capabilities.empty()) cfg.weak_tool.capabilities[tool.name] = tool.capabilities;
    }
    for (const auto& [tag, words] : spec.intent_keywords) cfg.weak_tool.intent_keywords[tag] = words;
    for (const Injection& inj : spec.injections) {
        if (inj.defect == DefectClass::weak_tool && inj.intensity > 0.0) {
            cfg.weak_tool.capabilities[kShadowedTool] = {"search"};
        }
    }
    return cfg;
}

double labeled_score_link(DefectClass d, const CalibrationContext& ctx, double score) {
    const std::string key = std::string(to_string(d)) + "/" + context_key(ctx);
    const double u1 = static_cast<double>(mix64(stream_id(key)) >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(mix64(stream_id(key) ^ 0x5bd1e995ULL) >> 11) * 0x1.0p-53;
    const double slope = 4.0 + 8.0 * u1;
    const double midpoint = 0.3 + 0.4 * u2;
    return 1.0 / (1.0 + std::exp(-slope * (score - midpoint)));
}

std::vector<LabeledScore> generate_labeled_scores(std::size_t count, std::uint64_t seed) {
    static constexpr std::array<Source, 5> kSources{Source::android, Source::terminal, Source::swebench,
                                                    Source::synthetic, Source::other};
    static constexpr std::array<Horizon, 3> kHorizons{Horizon::short_, Horizon::medium, Horizon::long_};
    Rng rng(seed, stream_id("labeled"));
    std::vector<LabeledScore> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        LabeledScore s;
        s.defect = kAllDefects[rng.index(kDefectCount)];
        s.context = {kSources[rng.index(kSources.size())], kHorizons[rng.index(kHorizons.size())]};
        s.score = rng.uniform();
        s.label = rng.bernoulli(labeled_score_link(s.defect, s.context, s.score)) ? 1 : 0;
        out.push_back(s);
    }
    return out;
}

}  // namespace proctrace
