// SPDX-License-Identifier: Apache-2.0

#include "proctrace/canonical.hpp"

#include <json.hpp>

#include "proctrace/errors.hpp"

namespace proctrace {

using nlohmann::json;

namespace {

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }
json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

json event_to_json(const Event& e) {
    json segments = json::array();
    for (const ContextSegment& s : e.context.segments) {
        segments.push_back({
            {"id", s.segment_id},
            {"tokens", s.token_count},
            {"created_at", s.created_at},
            {"last_referenced_at", optional_index(s.last_referenced_at)},
            {"tag", to_string(s.tag)},
        });
    }
    json tool = nullptr;
    if (e.tool) {
        json args = json::object();
        for (const auto& [k, v] : e.tool->arguments) args[k] = v;
        tool = {{"name", e.tool->tool_name}, {"arguments", std::move(args)}};
    }
    json validation = nullptr;
    if (e.validation) validation = {{"status", to_string(e.validation->status)}, {"detail", e.validation->detail}};
    json external = nullptr;
    if (e.external) external = {{"kind", to_string(e.external->kind)}, {"target", e.external->target}};

    return {
        {"record", "event"},
        {"index", e.index},
        {"type", to_string(e.type)},
        {"payload", e.payload},
        {"tool", std::move(tool)},
        {"validation", std::move(validation)},
        {"external", std::move(external)},
        {"context",
         {{"tokens_used", e.context.tokens_used},
          {"window_capacity", e.context.window_capacity},
          {"segments", std::move(segments)}}},
        {"dependency",
         {{"parent_index", optional_index(e.dependency.parent_index)},
          {"branch_id", optional_string(e.dependency.branch_id)},
          {"unit_id", optional_string(e.dependency.unit_id)},
          {"agent_id", optional_string(e.dependency.agent_id)}}},
    };
}

// Field accessors that turn schema mismatches into ParseErrors on `line`.
class Reader {
public:
    Reader(const json& j, std::size_t line) : j_(j), line_(line) {}

    [[noreturn]] void fail(const std::string& why) const { throw ParseError(line_, why); }

    const json& field(const json& obj, const char* key) const {
        if (!obj.is_object()) fail(std::string("expected object holding '") + key + "'");
        auto it = obj.find(key);
        if (it == obj.end()) fail(std::string("missing field '") + key + "'");
        return *it;
    }
    std::string str(const json& obj, const char* key) const {
        const json& v = field(obj, key);
        if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    }
    std::optional<std::string> opt_str(const json& obj, const char* key) const {
        const json& v = field(obj, key);
        if (v.is_null()) return std::nullopt;
        if (!v.is_string()) fail(std::string("field '") + key + "' must be a string or null");
        return v.get<std::string>();
    }
    std::uint64_t count(const json& obj, const char* key) const {
        const json& v = field(obj, key);
        if (!v.is_number_unsigned()) fail(std::string("field '") + key + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }
    std::optional<std::size_t> opt_count(const json& obj, const char* key) const {
        const json& v = field(obj, key);
        if (v.is_null()) return std::nullopt;
        if (!v.is_number_unsigned()) fail(std::string("field '") + key + "' must be a non-negative integer or null");
        return static_cast<std::size_t>(v.get<std::uint64_t>());
    }
    template <typename E, typename Parse>
    E enumeration(const json& obj, const char* key, Parse parse) const {
        const std::string s = str(obj, key);
        auto v = parse(s);
        if (!v) fail(std::string("unknown ") + key + " '" + s + "'");
        return *v;
    }

    const json& root() const { return j_; }

private:
    const json& j_;
    std::size_t line_;
};

Event event_from_json(const Reader& r) {
    const json& j = r.root();
    if (r.str(j, "record") != "event") r.fail("expected an event record");
    Event e;
    e.index = static_cast<std::size_t>(r.count(j, "index"));
    e.type = r.enumeration<EventType>(j, "type", parse_event_type);
    e.payload = r.str(j, "payload");

    const json& tool = r.field(j, "tool");
    if (!tool.is_null()) {
        ToolInvocation inv;
        inv.tool_name = r.str(tool, "name");
        const json& args = r.field(tool, "arguments");
        if (!args.is_object()) r.fail("tool arguments must be an object");
        for (const auto& [k, v] : args.items()) {
            if (!v.is_string()) r.fail("tool argument '" + k + "' must be a string");
            inv.arguments.emplace(k, v.get<std::string>());
        }
        e.tool = std::move(inv);
    }

    const json& validation = r.field(j, "validation");
    if (!validation.is_null()) {
        e.validation = ValidationResult{r.enumeration<Validation>(validation, "status", parse_validation),
                                        r.str(validation, "detail")};
    }

    const json& external = r.field(j, "external");
    if (!external.is_null()) {
        e.external = ExternalOperation{r.enumeration<OpKind>(external, "kind", parse_op_kind),
                                       r.str(external, "target")};
    }

    const json& ctx = r.field(j, "context");
    e.context.tokens_used = r.count(ctx, "tokens_used");
    e.context.window_capacity = r.count(ctx, "window_capacity");
    const json& segments = r.field(ctx, "segments");
    if (!segments.is_array()) r.fail("context segments must be an array");
    for (const json& s : segments) {
        ContextSegment seg;
        seg.segment_id = r.str(s, "id");
        seg.token_count = r.count(s, "tokens");
        seg.created_at = static_cast<std::size_t>(r.count(s, "created_at"));
        seg.last_referenced_at = r.opt_count(s, "last_referenced_at");
        seg.tag = r.enumeration<SegmentTag>(s, "tag", parse_segment_tag);
        e.context.segments.push_back(std::move(seg));
    }

    const json& dep = r.field(j, "dependency");
    e.dependency.parent_index = r.opt_count(dep, "parent_index");
    e.dependency.branch_id = r.opt_str(dep, "branch_id");
    e.dependency.unit_id = r.opt_str(dep, "unit_id");
    e.dependency.agent_id = r.opt_str(dep, "agent_id");
    return e;
}

}  // namespace

std::string canonical_serialize(const Trajectory& t) {
    json metadata = json::object();
    for (const auto& [k, v] : t.metadata) metadata[k] = v;
    const json header = {
        {"record", "header"},
        {"format", kTrajectoryFormat},
        {"version", kTrajectoryFormatVersion},
        {"trajectory_id", t.trajectory_id},
        {"source", to_string(t.source)},
        {"outcome", to_string(t.outcome)},
        {"event_count", t.events.size()},
        {"metadata", std::move(metadata)},
    };
    std::string out = header.dump();
    out += '\n';
    for (const Event& e : t.events) {
        out += event_to_json(e).dump();
        out += '\n';
    }
    return out;
}

Trajectory canonical_parse(std::string_view bytes) {
    Trajectory t;
    std::size_t line_no = 0;
    std::size_t expected_events = 0;
    std::size_t pos = 0;
    bool have_header = false;

    while (pos < bytes.size()) {
        std::size_t end = bytes.find('\n', pos);
        if (end == std::string_view::npos) end = bytes.size();
        const std::string_view line = bytes.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) throw ParseError(line_no, "empty record");

        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& ex) {
            throw ParseError(line_no, std::string("malformed record: ") + ex.what());
        }
        const Reader r(j, line_no);

        if (!have_header) {
            if (r.str(j, "record") != "header") r.fail("first record must be the header");
            if (r.str(j, "format") != kTrajectoryFormat) r.fail("unrecognised format");
            if (r.count(j, "version") != static_cast<std::uint64_t>(kTrajectoryFormatVersion)) {
                r.fail("unsupported format version");
            }
            t.trajectory_id = r.str(j, "trajectory_id");
            t.source = r.enumeration<Source>(j, "source", parse_source);
            t.outcome = r.enumeration<Outcome>(j, "outcome", parse_outcome);
            expected_events = static_cast<std::size_t>(r.count(j, "event_count"));
            const json& md = r.field(j, "metadata");
            if (!md.is_object()) r.fail("metadata must be an object");
            for (const auto& [k, v] : md.items()) {
                if (!v.is_string()) r.fail("metadata value for '" + k + "' must be a string");
                t.metadata.emplace(k, v.get<std::string>());
            }
            have_header = true;
            continue;
        }
        t.events.push_back(event_from_json(r));
    }

    if (!have_header) throw ParseError(1, "missing header record");
    if (t.events.size() != expected_events) {
        throw ParseError(line_no + 1, "expected " + std::to_string(expected_events) + " events, found " +
                                          std::to_string(t.events.size()));
    }
    validate_trajectory(t);
    return t;
}

}  // namespace proctrace
