// SPDX-License-Identifier: Apache-2.0

#include "proctrace/ingest.hpp"

#include <json.hpp>

#include "proctrace/canonical.hpp"
#include "proctrace/errors.hpp"

namespace proctrace {

using nlohmann::json;

void AdapterRegistry::add(std::string name, Adapter adapter) { adapters_[std::move(name)] = std::move(adapter); }

bool AdapterRegistry::contains(std::string_view name) const { return adapters_.find(name) != adapters_.end(); }

const Adapter& AdapterRegistry::get(std::string_view name) const {
    auto it = adapters_.find(name);
    if (it == adapters_.end()) throw ConfigError("unknown adapter '" + std::string(name) + "'");
    return it->second;
}

std::vector<std::string> AdapterRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : adapters_) out.push_back(name);
    return out;
}

const AdapterRegistry& builtin_adapters() {
    static const AdapterRegistry registry = [] {
        AdapterRegistry r;
        r.add("canonical", ingest_canonical);
        r.add("chatlog", ingest_chatlog);
        return r;
    }();
    return registry;
}

Trajectory ingest_raw_log(std::string_view raw, std::string_view adapter, const IngestOptions& opts,
                          const AdapterRegistry& registry) {
    const Adapter& fn = registry.get(adapter);
    Trajectory t = fn(raw, opts);
    validate_trajectory(t);
    return t;
}

Trajectory ingest_canonical(std::string_view raw, const IngestOptions&) {
    if (raw.find_first_not_of(" \t\r\n") == std::string_view::npos) throw IngestError(0, "no events");
    try {
        return canonical_parse(raw);
    } catch (const ParseError& e) {
        // Translate the 1-based line number into the byte offset of that line.
        std::size_t offset = 0;
        for (std::size_t line = 1; line < e.line() && offset < raw.size(); ++line) {
            const std::size_t nl = raw.find('\n', offset);
            if (nl == std::string_view::npos) {
                offset = raw.size();
                break;
            }
            offset = nl + 1;
        }
        throw IngestError(offset, e.reason());
    }
}

namespace {

constexpr std::uint64_t kDefaultWindow = 128000;

// Mapping state for the chatlog dialect.
class ChatlogMapper {
public:
    explicit ChatlogMapper(const IngestOptions& opts) { t_.trajectory_id = opts.fallback_id; }

    void header(const json& session, std::size_t offset) {
        if (!session.is_object()) throw IngestError(offset, "session must be an object");
        if (auto it = session.find("id"); it != session.end() && it->is_string()) t_.trajectory_id = *it;
        if (auto it = session.find("source"); it != session.end()) {
            auto s = it->is_string() ? parse_source(it->get<std::string>()) : std::nullopt;
            if (!s) throw IngestError(offset, "unknown source");
            t_.source = *s;
        }
        if (auto it = session.find("outcome"); it != session.end()) {
            auto o = it->is_string() ? parse_outcome(it->get<std::string>()) : std::nullopt;
            if (!o) throw IngestError(offset, "unknown outcome");
            t_.outcome = *o;
        }
        if (auto it = session.find("window"); it != session.end()) {
            if (!it->is_number_unsigned() || it->get<std::uint64_t>() == 0) {
                throw IngestError(offset, "window must be a positive integer");
            }
            context_.window_capacity = it->get<std::uint64_t>();
        }
        if (auto it = session.find("metadata"); it != session.end()) {
            if (!it->is_object()) throw IngestError(offset, "metadata must be an object");
            for (const auto& [k, v] : it->items()) {
                if (!v.is_string()) throw IngestError(offset, "metadata values must be strings");
                t_.metadata[k] = v.get<std::string>();
            }
        }
    }

    void record(const json& r, std::size_t offset) {
        if (!r.is_object()) throw IngestError(offset, "record must be an object");
        offset_ = offset;
        update_context(r);
        const std::size_t first = t_.events.size();

        const std::string type = string_field(r, "type", "");
        const std::string role = string_field(r, "role", "");
        const std::string content = string_field(r, "content", "");

        if (role == "tool" || type == "tool_result") {
            Event e = make(EventType::tool_result, content, r);
            const std::string call_id = string_field(r, "tool_call_id", "");
            auto it = call_index_.find(call_id);
            if (it == call_index_.end()) throw IngestError(offset, "tool result for unknown call id '" + call_id + "'");
            e.dependency.parent_index = it->second;
            if (r.contains("status")) {
                auto st = parse_validation(string_field(r, "status", ""));
                if (!st) throw IngestError(offset, "unknown status");
                e.validation = ValidationResult{*st, string_field(r, "detail", "")};
            }
            push(std::move(e), r);
        } else if (type == "context") {
            push(make(EventType::context_op, content, r), r);
        } else if (type == "marker") {
            push(make(EventType::control_marker, content, r), r);
        } else if (type == "op") {
            push(make(EventType::external_op, content, r), r);
        } else if (type.empty() && (role == "user" || role == "assistant" || role == "system")) {
            if (!content.empty()) push(make(EventType::message, content, r), r);
            if (auto it = r.find("tool_calls"); it != r.end()) {
                if (!it->is_array()) throw IngestError(offset, "tool_calls must be an array");
                for (const json& call : *it) push_call(call, r);
            }
        } else {
            // Unrecognised kinds are kept as messages and noted in metadata.
            const std::string kind = !type.empty() ? type : role;
            const std::size_t idx = t_.events.size();
            t_.metadata["adapter.note." + std::to_string(idx)] = "unknown kind '" + kind + "' mapped to message";
            push(make(EventType::message, content, r), r);
        }

        if (t_.events.size() == first) return;
        if (auto it = r.find("id"); it != r.end() && it->is_string()) record_last_[*it] = t_.events.size() - 1;
    }

    Trajectory finish(std::size_t end_offset) {
        if (t_.events.empty()) throw IngestError(end_offset, "no events");
        return std::move(t_);
    }

private:
    std::string string_field(const json& r, const char* key, const char* fallback) const {
        auto it = r.find(key);
        if (it == r.end() || it->is_null()) return fallback;
        if (!it->is_string()) throw IngestError(offset_, std::string("field '") + key + "' must be a string");
        return it->get<std::string>();
    }

    std::optional<std::string> optional_field(const json& r, const char* key) const {
        if (!r.contains(key)) return std::nullopt;
        return string_field(r, key, "");
    }

    void update_context(const json& r) {
        auto it = r.find("context");
        if (it == r.end()) return;
        const json& c = *it;
        if (!c.is_object()) throw IngestError(offset_, "context must be an object");
        if (auto w = c.find("window"); w != c.end()) {
            if (!w->is_number_unsigned()) throw IngestError(offset_, "context window must be an integer");
            context_.window_capacity = w->get<std::uint64_t>();
        }
        if (auto tk = c.find("tokens"); tk != c.end()) {
            if (!tk->is_number_unsigned()) throw IngestError(offset_, "context tokens must be an integer");
            context_.tokens_used = tk->get<std::uint64_t>();
        }
        if (auto segs = c.find("segments"); segs != c.end()) {
            if (!segs->is_array()) throw IngestError(offset_, "context segments must be an array");
            context_.segments.clear();
            for (const json& s : *segs) {
                if (!s.is_object()) throw IngestError(offset_, "segment must be an object");
                ContextSegment seg;
                seg.segment_id = string_field(s, "id", "");
                if (seg.segment_id.empty()) throw IngestError(offset_, "segment without id");
                if (auto tk = s.find("tokens"); tk != s.end()) {
                    if (!tk->is_number_unsigned()) throw IngestError(offset_, "segment tokens must be an integer");
                    seg.token_count = tk->get<std::uint64_t>();
                }
                auto tag = parse_segment_tag(string_field(s, "tag", "raw_content"));
                if (!tag) throw IngestError(offset_, "unknown segment tag");
                seg.tag = *tag;
                // Creation is the first event at which the id was seen.
                auto [pos, inserted] = segment_birth_.try_emplace(seg.segment_id, t_.events.size());
                seg.created_at = pos->second;
                context_.segments.push_back(std::move(seg));
            }
        }
    }

    Event make(EventType type, const std::string& content, const json& r) const {
        Event e;
        e.type = type;
        e.payload = content;
        e.dependency.unit_id = optional_field(r, "unit");
        e.dependency.agent_id = optional_field(r, "agent");
        e.dependency.branch_id = optional_field(r, "branch");
        if (auto p = r.find("parent"); p != r.end()) {
            if (!p->is_string()) throw IngestError(offset_, "parent must be a record id");
            auto it = record_last_.find(p->get<std::string>());
            if (it == record_last_.end()) throw IngestError(offset_, "parent refers to unknown record");
            e.dependency.parent_index = it->second;
        }
        if (auto op = r.find("op"); op != r.end()) {
            if (!op->is_object()) throw IngestError(offset_, "op must be an object");
            auto kind = parse_op_kind(string_field(*op, "kind", ""));
            if (!kind) throw IngestError(offset_, "unknown op kind");
            e.external = ExternalOperation{*kind, string_field(*op, "target", "")};
        }
        return e;
    }

    void push_call(const json& call, const json& parent_record) {
        if (!call.is_object()) throw IngestError(offset_, "tool call must be an object");
        Event e = make(EventType::tool_call, "", parent_record);
        e.external.reset();
        ToolInvocation inv;
        inv.tool_name = string_field(call, "name", "");
        if (inv.tool_name.empty()) throw IngestError(offset_, "tool call without name");
        if (auto args = call.find("arguments"); args != call.end()) {
            if (!args->is_object()) throw IngestError(offset_, "tool arguments must be an object");
            for (const auto& [k, v] : args->items()) {
                inv.arguments[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
        }
        e.tool = std::move(inv);
        const std::string id = string_field(call, "id", "");
        push(std::move(e), parent_record);
        if (!id.empty()) call_index_[id] = t_.events.size() - 1;
    }

    void push(Event e, const json&) {
        e.index = t_.events.size();
        e.context = context_;
        t_.events.push_back(std::move(e));
    }

    Trajectory t_;
    ContextState context_{0, kDefaultWindow, {}};
    std::map<std::string, std::size_t> call_index_;
    std::map<std::string, std::size_t> record_last_;
    std::map<std::string, std::size_t> segment_birth_;
    std::size_t offset_ = 0;
};

}  // namespace

Trajectory ingest_chatlog(std::string_view raw, const IngestOptions& opts) {
    ChatlogMapper mapper(opts);
    std::size_t pos = 0;
    bool first = true;
    while (pos < raw.size()) {
        std::size_t end = raw.find('\n', pos);
        if (end == std::string_view::npos) end = raw.size();
        std::string_view line = raw.substr(pos, end - pos);
        const std::size_t offset = pos;
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& ex) {
            throw IngestError(offset, std::string("malformed record: ") + ex.what());
        }
        if (first && j.is_object() && j.contains("session")) {
            mapper.header(j["session"], offset);
        } else {
            mapper.record(j, offset);
        }
        first = false;
    }
    return mapper.finish(raw.size());
}

}  // namespace proctrace
