// SPDX-License-Identifier: Apache-2.0

#include "proctrace/trajectory.hpp"

#include <array>
#include <utility>

namespace proctrace {

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<EventType, 6> kEventTypes{{
    {EventType::message, "message"},
    {EventType::tool_call, "tool_call"},
    {EventType::tool_result, "tool_result"},
    {EventType::context_op, "context_op"},
    {EventType::external_op, "external_op"},
    {EventType::control_marker, "control_marker"},
}};

constexpr NameTable<Validation, 3> kValidations{{
    {Validation::pass, "pass"},
    {Validation::fail, "fail"},
    {Validation::none, "none"},
}};

constexpr NameTable<OpKind, 10> kOpKinds{{
    {OpKind::file_write, "file_write"},
    {OpKind::file_delete, "file_delete"},
    {OpKind::network, "network"},
    {OpKind::process_spawn, "process_spawn"},
    {OpKind::vcs_commit, "vcs_commit"},
    {OpKind::checkpoint, "checkpoint"},
    {OpKind::rollback, "rollback"},
    {OpKind::handoff_request, "handoff_request"},
    {OpKind::confirmation_point, "confirmation_point"},
    {OpKind::stage_marker, "stage_marker"},
}};

constexpr NameTable<SegmentTag, 4> kSegmentTags{{
    {SegmentTag::rule_text, "rule_text"},
    {SegmentTag::retained_summary, "retained_summary"},
    {SegmentTag::persistent_memory, "persistent_memory"},
    {SegmentTag::raw_content, "raw_content"},
}};

constexpr NameTable<Source, 5> kSources{{
    {Source::android, "android"},
    {Source::terminal, "terminal"},
    {Source::swebench, "swebench"},
    {Source::synthetic, "synthetic"},
    {Source::other, "other"},
}};

constexpr NameTable<Outcome, 3> kOutcomes{{
    {Outcome::success, "success"},
    {Outcome::failure, "failure"},
    {Outcome::unknown, "unknown"},
}};

template <typename E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E v) {
    for (const auto& [value, name] : table) {
        if (value == v) return name;
    }
    return "?";
}

template <typename E, std::size_t N>
std::optional<E> value_of(const NameTable<E, N>& table, std::string_view s) {
    for (const auto& [value, name] : table) {
        if (name == s) return value;
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(EventType v) { return name_of(kEventTypes, v); }
std::string_view to_string(Validation v) { return name_of(kValidations, v); }
std::string_view to_string(OpKind v) { return name_of(kOpKinds, v); }
std::string_view to_string(SegmentTag v) { return name_of(kSegmentTags, v); }
std::string_view to_string(Source v) { return name_of(kSources, v); }
std::string_view to_string(Outcome v) { return name_of(kOutcomes, v); }

std::optional<EventType> parse_event_type(std::string_view s) { return value_of(kEventTypes, s); }
std::optional<Validation> parse_validation(std::string_view s) { return value_of(kValidations, s); }
std::optional<OpKind> parse_op_kind(std::string_view s) { return value_of(kOpKinds, s); }
std::optional<SegmentTag> parse_segment_tag(std::string_view s) { return value_of(kSegmentTags, s); }
std::optional<Source> parse_source(std::string_view s) { return value_of(kSources, s); }
std::optional<Outcome> parse_outcome(std::string_view s) { return value_of(kOutcomes, s); }

InvariantError::InvariantError(std::size_t index, const std::string& reason)
    : std::runtime_error("invariant violation at event " + std::to_string(index) + ": " + reason),
      index_(index),
      reason_(reason) {}

bool is_mutation(OpKind k) {
    return k == OpKind::file_write || k == OpKind::file_delete || k == OpKind::vcs_commit ||
           k == OpKind::rollback;
}

namespace {

std::optional<std::pair<std::size_t, std::string>> first_violation(const Trajectory& t) {
    if (t.events.empty()) return std::make_pair(std::size_t{0}, std::string("trajectory has no events"));

    for (std::size_t i = 0; i < t.events.size(); ++i) {
        const Event& e = t.events[i];
        auto fail = [&](std::string why) { return std::make_pair(i, std::move(why)); };

        if (e.index != i) {
            return fail("index " + std::to_string(e.index) + " out of sequence (expected " +
                        std::to_string(i) + ")");
        }
        const ContextState& c = e.context;
        if (c.window_capacity == 0) return fail("window_capacity must be positive");
        if (c.tokens_used > c.window_capacity) {
            return fail("tokens_used " + std::to_string(c.tokens_used) + " exceeds window_capacity " +
                        std::to_string(c.window_capacity));
        }
        std::uint64_t segment_total = 0;
        for (const ContextSegment& s : c.segments) {
            if (s.segment_id.empty()) return fail("segment with empty id");
            if (s.created_at > i) return fail("segment " + s.segment_id + " created after the event");
            if (s.last_referenced_at && *s.last_referenced_at < s.created_at) {
                return fail("segment " + s.segment_id + " referenced before creation");
            }
            segment_total += s.token_count;
        }
        if (segment_total > c.tokens_used) {
            return fail("segment tokens " + std::to_string(segment_total) + " exceed tokens_used " +
                        std::to_string(c.tokens_used));
        }

        const auto& parent = e.dependency.parent_index;
        if (parent && *parent >= i) return fail("parent_index must precede the event");
        if (e.type == EventType::tool_result) {
            if (!parent) return fail("tool_result without parent_index");
            if (t.events[*parent].type != EventType::tool_call) {
                return fail("tool_result parent " + std::to_string(*parent) + " is not a tool_call");
            }
        }
        if (e.type == EventType::tool_call && !e.tool) return fail("tool_call without tool invocation");
    }
    return std::nullopt;
}

}  // namespace

void validate_trajectory(const Trajectory& t) {
    if (auto v = first_violation(t)) throw InvariantError(v->first, v->second);
}

std::optional<std::string> check_trajectory(const Trajectory& t) {
    if (auto v = first_violation(t)) return InvariantError(v->first, v->second).what();
    return std::nullopt;
}

}  // namespace proctrace
