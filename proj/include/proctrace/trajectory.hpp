// SPDX-License-Identifier: Apache-2.0

// Standardized trajectory model: every raw agent log is mapped onto an
// ordered list of seven-component events (type, payload, tool invocation,
// validation result, external operation, context state, dependency).

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace proctrace {

enum class EventType { message, tool_call, tool_result, context_op, external_op, control_marker };
enum class Validation { pass, fail, none };
enum class OpKind {
    file_write,
    file_delete,
    network,
    process_spawn,
    vcs_commit,
    checkpoint,
    rollback,
    handoff_request,
    confirmation_point,
    stage_marker,
};
enum class SegmentTag { rule_text, retained_summary, persistent_memory, raw_content };
enum class Source { android, terminal, swebench, synthetic, other };
enum class Outcome { success, failure, unknown };

std::string_view to_string(EventType v);
std::string_view to_string(Validation v);
std::string_view to_string(OpKind v);
std::string_view to_string(SegmentTag v);
std::string_view to_string(Source v);
std::string_view to_string(Outcome v);

// Parsers return nullopt for names outside the enum.
std::optional<EventType> parse_event_type(std::string_view s);
std::optional<Validation> parse_validation(std::string_view s);
std::optional<OpKind> parse_op_kind(std::string_view s);
std::optional<SegmentTag> parse_segment_tag(std::string_view s);
std::optional<Source> parse_source(std::string_view s);
std::optional<Outcome> parse_outcome(std::string_view s);

struct ToolInvocation {
    std::string tool_name;
    std::map<std::string, std::string> arguments;

    bool operator==(const ToolInvocation&) const = default;
};

struct ValidationResult {
    Validation status = Validation::none;
    std::string detail;

    bool operator==(const ValidationResult&) const = default;
};

struct ExternalOperation {
    OpKind kind = OpKind::file_write;
    std::string target;

    bool operator==(const ExternalOperation&) const = default;
};

struct ContextSegment {
    std::string segment_id;
    std::uint64_t token_count = 0;
    std::size_t created_at = 0;
    std::optional<std::size_t> last_referenced_at;
    SegmentTag tag = SegmentTag::raw_content;

    bool operator==(const ContextSegment&) const = default;
};

// Context state after the event has taken effect.
struct ContextState {
    std::uint64_t tokens_used = 0;
    std::uint64_t window_capacity = 1;
    std::vector<ContextSegment> segments;

    bool operator==(const ContextState&) const = default;
};

struct Dependency {
    std::optional<std::size_t> parent_index;
    std::optional<std::string> branch_id;
    std::optional<std::string> unit_id;
    std::optional<std::string> agent_id;

    bool operator==(const Dependency&) const = default;
};

struct Event {
    std::size_t index = 0;
    EventType type = EventType::message;
    std::string payload;
    std::optional<ToolInvocation> tool;
    std::optional<ValidationResult> validation;
    std::optional<ExternalOperation> external;
    ContextState context;
    Dependency dependency;

    bool operator==(const Event&) const = default;

    // True when the event carries a pass or fail verdict.
    bool has_verdict() const {
        return validation && validation->status != Validation::none;
    }
    bool has_op(OpKind k) const { return external && external->kind == k; }
};

struct Trajectory {
    std::string trajectory_id;
    Source source = Source::other;
    Outcome outcome = Outcome::unknown;
    std::vector<Event> events;
    std::map<std::string, std::string> metadata;

    bool operator==(const Trajectory&) const = default;
};

// Raised when a trajectory breaks a structural invariant; `index` is the
// first offending event.
class InvariantError : public std::runtime_error {
public:
    InvariantError(std::size_t index, const std::string& reason);
    std::size_t index() const { return index_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t index_;
    std::string reason_;
};

// Throws InvariantError describing the first violation found.
void validate_trajectory(const Trajectory& t);

// Non-throwing variant; returns the error message or nullopt.
std::optional<std::string> check_trajectory(const Trajectory& t);

// True for ops that change the workspace (file writes/deletes, commits, rollbacks).
bool is_mutation(OpKind k);

}  // namespace proctrace
