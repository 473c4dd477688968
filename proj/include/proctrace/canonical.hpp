// SPDX-License-Identifier: Apache-2.0

// Canonical line-delimited trajectory format. One JSON header record
// followed by one JSON record per event; keys are emitted in sorted order
// and absent optionals as null, so equal trajectories serialize to
// identical bytes. Field names are documented in docs/format.md.

#pragma once

#include <string>
#include <string_view>

#include "proctrace/trajectory.hpp"

namespace proctrace {

inline constexpr std::string_view kTrajectoryFormat = "proctrace.trajectory";
inline constexpr int kTrajectoryFormatVersion = 1;

std::string canonical_serialize(const Trajectory& t);

// Throws ParseError (with line number) for malformed records or unknown
// enum names, InvariantError for structurally invalid trajectories.
Trajectory canonical_parse(std::string_view bytes);

}  // namespace proctrace
