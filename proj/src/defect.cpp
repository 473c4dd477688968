// SPDX-License-Identifier: Apache-2.0

#include "proctrace/defect.hpp"

namespace proctrace {

namespace {

constexpr std::array<std::string_view, kDefectCount> kDefectNames{
    "ghost_context", "oversized_rules", "cw_thrashing",     "duplicate_step",
    "tool_call_chain", "dead_step",     "long_chain",       "wrapper_workflow",
    "context_coupling", "inconsistent_tool_interface", "weak_tool",
};

constexpr std::array<std::string_view, kDimensionCount> kDimensionNames{
    "context_mgmt", "tool_use", "workflow_arch", "tool_ecosystem"};

}  // namespace

std::string_view to_string(DefectClass d) { return kDefectNames[ordinal(d)]; }
std::string_view to_string(Dimension d) { return kDimensionNames[ordinal(d)]; }

std::optional<DefectClass> parse_defect(std::string_view s) {
    for (DefectClass d : kAllDefects) {
        if (to_string(d) == s) return d;
    }
    return std::nullopt;
}

std::optional<Dimension> parse_dimension(std::string_view s) {
    for (Dimension d : kAllDimensions) {
        if (to_string(d) == s) return d;
    }
    return std::nullopt;
}

}  // namespace proctrace
