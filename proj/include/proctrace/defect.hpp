// SPDX-License-Identifier: Apache-2.0

// The eleven defect classes and the four dimensions they are grouped into.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace proctrace {

enum class DefectClass {
    ghost_context,
    oversized_rules,
    cw_thrashing,
    duplicate_step,
    tool_call_chain,
    dead_step,
    long_chain,
    wrapper_workflow,
    context_coupling,
    inconsistent_tool_interface,
    weak_tool,
};

enum class Dimension { context_mgmt, tool_use, workflow_arch, tool_ecosystem };

inline constexpr std::size_t kDefectCount = 11;
inline constexpr std::size_t kDimensionCount = 4;

inline constexpr std::array<DefectClass, kDefectCount> kAllDefects{
    DefectClass::ghost_context,    DefectClass::oversized_rules, DefectClass::cw_thrashing,
    DefectClass::duplicate_step,   DefectClass::tool_call_chain, DefectClass::dead_step,
    DefectClass::long_chain,       DefectClass::wrapper_workflow, DefectClass::context_coupling,
    DefectClass::inconsistent_tool_interface, DefectClass::weak_tool,
};

inline constexpr std::array<Dimension, kDimensionCount> kAllDimensions{
    Dimension::context_mgmt, Dimension::tool_use, Dimension::workflow_arch, Dimension::tool_ecosystem};

constexpr std::size_t ordinal(DefectClass d) { return static_cast<std::size_t>(d); }
constexpr std::size_t ordinal(Dimension d) { return static_cast<std::size_t>(d); }

constexpr Dimension dimension_of(DefectClass d) {
    switch (d) {
        case DefectClass::ghost_context:
        case DefectClass::oversized_rules:
        case DefectClass::cw_thrashing:
            return Dimension::context_mgmt;
        case DefectClass::duplicate_step:
        case DefectClass::tool_call_chain:
        case DefectClass::dead_step:
        case DefectClass::long_chain:
            return Dimension::tool_use;
        case DefectClass::wrapper_workflow:
        case DefectClass::context_coupling:
            return Dimension::workflow_arch;
        case DefectClass::inconsistent_tool_interface:
        case DefectClass::weak_tool:
            return Dimension::tool_ecosystem;
    }
    return Dimension::context_mgmt;
}

std::string_view to_string(DefectClass d);
std::string_view to_string(Dimension d);
std::optional<DefectClass> parse_defect(std::string_view s);
std::optional<Dimension> parse_dimension(std::string_view s);

}  // namespace proctrace
