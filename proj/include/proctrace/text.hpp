// SPDX-License-Identifier: Apache-2.0

// Token normalization shared by reference detection, data-flow edges and
// call similarity: lowercase, split on whitespace, strip punctuation from
// token ends. Token sets are sorted and unique.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "proctrace/trajectory.hpp"

namespace proctrace {

using TokenSet = std::vector<std::string>;

TokenSet normalize_tokens(std::string_view text);

// Tokens of a tool name plus its flattened `key value` argument pairs.
TokenSet tool_tokens(const ToolInvocation& tool);

// Tokens an event contributes as a downstream consumer: payload plus tool
// arguments (and the external-op target, when present).
TokenSet consumer_tokens(const Event& e);

std::size_t intersection_size(const TokenSet& a, const TokenSet& b);

// |a ∩ b| / |a ∪ b|; two empty sets are identical (1.0).
double jaccard(const TokenSet& a, const TokenSet& b);

// |a ∩ b| / min(|a|, |b|); 0 when either side is empty.
double overlap_coefficient(const TokenSet& a, const TokenSet& b);

// Splits an identifier like `code_search` or `searchCode` into lowercase words.
TokenSet identifier_words(std::string_view name);

}  // namespace proctrace
