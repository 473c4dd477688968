// SPDX-License-Identifier: Apache-2.0

#include "proctrace/text.hpp"

#include <algorithm>
#include <cctype>

namespace proctrace {

namespace {

bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }

void sort_unique(TokenSet& s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
}

void append_tokens(std::string_view text, TokenSet& out) {
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        std::size_t b = i, e = j;
        while (b < e && is_punct(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && is_punct(static_cast<unsigned char>(text[e - 1]))) --e;
        if (b < e) {
            std::string tok(text.substr(b, e - b));
            for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            out.push_back(std::move(tok));
        }
        i = j;
    }
}

}  // namespace

TokenSet normalize_tokens(std::string_view text) {
    TokenSet out;
    append_tokens(text, out);
    sort_unique(out);
    return out;
}

TokenSet tool_tokens(const ToolInvocation& tool) {
    TokenSet out;
    append_tokens(tool.tool_name, out);
    for (const auto& [k, v] : tool.arguments) {
        append_tokens(k, out);
        append_tokens(v, out);
    }
    sort_unique(out);
    return out;
}

TokenSet consumer_tokens(const Event& e) {
    TokenSet out;
    append_tokens(e.payload, out);
    if (e.tool) {
        for (const auto& [k, v] : e.tool->arguments) append_tokens(v, out);
    }
    if (e.external) append_tokens(e.external->target, out);
    sort_unique(out);
    return out;
}

std::size_t intersection_size(const TokenSet& a, const TokenSet& b) {
    std::size_t n = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++n;
            ++ia;
            ++ib;
        }
    }
    return n;
}

double jaccard(const TokenSet& a, const TokenSet& b) {
    if (a.empty() && b.empty()) return 1.0;
    const std::size_t inter = intersection_size(a, b);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double overlap_coefficient(const TokenSet& a, const TokenSet& b) {
    if (a.empty() || b.empty()) return 0.0;
    return static_cast<double>(intersection_size(a, b)) /
           static_cast<double>(std::min(a.size(), b.size()));
}

TokenSet identifier_words(std::string_view name) {
    TokenSet out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (std::size_t i = 0; i < name.size(); ++i) {
        const auto c = static_cast<unsigned char>(name[i]);
        if (!std::isalnum(c)) {
            flush();
            continue;
        }
        if (std::isupper(c) && !cur.empty() && std::islower(static_cast<unsigned char>(cur.back()))) flush();
        cur.push_back(static_cast<char>(std::tolower(c)));
    }
    flush();
    sort_unique(out);
    return out;
}

}  // namespace proctrace
