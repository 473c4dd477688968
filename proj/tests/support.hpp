// SPDX-License-Identifier: Apache-2.0

// Shared helpers for the unit and acceptance tests: a compact trajectory
// builder, scratch directories and small brute-force oracles.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "proctrace/calibration.hpp"
#include "proctrace/defect.hpp"
#include "proctrace/detectors.hpp"
#include "proctrace/rng.hpp"
#include "proctrace/text.hpp"
#include "proctrace/trajectory.hpp"

#ifndef PROCTRACE_FIXTURE_DIR
#define PROCTRACE_FIXTURE_DIR "tests/fixtures"
#endif

namespace proctrace::testing {

inline std::filesystem::path fixture_dir() { return std::filesystem::path(PROCTRACE_FIXTURE_DIR); }

// Fresh empty directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() / ("proctrace-" + name + "-" + std::to_string(counter()++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }

private:
    static std::uint64_t& counter() {
        static std::uint64_t c = 0;
        return c;
    }
    std::filesystem::path path_;
};

// Appends events with consecutive indices. Context state set through
// `context` applies to every later event until changed.
class Builder {
public:
    explicit Builder(std::string id = "t", Source source = Source::other, std::uint64_t capacity = 10000) {
        t_.trajectory_id = std::move(id);
        t_.source = source;
        context_.window_capacity = capacity;
    }

    Builder& outcome(Outcome o) {
        t_.outcome = o;
        return *this;
    }
    Builder& meta(const std::string& k, const std::string& v) {
        t_.metadata[k] = v;
        return *this;
    }
    Builder& unit(std::optional<std::string> u) {
        unit_ = std::move(u);
        return *this;
    }
    Builder& context(std::uint64_t tokens, std::vector<ContextSegment> segments = {}) {
        context_.tokens_used = tokens;
        context_.segments = std::move(segments);
        return *this;
    }

    std::size_t message(const std::string& payload, std::optional<std::size_t> parent = std::nullopt) {
        Event e = make(EventType::message, payload);
        e.dependency.parent_index = parent;
        return push(std::move(e));
    }

    std::size_t call(const std::string& tool, std::map<std::string, std::string> args = {},
                     std::optional<std::size_t> parent = std::nullopt) {
        Event e = make(EventType::tool_call, "");
        e.tool = ToolInvocation{tool, std::move(args)};
        e.dependency.parent_index = parent;
        return push(std::move(e));
    }

    std::size_t result(std::size_t call_index, const std::string& payload,
                       std::optional<Validation> verdict = std::nullopt) {
        Event e = make(EventType::tool_result, payload);
        e.dependency.parent_index = call_index;
        if (verdict) e.validation = ValidationResult{*verdict, ""};
        return push(std::move(e));
    }

    // Call immediately followed by its result; returns the call index.
    std::size_t step(const std::string& tool, std::map<std::string, std::string> args, const std::string& payload,
                     std::optional<Validation> verdict = std::nullopt) {
        const std::size_t c = call(tool, std::move(args));
        result(c, payload, verdict);
        return c;
    }

    std::size_t op(OpKind kind, const std::string& target = "") {
        Event e = make(EventType::external_op, std::string(to_string(kind)) + " " + target);
        e.external = ExternalOperation{kind, target};
        return push(std::move(e));
    }

    std::size_t marker(const std::string& payload = "stage") {
        return push(make(EventType::control_marker, payload));
    }

    Event& at(std::size_t i) { return t_.events.at(i); }
    std::size_t size() const { return t_.events.size(); }
    const Trajectory& peek() const { return t_; }

    Trajectory build() const {
        validate_trajectory(t_);
        return t_;
    }

private:
    Event make(EventType type, const std::string& payload) const {
        Event e;
        e.type = type;
        e.payload = payload;
        e.context = context_;
        e.dependency.unit_id = unit_;
        return e;
    }
    std::size_t push(Event e) {
        e.index = t_.events.size();
        t_.events.push_back(std::move(e));
        return t_.events.size() - 1;
    }

    Trajectory t_;
    ContextState context_{0, 10000, {}};
    std::optional<std::string> unit_;
};

inline ContextSegment segment(const std::string& id, std::uint64_t tokens, std::size_t created,
                              SegmentTag tag = SegmentTag::raw_content) {
    return ContextSegment{id, tokens, created, std::nullopt, tag};
}

inline CalibratedFinding calibrated(DefectClass d, double risk, Severity sev = Severity::none) {
    CalibratedFinding f;
    f.raw.defect = d;
    f.raw.evidence.defect = d;
    f.posterior_risk = risk;
    f.severity = sev;
    return f;
}

inline std::vector<CalibratedFinding> uniform_findings(double risk, Severity sev = Severity::none) {
    std::vector<CalibratedFinding> out;
    for (DefectClass d : kAllDefects) out.push_back(calibrated(d, risk, sev));
    return out;
}

// ---------------------------------------------------------------- oracles

// Every non-exempt similar pair, by direct pairwise comparison.
inline std::size_t duplicate_calls_oracle(const Trajectory& t, const DuplicateStepConfig& cfg) {
    std::vector<std::size_t> calls;
    for (const Event& e : t.events) {
        if (e.type == EventType::tool_call) calls.push_back(e.index);
    }
    auto result_of = [&](std::size_t call) -> const Event* {
        for (const Event& e : t.events) {
            if (e.type == EventType::tool_result && e.dependency.parent_index == call) return &e;
        }
        return nullptr;
    };
    std::set<std::size_t> dup;
    for (std::size_t a : calls) {
        for (std::size_t b : calls) {
            if (b <= a || b - a > cfg.window) continue;
            const auto ta = tool_tokens(*t.events[a].tool), tb = tool_tokens(*t.events[b].tool);
            std::set<std::string> u(ta.begin(), ta.end()), inter;
            u.insert(tb.begin(), tb.end());
            for (const auto& s : ta) {
                if (std::find(tb.begin(), tb.end(), s) != tb.end()) inter.insert(s);
            }
            const double sim = u.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(u.size());
            if (sim < cfg.similarity) continue;
            bool mutated = false, pass = false, fail = false;
            for (std::size_t k = a + 1; k < b; ++k) {
                const Event& e = t.events[k];
                if (e.external && is_mutation(e.external->kind)) mutated = true;
                if (e.validation) {
                    pass |= e.validation->status == Validation::pass;
                    fail |= e.validation->status == Validation::fail;
                }
            }
            if (const Event* r = result_of(b); r && r->validation) {
                pass |= r->validation->status == Validation::pass;
                fail |= r->validation->status == Validation::fail;
            }
            if (mutated || (pass && fail)) continue;
            if (cfg.time_varying_tools.count(t.events[b].tool->tool_name)) continue;
            const auto& ua = t.events[a].dependency.unit_id;
            const auto& ub = t.events[b].dependency.unit_id;
            if (ua && ub && cfg.batch_units.count(*ua) && cfg.batch_units.count(*ub)) continue;
            dup.insert(a);
            dup.insert(b);
        }
    }
    return dup.size();
}

// Largest set of mutually reachable vertices, from a transitive closure.
inline std::size_t largest_scc_oracle(const std::vector<std::vector<std::size_t>>& adjacency) {
    const std::size_t n = adjacency.size();
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t v = 0; v < n; ++v) {
        reach[v][v] = true;
        for (std::size_t w : adjacency[v]) reach[v][w] = true;
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (reach[i][k] && reach[k][j]) reach[i][j] = true;
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t v = 0; v < n; ++v) {
        std::size_t size = 0;
        for (std::size_t w = 0; w < n; ++w) size += reach[v][w] && reach[w][v] ? 1 : 0;
        best = std::max(best, size);
    }
    return best;
}

// Longest contiguous window that equals a block of period p <= max_period
// repeated, with length >= min_reps * p, by checking every window directly.
inline std::size_t periodic_run_oracle(const std::vector<std::string>& seq, std::size_t max_period,
                                       std::size_t min_reps) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        for (std::size_t j = i + 1; j <= seq.size(); ++j) {
            const std::size_t len = j - i;
            for (std::size_t p = 1; p <= max_period && p < len; ++p) {
                if (len < min_reps * p) continue;
                bool ok = true;
                for (std::size_t k = i; k + p < j && ok; ++k) ok = seq[k] == seq[k + p];
                if (ok) best = std::max(best, len);
            }
        }
    }
    return best;
}

// Random trajectory with `calls` tool calls drawn from a small vocabulary so
// repeats are common; mutations and verdicts appear at random.
inline Trajectory random_tool_trajectory(Rng& rng, std::size_t calls) {
    static const std::vector<std::string> tools{"read_file", "run_tests", "search_code"};
    static const std::vector<std::string> args{"a.c", "b.c", "c.c"};
    Builder b("rand", Source::other);
    b.message("begin");
    for (std::size_t i = 0; i < calls; ++i) {
        const std::string tool = rng.pick(tools);
        const std::size_t c = b.call(tool, {{"path", rng.pick(args)}});
        std::optional<Validation> v;
        const double u = rng.uniform();
        if (u < 0.2) v = Validation::pass;
        else if (u < 0.4) v = Validation::fail;
        b.result(c, "output " + std::to_string(rng.index(4)), v);
        if (rng.bernoulli(0.15)) b.op(OpKind::file_write, rng.pick(args));
        if (rng.bernoulli(0.15)) b.message("thinking about the next step");
    }
    return b.build();
}

}  // namespace proctrace::testing
