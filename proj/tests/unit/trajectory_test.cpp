// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>

#include "proctrace/canonical.hpp"
#include "proctrace/errors.hpp"
#include "proctrace/graph.hpp"
#include "proctrace/ingest.hpp"
#include "proctrace/io.hpp"
#include "proctrace/synth.hpp"
#include "support.hpp"

using namespace proctrace;
using proctrace::testing::Builder;
using proctrace::testing::segment;

namespace {

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

Trajectory three_events() {
    Builder b("three", Source::terminal);
    b.outcome(Outcome::success).meta("system", "s1");
    b.message("look at the file");
    const std::size_t c = b.call("read_file", {{"path", "a.c"}});
    b.result(c, "int main() { return 0; }");
    return b.build();
}

const char* kChatlogThree =
    "{\"session\": {\"id\": \"chat-3\", \"source\": \"terminal\", \"outcome\": \"success\"}}\n"
    "{\"role\": \"assistant\", \"content\": \"checking the config\", \"tool_calls\": "
    "[{\"id\": \"c1\", \"name\": \"read_file\", \"arguments\": {\"path\": \"cfg.toml\"}}]}\n"
    "{\"role\": \"tool\", \"tool_call_id\": \"c1\", \"content\": \"port = 8080\"}\n";

}  // namespace

TEST_SUITE("ingest") {
    TEST_CASE("empty log body is a malformed record with no events") {
        for (const char* adapter : {"chatlog", "canonical"}) {
            try {
                ingest_raw_log("", adapter);
                FAIL("expected an ingest error");
            } catch (const IngestError& e) {
                CHECK(e.reason() == "no events");
            }
        }
    }

    TEST_CASE("canonical log ingested twice serializes identically") {
        const std::string raw = canonical_serialize(three_events());
        const std::string a = canonical_serialize(ingest_raw_log(raw, "canonical"));
        const std::string b = canonical_serialize(ingest_raw_log(raw, "canonical"));
        CHECK(a == b);
        CHECK(a == raw);
    }

    TEST_CASE("chatlog message, call and result map to three linked events") {
        const Trajectory t = ingest_raw_log(kChatlogThree, "chatlog");
        REQUIRE(t.events.size() == 3);
        CHECK(t.events[0].type == EventType::message);
        CHECK(t.events[1].type == EventType::tool_call);
        CHECK(t.events[1].tool->tool_name == "read_file");
        CHECK(t.events[1].tool->arguments.at("path") == "cfg.toml");
        CHECK(t.events[2].type == EventType::tool_result);
        CHECK(t.events[2].dependency.parent_index == 1u);
        CHECK(t.trajectory_id == "chat-3");
        CHECK(t.source == Source::terminal);
        CHECK(t.outcome == Outcome::success);
    }

    TEST_CASE("unknown adapter is rejected") {
        CHECK_THROWS_AS(ingest_raw_log(kChatlogThree, "nope"), ConfigError);
    }

    TEST_CASE("malformed chatlog record reports its byte offset") {
        const std::string raw = std::string(kChatlogThree) + "{\"role\": \n";
        try {
            ingest_raw_log(raw, "chatlog");
            FAIL("expected an ingest error");
        } catch (const IngestError& e) {
            CHECK(e.offset() == std::string(kChatlogThree).size());
        }
    }

    TEST_CASE("tool result for an unknown call id is rejected") {
        const std::string raw = "{\"role\": \"tool\", \"tool_call_id\": \"zz\", \"content\": \"x\"}\n";
        CHECK_THROWS_AS(ingest_raw_log(raw, "chatlog"), IngestError);
    }

    TEST_CASE("unknown record kinds become messages with a metadata note") {
        const std::string raw = "{\"type\": \"telemetry\", \"content\": \"cpu 40%\"}\n";
        const Trajectory t = ingest_raw_log(raw, "chatlog");
        REQUIRE(t.events.size() == 1);
        CHECK(t.events[0].type == EventType::message);
        CHECK(t.metadata.at("adapter.note.0").find("telemetry") != std::string::npos);
    }

    TEST_CASE("context beyond the window is an invariant violation after mapping") {
        const std::string raw =
            "{\"role\": \"user\", \"content\": \"hi\", \"context\": {\"window\": 100, \"tokens\": 150}}\n";
        CHECK_THROWS_AS(ingest_raw_log(raw, "chatlog"), InvariantError);
    }

    TEST_CASE("chatlog fixtures match their frozen canonical files") {
        const auto dir = proctrace::testing::fixture_dir();
        std::size_t compared = 0;
        for (const auto& entry : std::filesystem::directory_iterator(dir / "chatlog")) {
            const std::string stem = entry.path().stem().string();
            IngestOptions opts;
            opts.fallback_id = stem;
            const Trajectory t = ingest_raw_log(read_file(entry.path()), "chatlog", opts);
            const std::string golden = read_file(dir / "golden" / (stem + ".trajectory.jsonl"));
            CHECK_MESSAGE(canonical_serialize(t) == golden, stem);
            ++compared;
        }
        CHECK(compared == 6);
    }
}

TEST_SUITE("canonical format") {
    TEST_CASE("serialize, parse, serialize is a fixpoint") {
        const std::string once = canonical_serialize(three_events());
        CHECK(canonical_serialize(canonical_parse(once)) == once);
    }

    TEST_CASE("metadata key order does not change the bytes") {
        Trajectory t = three_events();
        t.metadata = {{"a", "1"}, {"b", "2"}};
        const std::string bytes = canonical_serialize(t);
        // Reverse the key order inside the header line and parse again.
        std::string swapped = bytes;
        const std::string forward = "\"a\":\"1\",\"b\":\"2\"";
        const std::string backward = "\"b\":\"2\",\"a\":\"1\"";
        const auto at = swapped.find(forward);
        REQUIRE(at != std::string::npos);
        swapped.replace(at, forward.size(), backward);
        CHECK(swapped != bytes);
        CHECK(canonical_serialize(canonical_parse(swapped)) == bytes);
    }

    TEST_CASE("three events serialize to four lines") {
        CHECK(count_lines(canonical_serialize(three_events())) == 4);
    }

    TEST_CASE("truncated last line is a parse error at that line") {
        std::string bytes = canonical_serialize(three_events());
        bytes.resize(bytes.size() - 10);
        try {
            canonical_parse(bytes);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 4);
        }
    }

    TEST_CASE("tokens beyond capacity is an invariant violation") {
        Trajectory t = three_events();
        t.events[1].context.tokens_used = t.events[1].context.window_capacity + 1;
        const std::string bytes = canonical_serialize(t);
        try {
            canonical_parse(bytes);
            FAIL("expected an invariant violation");
        } catch (const InvariantError& e) {
            CHECK(e.index() == 1);
        }
    }

    TEST_CASE("out-of-order indices and unknown enums are rejected") {
        const std::string bytes = canonical_serialize(three_events());
        std::string reordered = bytes;
        const auto at = reordered.find("\"index\":2");
        REQUIRE(at != std::string::npos);
        reordered.replace(at, 9, "\"index\":7");
        CHECK_THROWS(canonical_parse(reordered));

        std::string unknown = bytes;
        const auto kind = unknown.find("\"tool_call\"");
        REQUIRE(kind != std::string::npos);
        unknown.replace(kind, 11, "\"tool_kall\"");
        CHECK_THROWS_AS(canonical_parse(unknown), ParseError);
    }

    TEST_CASE("round trip holds on generated trajectories") {
        SynthSpec spec;
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            spec.topology = static_cast<Topology>(seed % 3);
            const Trajectory t = generate_clean(spec, seed);
            const Trajectory back = canonical_parse(canonical_serialize(t));
            CHECK(back == t);
            for (std::size_t i = 1; i < back.events.size(); ++i) CHECK(back.events[i].index > back.events[i - 1].index);
        }
    }
}

TEST_SUITE("invariants") {
    TEST_CASE("validation catches each structural violation") {
        Trajectory ok = three_events();
        CHECK_NOTHROW(validate_trajectory(ok));

        Trajectory gap = ok;
        gap.events[2].index = 5;
        CHECK_THROWS_AS(validate_trajectory(gap), InvariantError);

        Trajectory orphan = ok;
        orphan.events[2].dependency.parent_index = 0;  // a message, not a call
        CHECK_THROWS_AS(validate_trajectory(orphan), InvariantError);

        Trajectory segments = ok;
        segments.events[0].context.tokens_used = 10;
        segments.events[0].context.segments.push_back(segment("s", 20, 0));
        CHECK_THROWS_AS(validate_trajectory(segments), InvariantError);

        Trajectory empty = ok;
        empty.events.clear();
        CHECK_THROWS_AS(validate_trajectory(empty), InvariantError);
    }
}

TEST_SUITE("dependency graph") {
    TEST_CASE("no tool calls gives only parent edges") {
        Builder b;
        const std::size_t a = b.message("first");
        b.message("second", a);
        b.message("third", a + 1);
        const auto g = build_dependency_graph(b.build());
        CHECK(g.count(EdgeKind::parent) == 2);
        CHECK(g.count(EdgeKind::data_flow) == 0);
        CHECK(g.count(EdgeKind::unit_call) == 0);
    }

    TEST_CASE("quoted result payload creates a data-flow edge") {
        Builder b;
        b.message("run the build");
        const std::size_t c = b.call("run_build");
        const std::size_t r = b.result(c, "ERR_42");
        const std::size_t m = b.message("the build failed with ERR_42 again");
        const auto g = build_dependency_graph(b.build());
        // Substring oracle: the later payload contains the result verbatim.
        REQUIRE(b.peek().events[m].payload.find(b.peek().events[r].payload) != std::string::npos);
        CHECK(g.has_edge(r, m, EdgeKind::data_flow));
    }

    TEST_CASE("alternating delegations form a two-cycle of unit calls") {
        Builder b;
        std::size_t prev = b.unit("A").message("plan");
        for (const char* u : {"B", "A", "B", "A"}) prev = b.unit(u).message(std::string("work in ") + u, prev);
        const auto g = build_dependency_graph(b.build());
        CHECK(unit_delegations(b.peek()).size() == 4);
        CHECK(g.count(EdgeKind::unit_call) == 2);
        const std::size_t a = g.unit_node(*g.unit_position("A"));
        const std::size_t bn = g.unit_node(*g.unit_position("B"));
        CHECK(g.has_edge(a, bn, EdgeKind::unit_call));
        CHECK(g.has_edge(bn, a, EdgeKind::unit_call));
    }

    TEST_CASE("data-flow edges point forward on generated trajectories") {
        SynthSpec spec;
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const auto g = build_dependency_graph(generate_clean(spec, seed));
            for (const GraphEdge& e : g.edges) {
                if (e.kind == EdgeKind::data_flow) CHECK(e.from < e.to);
                if (e.kind == EdgeKind::parent) CHECK(e.from != e.to);
                CHECK(e.from < g.node_count());
                CHECK(e.to < g.node_count());
            }
        }
    }

    TEST_CASE("Tarjan components agree with the reachability oracle") {
        const std::vector<std::vector<std::size_t>> adj{{1}, {2}, {0, 3}, {4}, {3}, {}};
        const auto comps = strongly_connected_components(adj);
        REQUIRE(comps.size() == 3);
        CHECK(comps[0] == std::vector<std::size_t>{0, 1, 2});
        CHECK(comps[1] == std::vector<std::size_t>{3, 4});
        CHECK(comps[2] == std::vector<std::size_t>{5});
        CHECK(proctrace::testing::largest_scc_oracle(adj) == 3);
    }
}

TEST_SUITE("segment statistics") {
    TEST_CASE("segment present at one event has zero persistence") {
        Builder b;
        b.context(100, {segment("once", 100, 0)});
        b.message("hello");
        b.context(0);
        b.message("bye");
        const auto stats = context_segment_stats(b.build());
        REQUIRE(stats.size() == 1);
        CHECK(stats[0].persistence == 0);
    }

    TEST_CASE("zero-token segment has zero occupancy") {
        Builder b;
        b.context(0, {segment("empty", 0, 0)});
        b.message("a");
        b.message("b");
        const auto stats = context_segment_stats(b.build());
        REQUIRE(stats.size() == 1);
        CHECK(stats[0].occupancy == 0.0);
    }

    TEST_CASE("3000 of 10000 tokens for 50 events with two references") {
        Builder b("ghost", Source::other, 10000);
        b.context(3000, {segment("notes-x", 3000, 0)});
        for (std::size_t i = 0; i <= 50; ++i) {
            if (i == 10 || i == 20) b.message("see notes-x for details");
            else b.message("step " + std::to_string(i));
        }
        const auto stats = context_segment_stats(b.build());
        REQUIRE(stats.size() == 1);
        CHECK(stats[0].occupancy == doctest::Approx(0.30));
        CHECK(stats[0].references == 2);
        CHECK(stats[0].reference_rate == doctest::Approx(0.04));
        CHECK(stats[0].persistence == 50);
    }

    TEST_CASE("segment accounting holds on generated trajectories") {
        SynthSpec spec;
        spec.injections = {{DefectClass::ghost_context, 1.0}, {DefectClass::cw_thrashing, 1.0}};
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const Trajectory t = generate_trajectory(spec, seed).trajectory;
            for (const Event& e : t.events) {
                std::uint64_t sum = 0;
                for (const ContextSegment& s : e.context.segments) sum += s.token_count;
                CHECK(sum <= e.context.tokens_used);
                CHECK(e.context.tokens_used <= e.context.window_capacity);
            }
        }
    }
}
