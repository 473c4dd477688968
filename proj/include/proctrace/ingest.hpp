// SPDX-License-Identifier: Apache-2.0

// Deterministic mapping from raw agent logs to trajectories. Each log
// dialect is handled by a registered adapter; the registry ships with the
// canonical format itself and the `chatlog` JSONL dialect.

#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "proctrace/trajectory.hpp"

namespace proctrace {

struct IngestOptions {
    // Used when the log does not name its trajectory.
    std::string fallback_id = "trajectory";
};

using Adapter = std::function<Trajectory(std::string_view raw, const IngestOptions& opts)>;

class AdapterRegistry {
public:
    void add(std::string name, Adapter adapter);
    bool contains(std::string_view name) const;
    const Adapter& get(std::string_view name) const;  // throws ConfigError when unknown
    std::vector<std::string> names() const;

private:
    std::map<std::string, Adapter, std::less<>> adapters_;
};

// Registry holding the built-in adapters ("canonical", "chatlog").
const AdapterRegistry& builtin_adapters();

// Throws ConfigError (unknown adapter), IngestError (malformed record, with
// byte offset) or InvariantError (mapped trajectory is invalid).
Trajectory ingest_raw_log(std::string_view raw, std::string_view adapter, const IngestOptions& opts = {},
                          const AdapterRegistry& registry = builtin_adapters());

Trajectory ingest_chatlog(std::string_view raw, const IngestOptions& opts);
Trajectory ingest_canonical(std::string_view raw, const IngestOptions& opts);

}  // namespace proctrace
