// SPDX-License-Identifier: Apache-2.0

#include "proctrace/config.hpp"

#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <numeric>
#include <set>
#include <type_traits>

#include "proctrace/errors.hpp"
#include "proctrace/io.hpp"

namespace proctrace {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object, type-checking each and rejecting any
// key that was never asked for.
class Section {
public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    void get(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) fail(key, "a number");
            out = v->get<double>();
        }
    }
    template <typename U>
        requires std::is_unsigned_v<U> && (!std::is_same_v<U, bool>)
    void get(const std::string& key, U& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
            out = v->get<U>();
        }
    }
    void get(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) fail(key, "a boolean");
            out = v->get<bool>();
        }
    }
    void get(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) fail(key, "a string");
            out = v->get<std::string>();
        }
    }
    void get(const std::string& key, std::set<std::string>& out) {
        if (const json* v = find(key)) out = string_set(*v, path(key));
    }
    void get(const std::string& key, std::map<std::string, std::set<std::string>>& out) {
        if (const json* v = find(key)) {
            if (!v->is_object()) fail(key, "an object of string lists");
            out.clear();
            for (const auto& [k, list] : v->items()) out[k] = string_set(list, path(key) + "." + k);
        }
    }

    template <typename Enum, typename Parse>
    void get_enum(const std::string& key, Enum& out, Parse parse) {
        std::string name;
        get(key, name);
        if (name.empty()) return;
        auto v = parse(name);
        if (!v) throw ConfigError(path(key) + ": unknown value '" + name + "'");
        out = *v;
    }

    // Runs `fn` on a nested section when present.
    template <typename Fn>
    void nested(const std::string& key, Fn fn) {
        if (const json* v = find(key)) {
            Section s(*v, path(key));
            fn(s);
            s.finish();
        }
    }

    void finish() const {
        for (const auto& [k, _] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError(path(k) + ": unknown key");
        }
    }

    [[noreturn]] void fail(const std::string& key, const char* what) const {
        throw ConfigError(path(key) + ": expected " + what);
    }

    const json& raw() const { return j_; }

private:
    static std::set<std::string> string_set(const json& v, const std::string& where) {
        if (!v.is_array()) throw ConfigError(where + ": expected a list of strings");
        std::set<std::string> out;
        for (const json& e : v) {
            if (!e.is_string()) throw ConfigError(where + ": expected a list of strings");
            out.insert(e.get<std::string>());
        }
        return out;
    }

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

json parse_json(std::string_view text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string(what) + " is not valid JSON: " + e.what());
    }
}

void read_detectors(Section& s, DetectorConfig& d) {
    s.nested("thresholds", [&](Section& t) {
        for (DefectClass c : kAllDefects) t.get(std::string(to_string(c)), d.thresholds[ordinal(c)]);
    });
    s.nested("graph", [&](Section& g) {
        g.get("data_flow_overlap", d.graph.data_flow_overlap);
        g.get("min_shared_tokens", d.graph.min_shared_tokens);
    });
    s.nested("ghost_context", [&](Section& g) {
        g.get("occupancy_cap", d.ghost.occupancy_cap);
        g.get("persistence_cap", d.ghost.persistence_cap);
        g.get("reference_cap", d.ghost.reference_cap);
        g.get("reference_overlap_tokens", d.ghost.reference_overlap_tokens);
    });
    s.nested("oversized_rules", [&](Section& g) {
        g.get("base", d.rules.base);
        g.get("span", d.rules.span);
    });
    s.nested("cw_thrashing", [&](Section& g) {
        g.get("saturation", d.thrashing.saturation);
        g.get("drop", d.thrashing.drop);
        g.get("delta", d.thrashing.delta);
        g.get("cycle_cap", d.thrashing.cycle_cap);
    });
    s.nested("duplicate_step", [&](Section& g) {
        g.get("window", d.duplicate.window);
        g.get("similarity", d.duplicate.similarity);
        g.get("time_varying_tools", d.duplicate.time_varying_tools);
        g.get("batch_units", d.duplicate.batch_units);
    });
    s.nested("tool_call_chain", [&](Section& g) {
        g.get("max_period", d.chain.max_period);
        g.get("min_reps", d.chain.min_reps);
    });
    s.nested("long_chain", [&](Section& g) {
        g.nested("baseline", [&](Section& b) {
            for (Source src : {Source::android, Source::terminal, Source::swebench, Source::synthetic, Source::other}) {
                b.get(std::string(to_string(src)), d.long_chain.baseline[src]);
            }
        });
        g.get("consolidation_unit", d.long_chain.consolidation_unit);
    });
    s.nested("wrapper_workflow", [&](Section& g) { g.get("min_invocations", d.wrapper.min_invocations); });
    s.nested("context_coupling", [&](Section& g) {
        g.get("bidirectional_cap", d.coupling.bidirectional_cap);
        g.get("pingpong_cap", d.coupling.pingpong_cap);
        g.get("scc_cap", d.coupling.scc_cap);
        g.get("w_bidirectional", d.coupling.w_bidirectional);
        g.get("w_pingpong", d.coupling.w_pingpong);
        g.get("w_scc", d.coupling.w_scc);
        g.get("scc_force_size", d.coupling.scc_force_size);
    });
    s.nested("inconsistent_tool_interface",
             [&](Section& g) { g.get("cluster_similarity", d.interface.cluster_similarity); });
    s.nested("weak_tool", [&](Section& g) {
        g.get("capabilities", d.weak_tool.capabilities);
        g.get("intent_keywords", d.weak_tool.intent_keywords);
        g.get("low_rate", d.weak_tool.low_rate);
        g.get("alt_rate", d.weak_tool.alt_rate);
    });
}

json write_detectors(const DetectorConfig& d) {
    json thresholds = json::object();
    for (DefectClass c : kAllDefects) thresholds[std::string(to_string(c))] = d.threshold(c);
    json baseline = json::object();
    for (const auto& [src, n] : d.long_chain.baseline) baseline[std::string(to_string(src))] = n;
    return {
        {"thresholds", thresholds},
        {"graph", {{"data_flow_overlap", d.graph.data_flow_overlap}, {"min_shared_tokens", d.graph.min_shared_tokens}}},
        {"ghost_context",
         {{"occupancy_cap", d.ghost.occupancy_cap},
          {"persistence_cap", d.ghost.persistence_cap},
          {"reference_cap", d.ghost.reference_cap},
          {"reference_overlap_tokens", d.ghost.reference_overlap_tokens}}},
        {"oversized_rules", {{"base", d.rules.base}, {"span", d.rules.span}}},
        {"cw_thrashing",
         {{"saturation", d.thrashing.saturation},
          {"drop", d.thrashing.drop},
          {"delta", d.thrashing.delta},
          {"cycle_cap", d.thrashing.cycle_cap}}},
        {"duplicate_step",
         {{"window", d.duplicate.window},
          {"similarity", d.duplicate.similarity},
          {"time_varying_tools", d.duplicate.time_varying_tools},
          {"batch_units", d.duplicate.batch_units}}},
        {"tool_call_chain", {{"max_period", d.chain.max_period}, {"min_reps", d.chain.min_reps}}},
        {"long_chain", {{"baseline", baseline}, {"consolidation_unit", d.long_chain.consolidation_unit}}},
        {"wrapper_workflow", {{"min_invocations", d.wrapper.min_invocations}}},
        {"context_coupling",
         {{"bidirectional_cap", d.coupling.bidirectional_cap},
          {"pingpong_cap", d.coupling.pingpong_cap},
          {"scc_cap", d.coupling.scc_cap},
          {"w_bidirectional", d.coupling.w_bidirectional},
          {"w_pingpong", d.coupling.w_pingpong},
          {"w_scc", d.coupling.w_scc},
          {"scc_force_size", d.coupling.scc_force_size}}},
        {"inconsistent_tool_interface", {{"cluster_similarity", d.interface.cluster_similarity}}},
        {"weak_tool",
         {{"capabilities", d.weak_tool.capabilities},
          {"intent_keywords", d.weak_tool.intent_keywords},
          {"low_rate", d.weak_tool.low_rate},
          {"alt_rate", d.weak_tool.alt_rate}}},
    };
}

constexpr std::array<const char*, 3> kPartNames{"dev", "cal", "eval"};

}  // namespace

void RunConfig::validate() const {
    detectors.validate();
    scoring.validate();
    if (fit.score_buckets < 1) throw ConfigError("calibration.score_buckets must be at least 1");
    if (!(fit.shrinkage_m > 0.0)) throw ConfigError("calibration.shrinkage_m must be positive");
    if (!(horizons.medium_from < horizons.long_from)) {
        throw ConfigError("calibration.horizon_cuts: medium_from must be below long_from");
    }
    double total = 0.0;
    for (double r : split.ratios) {
        if (!(r >= 0.0)) throw ConfigError("split.ratios must be non-negative");
        total += r;
    }
    if (!(total > 0.0)) throw ConfigError("split.ratios must not all be zero");
    if (evaluation.bootstrap_replicates < 1) throw ConfigError("evaluation.bootstrap_replicates must be at least 1");
    if (!(evaluation.confidence > 0.0 && evaluation.confidence < 1.0)) {
        throw ConfigError("evaluation.confidence must lie in (0, 1)");
    }
    if (!(evaluation.eta_step > 0.0 && evaluation.eta_step <= 1.0)) {
        throw ConfigError("evaluation.eta_step must lie in (0, 1]");
    }
    if (evaluation.ece_bins < 1) throw ConfigError("evaluation.ece_bins must be at least 1");
}

RunConfig parse_run_config(std::string_view json_text) {
    const json j = parse_json(json_text, "config");
    RunConfig cfg;
    Section root(j, "");
    root.get("seed", cfg.seed);
    root.nested("detectors", [&](Section& s) { read_detectors(s, cfg.detectors); });
    root.nested("calibration", [&](Section& s) {
        s.get_enum("method", cfg.method, parse_calibration_method);
        s.get("score_buckets", cfg.fit.score_buckets);
        s.get("shrinkage_m", cfg.fit.shrinkage_m);
        s.nested("horizon_cuts", [&](Section& h) {
            h.get("medium_from", cfg.horizons.medium_from);
            h.get("long_from", cfg.horizons.long_from);
        });
    });
    root.nested("scoring", [&](Section& s) {
        s.get("eta", cfg.scoring.eta);
        s.get("lambda", cfg.scoring.lambda);
        s.get("theta_frag", cfg.scoring.theta_frag);
        s.nested("dimension_weights", [&](Section& w) {
            for (Dimension d : kAllDimensions) w.get(std::string(to_string(d)), cfg.scoring.dimension_weights[ordinal(d)]);
        });
        s.nested("severity", [&](Section& b) {
            b.get("warning", cfg.scoring.bands.warning);
            b.get("error", cfg.scoring.bands.error);
        });
        s.get("marker_window", cfg.scoring.marker_window);
        s.get("repair_window", cfg.scoring.repair_window);
    });
    root.nested("split", [&](Section& s) {
        s.nested("ratios", [&](Section& r) {
            for (std::size_t k = 0; k < kPartNames.size(); ++k) r.get(kPartNames[k], cfg.split.ratios[k]);
        });
        s.get("seed", cfg.split.seed);
    });
    root.nested("evaluation", [&](Section& s) {
        s.get("bootstrap_replicates", cfg.evaluation.bootstrap_replicates);
        s.get("confidence", cfg.evaluation.confidence);
        s.get("eta_step", cfg.evaluation.eta_step);
        s.get("ece_bins", cfg.evaluation.ece_bins);
    });
    root.nested("paths", [&](Section& s) {
        s.get("model", cfg.paths.model);
        s.get("annotations", cfg.paths.annotations);
        s.get("split", cfg.paths.split);
        s.get("output_dir", cfg.paths.output_dir);
    });
    root.finish();
    cfg.validate();
    return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
    json weights = json::object();
    for (Dimension d : kAllDimensions) weights[std::string(to_string(d))] = cfg.scoring.dimension_weights[ordinal(d)];
    json ratios = json::object();
    for (std::size_t k = 0; k < kPartNames.size(); ++k) ratios[kPartNames[k]] = cfg.split.ratios[k];
    const json j = {
        {"seed", cfg.seed},
        {"detectors", write_detectors(cfg.detectors)},
        {"calibration",
         {{"method", to_string(cfg.method)},
          {"score_buckets", cfg.fit.score_buckets},
          {"shrinkage_m", cfg.fit.shrinkage_m},
          {"horizon_cuts", {{"medium_from", cfg.horizons.medium_from}, {"long_from", cfg.horizons.long_from}}}}},
        {"scoring",
         {{"eta", cfg.scoring.eta},
          {"lambda", cfg.scoring.lambda},
          {"theta_frag", cfg.scoring.theta_frag},
          {"dimension_weights", weights},
          {"severity", {{"warning", cfg.scoring.bands.warning}, {"error", cfg.scoring.bands.error}}},
          {"marker_window", cfg.scoring.marker_window},
          {"repair_window", cfg.scoring.repair_window}}},
        {"split", {{"ratios", ratios}, {"seed", cfg.split.seed}}},
        {"evaluation",
         {{"bootstrap_replicates", cfg.evaluation.bootstrap_replicates},
          {"confidence", cfg.evaluation.confidence},
          {"eta_step", cfg.evaluation.eta_step},
          {"ece_bins", cfg.evaluation.ece_bins}}},
        {"paths",
         {{"model", cfg.paths.model},
          {"annotations", cfg.paths.annotations},
          {"split", cfg.paths.split},
          {"output_dir", cfg.paths.output_dir}}},
    };
    return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
    std::string chosen = path;
    if (const char* env = std::getenv(std::string(kConfigEnvVar).c_str()); env && *env) chosen = env;
    if (chosen.empty()) return RunConfig{};
    return parse_run_config(read_file(chosen));
}

SynthSpec parse_synth_spec(std::string_view json_text) {
    const json j = parse_json(json_text, "synth spec");
    SynthSpec spec;
    Section root(j, "");
    if (const json* v = root.find("event_count")) {
        if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number_unsigned() || !(*v)[1].is_number_unsigned()) {
            root.fail("event_count", "[min, max]");
        }
        spec.min_events = (*v)[0].get<std::size_t>();
        spec.max_events = (*v)[1].get<std::size_t>();
    }
    root.get_enum("topology", spec.topology, parse_topology);
    root.get("units", spec.units);
    root.get("capacity", spec.capacity);
    root.get_enum("source", spec.source, parse_source);
    root.get("injection_floor", spec.injection_floor);
    root.get("seed", spec.seed);
    root.get("intent_keywords", spec.intent_keywords);
    if (const json* v = root.find("palette")) {
        if (!v->is_array()) root.fail("palette", "a list of tools");
        spec.palette.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            Section t((*v)[i], "palette[" + std::to_string(i) + "]");
            PaletteTool tool;
            t.get("name", tool.name);
            t.get("description", tool.description);
            t.get("verb", tool.verb);
            t.get("capabilities", tool.capabilities);
            if (const json* params = t.find("params")) {
                if (!params->is_object()) t.fail("params", "an object of parameter kinds");
                for (const auto& [name, kind] : params->items()) {
                    const std::string k = kind.is_string() ? kind.get<std::string>() : "";
                    std::optional<ParamKind> pk;
                    if (k == "path") pk = ParamKind::path;
                    if (k == "symbol") pk = ParamKind::symbol;
                    if (k == "directory") pk = ParamKind::directory;
                    if (k == "text") pk = ParamKind::text;
                    if (!pk) throw ConfigError(t.path("params." + name) + ": unknown parameter kind '" + k + "'");
                    tool.params.emplace_back(name, *pk);
                }
            }
            OpKind op{};
            std::string op_name;
            t.get("op", op_name);
            if (!op_name.empty()) {
                t.get_enum("op", op, parse_op_kind);
                tool.op = op;
            }
            std::string verdict_name;
            t.get("verdict", verdict_name);
            if (!verdict_name.empty()) {
                Validation verdict{};
                t.get_enum("verdict", verdict, parse_validation);
                tool.verdict = verdict;
            }
            t.finish();
            spec.palette.push_back(std::move(tool));
        }
    }
    if (const json* v = root.find("injections")) {
        if (!v->is_array()) root.fail("injections", "a list");
        for (std::size_t i = 0; i < v->size(); ++i) {
            Section s((*v)[i], "injections[" + std::to_string(i) + "]");
            Injection inj;
            s.get_enum("defect", inj.defect, parse_defect);
            if (!s.raw().contains("defect")) throw ConfigError(s.path("defect") + ": required");
            s.get("intensity", inj.intensity);
            if (const json* loc = s.find("location"); loc && !loc->is_null()) {
                if (!loc->is_number()) s.fail("location", "a number");
                inj.location = loc->get<double>();
            }
            s.get("exempt_variant", inj.exempt_variant);
            s.finish();
            spec.injections.push_back(inj);
        }
    }
    root.finish();
    spec.validate();
    return spec;
}

std::string serialize_synth_spec(const SynthSpec& spec) {
    json palette = json::array();
    for (const PaletteTool& t : spec.palette) {
        json params = json::object();
        for (const auto& [name, kind] : t.params) {
            static constexpr std::array<const char*, 4> kKinds{"path", "symbol", "directory", "text"};
            params[name] = kKinds[static_cast<std::size_t>(kind)];
        }
        json tool = {{"name", t.name},     {"description", t.description}, {"verb", t.verb},
                     {"params", params},   {"capabilities", t.capabilities}};
        if (t.op) tool["op"] = to_string(*t.op);
        if (t.verdict) tool["verdict"] = to_string(*t.verdict);
        palette.push_back(std::move(tool));
    }
    json injections = json::array();
    for (const Injection& inj : spec.injections) {
        json e = {{"defect", to_string(inj.defect)}, {"intensity", inj.intensity}, {"exempt_variant", inj.exempt_variant}};
        e["location"] = inj.location ? json(*inj.location) : json(nullptr);
        injections.push_back(std::move(e));
    }
    const json j = {
        {"event_count", {spec.min_events, spec.max_events}},
        {"topology", to_string(spec.topology)},
        {"units", spec.units},
        {"capacity", spec.capacity},
        {"source", to_string(spec.source)},
        {"injection_floor", spec.injection_floor},
        {"seed", spec.seed},
        {"intent_keywords", spec.intent_keywords},
        {"palette", palette},
        {"injections", injections},
    };
    return j.dump(2) + "\n";
}

std::array<std::size_t, 3> split_sizes(std::size_t total, const std::array<double, 3>& ratios) {
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
        sum += r;
    }
    if (!(sum > 0.0)) throw ConfigError("split ratios must not all be zero");
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = static_cast<double>(total) * ratios[k] / sum;
        sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[k] = exact - static_cast<double>(sizes[k]);
        assigned += sizes[k];
    }
    while (assigned < total) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < 3; ++k) {
            if (rem[k] > rem[best] + 1e-12) best = k;
        }
        ++sizes[best];
        rem[best] = -1.0;
        ++assigned;
    }
    return sizes;
}

}  // namespace proctrace
