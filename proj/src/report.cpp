// SPDX-License-Identifier: Apache-2.0

#include "proctrace/report.hpp"

#include <json.hpp>

#include "proctrace/errors.hpp"
#include "proctrace/io.hpp"

namespace proctrace {

using nlohmann::json;

namespace {

json parse_document(std::string_view bytes, std::string_view format) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string(format) + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != format) {
        throw ConfigError("expected a " + std::string(format) + " document");
    }
    if (j.value("version", 0) != kReportVersion) {
        throw ConfigError(std::string(format) + ": unsupported version");
    }
    return j;
}

template <typename T, typename Parse>
T parse_name(const json& v, Parse parse, const char* what) {
    auto r = parse(v.get<std::string>());
    if (!r) throw ConfigError(std::string("unknown ") + what + " '" + v.get<std::string>() + "'");
    return *r;
}

// Runs `fn`, turning nlohmann type and key errors into ConfigErrors.
template <typename Fn>
auto guarded(std::string_view format, Fn fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(format) + ": " + e.what());
    }
}

json spans_to_json(const std::vector<Span>& spans) {
    json out = json::array();
    for (const Span& s : spans) out.push_back({s.first, s.last});
    return out;
}

std::vector<Span> spans_from_json(const json& j) {
    std::vector<Span> out;
    for (const json& s : j) out.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    return out;
}

json step_to_json(const StepFunction& f) { return {{"lower", f.lower}, {"values", f.values}}; }

StepFunction step_from_json(const json& j) {
    StepFunction f;
    f.lower = j.at("lower").get<std::vector<double>>();
    f.values = j.at("values").get<std::vector<double>>();
    if (f.lower.size() != f.values.size()) throw ConfigError("step function has mismatched lengths");
    return f;
}

CalibrationContext context_from_key(const std::string& key) {
    auto c = parse_context_key(key);
    if (!c) throw ConfigError("unknown calibration context '" + key + "'");
    return *c;
}

}  // namespace

std::string serialize_scorecard(const Scorecard& card) {
    json findings = json::array();
    for (const CalibratedFinding& f : card.findings) {
        findings.push_back({
            {"defect", to_string(f.raw.defect)},
            {"dimension", to_string(dimension_of(f.raw.defect))},
            {"score", f.raw.evidence.score},
            {"threshold", f.raw.threshold},
            {"triggered", f.raw.triggered},
            {"exempted", f.raw.exempted},
            {"rationale", f.raw.rationale},
            {"features", f.raw.evidence.features},
            {"spans", spans_to_json(f.raw.evidence.supporting_spans)},
            {"posterior_risk", f.posterior_risk},
            {"severity", to_string(f.severity)},
        });
    }
    const json j = {
        {"format", kScorecardFormat},
        {"version", kReportVersion},
        {"trajectory_id", card.trajectory_id},
        {"task", card.task},
        {"system", card.system},
        {"source", to_string(card.source)},
        {"context", {{"source", to_string(card.context.source)}, {"horizon", to_string(card.context.horizon)}}},
        {"outcome", to_string(card.outcome)},
        {"quality",
         {{"q_ctx", card.q_ctx}, {"q_tool", card.q_tool}, {"q_wf", card.q_wf}, {"q_eco", card.q_eco}, {"q_def", card.q_def}}},
        {"cp", card.cp},
        {"control",
         {{"interpretability", card.control.interpretability},
          {"interruptibility", card.control.interruptibility},
          {"correctability", card.control.correctability},
          {"reversibility", card.control.reversibility},
          {"authority_handoff", card.control.authority_handoff}}},
        {"pb", card.pb},
        {"eta", card.eta},
        {"fragile_success", card.fragile_success ? json(*card.fragile_success) : json(nullptr)},
        {"findings", findings},
    };
    return j.dump(2) + "\n";
}

Scorecard parse_scorecard(std::string_view bytes) {
    const json j = parse_document(bytes, kScorecardFormat);
    return guarded(kScorecardFormat, [&] {
        Scorecard c;
        c.trajectory_id = j.at("trajectory_id").get<std::string>();
        c.task = j.at("task").get<std::string>();
        c.system = j.at("system").get<std::string>();
        c.source = parse_name<Source>(j.at("source"), parse_source, "source");
        c.context.source = parse_name<Source>(j.at("context").at("source"), parse_source, "source");
        c.context.horizon = parse_name<Horizon>(j.at("context").at("horizon"), parse_horizon, "horizon");
        c.outcome = parse_name<Outcome>(j.at("outcome"), parse_outcome, "outcome");
        const json& q = j.at("quality");
        c.q_ctx = q.at("q_ctx").get<double>();
        c.q_tool = q.at("q_tool").get<double>();
        c.q_wf = q.at("q_wf").get<double>();
        c.q_eco = q.at("q_eco").get<double>();
        c.q_def = q.at("q_def").get<double>();
        c.cp = j.at("cp").get<double>();
        const json& ctl = j.at("control");
        c.control.interpretability = ctl.at("interpretability").get<double>();
        c.control.interruptibility = ctl.at("interruptibility").get<double>();
        c.control.correctability = ctl.at("correctability").get<double>();
        c.control.reversibility = ctl.at("reversibility").get<double>();
        c.control.authority_handoff = ctl.at("authority_handoff").get<double>();
        c.pb = j.at("pb").get<double>();
        c.eta = j.at("eta").get<double>();
        if (!j.at("fragile_success").is_null()) c.fragile_success = j.at("fragile_success").get<bool>();
        for (const json& f : j.at("findings")) {
            CalibratedFinding cf;
            cf.raw.defect = parse_name<DefectClass>(f.at("defect"), parse_defect, "defect");
            cf.raw.evidence.defect = cf.raw.defect;
            cf.raw.evidence.score = f.at("score").get<double>();
            cf.raw.evidence.features = f.at("features").get<std::map<std::string, double>>();
            cf.raw.evidence.supporting_spans = spans_from_json(f.at("spans"));
            cf.raw.threshold = f.at("threshold").get<double>();
            cf.raw.triggered = f.at("triggered").get<bool>();
            cf.raw.exempted = f.at("exempted").get<bool>();
            cf.raw.rationale = f.at("rationale").get<std::string>();
            cf.posterior_risk = f.at("posterior_risk").get<double>();
            cf.severity = parse_name<Severity>(f.at("severity"), parse_severity, "severity");
            c.findings.push_back(std::move(cf));
        }
        return c;
    });
}

std::string serialize_models(const std::map<DefectClass, CalibrationModel>& models) {
    json list = json::array();
    for (const auto& [defect, m] : models) {
        json buckets = json::object();
        for (const auto& [ctx, row] : m.buckets) {
            json cells = json::array();
            for (const BucketCount& b : row) cells.push_back({b.n, b.k});
            buckets[context_key(ctx)] = std::move(cells);
        }
        json steps = json::object();
        for (const auto& [ctx, f] : m.steps) steps[context_key(ctx)] = step_to_json(f);
        list.push_back({
            {"defect", to_string(defect)},
            {"method", to_string(m.method)},
            {"threshold", m.threshold},
            {"score_buckets", m.score_buckets},
            {"shrinkage_m", m.shrinkage_m},
            {"alpha", m.alpha},
            {"beta", m.beta},
            {"family_prior", m.family_prior},
            {"buckets", buckets},
            {"steps", steps},
            {"pooled", step_to_json(m.pooled)},
        });
    }
    const json j = {{"format", kModelFormat}, {"version", kReportVersion}, {"models", list}};
    return j.dump(2) + "\n";
}

std::map<DefectClass, CalibrationModel> parse_models(std::string_view bytes) {
    const json j = parse_document(bytes, kModelFormat);
    return guarded(kModelFormat, [&] {
        std::map<DefectClass, CalibrationModel> out;
        for (const json& e : j.at("models")) {
            CalibrationModel m;
            m.defect = parse_name<DefectClass>(e.at("defect"), parse_defect, "defect");
            m.method = parse_name<CalibrationMethod>(e.at("method"), parse_calibration_method, "method");
            m.threshold = e.at("threshold").get<double>();
            m.score_buckets = e.at("score_buckets").get<std::size_t>();
            if (m.score_buckets < 1) throw ConfigError("score_buckets must be at least 1");
            m.shrinkage_m = e.at("shrinkage_m").get<double>();
            m.alpha = e.at("alpha").get<double>();
            m.beta = e.at("beta").get<double>();
            m.family_prior = e.at("family_prior").get<double>();
            for (const auto& [key, cells] : e.at("buckets").items()) {
                auto& row = m.buckets[context_from_key(key)];
                for (const json& b : cells) row.push_back({b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>()});
                if (row.size() != m.score_buckets) throw ConfigError("bucket row length differs from score_buckets");
            }
            for (const auto& [key, f] : e.at("steps").items()) m.steps[context_from_key(key)] = step_from_json(f);
            m.pooled = step_from_json(e.at("pooled"));
            if (!out.emplace(m.defect, std::move(m)).second) throw ConfigError("duplicate model for one defect");
        }
        return out;
    });
}

std::string serialize_ground_truth(const std::string& trajectory_id, const GroundTruth& truth) {
    json labels = json::object();
    for (DefectClass d : kAllDefects) labels[std::string(to_string(d))] = to_string(truth.label(d));
    json spans = json::object();
    for (const auto& [d, list] : truth.spans) spans[std::string(to_string(d))] = spans_to_json(list);
    const json j = {{"format", kGroundTruthFormat},
                    {"version", kReportVersion},
                    {"trajectory_id", trajectory_id},
                    {"labels", labels},
                    {"spans", spans}};
    return j.dump(2) + "\n";
}

GroundTruth parse_ground_truth(std::string_view bytes) {
    const json j = parse_document(bytes, kGroundTruthFormat);
    return guarded(kGroundTruthFormat, [&] {
        GroundTruth g;
        for (const auto& [name, label] : j.at("labels").items()) {
            const DefectClass d = parse_name<DefectClass>(json(name), parse_defect, "defect");
            g.labels[ordinal(d)] = parse_name<AnnotationLabel>(label, parse_annotation_label, "label");
        }
        for (const auto& [name, list] : j.at("spans").items()) {
            g.spans[parse_name<DefectClass>(json(name), parse_defect, "defect")] = spans_from_json(list);
        }
        return g;
    });
}

std::string_view to_string(SplitPart p) {
    switch (p) {
        case SplitPart::dev: return "dev";
        case SplitPart::cal: return "cal";
        case SplitPart::eval: return "eval";
    }
    return "?";
}

std::optional<SplitPart> parse_split_part(std::string_view s) {
    if (s == "dev") return SplitPart::dev;
    if (s == "cal") return SplitPart::cal;
    if (s == "eval") return SplitPart::eval;
    return std::nullopt;
}

std::string serialize_split(const SplitAssignment& split) {
    Table t;
    t.columns = {"trajectory_id", "part"};
    for (const auto& [id, part] : split) t.add({id, std::string(to_string(part))});
    return to_csv(t);
}

SplitAssignment parse_split(std::string_view bytes) {
    const Table t = parse_csv(bytes);
    if (t.columns != std::vector<std::string>{"trajectory_id", "part"}) {
        throw ConfigError("split file needs columns trajectory_id, part");
    }
    SplitAssignment out;
    for (const auto& row : t.rows) {
        auto part = parse_split_part(row[1]);
        if (!part) throw ConfigError("split file: unknown part '" + row[1] + "'");
        if (!out.emplace(row[0], *part).second) throw ConfigError("split file: duplicate id '" + row[0] + "'");
    }
    return out;
}

}  // namespace proctrace
