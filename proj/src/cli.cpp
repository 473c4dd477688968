// SPDX-License-Identifier: Apache-2.0

#include "proctrace/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <tuple>

#include "proctrace/canonical.hpp"
#include "proctrace/errors.hpp"
#include "proctrace/evaluation.hpp"
#include "proctrace/ingest.hpp"
#include "proctrace/io.hpp"
#include "proctrace/report.hpp"
#include "proctrace/rng.hpp"

namespace proctrace {

namespace fs = std::filesystem;

namespace {

std::string safe_name(const std::string& id) {
    std::string out;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        out += ok ? c : '_';
    }
    return out.empty() ? "_" : out;
}

fs::path output_path(const std::string& dir, const std::string& name) {
    return dir.empty() ? fs::path(name) : fs::path(dir) / name;
}

void emit(CommandResult& r, const fs::path& path, const std::string& bytes) {
    write_file_atomic(path, bytes);
    r.outputs.push_back(path.string());
}

void finish(CommandResult& r) {
    std::sort(r.outputs.begin(), r.outputs.end());
    if (!r.errors.empty() && r.exit_code == 0) r.exit_code = 1;
}

std::vector<Scorecard> load_scorecards(const std::vector<std::string>& paths) {
    std::vector<Scorecard> cards;
    std::set<std::string> ids;
    for (const std::string& p : paths) {
        Scorecard c;
        try {
            c = parse_scorecard(read_file(p));
        } catch (const ConfigError& e) {
            throw ConfigError(p + ": " + e.what());
        }
        if (!ids.insert(c.trajectory_id).second) throw ConfigError(p + ": duplicate trajectory id " + c.trajectory_id);
        cards.push_back(std::move(c));
    }
    std::sort(cards.begin(), cards.end(),
              [](const Scorecard& a, const Scorecard& b) { return a.trajectory_id < b.trajectory_id; });
    return cards;
}

const CalibratedFinding& finding_for(const Scorecard& c, DefectClass d) {
    for (const CalibratedFinding& f : c.findings) {
        if (f.raw.defect == d) return f;
    }
    throw ConfigError("scorecard " + c.trajectory_id + " lacks a finding for " + std::string(to_string(d)));
}

std::map<std::string, std::vector<AnnotationRecord>> group_annotations(const std::string& path) {
    std::map<std::string, std::vector<AnnotationRecord>> out;
    for (AnnotationRecord& r : parse_annotations(read_file(path))) out[r.trajectory_id].push_back(std::move(r));
    for (auto& [_, list] : out) {
        std::sort(list.begin(), list.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
            return std::tie(a.adjudicated, a.annotator_id) > std::tie(b.adjudicated, b.annotator_id);
        });
    }
    return out;
}

// Reference labels for one case: the adjudicated record, else the only record.
const AnnotationRecord& reference_annotation(const std::string& id,
                                             const std::map<std::string, std::vector<AnnotationRecord>>& ann) {
    auto it = ann.find(id);
    if (it == ann.end()) throw ConfigError("no annotation for case " + id);
    const auto& list = it->second;
    if (list.front().adjudicated) return list.front();
    if (list.size() == 1) return list.front();
    throw ConfigError("case " + id + " has several annotations and none is adjudicated");
}

std::map<DefectClass, CalibrationModel> hard_models(const DetectorConfig& cfg) {
    std::map<DefectClass, CalibrationModel> out;
    for (DefectClass d : kAllDefects) {
        CalibrationModel m;
        m.defect = d;
        m.method = CalibrationMethod::hard_threshold;
        m.threshold = cfg.threshold(d);
        out.emplace(d, m);
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- ingest

CommandResult cmd_ingest(const IngestArgs& args) {
    CommandResult r;
    builtin_adapters().get(args.adapter);
    std::set<std::string> stems;
    for (const std::string& input : args.inputs) {
        const std::string stem = fs::path(input).stem().string();
        if (!stems.insert(stem).second) {
            r.errors.push_back(input + ": output name " + stem + " is already used by another input");
            continue;
        }
        try {
            IngestOptions opts;
            opts.fallback_id = stem;
            const Trajectory t = ingest_raw_log(read_file(input), args.adapter, opts);
            emit(r, output_path(args.output_dir, stem + ".trajectory.jsonl"), canonical_serialize(t));
        } catch (const IngestError& e) {
            r.errors.push_back(input + ": " + e.what());
        } catch (const InvariantError& e) {
            r.errors.push_back(input + ": " + e.what());
        } catch (const ConfigError& e) {
            r.errors.push_back(input + ": " + e.what());
        }
    }
    finish(r);
    return r;
}

// ---------------------------------------------------------------- analyze

CommandResult cmd_analyze(const AnalyzeArgs& args) {
    const RunConfig& cfg = args.config;
    cfg.validate();
    std::map<DefectClass, CalibrationModel> models;
    if (!args.model.empty()) {
        models = parse_models(read_file(args.model));
        for (DefectClass d : kAllDefects) {
            if (!models.count(d)) throw ConfigError("model file lacks a model for " + std::string(to_string(d)));
        }
    } else if (cfg.method == CalibrationMethod::hard_threshold) {
        models = hard_models(cfg.detectors);
    } else {
        throw ConfigError("missing model: method " + std::string(to_string(cfg.method)) + " needs --model");
    }

    CommandResult r;
    std::vector<std::pair<fs::path, std::string>> pending;
    std::vector<Scorecard> cards;
    std::set<std::string> ids;
    for (const std::string& input : args.inputs) {
        Trajectory t;
        try {
            t = canonical_parse(read_file(input));
        } catch (const std::exception& e) {
            r.errors.push_back(input + ": " + e.what());
            if (args.strict) break;
            continue;
        }
        if (!ids.insert(t.trajectory_id).second) {
            r.errors.push_back(input + ": duplicate trajectory id " + t.trajectory_id);
            if (args.strict) break;
            continue;
        }
        const CalibrationContext ctx = calibration_context(t, cfg.horizons);
        std::vector<CalibratedFinding> findings;
        for (const RawFinding& raw : detect_all(t, cfg.detectors)) {
            findings.push_back(calibrate_finding(raw, models.at(raw.defect), ctx, cfg.scoring.bands));
        }
        Scorecard card = build_scorecard(t, findings, cfg.scoring.eta, cfg.scoring, cfg.horizons);
        pending.emplace_back(output_path(args.output_dir, safe_name(t.trajectory_id) + ".scorecard.json"),
                             serialize_scorecard(card));
        cards.push_back(std::move(card));
    }
    if (args.strict && !r.errors.empty()) {
        r.exit_code = 1;
        r.notes.push_back("strict mode: no outputs written");
        return r;
    }

    for (const auto& [path, bytes] : pending) emit(r, path, bytes);
    Table summary;
    summary.columns = {"group", "count", "mean_pb", "fragile_success_rate"};
    std::map<std::string, std::vector<Scorecard>> by_source;
    for (const Scorecard& c : cards) by_source[std::string(to_string(c.source))].push_back(c);
    for (const auto& [group, list] : by_source) {
        double pb = 0.0;
        for (const Scorecard& c : list) pb += c.pb;
        summary.add({group, std::to_string(list.size()), format_number(pb / static_cast<double>(list.size())),
                     format_number(fragile_success_rate(list))});
    }
    double pb = 0.0;
    for (const Scorecard& c : cards) pb += c.pb;
    summary.add({"overall", std::to_string(cards.size()),
                 cards.empty() ? "" : format_number(pb / static_cast<double>(cards.size())),
                 format_number(fragile_success_rate(cards))});
    emit(r, output_path(args.output_dir, "run_summary.csv"), to_csv(summary));
    if (!r.errors.empty()) r.notes.push_back(std::to_string(r.errors.size()) + " trajectories skipped");
    // Skipped trajectories are reported but do not fail a non-strict run.
    std::sort(r.outputs.begin(), r.outputs.end());
    return r;
}

// ---------------------------------------------------------------- calibrate

CommandResult cmd_calibrate(const CalibrateArgs& args) {
    const RunConfig& cfg = args.config;
    cfg.validate();
    if (args.split.empty()) throw ConfigError("calibrate needs a split file");
    if (args.annotations.empty()) throw ConfigError("calibrate needs annotations");
    const SplitAssignment split = parse_split(read_file(args.split));
    const auto annotations = group_annotations(args.annotations);
    const std::vector<Scorecard> cards = load_scorecards(args.scorecards);

    std::map<DefectClass, std::vector<CalibrationDatum>> data;
    for (const Scorecard& c : cards) {
        auto it = split.find(c.trajectory_id);
        if (it == split.end()) throw ConfigError("case " + c.trajectory_id + " has no split assignment");
        if (it->second != SplitPart::cal) {
            throw ConfigError("split leakage: case " + c.trajectory_id + " belongs to the " +
                              std::string(to_string(it->second)) + " split");
        }
        const AnnotationRecord& ann = reference_annotation(c.trajectory_id, annotations);
        for (DefectClass d : kAllDefects) {
            const AnnotationLabel label = ann.label(d);
            if (label == AnnotationLabel::exempt) continue;
            data[d].push_back({finding_for(c, d).raw.evidence, c.context, label == AnnotationLabel::present ? 1 : 0});
        }
    }
    for (DefectClass d : kAllDefects) {
        if (data[d].empty()) throw ConfigError("no calibration data for " + std::string(to_string(d)));
    }
    std::map<DefectClass, double> thresholds;
    for (DefectClass d : kAllDefects) thresholds[d] = cfg.detectors.threshold(d);
    const auto models = fit_calibrators(data, cfg.method, thresholds, cfg.fit);

    CommandResult r;
    emit(r, fs::path(args.output), serialize_models(models));
    r.notes.push_back(std::to_string(cards.size()) + " calibration cases");
    return r;
}

// ---------------------------------------------------------------- evaluate

const std::vector<std::string>& evaluation_analyses() {
    static const std::vector<std::string> names{"metrics",   "ece",      "reliability", "kappa",
                                                "failure_correlation", "defect_correlation", "bootstrap",
                                                "eta_sweep", "rank_shift", "scenario"};
    return names;
}

namespace {

struct EvalInputs {
    std::vector<Scorecard> cards;
    std::map<std::string, std::vector<AnnotationRecord>> annotations;
    bool has_annotations = false;
};

void require_annotations(const EvalInputs& in, const std::string& analysis) {
    if (!in.has_annotations) throw ConfigError(analysis + " requires annotations (--annotations)");
}

Table metrics_table(const EvalInputs& in) {
    Table t;
    t.columns = {"defect", "precision", "recall", "f1", "average_precision", "auroc",
                 "tp", "fp", "fn", "tn", "cases", "excluded"};
    for (DefectClass d : kAllDefects) {
        std::vector<Prediction> preds;
        std::vector<AnnotationLabel> labels;
        for (const Scorecard& c : in.cards) {
            const CalibratedFinding& f = finding_for(c, d);
            preds.push_back({f.raw.evidence.score, f.raw.triggered});
            labels.push_back(reference_annotation(c.trajectory_id, in.annotations).label(d));
        }
        const MetricBundle m = detection_metrics(preds, labels);
        t.add({std::string(to_string(d)), format_number(m.precision), format_number(m.recall), format_number(m.f1),
               format_number(m.average_precision), format_number(m.auroc), std::to_string(m.counts.tp),
               std::to_string(m.counts.fp), std::to_string(m.counts.fn), std::to_string(m.counts.tn),
               std::to_string(m.cases), std::to_string(m.excluded)});
    }
    return t;
}

// (calibrated risk, hard decision, label) per non-exempt case of `d`.
struct RiskRow {
    double risk;
    double hard;
    int label;
};

std::vector<RiskRow> risk_rows(const EvalInputs& in, std::optional<DefectClass> only) {
    std::vector<RiskRow> rows;
    for (const Scorecard& c : in.cards) {
        const AnnotationRecord& ann = reference_annotation(c.trajectory_id, in.annotations);
        for (DefectClass d : kAllDefects) {
            if (only && d != *only) continue;
            const AnnotationLabel label = ann.label(d);
            if (label == AnnotationLabel::exempt) continue;
            const CalibratedFinding& f = finding_for(c, d);
            rows.push_back({f.posterior_risk, f.raw.triggered ? 1.0 : 0.0, label == AnnotationLabel::present ? 1 : 0});
        }
    }
    return rows;
}

Table ece_table(const EvalInputs& in, std::size_t bins) {
    Table t;
    t.columns = {"scope", "method", "ece", "cases"};
    auto add_scope = [&](const std::string& scope, std::optional<DefectClass> d) {
        const auto rows = risk_rows(in, d);
        std::vector<std::pair<double, int>> calibrated, hard;
        for (const RiskRow& r : rows) {
            calibrated.emplace_back(r.risk, r.label);
            hard.emplace_back(r.hard, r.label);
        }
        const std::string n = std::to_string(rows.size());
        t.add({scope, "calibrated", rows.empty() ? "" : format_number(compute_ece(calibrated, bins)), n});
        t.add({scope, "hard_threshold", rows.empty() ? "" : format_number(compute_ece(hard, bins)), n});
    };
    add_scope("all", std::nullopt);
    for (DefectClass d : kAllDefects) add_scope(std::string(to_string(d)), d);
    return t;
}

Table reliability_table(const EvalInputs& in, std::size_t bins) {
    Table t;
    t.columns = {"scope", "bin", "lower", "upper", "mean_predicted", "frequency", "count"};
    auto add_scope = [&](const std::string& scope, std::optional<DefectClass> d) {
        std::vector<std::pair<double, int>> pairs;
        for (const RiskRow& r : risk_rows(in, d)) pairs.emplace_back(r.risk, r.label);
        const auto rows = reliability_bins(pairs, bins);
        for (std::size_t b = 0; b < rows.size(); ++b) {
            const ReliabilityBin& x = rows[b];
            t.add({scope, std::to_string(b), format_number(x.lower), format_number(x.upper),
                   x.count ? format_number(x.mean_predicted) : "", x.count ? format_number(x.frequency) : "",
                   std::to_string(x.count)});
        }
    };
    add_scope("all", std::nullopt);
    for (DefectClass d : kAllDefects) add_scope(std::string(to_string(d)), d);
    return t;
}

Table kappa_table(const EvalInputs& in) {
    // First two distinct non-adjudicated annotators per case, by annotator id.
    std::vector<std::pair<const AnnotationRecord*, const AnnotationRecord*>> pairs;
    for (const Scorecard& c : in.cards) {
        auto it = in.annotations.find(c.trajectory_id);
        if (it == in.annotations.end()) continue;
        std::vector<const AnnotationRecord*> raters;
        for (const AnnotationRecord& r : it->second) {
            if (!r.adjudicated) raters.push_back(&r);
        }
        std::sort(raters.begin(), raters.end(),
                  [](const AnnotationRecord* a, const AnnotationRecord* b) { return a->annotator_id < b->annotator_id; });
        if (raters.size() >= 2 && raters[0]->annotator_id != raters[1]->annotator_id) {
            pairs.emplace_back(raters[0], raters[1]);
        }
    }
    if (pairs.empty()) {
        throw ConfigError("kappa requires dual annotations: no case has labels from two annotators");
    }
    Table t;
    t.columns = {"scope", "kappa", "pairs"};
    std::vector<AnnotationLabel> all_a, all_b;
    std::vector<std::vector<std::string>> rows;
    for (DefectClass d : kAllDefects) {
        std::vector<AnnotationLabel> a, b;
        for (const auto& [x, y] : pairs) {
            a.push_back(x->label(d));
            b.push_back(y->label(d));
        }
        all_a.insert(all_a.end(), a.begin(), a.end());
        all_b.insert(all_b.end(), b.begin(), b.end());
        rows.push_back({std::string(to_string(d)), format_number(cohen_kappa(a, b)), std::to_string(a.size())});
    }
    t.add({"all", format_number(cohen_kappa(all_a, all_b)), std::to_string(all_a.size())});
    for (auto& row : rows) t.add(std::move(row));
    return t;
}

std::vector<RiskVector> risk_vectors(const std::vector<Scorecard>& cards) {
    std::vector<RiskVector> out;
    for (const Scorecard& c : cards) {
        RiskVector v{};
        for (DefectClass d : kAllDefects) v[ordinal(d)] = finding_for(c, d).posterior_risk;
        out.push_back(v);
    }
    return out;
}

Table failure_correlation_table(const EvalInputs& in) {
    std::vector<Outcome> outcomes;
    for (const Scorecard& c : in.cards) outcomes.push_back(c.outcome);
    const FailureCorrelation fc = defect_failure_correlation(risk_vectors(in.cards), outcomes);
    Table t;
    t.columns = {"defect", "correlation"};
    for (DefectClass d : kAllDefects) t.add({std::string(to_string(d)), format_number(fc.coefficient[ordinal(d)])});
    return t;
}

Table defect_correlation_table(const EvalInputs& in) {
    const CorrelationMatrix m = defect_correlation_matrix(risk_vectors(in.cards));
    Table t;
    t.columns = {"defect"};
    for (DefectClass d : kAllDefects) t.columns.emplace_back(to_string(d));
    for (DefectClass a : kAllDefects) {
        std::vector<std::string> row{std::string(to_string(a))};
        for (DefectClass b : kAllDefects) row.push_back(format_number(m.value[ordinal(a)][ordinal(b)]));
        t.add(std::move(row));
    }
    return t;
}

std::map<std::string, std::vector<const Scorecard*>> by_system(const std::vector<Scorecard>& cards) {
    std::map<std::string, std::vector<const Scorecard*>> out;
    for (const Scorecard& c : cards) out[c.system].push_back(&c);
    return out;
}

Table bootstrap_table(const EvalInputs& in, const RunConfig& cfg) {
    const auto systems = by_system(in.cards);
    // Cases are tasks; every system must cover the same task set.
    std::map<std::string, std::string> strata;
    for (const Scorecard& c : in.cards) strata.emplace(c.task, std::string(to_string(c.source)));
    BootstrapInput input;
    for (const auto& [name, _] : strata) input.strata.push_back(strata.at(name));
    static const std::vector<std::string> kMetrics{"pb", "q_def", "cp"};
    for (const std::string& m : kMetrics) input.metrics[m];
    for (const auto& [system, list] : systems) {
        std::map<std::string, const Scorecard*> by_task;
        for (const Scorecard* c : list) {
            if (!by_task.emplace(c->task, c).second) {
                throw ConfigError("bootstrap: system " + system + " has several scorecards for task " + c->task);
            }
        }
        const bool same = by_task.size() == strata.size() &&
                          std::all_of(by_task.begin(), by_task.end(), [&](const auto& e) { return strata.count(e.first) > 0; });
        if (!same) {
            throw ConfigError("bootstrap requires every system to cover the same tasks; " + system + " covers " +
                              std::to_string(by_task.size()) + " of " + std::to_string(strata.size()));
        }
        input.systems.push_back(system);
        std::vector<double> pb, q, cp;
        for (const auto& [task, c] : by_task) {
            pb.push_back(c->pb);
            q.push_back(c->q_def);
            cp.push_back(c->cp);
        }
        input.metrics["pb"].push_back(pb);
        input.metrics["q_def"].push_back(q);
        input.metrics["cp"].push_back(cp);
    }
    const auto rows = bootstrap_ranking(input, cfg.evaluation.bootstrap_replicates, substream_seed(cfg.seed, stream_id("bootstrap")),
                                        cfg.evaluation.confidence);
    Table t;
    t.columns = {"system", "mean_rank", "rank_std", "top1", "top3"};
    for (const std::string& m : kMetrics) {
        t.columns.push_back(m);
        t.columns.push_back(m + "_lower");
        t.columns.push_back(m + "_upper");
    }
    for (const SystemBootstrap& s : rows) {
        std::vector<std::string> row{s.system, format_number(s.mean_rank), format_number(s.rank_std),
                                     format_number(s.top1), format_number(s.top3)};
        for (const std::string& m : kMetrics) {
            row.push_back(format_number(s.point.at(m)));
            row.push_back(format_number(s.ci.at(m).lower));
            row.push_back(format_number(s.ci.at(m).upper));
        }
        t.add(std::move(row));
    }
    return t;
}

std::vector<SystemQuality> system_qualities(const std::vector<Scorecard>& cards) {
    std::vector<SystemQuality> out;
    for (const auto& [system, list] : by_system(cards)) {
        SystemQuality q{system, 0.0, 0.0};
        for (const Scorecard* c : list) {
            q.q_def += c->q_def;
            q.cp += c->cp;
        }
        q.q_def /= static_cast<double>(list.size());
        q.cp /= static_cast<double>(list.size());
        out.push_back(q);
    }
    return out;
}

std::pair<Table, Table> eta_tables(const EvalInputs& in, double step) {
    std::vector<double> grid;
    const auto points = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
    for (std::size_t k = 0; k <= points; ++k) grid.push_back(std::min(1.0, static_cast<double>(k) * step));
    if (grid.back() < 1.0) grid.push_back(1.0);
    const EtaSweep sweep = eta_sweep(system_qualities(in.cards), grid);
    Table t;
    t.columns = {"eta", "system", "pb", "rank"};
    for (std::size_t g = 0; g < sweep.grid.size(); ++g) {
        for (std::size_t s = 0; s < sweep.systems.size(); ++s) {
            t.add({format_number(sweep.grid[g]), sweep.systems[s], format_number(sweep.pb[g][s]),
                   std::to_string(sweep.ranks[g][s])});
        }
    }
    Table c;
    c.columns = {"first", "second", "eta"};
    for (const Crossing& x : sweep.crossings) c.add({x.first, x.second, format_number(x.eta)});
    return {t, c};
}

Table rank_shift_table(const EvalInputs& in) {
    std::map<std::string, double> outcome, pb;
    for (const auto& [system, list] : by_system(in.cards)) {
        std::size_t known = 0, success = 0;
        double total = 0.0;
        for (const Scorecard* c : list) {
            total += c->pb;
            if (c->outcome == Outcome::unknown) continue;
            ++known;
            success += c->outcome == Outcome::success ? 1 : 0;
        }
        outcome[system] = known ? static_cast<double>(success) / static_cast<double>(known) : 0.0;
        pb[system] = total / static_cast<double>(list.size());
    }
    Table t;
    t.columns = {"system", "success_rate", "mean_pb", "outcome_rank", "pb_rank", "shift"};
    for (const RankShiftRow& r : rank_shift(outcome, pb)) {
        t.add({r.system, format_number(outcome.at(r.system)), format_number(pb.at(r.system)),
               std::to_string(r.outcome_rank), std::to_string(r.pb_rank), std::to_string(r.shift)});
    }
    return t;
}

Table scenario_table(const EvalInputs& in) {
    const ScenarioTable s = scenario_scores(in.cards);
    Table t;
    t.columns = {"group", "count", "mean_pb", "fragile_success_rate"};
    std::map<std::string, std::vector<Scorecard>> groups;
    for (const Scorecard& c : in.cards) groups[std::string(to_string(c.source))].push_back(c);
    for (const ScenarioRow& r : s.rows) {
        t.add({r.group, std::to_string(r.count), format_number(r.mean_pb), format_number(fragile_success_rate(groups[r.group]))});
    }
    t.add({"overall", std::to_string(s.overall.count), s.overall.count ? format_number(s.overall.mean_pb) : "",
           format_number(fragile_success_rate(in.cards))});
    return t;
}

}  // namespace

CommandResult cmd_evaluate(const EvaluateArgs& args) {
    const RunConfig& cfg = args.config;
    cfg.validate();
    const auto& known = evaluation_analyses();
    std::set<std::string> requested;
    for (const std::string& a : args.analyses) {
        if (std::find(known.begin(), known.end(), a) == known.end()) throw ConfigError("unknown analysis '" + a + "'");
        requested.insert(a);
    }
    if (requested.empty()) throw ConfigError("no analysis selected");

    EvalInputs in;
    in.cards = load_scorecards(args.scorecards);
    if (!args.part.empty()) {
        auto part = parse_split_part(args.part);
        if (!part) throw ConfigError("unknown split part '" + args.part + "'");
        if (args.split.empty()) throw ConfigError("--part needs a split file");
        const SplitAssignment split = parse_split(read_file(args.split));
        std::erase_if(in.cards, [&](const Scorecard& c) {
            auto it = split.find(c.trajectory_id);
            return it == split.end() || it->second != *part;
        });
    }
    if (in.cards.empty()) throw ConfigError("no scorecards to evaluate");
    if (!args.annotations.empty()) {
        in.annotations = group_annotations(args.annotations);
        in.has_annotations = true;
    }

    std::vector<std::pair<std::string, Table>> tables;
    const std::size_t bins = cfg.evaluation.ece_bins;
    for (const std::string& a : known) {
        if (!requested.count(a)) continue;
        if (a == "metrics") {
            require_annotations(in, a);
            tables.emplace_back("metrics.csv", metrics_table(in));
        } else if (a == "ece") {
            require_annotations(in, a);
            tables.emplace_back("ece.csv", ece_table(in, bins));
        } else if (a == "reliability") {
            require_annotations(in, a);
            tables.emplace_back("reliability.csv", reliability_table(in, bins));
        } else if (a == "kappa") {
            require_annotations(in, a);
            tables.emplace_back("kappa.csv", kappa_table(in));
        } else if (a == "failure_correlation") {
            tables.emplace_back("failure_correlation.csv", failure_correlation_table(in));
        } else if (a == "defect_correlation") {
            tables.emplace_back("defect_correlation.csv", defect_correlation_table(in));
        } else if (a == "bootstrap") {
            tables.emplace_back("bootstrap.csv", bootstrap_table(in, cfg));
        } else if (a == "eta_sweep") {
            auto [sweep, crossings] = eta_tables(in, cfg.evaluation.eta_step);
            tables.emplace_back("eta_sweep.csv", std::move(sweep));
            tables.emplace_back("eta_crossings.csv", std::move(crossings));
        } else if (a == "rank_shift") {
            tables.emplace_back("rank_shift.csv", rank_shift_table(in));
        } else if (a == "scenario") {
            tables.emplace_back("scenario.csv", scenario_table(in));
        }
    }
    CommandResult r;
    for (const auto& [name, table] : tables) emit(r, output_path(args.output_dir, name), to_csv(table));
    finish(r);
    return r;
}

// ---------------------------------------------------------------- synth

CommandResult cmd_synth(const SynthArgs& args) {
    const SynthSpec spec = args.spec.empty() ? SynthSpec{} : parse_synth_spec(read_file(args.spec));
    spec.validate();
    CommandResult r;
    for (std::size_t k = 0; k < args.count; ++k) {
        Generated g = generate_trajectory(spec, substream_seed(args.seed, k));
        const std::string id = "synth-" + std::to_string(k);
        g.trajectory.trajectory_id = id;
        emit(r, output_path(args.output_dir, id + ".trajectory.jsonl"), canonical_serialize(g.trajectory));
        emit(r, output_path(args.output_dir, id + ".truth.json"), serialize_ground_truth(id, g.truth));
    }
    finish(r);
    return r;
}

// ---------------------------------------------------------------- split

CommandResult cmd_split(const SplitArgs& args) {
    args.config.validate();
    std::vector<SplitCase> cases;
    for (const std::string& input : args.inputs) {
        const Trajectory t = canonical_parse(read_file(input));
        cases.push_back({t.trajectory_id, std::string(to_string(t.source)) + "/" + std::string(to_string(t.outcome))});
    }
    const auto sizes = split_sizes(cases.size(), args.config.split.ratios);
    const auto parts = stratified_split(cases, {sizes.begin(), sizes.end()}, args.config.split.seed);
    SplitAssignment out;
    static constexpr std::array<SplitPart, 3> kParts{SplitPart::dev, SplitPart::cal, SplitPart::eval};
    for (std::size_t p = 0; p < parts.size(); ++p) {
        for (const std::string& id : parts[p]) out[id] = kParts[p];
    }
    CommandResult r;
    emit(r, fs::path(args.output), serialize_split(out));
    return r;
}

}  // namespace proctrace
