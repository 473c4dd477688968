// SPDX-License-Identifier: Apache-2.0

#include "proctrace/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "proctrace/errors.hpp"
#include "proctrace/rng.hpp"

namespace proctrace {

using nlohmann::json;

// ---------------------------------------------------------------- annotations

std::string_view to_string(AnnotationLabel l) {
    switch (l) {
        case AnnotationLabel::present: return "present";
        case AnnotationLabel::absent: return "absent";
        case AnnotationLabel::exempt: return "exempt";
    }
    return "?";
}

std::optional<AnnotationLabel> parse_annotation_label(std::string_view s) {
    if (s == "present") return AnnotationLabel::present;
    if (s == "absent") return AnnotationLabel::absent;
    if (s == "exempt") return AnnotationLabel::exempt;
    return std::nullopt;
}

void validate_annotation(const AnnotationRecord& r) {
    if (r.trajectory_id.empty()) throw ConfigError("annotation without trajectory_id");
    const bool any_exempt = std::find(r.labels.begin(), r.labels.end(), AnnotationLabel::exempt) != r.labels.end();
    if (any_exempt && r.evidence_note.empty()) {
        throw ConfigError("annotation for '" + r.trajectory_id + "' marks an exemption without an evidence note");
    }
}

std::string serialize_annotations(const std::vector<AnnotationRecord>& records) {
    std::string out = json{{"record", "header"}, {"format", kAnnotationFormat}, {"version", kAnnotationFormatVersion}}
                          .dump();
    out += '\n';
    for (const AnnotationRecord& r : records) {
        json labels = json::object();
        for (DefectClass d : kAllDefects) labels[std::string(to_string(d))] = to_string(r.label(d));
        out += json{{"record", "annotation"},
                    {"trajectory_id", r.trajectory_id},
                    {"annotator_id", r.annotator_id},
                    {"adjudicated", r.adjudicated},
                    {"evidence_note", r.evidence_note},
                    {"labels", std::move(labels)}}
                   .dump();
        out += '\n';
    }
    return out;
}

std::vector<AnnotationRecord> parse_annotations(std::string_view bytes) {
    std::vector<AnnotationRecord> out;
    std::size_t pos = 0, line_no = 0;
    bool have_header = false;
    while (pos < bytes.size()) {
        std::size_t end = bytes.find('\n', pos);
        if (end == std::string_view::npos) end = bytes.size();
        const std::string_view line = bytes.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) throw ParseError(line_no, "empty record");
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ParseError(line_no, "malformed record");
        auto str = [&](const char* key) -> std::string {
            auto it = j.find(key);
            if (it == j.end() || !it->is_string()) throw ParseError(line_no, std::string("field '") + key + "' must be a string");
            return it->get<std::string>();
        };
        if (!have_header) {
            if (str("record") != "header" || str("format") != kAnnotationFormat) {
                throw ParseError(line_no, "first record must be the annotations header");
            }
            auto v = j.find("version");
            if (v == j.end() || !v->is_number_integer() || v->get<int>() != kAnnotationFormatVersion) {
                throw ParseError(line_no, "unsupported annotations version");
            }
            have_header = true;
            continue;
        }
        if (str("record") != "annotation") throw ParseError(line_no, "expected an annotation record");
        AnnotationRecord r;
        r.trajectory_id = str("trajectory_id");
        r.annotator_id = str("annotator_id");
        r.evidence_note = str("evidence_note");
        auto adj = j.find("adjudicated");
        if (adj == j.end() || !adj->is_boolean()) throw ParseError(line_no, "field 'adjudicated' must be a boolean");
        r.adjudicated = adj->get<bool>();
        auto labels = j.find("labels");
        if (labels == j.end() || !labels->is_object()) throw ParseError(line_no, "field 'labels' must be an object");
        std::set<std::string> seen;
        for (const auto& [k, v] : labels->items()) {
            auto d = parse_defect(k);
            if (!d) throw ParseError(line_no, "unknown defect '" + k + "'");
            auto l = v.is_string() ? parse_annotation_label(v.get<std::string>()) : std::nullopt;
            if (!l) throw ParseError(line_no, "unknown label for '" + k + "'");
            r.labels[ordinal(*d)] = *l;
            seen.insert(k);
        }
        if (seen.size() != kDefectCount) throw ParseError(line_no, "annotation must label all eleven defect classes");
        try {
            validate_annotation(r);
        } catch (const ConfigError& e) {
            throw ParseError(line_no, e.what());
        }
        out.push_back(std::move(r));
    }
    if (!have_header) throw ParseError(1, "missing annotations header");
    return out;
}

// ---------------------------------------------------------------- split

namespace {

// Integer max flow by repeated DFS augmentation; graphs here are tiny.
class FlowNetwork {
public:
    explicit FlowNetwork(std::size_t n) : adj_(n) {}

    std::size_t add_edge(std::size_t from, std::size_t to, long cap) {
        adj_[from].push_back(edges_.size());
        edges_.push_back({to, cap});
        adj_[to].push_back(edges_.size());
        edges_.push_back({from, 0});
        return edges_.size() - 2;
    }

    long max_flow(std::size_t s, std::size_t t) {
        long total = 0;
        while (true) {
            std::vector<bool> seen(adj_.size(), false);
            const long pushed = augment(s, t, std::numeric_limits<long>::max(), seen);
            if (pushed == 0) return total;
            total += pushed;
        }
    }

    long flow_on(std::size_t edge) const { return edges_[edge ^ 1].cap; }

private:
    struct Edge {
        std::size_t to;
        long cap;
    };

    long augment(std::size_t v, std::size_t t, long limit, std::vector<bool>& seen) {
        if (v == t) return limit;
        seen[v] = true;
        for (std::size_t id : adj_[v]) {
            Edge& e = edges_[id];
            if (e.cap <= 0 || seen[e.to]) continue;
            const long pushed = augment(e.to, t, std::min(limit, e.cap), seen);
            if (pushed > 0) {
                e.cap -= pushed;
                edges_[id ^ 1].cap += pushed;
                return pushed;
            }
        }
        return 0;
    }

    std::vector<std::vector<std::size_t>> adj_;
    std::vector<Edge> edges_;
};

}  // namespace

std::vector<std::vector<std::string>> stratified_split(const std::vector<SplitCase>& cases,
                                                       const std::vector<std::size_t>& sizes, std::uint64_t seed) {
    if (sizes.empty()) throw ConfigError("split needs at least one part");
    const std::size_t total = cases.size();
    if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != total) {
        throw ConfigError("split sizes must sum to the number of cases (" + std::to_string(total) + ")");
    }
    std::map<std::string, std::vector<std::string>> strata;
    std::set<std::string> ids;
    for (const SplitCase& c : cases) {
        if (!ids.insert(c.id).second) throw ConfigError("duplicate case id '" + c.id + "'");
        strata[c.stratum].push_back(c.id);
    }
    const std::size_t parts = sizes.size();
    const auto nonzero = static_cast<std::size_t>(std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }));
    for (const auto& [name, members] : strata) {
        if (members.size() < nonzero) {
            throw ConfigError("stratum '" + name + "' has " + std::to_string(members.size()) +
                              " cases, fewer than the " + std::to_string(nonzero) + " parts it must be spread over");
        }
    }

    // Floors of the proportional shares, then one extra case per cell where
    // the share is fractional, chosen so every row and column total holds.
    const std::size_t rows = strata.size();
    std::vector<std::vector<std::size_t>> alloc(rows, std::vector<std::size_t>(parts, 0));
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> remainders(rows);
    std::vector<long> row_deficit(rows, 0), col_deficit(parts, 0);
    for (std::size_t k = 0; k < parts; ++k) col_deficit[k] = static_cast<long>(sizes[k]);
    std::size_t r = 0;
    for (const auto& [name, members] : strata) {
        row_deficit[r] = static_cast<long>(members.size());
        for (std::size_t k = 0; k < parts; ++k) {
            const std::size_t num = members.size() * sizes[k];
            alloc[r][k] = num / total;
            row_deficit[r] -= static_cast<long>(alloc[r][k]);
            col_deficit[k] -= static_cast<long>(alloc[r][k]);
            if (num % total != 0) remainders[r].push_back({num % total, k});
        }
        std::sort(remainders[r].begin(), remainders[r].end(),
                  [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
        ++r;
    }
    const std::size_t source = rows + parts, sink = source + 1;
    FlowNetwork net(sink + 1);
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> cell_edges(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        net.add_edge(source, i, row_deficit[i]);
        for (const auto& [rem, k] : remainders[i]) cell_edges[i].push_back({net.add_edge(i, rows + k, 1), k});
    }
    for (std::size_t k = 0; k < parts; ++k) net.add_edge(rows + k, sink, col_deficit[k]);
    const long need = std::accumulate(row_deficit.begin(), row_deficit.end(), 0L);
    if (net.max_flow(source, sink) != need) throw ConfigError("no proportional allocation exists for these sizes");
    for (std::size_t i = 0; i < rows; ++i) {
        for (const auto& [edge, k] : cell_edges[i]) alloc[i][k] += static_cast<std::size_t>(net.flow_on(edge));
    }

    std::vector<std::vector<std::string>> out(parts);
    r = 0;
    for (auto& [name, members] : strata) {
        std::sort(members.begin(), members.end());
        Rng rng(seed, stream_id(name));
        rng.shuffle(members);
        std::size_t next = 0;
        for (std::size_t k = 0; k < parts; ++k) {
            for (std::size_t c = 0; c < alloc[r][k]; ++c) out[k].push_back(members[next++]);
        }
        ++r;
    }
    for (auto& part : out) std::sort(part.begin(), part.end());
    return out;
}

// ---------------------------------------------------------------- detection metrics

double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

MetricBundle metrics_from_counts(const Confusion& c) {
    MetricBundle m;
    m.counts = c;
    m.cases = c.tp + c.fp + c.fn + c.tn;
    if (c.tp + c.fp > 0) {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
        m.notes.push_back("precision undefined: nothing triggered");
    }
    if (c.tp + c.fn > 0) {
        m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
        m.notes.push_back("recall undefined: no positive labels");
    }
    if (m.precision && m.recall) m.f1 = f1_score(*m.precision, *m.recall);
    return m;
}

std::optional<double> average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
    const std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (positives == 0) return std::nullopt;
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double ap = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, seen = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            tp += labels[order[j]] == 1 ? 1 : 0;
            ++j;
        }
        seen = j;
        const double recall = static_cast<double>(tp) / static_cast<double>(positives);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

std::optional<double> auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) rank[order[k]] = mid;
        i = j;
    }
    double pos = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == 1) {
            pos += 1.0;
            rank_sum += rank[i];
        }
    }
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0.0 || neg == 0.0) return std::nullopt;
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

MetricBundle detection_metrics(const std::vector<Prediction>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) throw ConfigError("predictions and labels differ in length");
    Confusion c;
    std::vector<double> scores;
    scores.reserve(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int y = labels[i];
        if (y != 0 && y != 1) throw ConfigError("labels must be 0 or 1");
        const bool t = predictions[i].triggered;
        if (t && y) ++c.tp;
        else if (t) ++c.fp;
        else if (y) ++c.fn;
        else ++c.tn;
        scores.push_back(predictions[i].score);
    }
    MetricBundle m = metrics_from_counts(c);
    m.average_precision = average_precision(scores, labels);
    m.auroc = auroc(scores, labels);
    if (!m.auroc) m.notes.push_back("AUROC undefined: only one label class present");
    return m;
}

MetricBundle detection_metrics(const std::vector<Prediction>& predictions,
                               const std::vector<AnnotationLabel>& labels) {
    if (predictions.size() != labels.size()) throw ConfigError("predictions and labels differ in length");
    std::vector<Prediction> kept;
    std::vector<int> binary;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == AnnotationLabel::exempt) {
            ++excluded;
            continue;
        }
        kept.push_back(predictions[i]);
        binary.push_back(labels[i] == AnnotationLabel::present ? 1 : 0);
    }
    MetricBundle m = detection_metrics(kept, binary);
    m.excluded = excluded;
    return m;
}

// ---------------------------------------------------------------- agreement

std::optional<double> cohen_kappa(const std::vector<AnnotationLabel>& a, const std::vector<AnnotationLabel>& b,
                                  bool fold_exempt) {
    if (a.size() != b.size()) throw ConfigError("label lists differ in length");
    if (a.empty()) return std::nullopt;
    auto category = [&](AnnotationLabel l) {
        if (fold_exempt && l == AnnotationLabel::exempt) l = AnnotationLabel::absent;
        return static_cast<std::size_t>(l);
    };
    std::array<double, 3> ma{}, mb{};
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t ca = category(a[i]), cb = category(b[i]);
        ma[ca] += 1.0;
        mb[cb] += 1.0;
        agree += ca == cb ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(a.size());
    const double po = agree / n;
    double pe = 0.0;
    for (std::size_t c = 0; c < 3; ++c) pe += (ma[c] / n) * (mb[c] / n);
    if (pe >= 1.0) return std::nullopt;
    return (po - pe) / (1.0 - pe);
}

// ---------------------------------------------------------------- correlation

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return std::nullopt;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

FailureCorrelation defect_failure_correlation(const std::vector<RiskVector>& risks,
                                              const std::vector<Outcome>& outcomes) {
    if (risks.size() != outcomes.size()) throw ConfigError("risks and outcomes differ in length");
    FailureCorrelation out;
    std::vector<double> failure;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i] == Outcome::unknown) continue;
        kept.push_back(i);
        failure.push_back(outcomes[i] == Outcome::failure ? 1.0 : 0.0);
    }
    for (DefectClass d : kAllDefects) {
        std::vector<double> x;
        for (std::size_t i : kept) x.push_back(risks[i][ordinal(d)]);
        out.coefficient[ordinal(d)] = pearson(x, failure);
        if (!out.coefficient[ordinal(d)]) {
            out.notes.push_back(std::string(to_string(d)) + ": undefined (zero variance or fewer than 2 cases)");
        }
    }
    return out;
}

CorrelationMatrix defect_correlation_matrix(const std::vector<RiskVector>& risks) {
    CorrelationMatrix m;
    std::array<std::vector<double>, kDefectCount> columns;
    for (const RiskVector& r : risks) {
        for (std::size_t j = 0; j < kDefectCount; ++j) columns[j].push_back(r[j]);
    }
    for (std::size_t a = 0; a < kDefectCount; ++a) {
        m.value[a][a] = 1.0;
        for (std::size_t b = a + 1; b < kDefectCount; ++b) {
            const auto v = pearson(columns[a], columns[b]);
            m.value[a][b] = m.value[b][a] = v;
            if (!v) {
                m.notes.push_back(std::string(to_string(kAllDefects[a])) + " x " +
                                  std::string(to_string(kAllDefects[b])) + ": undefined");
            }
        }
    }
    return m;
}

// ---------------------------------------------------------------- ranking

std::vector<std::size_t> competition_ranks(const std::vector<double>& scores) {
    std::vector<std::size_t> ranks(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::size_t better = 0;
        for (double s : scores) better += s > scores[i] ? 1 : 0;
        ranks[i] = better + 1;
    }
    return ranks;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<SystemBootstrap> bootstrap_ranking(const BootstrapInput& input, std::size_t replicates,
                                               std::uint64_t seed, double level) {
    if (replicates < 1) throw ConfigError("bootstrap needs at least one replicate");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
    if (!input.metrics.count(input.rank_metric)) throw ConfigError("rank metric '" + input.rank_metric + "' missing");
    const std::size_t systems = input.systems.size();
    const std::size_t cases = input.strata.size();
    if (systems == 0 || cases == 0) throw ConfigError("bootstrap needs systems and cases");
    for (const auto& [name, table] : input.metrics) {
        if (table.size() != systems) throw ConfigError("metric '" + name + "' does not cover every system");
        for (const auto& row : table) {
            if (row.size() != cases) throw ConfigError("metric '" + name + "' has a mismatched case set");
        }
    }

    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t c = 0; c < cases; ++c) strata[input.strata[c]].push_back(c);

    std::vector<std::string> metric_names;
    for (const auto& [name, _] : input.metrics) metric_names.push_back(name);
    const std::size_t rank_pos = static_cast<std::size_t>(
        std::find(metric_names.begin(), metric_names.end(), input.rank_metric) - metric_names.begin());

    // samples[metric][system][replicate]
    std::vector<std::vector<std::vector<double>>> samples(
        metric_names.size(), std::vector<std::vector<double>>(systems, std::vector<double>(replicates)));
    std::vector<std::vector<std::size_t>> ranks(systems, std::vector<std::size_t>(replicates));

    std::vector<std::size_t> drawn(cases);
    std::vector<double> means(systems);
    for (std::size_t r = 0; r < replicates; ++r) {
        Rng rng(seed, r);
        std::size_t k = 0;
        for (const auto& [_, members] : strata) {
            for (std::size_t i = 0; i < members.size(); ++i) drawn[k++] = members[rng.index(members.size())];
        }
        for (std::size_t m = 0; m < metric_names.size(); ++m) {
            const auto& table = input.metrics.at(metric_names[m]);
            for (std::size_t s = 0; s < systems; ++s) {
                double sum = 0.0;
                for (std::size_t c : drawn) sum += table[s][c];
                samples[m][s][r] = sum / static_cast<double>(cases);
            }
        }
        for (std::size_t s = 0; s < systems; ++s) means[s] = samples[rank_pos][s][r];
        const auto rk = competition_ranks(means);
        for (std::size_t s = 0; s < systems; ++s) ranks[s][r] = rk[s];
    }

    const double tail = (1.0 - level) / 2.0;
    const double reps = static_cast<double>(replicates);
    std::vector<SystemBootstrap> out(systems);
    for (std::size_t s = 0; s < systems; ++s) {
        SystemBootstrap& b = out[s];
        b.system = input.systems[s];
        double sum = 0.0, top1 = 0.0, top3 = 0.0;
        for (std::size_t r : ranks[s]) {
            sum += static_cast<double>(r);
            top1 += r == 1 ? 1.0 : 0.0;
            top3 += r <= 3 ? 1.0 : 0.0;
        }
        b.mean_rank = sum / reps;
        double var = 0.0;
        for (std::size_t r : ranks[s]) var += (static_cast<double>(r) - b.mean_rank) * (static_cast<double>(r) - b.mean_rank);
        b.rank_std = std::sqrt(var / reps);
        b.top1 = top1 / reps;
        b.top3 = top3 / reps;
        for (std::size_t m = 0; m < metric_names.size(); ++m) {
            const auto& row = input.metrics.at(metric_names[m])[s];
            b.point[metric_names[m]] = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(cases);
            std::vector<double> sorted = samples[m][s];
            std::sort(sorted.begin(), sorted.end());
            b.ci[metric_names[m]] = {quantile_sorted(sorted, tail), quantile_sorted(sorted, 1.0 - tail)};
        }
    }
    return out;
}

EtaSweep eta_sweep(const std::vector<SystemQuality>& systems, const std::vector<double>& grid) {
    if (grid.empty()) throw ConfigError("eta grid is empty");
    for (double g : grid) {
        if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("eta grid points must lie in [0, 1]");
    }
    EtaSweep out;
    out.grid = grid;
    for (const SystemQuality& s : systems) out.systems.push_back(s.system);
    for (double eta : grid) {
        std::vector<double> pb;
        for (const SystemQuality& s : systems) pb.push_back(eta * s.q_def + (1.0 - eta) * s.cp);
        out.ranks.push_back(competition_ranks(pb));
        out.pb.push_back(std::move(pb));
    }
    for (std::size_t a = 0; a < systems.size(); ++a) {
        for (std::size_t b = a + 1; b < systems.size(); ++b) {
            const double dq = systems[a].q_def - systems[b].q_def;
            const double dc = systems[a].cp - systems[b].cp;
            // PB_a - PB_b = eta * dq + (1 - eta) * dc vanishes at eta = dc / (dc - dq).
            if (dq * dc >= 0.0) continue;
            const double eta = dc / (dc - dq);
            if (eta >= 0.0 && eta <= 1.0) out.crossings.push_back({systems[a].system, systems[b].system, eta});
        }
    }
    return out;
}

std::vector<RankShiftRow> rank_shift(const std::map<std::string, double>& outcome,
                                     const std::map<std::string, double>& pb) {
    if (outcome.size() != pb.size() ||
        !std::equal(outcome.begin(), outcome.end(), pb.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
        throw ConfigError("outcome and PB tables cover different systems");
    }
    std::vector<std::string> names;
    std::vector<double> o, p;
    for (const auto& [name, v] : outcome) {
        names.push_back(name);
        o.push_back(v);
        p.push_back(pb.at(name));
    }
    const auto ro = competition_ranks(o), rp = competition_ranks(p);
    std::vector<RankShiftRow> out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        out.push_back({names[i], ro[i], rp[i], static_cast<long>(ro[i]) - static_cast<long>(rp[i])});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const RankShiftRow& a, const RankShiftRow& b) { return a.outcome_rank < b.outcome_rank; });
    return out;
}

}  // namespace proctrace
