// SPDX-License-Identifier: Apache-2.0

#include "proctrace/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "proctrace/errors.hpp"

namespace proctrace {

std::string_view to_string(Horizon h) {
    switch (h) {
        case Horizon::short_: return "short";
        case Horizon::medium: return "medium";
        case Horizon::long_: return "long";
    }
    return "?";
}

std::optional<Horizon> parse_horizon(std::string_view s) {
    if (s == "short") return Horizon::short_;
    if (s == "medium") return Horizon::medium;
    if (s == "long") return Horizon::long_;
    return std::nullopt;
}

CalibrationContext calibration_context(const Trajectory& t, const HorizonCuts& cuts) {
    const std::size_t n = t.events.size();
    CalibrationContext c;
    c.source = t.source;
    c.horizon = n < cuts.medium_from ? Horizon::short_ : (n < cuts.long_from ? Horizon::medium : Horizon::long_);
    return c;
}

std::string context_key(const CalibrationContext& c) {
    return std::string(to_string(c.source)) + "/" + std::string(to_string(c.horizon));
}

std::optional<CalibrationContext> parse_context_key(std::string_view key) {
    const std::size_t slash = key.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    auto source = parse_source(key.substr(0, slash));
    auto horizon = parse_horizon(key.substr(slash + 1));
    if (!source || !horizon) return std::nullopt;
    return CalibrationContext{*source, *horizon};
}

std::string_view to_string(CalibrationMethod m) {
    switch (m) {
        case CalibrationMethod::hard_threshold: return "hard_threshold";
        case CalibrationMethod::beta_smoothed: return "beta_smoothed";
        case CalibrationMethod::monotone_map: return "monotone_map";
    }
    return "?";
}

std::optional<CalibrationMethod> parse_calibration_method(std::string_view s) {
    for (auto m : {CalibrationMethod::hard_threshold, CalibrationMethod::beta_smoothed,
                   CalibrationMethod::monotone_map}) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

double StepFunction::operator()(double score) const {
    if (values.empty()) return 0.0;
    auto it = std::upper_bound(lower.begin(), lower.end(), score);
    if (it == lower.begin()) return values.front();
    return values[static_cast<std::size_t>(it - lower.begin()) - 1];
}

StepFunction isotonic_fit(std::vector<std::pair<double, int>> points) {
    std::sort(points.begin(), points.end());
    struct Block {
        double lower;
        double sum;
        double weight;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < points.size();) {
        Block b{points[i].first, 0.0, 0.0};
        std::size_t j = i;
        for (; j < points.size() && points[j].first == points[i].first; ++j) {
            b.sum += points[j].second;
            b.weight += 1.0;
        }
        i = j;
        blocks.push_back(b);
        while (blocks.size() >= 2) {
            Block& prev = blocks[blocks.size() - 2];
            const Block& last = blocks.back();
            if (prev.sum / prev.weight <= last.sum / last.weight) break;
            prev.sum += last.sum;
            prev.weight += last.weight;
            blocks.pop_back();
        }
    }
    StepFunction f;
    for (const Block& b : blocks) {
        f.lower.push_back(b.lower);
        f.values.push_back(b.sum / b.weight);
    }
    return f;
}

std::size_t score_bucket(double score, std::size_t buckets) {
    const double s = std::clamp(score, 0.0, 1.0);
    return std::min(static_cast<std::size_t>(std::floor(s * static_cast<double>(buckets))), buckets - 1);
}

namespace {

void check_data(const std::vector<CalibrationDatum>& data, DefectClass defect) {
    if (data.empty()) throw ConfigError("calibration data is empty");
    for (const CalibrationDatum& d : data) {
        if (d.label != 0 && d.label != 1) throw ConfigError("calibration labels must be 0 or 1");
        if (d.evidence.defect != defect) throw ConfigError("calibration datum belongs to another defect");
    }
}

double label_rate(const std::vector<CalibrationDatum>& data) {
    std::size_t k = 0;
    for (const CalibrationDatum& d : data) k += static_cast<std::size_t>(d.label);
    return data.empty() ? 0.0 : static_cast<double>(k) / static_cast<double>(data.size());
}

}  // namespace

CalibrationModel fit_calibrator(const std::vector<CalibrationDatum>& data, DefectClass defect,
                                CalibrationMethod method, const FitOptions& opts) {
    check_data(data, defect);
    if (opts.score_buckets < 1) throw ConfigError("score_buckets must be at least 1");
    if (!(opts.shrinkage_m > 0.0)) throw ConfigError("shrinkage_m must be positive");

    CalibrationModel m;
    m.defect = defect;
    m.method = method;
    m.threshold = opts.threshold;
    m.score_buckets = opts.score_buckets;
    m.shrinkage_m = opts.shrinkage_m;
    m.family_prior = opts.family_prior.value_or(label_rate(data));

    switch (method) {
        case CalibrationMethod::hard_threshold:
            break;
        case CalibrationMethod::beta_smoothed:
            for (const CalibrationDatum& d : data) {
                auto& row = m.buckets[d.context];
                row.resize(m.score_buckets);
                BucketCount& b = row[score_bucket(d.evidence.score, m.score_buckets)];
                ++b.n;
                b.k += static_cast<std::size_t>(d.label);
            }
            break;
        case CalibrationMethod::monotone_map: {
            std::map<CalibrationContext, std::vector<std::pair<double, int>>> by_context;
            std::vector<std::pair<double, int>> all;
            for (const CalibrationDatum& d : data) {
                by_context[d.context].emplace_back(d.evidence.score, d.label);
                all.emplace_back(d.evidence.score, d.label);
            }
            for (auto& [ctx, points] : by_context) m.steps[ctx] = isotonic_fit(std::move(points));
            m.pooled = isotonic_fit(std::move(all));
            break;
        }
    }
    return m;
}

std::map<Dimension, double> family_priors(const std::map<DefectClass, std::vector<CalibrationDatum>>& data) {
    std::map<Dimension, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& [defect, rows] : data) {
        auto& [n, k] = counts[dimension_of(defect)];
        for (const CalibrationDatum& d : rows) {
            ++n;
            k += static_cast<std::size_t>(d.label == 1);
        }
    }
    std::map<Dimension, double> out;
    for (const auto& [dim, nk] : counts) {
        if (nk.first > 0) out[dim] = static_cast<double>(nk.second) / static_cast<double>(nk.first);
    }
    return out;
}

std::map<DefectClass, CalibrationModel> fit_calibrators(
    const std::map<DefectClass, std::vector<CalibrationDatum>>& data, CalibrationMethod method,
    const std::map<DefectClass, double>& thresholds, const FitOptions& base) {
    const auto priors = family_priors(data);
    std::map<DefectClass, CalibrationModel> out;
    for (const auto& [defect, rows] : data) {
        if (rows.empty()) continue;
        FitOptions opts = base;
        if (auto it = thresholds.find(defect); it != thresholds.end()) opts.threshold = it->second;
        if (auto it = priors.find(dimension_of(defect)); it != priors.end()) opts.family_prior = it->second;
        out.emplace(defect, fit_calibrator(rows, defect, method, opts));
    }
    return out;
}

double apply_calibrator(const CalibrationModel& model, const EvidenceRecord& evidence, const CalibrationContext& ctx) {
    if (evidence.defect != model.defect) {
        throw ConfigError("calibration model for " + std::string(to_string(model.defect)) + " applied to " +
                          std::string(to_string(evidence.defect)));
    }
    double p = 0.0;
    switch (model.method) {
        case CalibrationMethod::hard_threshold:
            p = evidence.score >= model.threshold ? 1.0 : 0.0;
            break;
        case CalibrationMethod::beta_smoothed: {
            BucketCount b;
            if (auto it = model.buckets.find(ctx); it != model.buckets.end()) {
                b = it->second[score_bucket(evidence.score, model.score_buckets)];
            }
            const double n = static_cast<double>(b.n);
            const double raw = (static_cast<double>(b.k) + model.alpha) / (n + model.alpha + model.beta);
            const double w = n / (n + model.shrinkage_m);
            p = w * raw + (1.0 - w) * model.family_prior;
            break;
        }
        case CalibrationMethod::monotone_map: {
            auto it = model.steps.find(ctx);
            p = it != model.steps.end() ? it->second(evidence.score) : model.pooled(evidence.score);
            break;
        }
    }
    return std::clamp(p, 0.0, 1.0);
}

std::string_view to_string(Severity s) {
    switch (s) {
        case Severity::none: return "none";
        case Severity::warning: return "warning";
        case Severity::error: return "error";
    }
    return "?";
}

std::optional<Severity> parse_severity(std::string_view s) {
    if (s == "none") return Severity::none;
    if (s == "warning") return Severity::warning;
    if (s == "error") return Severity::error;
    return std::nullopt;
}

Severity band_severity(double p, double warning, double error) {
    if (!(warning >= 0.0 && warning < error && error <= 1.0)) {
        throw ConfigError("severity bands need 0 <= warning < error <= 1");
    }
    if (p >= error) return Severity::error;
    if (p >= warning) return Severity::warning;
    return Severity::none;
}

CalibratedFinding calibrate_finding(const RawFinding& raw, const CalibrationModel& model, const CalibrationContext& ctx,
                                    const SeverityBands& bands) {
    CalibratedFinding f;
    f.raw = raw;
    // Exempted findings carry no defect risk.
    f.posterior_risk = raw.exempted ? 0.0 : apply_calibrator(model, raw.evidence, ctx);
    f.severity = band_severity(f.posterior_risk, bands);
    return f;
}

std::vector<ReliabilityBin> reliability_bins(const std::vector<std::pair<double, int>>& pairs, std::size_t bins) {
    if (bins < 1) throw ConfigError("bins must be at least 1");
    std::vector<ReliabilityBin> out(bins);
    std::vector<double> pred_sum(bins, 0.0), label_sum(bins, 0.0);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].lower = static_cast<double>(b) / static_cast<double>(bins);
        out[b].upper = static_cast<double>(b + 1) / static_cast<double>(bins);
    }
    for (const auto& [p, y] : pairs) {
        const std::size_t b = score_bucket(p, bins);
        ++out[b].count;
        pred_sum[b] += p;
        label_sum[b] += y;
    }
    for (std::size_t b = 0; b < bins; ++b) {
        if (out[b].count == 0) continue;
        const double n = static_cast<double>(out[b].count);
        out[b].mean_predicted = pred_sum[b] / n;
        out[b].frequency = label_sum[b] / n;
    }
    return out;
}

double compute_ece(const std::vector<std::pair<double, int>>& pairs, std::size_t bins) {
    if (pairs.empty()) throw ConfigError("ECE needs at least one prediction");
    const auto table = reliability_bins(pairs, bins);
    const double total = static_cast<double>(pairs.size());
    double ece = 0.0;
    for (const ReliabilityBin& b : table) {
        if (b.count == 0) continue;
        ece += static_cast<double>(b.count) / total * std::abs(b.mean_predicted - b.frequency);
    }
    return ece;
}

}  // namespace proctrace
