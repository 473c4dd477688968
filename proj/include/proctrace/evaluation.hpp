// SPDX-License-Identifier: Apache-2.0

// Detector quality against annotations, annotation agreement, correlation
// analyses and cross-system comparisons (bootstrap ranking, eta sweeps,
// rank shifts).

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proctrace/defect.hpp"
#include "proctrace/trajectory.hpp"

namespace proctrace {

// ---------------------------------------------------------------- annotations

enum class AnnotationLabel { present, absent, exempt };

std::string_view to_string(AnnotationLabel l);
std::optional<AnnotationLabel> parse_annotation_label(std::string_view s);

struct AnnotationRecord {
    std::string trajectory_id;
    std::array<AnnotationLabel, kDefectCount> labels{};
    std::string evidence_note;
    std::string annotator_id;
    bool adjudicated = false;

    AnnotationLabel label(DefectClass d) const { return labels[ordinal(d)]; }
    bool operator==(const AnnotationRecord&) const = default;
};

// Throws ConfigError when an exempt label lacks an evidence note.
void validate_annotation(const AnnotationRecord& r);

inline constexpr std::string_view kAnnotationFormat = "proctrace.annotations";
inline constexpr int kAnnotationFormatVersion = 1;

// Line-delimited: a header record, then one record per annotation.
std::string serialize_annotations(const std::vector<AnnotationRecord>& records);
// Throws ParseError with the offending line.
std::vector<AnnotationRecord> parse_annotations(std::string_view bytes);

// ---------------------------------------------------------------- split

struct SplitCase {
    std::string id;
    std::string stratum;
};

// Partitions cases into parts of exactly `sizes`, allocating every stratum
// proportionally (cell counts are floors or ceilings of the exact share).
// Throws ConfigError when sizes do not sum to the case count, ids repeat, or a
// stratum has fewer cases than there are non-empty parts.
std::vector<std::vector<std::string>> stratified_split(const std::vector<SplitCase>& cases,
                                                       const std::vector<std::size_t>& sizes, std::uint64_t seed);

// ---------------------------------------------------------------- detection metrics

struct Prediction {
    double score = 0.0;
    bool triggered = false;
};

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    bool operator==(const Confusion&) const = default;
};

struct MetricBundle {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> average_precision;
    std::optional<double> auroc;
    Confusion counts;
    std::size_t cases = 0;
    std::size_t excluded = 0;  // exempt-labeled cases left out
    std::vector<std::string> notes;
};

double f1_score(double precision, double recall);

// Precision, recall and F1 from confusion counts alone.
MetricBundle metrics_from_counts(const Confusion& c);

// Throws ConfigError when the lists differ in length or labels leave {0, 1}.
MetricBundle detection_metrics(const std::vector<Prediction>& predictions, const std::vector<int>& labels);
// Exempt-labeled cases are excluded before computation.
MetricBundle detection_metrics(const std::vector<Prediction>& predictions,
                               const std::vector<AnnotationLabel>& labels);

// Area under the precision-recall step curve; nullopt without positives.
std::optional<double> average_precision(const std::vector<double>& scores, const std::vector<int>& labels);
// Mann-Whitney statistic with midranks; nullopt unless both classes occur.
std::optional<double> auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// ---------------------------------------------------------------- agreement

// nullopt when chance agreement is 1. Exempt folds into absent unless
// fold_exempt is false.
std::optional<double> cohen_kappa(const std::vector<AnnotationLabel>& a, const std::vector<AnnotationLabel>& b,
                                  bool fold_exempt = true);

// ---------------------------------------------------------------- correlation

using RiskVector = std::array<double, kDefectCount>;

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

struct FailureCorrelation {
    std::array<std::optional<double>, kDefectCount> coefficient{};
    std::vector<std::string> notes;
};

// Point-biserial correlation between each defect's risk and the failure
// indicator. Cases with unknown outcome are skipped.
FailureCorrelation defect_failure_correlation(const std::vector<RiskVector>& risks,
                                              const std::vector<Outcome>& outcomes);

struct CorrelationMatrix {
    std::array<std::array<std::optional<double>, kDefectCount>, kDefectCount> value{};
    std::vector<std::string> notes;
};

CorrelationMatrix defect_correlation_matrix(const std::vector<RiskVector>& risks);

// ---------------------------------------------------------------- ranking

// Descending competition ranks: higher is better, ties share the minimum rank.
std::vector<std::size_t> competition_ranks(const std::vector<double>& scores);

struct BootstrapInput {
    std::vector<std::string> systems;
    std::vector<std::string> strata;  // one per case
    // metric name -> [system][case]
    std::map<std::string, std::vector<std::vector<double>>> metrics;
    std::string rank_metric = "pb";
};

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

struct SystemBootstrap {
    std::string system;
    double mean_rank = 0.0;
    double rank_std = 0.0;
    double top1 = 0.0;
    double top3 = 0.0;
    std::map<std::string, double> point;  // full-sample mean per metric
    std::map<std::string, Interval> ci;
};

// Linear-interpolated quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q);

// Throws ConfigError when replicates < 1, the rank metric is missing or a
// system's case list does not match the strata.
std::vector<SystemBootstrap> bootstrap_ranking(const BootstrapInput& input, std::size_t replicates,
                                               std::uint64_t seed, double level = 0.95);

struct SystemQuality {
    std::string system;
    double q_def = 0.0;
    double cp = 0.0;
};

struct Crossing {
    std::string first;
    std::string second;
    double eta = 0.0;
};

struct EtaSweep {
    std::vector<double> grid;
    std::vector<std::string> systems;
    std::vector<std::vector<double>> pb;           // [grid point][system]
    std::vector<std::vector<std::size_t>> ranks;  // [grid point][system]
    std::vector<Crossing> crossings;               // pairs whose PB order swaps inside [0, 1]
};

// Throws ConfigError for an empty grid or points outside [0, 1].
EtaSweep eta_sweep(const std::vector<SystemQuality>& systems, const std::vector<double>& grid);

struct RankShiftRow {
    std::string system;
    std::size_t outcome_rank = 0;
    std::size_t pb_rank = 0;
    long shift = 0;  // outcome rank minus PB rank
};

// Throws ConfigError when the maps cover different systems.
std::vector<RankShiftRow> rank_shift(const std::map<std::string, double>& outcome,
                                     const std::map<std::string, double>& pb);

}  // namespace proctrace
