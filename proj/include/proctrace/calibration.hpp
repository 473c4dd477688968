// SPDX-License-Identifier: Apache-2.0

// Posterior risk estimation for raw evidence scores, severity banding and
// calibration quality measures.

#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "proctrace/defect.hpp"
#include "proctrace/detectors.hpp"
#include "proctrace/trajectory.hpp"

namespace proctrace {

enum class Horizon { short_, medium, long_ };

std::string_view to_string(Horizon h);
std::optional<Horizon> parse_horizon(std::string_view s);

struct HorizonCuts {
    std::size_t medium_from = 50;
    std::size_t long_from = 200;
};

struct CalibrationContext {
    Source source = Source::other;
    Horizon horizon = Horizon::short_;

    auto operator<=>(const CalibrationContext&) const = default;
};

CalibrationContext calibration_context(const Trajectory& t, const HorizonCuts& cuts = {});
// "source/horizon", e.g. "terminal/long".
std::string context_key(const CalibrationContext& c);
std::optional<CalibrationContext> parse_context_key(std::string_view key);

enum class CalibrationMethod { hard_threshold, beta_smoothed, monotone_map };

std::string_view to_string(CalibrationMethod m);
std::optional<CalibrationMethod> parse_calibration_method(std::string_view s);

// Non-decreasing step function from score to risk. Step k covers scores in
// [lower[k], lower[k+1]); scores below lower[0] take values[0].
struct StepFunction {
    std::vector<double> lower;
    std::vector<double> values;

    double operator()(double score) const;
    bool empty() const { return values.empty(); }
    bool operator==(const StepFunction&) const = default;
};

// Least-squares non-decreasing fit (pool adjacent violators). Equal scores
// are pooled into a single block.
StepFunction isotonic_fit(std::vector<std::pair<double, int>> points);

struct BucketCount {
    std::size_t n = 0;
    std::size_t k = 0;  // positives
    bool operator==(const BucketCount&) const = default;
};

struct CalibrationModel {
    DefectClass defect = DefectClass::ghost_context;
    CalibrationMethod method = CalibrationMethod::beta_smoothed;
    double threshold = 0.5;        // hard_threshold cut
    std::size_t score_buckets = 5;  // beta_smoothed
    double shrinkage_m = 10.0;
    double alpha = 1.0;
    double beta = 1.0;
    double family_prior = 0.5;
    std::map<CalibrationContext, std::vector<BucketCount>> buckets;
    std::map<CalibrationContext, StepFunction> steps;
    StepFunction pooled;

    bool operator==(const CalibrationModel&) const = default;
};

struct CalibrationDatum {
    EvidenceRecord evidence;
    CalibrationContext context;
    int label = 0;
};

struct FitOptions {
    double threshold = 0.5;
    std::size_t score_buckets = 5;
    double shrinkage_m = 10.0;
    // Defaults to the pooled label frequency of `data` when absent.
    std::optional<double> family_prior;
};

// Throws ConfigError on empty data, labels outside {0, 1} or evidence for
// another defect.
CalibrationModel fit_calibrator(const std::vector<CalibrationDatum>& data, DefectClass defect,
                                CalibrationMethod method, const FitOptions& opts = {});

// Pooled label frequency per dimension over every datum of its defects.
std::map<Dimension, double> family_priors(const std::map<DefectClass, std::vector<CalibrationDatum>>& data);

// Fits one model per defect present in `data`, with shared family priors.
std::map<DefectClass, CalibrationModel> fit_calibrators(
    const std::map<DefectClass, std::vector<CalibrationDatum>>& data, CalibrationMethod method,
    const std::map<DefectClass, double>& thresholds = {}, const FitOptions& base = {});

// Throws ConfigError when the evidence belongs to another defect.
double apply_calibrator(const CalibrationModel& model, const EvidenceRecord& evidence, const CalibrationContext& ctx);

// Score bucket index used by beta_smoothed.
std::size_t score_bucket(double score, std::size_t buckets);

enum class Severity { none, warning, error };

std::string_view to_string(Severity s);
std::optional<Severity> parse_severity(std::string_view s);

struct SeverityBands {
    double warning = 0.4;
    double error = 0.8;
};

// Throws ConfigError unless 0 <= warning < error <= 1.
Severity band_severity(double p, double warning, double error);
inline Severity band_severity(double p, const SeverityBands& b) { return band_severity(p, b.warning, b.error); }

struct CalibratedFinding {
    RawFinding raw;
    double posterior_risk = 0.0;
    Severity severity = Severity::none;

    bool operator==(const CalibratedFinding&) const = default;
};

CalibratedFinding calibrate_finding(const RawFinding& raw, const CalibrationModel& model, const CalibrationContext& ctx,
                                    const SeverityBands& bands);

struct ReliabilityBin {
    double lower = 0.0;
    double upper = 0.0;
    double mean_predicted = 0.0;
    double frequency = 0.0;
    std::size_t count = 0;
};

// Equal-width bins over [0, 1]; a prediction p lands in min(floor(p * bins), bins - 1).
// Every bin is returned, empty ones with count 0. Throws ConfigError when bins < 1.
std::vector<ReliabilityBin> reliability_bins(const std::vector<std::pair<double, int>>& pairs, std::size_t bins = 10);

// Throws ConfigError when bins < 1 or pairs is empty.
double compute_ece(const std::vector<std::pair<double, int>>& pairs, std::size_t bins = 10);

}  // namespace proctrace
