#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/dataset.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/model.hpp"

namespace fairaudit {

/// Every mitigation call emits one of these: what ran, with which
/// parameters, and the same metric measured before and after.
struct MitigationRecord {
    std::string method;
    nlohmann::json parameters;
    MetricResult before;
    MetricResult after;
    std::size_t rows_or_weights_changed = 0;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
};

/// Post-processing result: one decision threshold per group.
struct ThresholdPair {
    double threshold_protected = 0.5;  // theta_1
    double threshold_favored = 0.5;    // theta_0
    std::string target;                // demographic_parity | equal_opportunity
    double achieved_disparity = 0.0;
    double achieved_accuracy = 0.0;
    bool feasible = true;

    nlohmann::json to_json() const;
};

enum class ThresholdTarget { demographic_parity, equal_opportunity };

ThresholdTarget threshold_target_from_string(const std::string& name);

/// Multiply each row's weight by P(S=s)P(Y=y)/P(S=s,Y=y); afterwards the
/// weighted label mean difference is zero by construction.
std::pair<Dataset, MitigationRecord> reweight(const Dataset& d);

/// Resample each (s, y) cell with replacement to its independence-expected
/// count round(n * P(s) * P(y)); output weights are all 1.
std::pair<Dataset, MitigationRecord> resample(const Dataset& d, std::uint64_t seed);

/// Relabel M pairs across the margin: the M protected negatives ranked
/// highest are promoted, the M favored positives ranked lowest demoted,
/// with M = ceil(n1*n0*(p0 - p1)/(n1 + n0)) (counts, not weights). When the
/// protected group is the advantaged one the roles mirror. The ranker
/// defaults to a plain logistic fit on the features.
std::pair<Dataset, MitigationRecord> massage(const Dataset& d,
                                             const LogisticModel* ranker = nullptr);

/// Exhaustive grid search over per-group thresholds on a holdout set.
/// Feasible pairs satisfy |disparity| <= epsilon; among them the weighted
/// accuracy is maximized, ties broken by smaller |theta_1 - theta_0|, then
/// by lower theta_1. If nothing is feasible the minimal-disparity pair is
/// returned with `feasible` unset.
std::pair<ThresholdPair, MitigationRecord> group_thresholds(const LogisticModel& m,
                                                            const Dataset& holdout,
                                                            ThresholdTarget target, double epsilon,
                                                            double grid_step);

/// Trains one model per eta; among those within max_accuracy_loss of the
/// best validation accuracy, picks the smallest |decision MD| at theta 0.5.
/// Gaps within md_tie_tolerance count as ties and resolve to the smaller
/// eta.
struct TuneResult {
    Hyperparams chosen;
    std::vector<std::pair<double, double>> accuracy_by_eta;  // (eta, accuracy)
    std::vector<std::pair<double, double>> md_by_eta;        // (eta, decision MD)
};

std::pair<TuneResult, MitigationRecord> tune_fairness_weight(
    const Dataset& d_train, const Dataset& d_val, const std::vector<double>& eta_grid,
    double max_accuracy_loss, const Hyperparams& base = {}, double md_tie_tolerance = 0.01);

}  // namespace fairaudit
