#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/dataset.hpp"

namespace fairaudit {

/// A named discrimination measurement. `value` is absent when a guard fired
/// (e.g. a zero normalization constant); the reason is always in `caveats`.
/// Difference metrics follow the sign convention E[.|S=1] - E[.|S=0], so a
/// negative value means the protected group is disadvantaged.
struct MetricResult {
    std::string name;
    std::optional<double> value;
    std::map<std::string, double> components;
    std::size_t group_size_protected = 0;
    std::size_t group_size_favored = 0;
    std::vector<std::string> caveats;

    bool protected_disadvantaged() const { return value.has_value() && *value < 0.0; }
    nlohmann::json to_json() const;
};

/// Selects which 0/1 outcome a metric runs over: the dataset's label (Y),
/// its recorded decision column (A), or an explicit vector.
struct Outcome {
    enum class Kind { label, decision, explicit_values };
    Kind kind = Kind::label;
    std::vector<double> values;

    static Outcome label() { return {}; }
    static Outcome decision() { return {Kind::decision, {}}; }
    static Outcome explicit_values(std::vector<double> v) {
        return {Kind::explicit_values, std::move(v)};
    }
};

/// Materialize the selected outcome; values must lie in [0, 1].
std::vector<double> resolve_outcome(const Dataset& d, const Outcome& outcome);

/// MD = E[A|S=1] - E[A|S=0], weighted.
MetricResult mean_difference(const Dataset& d, const Outcome& outcome);

/// MD scaled by C = min(P(A=1)/P(S=0), P(A=0)/P(S=1)) so total segregation
/// scores magnitude 1. When C = 0 the value is withheld with a caveat.
MetricResult normalized_mean_difference(const Dataset& d, const Outcome& outcome);

/// Weight-averaged within-stratum MD. Strata missing a group are skipped and
/// named in a caveat; the aggregate is reweighted over the remainder.
MetricResult conditional_mean_difference(const Dataset& d, const Outcome& outcome,
                                         const Stratification& spec);

/// Splits MD into the portion explained by group composition across strata
/// and the within-stratum remainder:
///   explained  = sum_i (P(i|S=1) - P(i|S=0)) * p*_i,   p*_i = (p1_i + p0_i)/2
///   unexplained = sum_i (p1_i - p0_i) * (P(i|S=1) + P(i|S=0))/2
/// With these forms total = explained + unexplained is an algebraic identity
/// over the included strata.
MetricResult unexplained_difference(const Dataset& d, const Outcome& outcome,
                                    const Stratification& spec);

/// OLS fit of A = alpha + beta.X + phi.S + eps; value is phi, components
/// carry its standard error, t statistic, normal-approximation p-value, and
/// a significance flag at alpha = 0.05.
MetricResult regression_test(const Dataset& d, const Outcome& outcome);

/// Situation testing: for each protected row with a negative outcome,
/// compare the positive rate among its k nearest unprotected neighbours with
/// that among its k nearest protected neighbours (itself excluded). Value is
/// the proportion of tested rows with a difference >= t.
MetricResult knn_situation_test(const Dataset& d, const Outcome& outcome, int k, double t);

/// Conditional MD over quantile bins of an internally fitted propensity
/// P(S=1|X). When the fitted scores take no more distinct values than bins,
/// rows are grouped exactly by score instead (binary features reduce to
/// exact conditioning).
MetricResult propensity_stratified_difference(const Dataset& d, const Outcome& outcome, int bins);

/// Association of each feature with S: |point-biserial| for numeric
/// features, Cramer's V for categorical. Constant features score 0 with a
/// caveat.
std::vector<MetricResult> feature_protected_correlation(const Dataset& d);

/// Group supports P(S=1), P(S=0) and, at depth >= 1, the weighted share and
/// row count of S=1 within every observed combination of `depth` categorical
/// feature values.
MetricResult support_report(const Dataset& d, int conjunction_depth);

}  // namespace fairaudit
