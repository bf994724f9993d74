#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "fairaudit/dataset.hpp"
#include "fairaudit/model.hpp"

namespace fairaudit {

/// A decision process under audit: returns the positive-class probability
/// for row `row` of `d` with the protected attribute forced to `s_value`.
/// Must be pure; every row is scored twice.
using ProbabilityFn = std::function<double(const Dataset& d, std::size_t row, int s_value)>;

/// Disparate-treatment audit by protected-attribute flipping. The decision
/// level value is sum(w_i * (a_i(S<-1) - a_i(S<-0))) / sum(w_i); it is zero
/// exactly when the decision function never reads S.
struct FlipAuditResult {
    double causal_mean_difference_decisions = 0.0;
    double causal_mean_difference_probabilities = 0.0;
    std::size_t rows_affected = 0;
    std::map<std::string, double> per_partition;  // stratum key -> decision-level value

    nlohmann::json to_json() const;
};

FlipAuditResult flip_audit(const ProbabilityFn& decision_fn, const Dataset& d, double threshold,
                           const std::optional<Stratification>& spec = {});

/// Adapter for the toolkit's own learner. Models whose encoding excludes the
/// protected column ignore the override, which is what makes the S-blindness
/// guarantee exact rather than approximate.
ProbabilityFn probability_fn(const LogisticModel& m);

}  // namespace fairaudit
