#include "fairaudit/counterfactual.hpp"

namespace fairaudit {

nlohmann::json FlipAuditResult::to_json() const {
    return {{"causal_mean_difference_decisions", causal_mean_difference_decisions},
            {"causal_mean_difference_probabilities", causal_mean_difference_probabilities},
            {"rows_affected", rows_affected},
            {"per_partition", per_partition}};
}

FlipAuditResult flip_audit(const ProbabilityFn& decision_fn, const Dataset& d, double threshold,
                           const std::optional<Stratification>& spec) {
    require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::InvalidParam,
            "threshold must lie in [0, 1]");
    FlipAuditResult out;

    std::vector<double> decision_delta(d.n());
    std::vector<double> prob_delta(d.n());
    double w_total = 0.0, dec_sum = 0.0, prob_sum = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        double p1 = decision_fn(d, i, 1);
        double p0 = decision_fn(d, i, 0);
        int a1 = p1 >= threshold ? 1 : 0;
        int a0 = p0 >= threshold ? 1 : 0;
        decision_delta[i] = static_cast<double>(a1 - a0);
        prob_delta[i] = p1 - p0;
        if (a1 != a0) ++out.rows_affected;
        double w = d.weights()[i];
        w_total += w;
        dec_sum += w * decision_delta[i];
        prob_sum += w * prob_delta[i];
    }
    require(w_total > 0.0, ErrorCode::InvalidParam, "total weight is zero");
    out.causal_mean_difference_decisions = dec_sum / w_total;
    out.causal_mean_difference_probabilities = prob_sum / w_total;

    if (spec) {
        for (const auto& stratum : stratify(d, *spec)) {
            double w = 0.0, acc = 0.0;
            for (std::size_t i : stratum.rows) {
                w += d.weights()[i];
                acc += d.weights()[i] * decision_delta[i];
            }
            if (w > 0.0) out.per_partition[stratum.key] = acc / w;
        }
    }
    return out;
}

ProbabilityFn probability_fn(const LogisticModel& m) {
    return [model = m](const Dataset& d, std::size_t row, int s_value) {
        return model.predict_proba(d, row, s_value);
    };
}

}  // namespace fairaudit
