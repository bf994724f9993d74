#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/dataset.hpp"

namespace fairaudit {

struct Hyperparams {
    double l2 = 1e-4;            // lambda
    double fairness = 0.0;       // eta
    double cost_fp = 1.0;
    double cost_fn = 1.0;
    bool include_protected = false;
    double learning_rate = 0.1;
    int max_iters = 2000;
    double tolerance = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static Hyperparams from_json(const nlohmann::json& doc);
};

/// One encoded input column: either a standardized numeric feature or a
/// single one-hot indicator for a categorical level (first level dropped).
struct EncodedColumn {
    std::string feature;
    bool numeric = true;
    double mean = 0.0;    // numeric: training mean
    double scale = 1.0;   // numeric: training stddev (1 when constant)
    std::string level;    // categorical: the level this column indicates
};

/// Feature encoding captured at training time. Prediction rejects rows with
/// categorical levels that were never seen in training.
struct Encoding {
    std::vector<EncodedColumn> columns;
    std::map<std::string, std::vector<std::string>> levels;  // categorical -> sorted levels
    bool include_protected = false;

    std::size_t width() const { return columns.size() + (include_protected ? 1 : 0); }
};

struct LossComponents {
    double nll = 0.0;       // weighted, cost-scaled mean negative log-likelihood
    double l2 = 0.0;        // lambda * ||w||^2
    double fairness = 0.0;  // squared group gap in mean predicted probability (unscaled)
};

/// Linear scores with sigmoid output. Training is full-batch gradient
/// descent from an all-zeros start, so identical inputs give bit-identical
/// models.
class LogisticModel {
  public:
    LogisticModel() = default;
    LogisticModel(Encoding encoding, std::vector<double> weights, double bias, Hyperparams params,
                  bool converged, LossComponents loss);

    const Encoding& encoding() const { return encoding_; }
    const std::vector<double>& weights() const { return weights_; }
    double bias() const { return bias_; }
    const Hyperparams& hyperparams() const { return params_; }
    bool converged() const { return converged_; }
    const LossComponents& loss() const { return loss_; }

    /// Encode row i of a dataset; s_override substitutes the protected value
    /// fed to a protected-aware model without touching any other field.
    std::vector<double> encode_row(const Dataset& d, std::size_t row,
                                   std::optional<int> s_override = {}) const;

    double predict_proba(const Dataset& d, std::size_t row,
                         std::optional<int> s_override = {}) const;
    std::vector<double> predict_proba_all(const Dataset& d,
                                          std::optional<int> s_override = {}) const;
    int decide(const Dataset& d, std::size_t row, double threshold,
               std::optional<int> s_override = {}) const;
    std::vector<int> decide_all(const Dataset& d, double threshold,
                                std::optional<int> s_override = {}) const;

    nlohmann::json to_json() const;
    std::string serialize() const;  // canonical bytes
    static LogisticModel from_json(const nlohmann::json& doc);
    static LogisticModel load(const std::string& path);
    void save(const std::string& path) const;

  private:
    Encoding encoding_;
    std::vector<double> weights_;
    double bias_ = 0.0;
    Hyperparams params_;
    bool converged_ = false;
    LossComponents loss_;
};

/// Loss and analytic gradient at a parameter point; exposed so tests can
/// check the gradient against finite differences.
struct LossValue {
    double total = 0.0;
    LossComponents components;
    std::vector<double> gradient;  // d/d[w..., bias]
};

LossValue training_loss(const Dataset& d, const Encoding& encoding,
                        const std::vector<double>& weights, double bias, const Hyperparams& h);
LossValue training_loss(const Dataset& d, const Encoding& encoding,
                        const std::vector<double>& weights, double bias, const Hyperparams& h,
                        const std::vector<int>& target);

LogisticModel train(const Dataset& d, const Hyperparams& h);

/// Same learner against an arbitrary 0/1 target (used internally, e.g. for
/// fitting P(S=1|X) in propensity stratification).
LogisticModel train_with_target(const Dataset& d, const Hyperparams& h,
                                const std::vector<int>& target);

Encoding build_encoding(const Dataset& d, bool include_protected);

/// Expected-cost crossover threshold: prefer a positive decision when
/// p >= cost_fp / (cost_fp + cost_fn).
double cost_threshold(double cost_fp, double cost_fn);

struct GroupEvaluation {
    std::size_t rows = 0;
    double acceptance_rate = 0.0;
    std::optional<double> tpr;  // absent when the group has no positives
    std::optional<double> fpr;  // absent when the group has no negatives
};

struct Evaluation {
    double accuracy = 0.0;
    double tp = 0.0, fp = 0.0, tn = 0.0, fn = 0.0;  // weighted confusion mass
    std::optional<double> precision;                // absent when nothing accepted
    std::optional<double> recall;                   // absent when no positives
    GroupEvaluation protected_group;
    GroupEvaluation favored_group;
    double decision_mean_difference = 0.0;
    std::optional<double> decision_normalized_mean_difference;
    std::vector<std::string> caveats;

    nlohmann::json to_json() const;
};

Evaluation evaluate(const LogisticModel& m, const Dataset& d, double threshold);

double sigmoid(double z);

}  // namespace fairaudit
