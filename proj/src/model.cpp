#include "fairaudit/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "fairaudit/canonical_json.hpp"

namespace fairaudit {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

/// Numerically stable -[y log p + (1-y) log(1-p)] in terms of the logit.
double nll_from_logit(double z, int y) {
    return std::max(z, 0.0) - z * static_cast<double>(y) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

void Hyperparams::validate() const {
    require(l2 >= 0.0, ErrorCode::InvalidParam, "l2 must be >= 0");
    require(fairness >= 0.0, ErrorCode::InvalidParam, "fairness weight must be >= 0");
    require(cost_fp > 0.0 && cost_fn > 0.0, ErrorCode::NonPositiveCost, "costs must be > 0");
    require(learning_rate > 0.0, ErrorCode::InvalidParam, "learning rate must be > 0");
    require(max_iters >= 1, ErrorCode::InvalidParam, "max_iters must be >= 1");
    require(tolerance > 0.0, ErrorCode::InvalidParam, "tolerance must be > 0");
}

nlohmann::json Hyperparams::to_json() const {
    return {{"l2", l2},
            {"fairness", fairness},
            {"cost_fp", cost_fp},
            {"cost_fn", cost_fn},
            {"include_protected", include_protected},
            {"learning_rate", learning_rate},
            {"max_iters", max_iters},
            {"tolerance", tolerance},
            {"seed", seed}};
}

Hyperparams Hyperparams::from_json(const nlohmann::json& doc) {
    Hyperparams h;
    h.l2 = doc.value("l2", h.l2);
    h.fairness = doc.value("fairness", h.fairness);
    h.cost_fp = doc.value("cost_fp", h.cost_fp);
    h.cost_fn = doc.value("cost_fn", h.cost_fn);
    h.include_protected = doc.value("include_protected", h.include_protected);
    h.learning_rate = doc.value("learning_rate", h.learning_rate);
    h.max_iters = doc.value("max_iters", h.max_iters);
    h.tolerance = doc.value("tolerance", h.tolerance);
    h.seed = doc.value("seed", h.seed);
    h.validate();
    return h;
}

// ---------------------------------------------------------------------------
// Encoding

Encoding build_encoding(const Dataset& d, bool include_protected) {
    Encoding enc;
    enc.include_protected = include_protected;
    double total_weight = d.total_weight();
    require(total_weight > 0.0, ErrorCode::InvalidParam, "total weight is zero");

    for (const auto& f : d.schema().feature_columns) {
        if (f.kind == FeatureKind::numeric) {
            const auto& values = d.numeric_feature(f.name);
            double mean = 0.0;
            for (std::size_t i = 0; i < d.n(); ++i) mean += d.weights()[i] * values[i];
            mean /= total_weight;
            double var = 0.0;
            for (std::size_t i = 0; i < d.n(); ++i) {
                double c = values[i] - mean;
                var += d.weights()[i] * c * c;
            }
            var /= total_weight;
            double scale = std::sqrt(var);
            EncodedColumn col;
            col.feature = f.name;
            col.numeric = true;
            col.mean = mean;
            col.scale = scale > 0.0 ? scale : 1.0;
            enc.columns.push_back(std::move(col));
        } else {
            const auto& raw = d.raw_column(f.name);
            std::set<std::string> distinct(raw.begin(), raw.end());
            std::vector<std::string> levels(distinct.begin(), distinct.end());
            enc.levels[f.name] = levels;
            for (std::size_t k = 1; k < levels.size(); ++k) {  // first level dropped
                EncodedColumn col;
                col.feature = f.name;
                col.numeric = false;
                col.level = levels[k];
                enc.columns.push_back(std::move(col));
            }
        }
    }
    return enc;
}

LogisticModel::LogisticModel(Encoding encoding, std::vector<double> weights, double bias,
                             Hyperparams params, bool converged, LossComponents loss)
    : encoding_(std::move(encoding)),
      weights_(std::move(weights)),
      bias_(bias),
      params_(params),
      converged_(converged),
      loss_(loss) {
    require(weights_.size() == encoding_.width(), ErrorCode::InvalidParam,
            "weight vector does not match encoding width");
}

std::vector<double> LogisticModel::encode_row(const Dataset& d, std::size_t row,
                                              std::optional<int> s_override) const {
    std::vector<double> x;
    x.reserve(encoding_.width());
    for (const auto& col : encoding_.columns) {
        if (col.numeric) {
            require(d.has_column(col.feature), ErrorCode::MissingFeature,
                    "row lacks feature '" + col.feature + "'");
            x.push_back((d.numeric_feature(col.feature)[row] - col.mean) / col.scale);
        } else {
            require(d.has_column(col.feature), ErrorCode::MissingFeature,
                    "row lacks feature '" + col.feature + "'");
            const std::string& v = d.raw_column(col.feature)[row];
            const auto& known = encoding_.levels.at(col.feature);
            require(std::find(known.begin(), known.end(), v) != known.end(),
                    ErrorCode::UnknownLevel,
                    "unseen level '" + v + "' for feature '" + col.feature + "'");
            x.push_back(v == col.level ? 1.0 : 0.0);
        }
    }
    if (encoding_.include_protected) {
        int s = s_override ? *s_override : d.s()[row];
        x.push_back(static_cast<double>(s));
    }
    return x;
}

double LogisticModel::predict_proba(const Dataset& d, std::size_t row,
                                    std::optional<int> s_override) const {
    std::vector<double> x = encode_row(d, row, s_override);
    double z = bias_;
    for (std::size_t j = 0; j < x.size(); ++j) z += weights_[j] * x[j];
    return sigmoid(z);
}

std::vector<double> LogisticModel::predict_proba_all(const Dataset& d,
                                                     std::optional<int> s_override) const {
    std::vector<double> out;
    out.reserve(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) out.push_back(predict_proba(d, i, s_override));
    return out;
}

int LogisticModel::decide(const Dataset& d, std::size_t row, double threshold,
                          std::optional<int> s_override) const {
    require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::InvalidParam,
            "threshold must lie in [0, 1]");
    return predict_proba(d, row, s_override) >= threshold ? 1 : 0;
}

std::vector<int> LogisticModel::decide_all(const Dataset& d, double threshold,
                                           std::optional<int> s_override) const {
    require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::InvalidParam,
            "threshold must lie in [0, 1]");
    std::vector<int> out;
    out.reserve(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) {
        out.push_back(predict_proba(d, i, s_override) >= threshold ? 1 : 0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss and training

LossValue training_loss(const Dataset& d, const Encoding& enc, const std::vector<double>& weights,
                        double bias, const Hyperparams& h, const std::vector<int>& target) {
    const std::size_t width = enc.width();
    require(weights.size() == width, ErrorCode::InvalidParam, "weight width mismatch");
    require(target.size() == d.n(), ErrorCode::InvalidParam, "target length mismatch");

    LossValue out;
    out.gradient.assign(width + 1, 0.0);

    // Cost-scaled weight normalizer and per-group weight totals.
    double sum_wc = 0.0;
    double group_w[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < d.n(); ++i) {
        sum_wc += d.weights()[i] * (target[i] == 1 ? h.cost_fn : h.cost_fp);
        group_w[d.s()[i]] += d.weights()[i];
    }
    require(sum_wc > 0.0, ErrorCode::InvalidParam, "total cost-weighted mass is zero");

    double nll = 0.0;
    double group_p[2] = {0.0, 0.0};
    std::vector<double> probs(d.n());
    std::vector<std::vector<double>> rows(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) {
        rows[i].reserve(width);
        for (const auto& col : enc.columns) {
            if (col.numeric) {
                rows[i].push_back((d.numeric_feature(col.feature)[i] - col.mean) / col.scale);
            } else {
                rows[i].push_back(d.raw_column(col.feature)[i] == col.level ? 1.0 : 0.0);
            }
        }
        if (enc.include_protected) rows[i].push_back(static_cast<double>(d.s()[i]));

        double z = bias;
        for (std::size_t j = 0; j < width; ++j) z += weights[j] * rows[i][j];
        double p = sigmoid(z);
        probs[i] = p;
        double wc = d.weights()[i] * (target[i] == 1 ? h.cost_fn : h.cost_fp);
        nll += wc * nll_from_logit(z, target[i]);
        group_p[d.s()[i]] += d.weights()[i] * p;
    }
    nll /= sum_wc;

    double l2 = 0.0;
    for (double w : weights) l2 += w * w;
    l2 *= h.l2;

    double gap = 0.0;
    bool have_gap = group_w[0] > 0.0 && group_w[1] > 0.0;
    if (have_gap) gap = group_p[1] / group_w[1] - group_p[0] / group_w[0];

    out.components.nll = nll;
    out.components.l2 = l2;
    out.components.fairness = gap * gap;
    out.total = nll + l2 + h.fairness * gap * gap;

    // Gradient: nll part, ridge part, then the fairness chain rule through
    // each group's mean predicted probability.
    for (std::size_t i = 0; i < d.n(); ++i) {
        double wc = d.weights()[i] * (target[i] == 1 ? h.cost_fn : h.cost_fp);
        double r = wc * (probs[i] - static_cast<double>(target[i])) / sum_wc;
        for (std::size_t j = 0; j < width; ++j) out.gradient[j] += r * rows[i][j];
        out.gradient[width] += r;
    }
    for (std::size_t j = 0; j < width; ++j) out.gradient[j] += 2.0 * h.l2 * weights[j];
    if (have_gap && h.fairness > 0.0) {
        double coef = 2.0 * h.fairness * gap;
        for (std::size_t i = 0; i < d.n(); ++i) {
            double dp = probs[i] * (1.0 - probs[i]) * d.weights()[i];
            double sign = d.s()[i] == 1 ? 1.0 / group_w[1] : -1.0 / group_w[0];
            double r = coef * sign * dp;
            for (std::size_t j = 0; j < width; ++j) out.gradient[j] += r * rows[i][j];
            out.gradient[width] += r;
        }
    }
    return out;
}

LossValue training_loss(const Dataset& d, const Encoding& enc, const std::vector<double>& weights,
                        double bias, const Hyperparams& h) {
    return training_loss(d, enc, weights, bias, h, d.y());
}

LogisticModel train_with_target(const Dataset& d, const Hyperparams& h,
                                const std::vector<int>& target) {
    h.validate();
    require(d.n() >= 2, ErrorCode::InvalidParam, "need at least 2 rows to train");
    bool has_pos = false, has_neg = false;
    for (int y : target) (y == 1 ? has_pos : has_neg) = true;
    require(has_pos && has_neg, ErrorCode::SingleClassLabel,
            "training data contains a single label class");

    Encoding enc = build_encoding(d, h.include_protected);
    std::vector<double> weights(enc.width(), 0.0);  // zero init; seed is recorded only
    double bias = 0.0;
    bool converged = false;

    LossValue lv;
    for (int iter = 0; iter < h.max_iters; ++iter) {
        lv = training_loss(d, enc, weights, bias, h, target);
        require(std::isfinite(lv.total), ErrorCode::NonFiniteLoss,
                "loss diverged at iteration " + std::to_string(iter) +
                    "; reduce learning_rate (currently " + std::to_string(h.learning_rate) + ")");
        double norm = 0.0;
        for (double g : lv.gradient) norm += g * g;
        norm = std::sqrt(norm);
        if (norm < h.tolerance) {
            converged = true;
            break;
        }
        for (std::size_t j = 0; j < weights.size(); ++j) {
            weights[j] -= h.learning_rate * lv.gradient[j];
        }
        bias -= h.learning_rate * lv.gradient.back();
    }
    lv = training_loss(d, enc, weights, bias, h, target);
    require(std::isfinite(lv.total), ErrorCode::NonFiniteLoss,
            "loss diverged; reduce learning_rate (currently " + std::to_string(h.learning_rate) + ")");
    return LogisticModel(std::move(enc), std::move(weights), bias, h, converged, lv.components);
}

LogisticModel train(const Dataset& d, const Hyperparams& h) { return train_with_target(d, h, d.y()); }

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json LogisticModel::to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : encoding_.columns) {
        if (c.numeric) {
            cols.push_back({{"feature", c.feature}, {"kind", "numeric"}, {"mean", c.mean},
                            {"scale", c.scale}});
        } else {
            cols.push_back({{"feature", c.feature}, {"kind", "level"}, {"level", c.level}});
        }
    }
    nlohmann::json levels = nlohmann::json::object();
    for (const auto& [name, vals] : encoding_.levels) levels[name] = vals;
    return {{"version", 1},
            {"encoding",
             {{"columns", cols},
              {"levels", levels},
              {"include_protected", encoding_.include_protected}}},
            {"weights", weights_},
            {"bias", bias_},
            {"hyperparams", params_.to_json()},
            {"loss", {{"nll", loss_.nll}, {"l2", loss_.l2}, {"fairness", loss_.fairness}}},
            {"converged", converged_}};
}

std::string LogisticModel::serialize() const { return canonical_dump(to_json(), 17, 2); }

LogisticModel LogisticModel::from_json(const nlohmann::json& doc) {
    require(doc.is_object() && doc.contains("version"), ErrorCode::UnknownVersion,
            "model document lacks a version field");
    require(doc.at("version").is_number_integer() && doc.at("version").get<int>() == 1,
            ErrorCode::UnknownVersion,
            "unsupported model version " + doc.at("version").dump());
    try {
        Encoding enc;
        const auto& e = doc.at("encoding");
        enc.include_protected = e.at("include_protected").get<bool>();
        for (const auto& c : e.at("columns")) {
            EncodedColumn col;
            col.feature = c.at("feature").get<std::string>();
            if (c.at("kind") == "numeric") {
                col.numeric = true;
                col.mean = c.at("mean").get<double>();
                col.scale = c.at("scale").get<double>();
            } else {
                col.numeric = false;
                col.level = c.at("level").get<std::string>();
            }
            enc.columns.push_back(std::move(col));
        }
        for (auto it = e.at("levels").begin(); it != e.at("levels").end(); ++it) {
            enc.levels[it.key()] = it.value().get<std::vector<std::string>>();
        }
        auto weights = doc.at("weights").get<std::vector<double>>();
        double bias = doc.at("bias").get<double>();
        Hyperparams h = Hyperparams::from_json(doc.at("hyperparams"));
        LossComponents loss;
        loss.nll = doc.at("loss").at("nll").get<double>();
        loss.l2 = doc.at("loss").at("l2").get<double>();
        loss.fairness = doc.at("loss").at("fairness").get<double>();
        bool converged = doc.at("converged").get<bool>();
        return LogisticModel(std::move(enc), std::move(weights), bias, h, converged, loss);
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorCode::InvalidParam, std::string("malformed model document: ") + ex.what());
    }
}

LogisticModel LogisticModel::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::IoError, "cannot open model file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidParam, std::string("model file is not valid JSON: ") + e.what());
    }
    return from_json(doc);
}

void LogisticModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::IoError, "cannot write model file: " + path);
    out << serialize();
    require(out.good(), ErrorCode::IoError, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// Decision utilities

double cost_threshold(double cost_fp, double cost_fn) {
    require(cost_fp > 0.0 && cost_fn > 0.0, ErrorCode::NonPositiveCost,
            "misclassification costs must be > 0");
    return cost_fp / (cost_fp + cost_fn);
}

Evaluation evaluate(const LogisticModel& m, const Dataset& d, double threshold) {
    std::vector<int> decisions = m.decide_all(d, threshold);
    Evaluation ev;

    double accepted_w[2] = {0.0, 0.0};
    double accepted_pos_w[2] = {0.0, 0.0};
    double pos_w[2] = {0.0, 0.0};
    double neg_w[2] = {0.0, 0.0};
    double group_total[2] = {0.0, 0.0};
    std::size_t group_rows[2] = {0, 0};

    for (std::size_t i = 0; i < d.n(); ++i) {
        double w = d.weights()[i];
        int s = d.s()[i], y = d.y()[i], a = decisions[i];
        group_total[s] += w;
        group_rows[s] += 1;
        if (a == 1) {
            accepted_w[s] += w;
            if (y == 1) {
                ev.tp += w;
                accepted_pos_w[s] += w;
            } else {
                ev.fp += w;
            }
        } else {
            if (y == 1) {
                ev.fn += w;
            } else {
                ev.tn += w;
            }
        }
        (y == 1 ? pos_w : neg_w)[s] += w;
    }

    double total = ev.tp + ev.fp + ev.tn + ev.fn;
    ev.accuracy = total > 0.0 ? (ev.tp + ev.tn) / total : 0.0;
    if (ev.tp + ev.fp > 0.0) ev.precision = ev.tp / (ev.tp + ev.fp);
    if (ev.tp + ev.fn > 0.0) ev.recall = ev.tp / (ev.tp + ev.fn);

    auto fill_group = [&](int s, GroupEvaluation& g, const char* label) {
        g.rows = group_rows[s];
        g.acceptance_rate = group_total[s] > 0.0 ? accepted_w[s] / group_total[s] : 0.0;
        if (pos_w[s] > 0.0) {
            g.tpr = accepted_pos_w[s] / pos_w[s];
        } else {
            ev.caveats.push_back(std::string("no positives in ") + label + " group: TPR undefined");
        }
        if (neg_w[s] > 0.0) {
            g.fpr = (accepted_w[s] - accepted_pos_w[s]) / neg_w[s];
        } else {
            ev.caveats.push_back(std::string("no negatives in ") + label + " group: FPR undefined");
        }
    };
    fill_group(1, ev.protected_group, "protected");
    fill_group(0, ev.favored_group, "favored");

    ev.decision_mean_difference =
        ev.protected_group.acceptance_rate - ev.favored_group.acceptance_rate;
    if (total > 0.0 && group_total[0] > 0.0 && group_total[1] > 0.0) {
        double p_pos = (accepted_w[0] + accepted_w[1]) / total;
        double p_s0 = group_total[0] / total;
        double p_s1 = group_total[1] / total;
        double c = std::min(p_pos / p_s0, (1.0 - p_pos) / p_s1);
        if (c > 0.0) ev.decision_normalized_mean_difference = ev.decision_mean_difference / c;
    }
    return ev;
}

nlohmann::json Evaluation::to_json() const {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    auto group = [&](const GroupEvaluation& g) {
        return nlohmann::json{{"rows", g.rows},
                              {"acceptance_rate", g.acceptance_rate},
                              {"tpr", opt(g.tpr)},
                              {"fpr", opt(g.fpr)}};
    };
    return {{"accuracy", accuracy},
            {"confusion", {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}}},
            {"precision", opt(precision)},
            {"recall", opt(recall)},
            {"protected_group", group(protected_group)},
            {"favored_group", group(favored_group)},
            {"decision_mean_difference", decision_mean_difference},
            {"decision_normalized_mean_difference", opt(decision_normalized_mean_difference)},
            {"caveats", caveats}};
}

}  // namespace fairaudit
