#include "fairaudit/mitigate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fairaudit/rng.hpp"

namespace fairaudit {

nlohmann::json MitigationRecord::to_json() const {
    return {{"method", method},
            {"parameters", parameters},
            {"before", before.to_json()},
            {"after", after.to_json()},
            {"rows_or_weights_changed", rows_or_weights_changed},
            {"seed", seed}};
}

nlohmann::json ThresholdPair::to_json() const {
    return {{"threshold_protected", threshold_protected},
            {"threshold_favored", threshold_favored},
            {"target", target},
            {"achieved_disparity", achieved_disparity},
            {"achieved_accuracy", achieved_accuracy},
            {"feasible", feasible}};
}

ThresholdTarget threshold_target_from_string(const std::string& name) {
    if (name == "demographic_parity") return ThresholdTarget::demographic_parity;
    if (name == "equal_opportunity") return ThresholdTarget::equal_opportunity;
    fail(ErrorCode::InvalidParam, "unknown threshold target '" + name + "'");
}

namespace {

struct CellMass {
    double w[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // [s][y] weighted
    std::vector<std::size_t> rows[2][2];
    double total = 0.0;

    static CellMass of(const Dataset& d) {
        CellMass c;
        for (std::size_t i = 0; i < d.n(); ++i) {
            int s = d.s()[i], y = d.y()[i];
            c.w[s][y] += d.weights()[i];
            c.rows[s][y].push_back(i);
            c.total += d.weights()[i];
        }
        return c;
    }

    void require_all_nonempty() const {
        for (int s = 0; s < 2; ++s) {
            for (int y = 0; y < 2; ++y) {
                require(!rows[s][y].empty() && w[s][y] > 0.0, ErrorCode::EmptyCell,
                        "empty (s=" + std::to_string(s) + ", y=" + std::to_string(y) + ") cell");
            }
        }
    }

    double w_s(int s) const { return w[s][0] + w[s][1]; }
    double w_y(int y) const { return w[0][y] + w[1][y]; }
};

}  // namespace

std::pair<Dataset, MitigationRecord> reweight(const Dataset& d) {
    CellMass cells = CellMass::of(d);
    cells.require_all_nonempty();

    double mult[2][2];
    nlohmann::json params = nlohmann::json::object();
    for (int s = 0; s < 2; ++s) {
        for (int y = 0; y < 2; ++y) {
            mult[s][y] = cells.w_s(s) * cells.w_y(y) / (cells.total * cells.w[s][y]);
            params["multiplier[s=" + std::to_string(s) + ",y=" + std::to_string(y) + "]"] =
                mult[s][y];
        }
    }

    std::vector<double> weights(d.n());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        double m = mult[d.s()[i]][d.y()[i]];
        weights[i] = d.weights()[i] * m;
        if (m != 1.0) ++changed;
    }

    MitigationRecord record;
    record.method = "reweight";
    record.parameters = params;
    record.before = mean_difference(d, Outcome::label());
    Dataset out = d.with_weights(std::move(weights));
    record.after = mean_difference(out, Outcome::label());
    record.rows_or_weights_changed = changed;
    return {std::move(out), std::move(record)};
}

std::pair<Dataset, MitigationRecord> resample(const Dataset& d, std::uint64_t seed) {
    CellMass cells = CellMass::of(d);
    cells.require_all_nonempty();

    Rng rng(seed);
    std::vector<std::size_t> picked;
    nlohmann::json params = nlohmann::json::object();
    for (int s = 0; s < 2; ++s) {
        for (int y = 0; y < 2; ++y) {
            double expected = static_cast<double>(d.n()) * (cells.w_s(s) / cells.total) *
                              (cells.w_y(y) / cells.total);
            auto count = static_cast<std::size_t>(std::llround(expected));
            params["count[s=" + std::to_string(s) + ",y=" + std::to_string(y) + "]"] =
                static_cast<double>(count);

            // Weight-proportional sampling with replacement inside the cell.
            const auto& rows = cells.rows[s][y];
            std::vector<double> cum;
            cum.reserve(rows.size());
            double acc = 0.0;
            for (std::size_t i : rows) {
                acc += d.weights()[i];
                cum.push_back(acc);
            }
            for (std::size_t k = 0; k < count; ++k) {
                double u = rng.uniform01() * acc;
                auto it = std::upper_bound(cum.begin(), cum.end(), u);
                std::size_t idx = std::min(static_cast<std::size_t>(it - cum.begin()),
                                           rows.size() - 1);
                picked.push_back(rows[idx]);
            }
        }
    }

    MitigationRecord record;
    record.method = "resample";
    record.parameters = params;
    record.seed = seed;
    record.before = mean_difference(d, Outcome::label());
    Dataset out = d.subset(picked).with_weights(std::vector<double>(picked.size(), 1.0));
    record.after = mean_difference(out, Outcome::label());
    record.rows_or_weights_changed = picked.size();
    return {std::move(out), std::move(record)};
}

std::pair<Dataset, MitigationRecord> massage(const Dataset& d, const LogisticModel* ranker) {
    // Counts, not weights: relabeling is a row-granular operation.
    long long n1 = 0, n0 = 0, k1 = 0, k0 = 0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (d.s()[i] == 1) {
            ++n1;
            k1 += d.y()[i];
        } else {
            ++n0;
            k0 += d.y()[i];
        }
    }
    require(n1 > 0 && n0 > 0, ErrorCode::EmptyGroup, "both groups are required");

    // md < 0 <=> n1*k0 - n0*k1 > 0. M = ceil((n1*k0 - n0*k1) / (n1 + n0)) in
    // exact integer arithmetic; the mirrored case swaps the roles.
    long long diff = n1 * k0 - n0 * k1;
    bool mirrored = diff < 0;
    long long numer = std::llabs(diff);
    long long m = (numer + (n1 + n0) - 1) / (n1 + n0);

    MitigationRecord record;
    record.method = "massage";
    record.before = mean_difference(d, Outcome::label());
    record.parameters = {{"pairs_flipped", m}, {"mirrored", mirrored},
                         {"ranker", ranker ? "supplied" : "internal"}};

    if (m == 0) {
        record.after = record.before;
        return {d, std::move(record)};
    }

    std::vector<double> scores;
    if (ranker) {
        scores = ranker->predict_proba_all(d);
    } else {
        Hyperparams h;  // plain logistic on the features
        scores = train(d, h).predict_proba_all(d);
    }

    int promote_s = mirrored ? 0 : 1;  // negatives promoted in the deprived group
    int demote_s = mirrored ? 1 : 0;
    std::vector<std::size_t> promotable, demotable;
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (d.s()[i] == promote_s && d.y()[i] == 0) promotable.push_back(i);
        if (d.s()[i] == demote_s && d.y()[i] == 1) demotable.push_back(i);
    }
    require(static_cast<long long>(promotable.size()) >= m, ErrorCode::NotEnoughCandidates,
            "need " + std::to_string(m) + " promotable rows, have " +
                std::to_string(promotable.size()));
    require(static_cast<long long>(demotable.size()) >= m, ErrorCode::NotEnoughCandidates,
            "need " + std::to_string(m) + " demotable rows, have " +
                std::to_string(demotable.size()));

    // Highest-scored negatives promote, lowest-scored positives demote; ties
    // resolve by ascending row index.
    std::sort(promotable.begin(), promotable.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    std::sort(demotable.begin(), demotable.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return a < b;
    });

    std::vector<int> labels = d.y();
    for (long long j = 0; j < m; ++j) {
        labels[promotable[static_cast<std::size_t>(j)]] = 1;
        labels[demotable[static_cast<std::size_t>(j)]] = 0;
    }
    Dataset out = d.with_labels(labels);
    record.after = mean_difference(out, Outcome::label());
    record.rows_or_weights_changed = static_cast<std::size_t>(2 * m);
    return {std::move(out), std::move(record)};
}

// ---------------------------------------------------------------------------
// Post-processing threshold search

namespace {

/// Per-group acceptance statistics for every grid threshold, via prefix sums
/// over descending scores.
class GroupCurve {
  public:
    GroupCurve(std::vector<std::pair<double, int>> scored, std::vector<double> w) {
        std::vector<std::size_t> order(scored.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return scored[a].first > scored[b].first;
        });
        probs_.reserve(order.size());
        cum_w_.assign(order.size() + 1, 0.0);
        cum_pos_w_.assign(order.size() + 1, 0.0);
        for (std::size_t r = 0; r < order.size(); ++r) {
            std::size_t i = order[r];
            probs_.push_back(scored[i].first);
            cum_w_[r + 1] = cum_w_[r] + w[i];
            cum_pos_w_[r + 1] = cum_pos_w_[r] + (scored[i].second == 1 ? w[i] : 0.0);
        }
        total_w_ = cum_w_.back();
        total_pos_w_ = cum_pos_w_.back();
    }

    double total_weight() const { return total_w_; }
    double positive_weight() const { return total_pos_w_; }

    // Accepted = rows with p >= theta.
    struct At {
        double accepted_w;
        double accepted_pos_w;
    };
    At at(double theta) const {
        // probs_ descending; find count of entries >= theta.
        auto it = std::lower_bound(probs_.begin(), probs_.end(), theta,
                                   [](double p, double th) { return p >= th; });
        auto count = static_cast<std::size_t>(it - probs_.begin());
        return {cum_w_[count], cum_pos_w_[count]};
    }

    double acceptance_rate(const At& a) const { return total_w_ > 0 ? a.accepted_w / total_w_ : 0.0; }
    double tpr(const At& a) const {
        return total_pos_w_ > 0 ? a.accepted_pos_w / total_pos_w_ : 0.0;
    }
    double correct_weight(const At& a) const {
        double neg_w = total_w_ - total_pos_w_;
        double accepted_neg = a.accepted_w - a.accepted_pos_w;
        return a.accepted_pos_w + (neg_w - accepted_neg);
    }

  private:
    std::vector<double> probs_;
    std::vector<double> cum_w_;
    std::vector<double> cum_pos_w_;
    double total_w_ = 0.0;
    double total_pos_w_ = 0.0;
};

std::vector<double> threshold_grid(double step) {
    std::vector<double> grid;
    auto count = static_cast<int>(std::floor(1.0 / step + 1e-9));
    for (int k = 0; k <= count; ++k) grid.push_back(std::min(1.0, k * step));
    if (grid.back() < 1.0) grid.push_back(1.0);
    return grid;
}

MetricResult decision_md(const Dataset& d, const std::vector<int>& decisions) {
    std::vector<double> o(decisions.size());
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = static_cast<double>(decisions[i]);
    return mean_difference(d, Outcome::explicit_values(std::move(o)));
}

std::vector<int> decide_per_group(const LogisticModel& m, const Dataset& d, double theta1,
                                  double theta0) {
    std::vector<double> probs = m.predict_proba_all(d);
    std::vector<int> out(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) {
        out[i] = probs[i] >= (d.s()[i] == 1 ? theta1 : theta0) ? 1 : 0;
    }
    return out;
}

}  // namespace

std::pair<ThresholdPair, MitigationRecord> group_thresholds(const LogisticModel& m,
                                                            const Dataset& holdout,
                                                            ThresholdTarget target, double epsilon,
                                                            double grid_step) {
    require(grid_step > 0.0 && grid_step <= 0.5, ErrorCode::InvalidParam,
            "grid step must lie in (0, 0.5]");
    require(epsilon >= 0.0, ErrorCode::InvalidParam, "epsilon must be >= 0");
    require(holdout.group_count(1) >= 1 && holdout.group_count(0) >= 1, ErrorCode::EmptyGroup,
            "holdout must contain both groups");

    std::vector<double> probs = m.predict_proba_all(holdout);
    std::vector<std::pair<double, int>> scored[2];
    std::vector<double> weights[2];
    for (std::size_t i = 0; i < holdout.n(); ++i) {
        int s = holdout.s()[i];
        scored[s].emplace_back(probs[i], holdout.y()[i]);
        weights[s].push_back(holdout.weights()[i]);
    }
    GroupCurve curve1(scored[1], weights[1]);
    GroupCurve curve0(scored[0], weights[0]);
    if (target == ThresholdTarget::equal_opportunity) {
        require(curve1.positive_weight() > 0.0 && curve0.positive_weight() > 0.0,
                ErrorCode::MissingPositives,
                "equal opportunity needs positive examples in both groups");
    }

    double total_w = curve1.total_weight() + curve0.total_weight();
    std::vector<double> grid = threshold_grid(grid_step);

    struct Candidate {
        double theta1 = 0.0, theta0 = 0.0;
        double disparity = 0.0, accuracy = 0.0;
        bool valid = false;
    };
    Candidate best_feasible, best_any;

    auto better_feasible = [](const Candidate& a, const Candidate& b) {
        if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
        double ga = std::abs(a.theta1 - a.theta0), gb = std::abs(b.theta1 - b.theta0);
        if (ga != gb) return ga < gb;
        if (a.theta1 != b.theta1) return a.theta1 < b.theta1;
        return a.theta0 < b.theta0;
    };
    auto better_any = [&](const Candidate& a, const Candidate& b) {
        double da = std::abs(a.disparity), db = std::abs(b.disparity);
        if (da != db) return da < db;
        return better_feasible(a, b);
    };

    for (double theta1 : grid) {
        auto a1 = curve1.at(theta1);
        for (double theta0 : grid) {
            auto a0 = curve0.at(theta0);
            Candidate c;
            c.theta1 = theta1;
            c.theta0 = theta0;
            c.disparity = target == ThresholdTarget::demographic_parity
                              ? curve1.acceptance_rate(a1) - curve0.acceptance_rate(a0)
                              : curve1.tpr(a1) - curve0.tpr(a0);
            c.accuracy = (curve1.correct_weight(a1) + curve0.correct_weight(a0)) / total_w;
            c.valid = true;
            if (std::abs(c.disparity) <= epsilon + 1e-12 &&
                (!best_feasible.valid || better_feasible(c, best_feasible))) {
                best_feasible = c;
            }
            if (!best_any.valid || better_any(c, best_any)) best_any = c;
        }
    }

    ThresholdPair pair;
    pair.target = target == ThresholdTarget::demographic_parity ? "demographic_parity"
                                                                : "equal_opportunity";
    const Candidate& chosen = best_feasible.valid ? best_feasible : best_any;
    pair.feasible = best_feasible.valid;
    pair.threshold_protected = chosen.theta1;
    pair.threshold_favored = chosen.theta0;
    pair.achieved_disparity = chosen.disparity;
    pair.achieved_accuracy = chosen.accuracy;

    MitigationRecord record;
    record.method = "group_thresholds";
    record.parameters = {{"target", pair.target},
                         {"epsilon", epsilon},
                         {"grid_step", grid_step},
                         {"feasible", pair.feasible}};
    record.before = decision_md(holdout, decide_per_group(m, holdout, 0.5, 0.5));
    record.after = decision_md(
        holdout, decide_per_group(m, holdout, pair.threshold_protected, pair.threshold_favored));
    record.rows_or_weights_changed = 0;
    return {pair, std::move(record)};
}

std::pair<TuneResult, MitigationRecord> tune_fairness_weight(const Dataset& d_train,
                                                             const Dataset& d_val,
                                                             const std::vector<double>& eta_grid,
                                                             double max_accuracy_loss,
                                                             const Hyperparams& base,
                                                             double md_tie_tolerance) {
    require(!eta_grid.empty(), ErrorCode::InvalidParam, "eta grid is empty");
    require(max_accuracy_loss >= 0.0, ErrorCode::InvalidParam, "max accuracy loss must be >= 0");

    std::vector<double> grid = eta_grid;
    std::sort(grid.begin(), grid.end());

    TuneResult result;
    std::vector<std::vector<int>> decisions;
    double best_accuracy = -1.0;
    for (double eta : grid) {
        Hyperparams h = base;
        h.fairness = eta;
        LogisticModel m = train(d_train, h);
        Evaluation ev = evaluate(m, d_val, 0.5);
        result.accuracy_by_eta.emplace_back(eta, ev.accuracy);
        result.md_by_eta.emplace_back(eta, ev.decision_mean_difference);
        decisions.push_back(m.decide_all(d_val, 0.5));
        best_accuracy = std::max(best_accuracy, ev.accuracy);
    }

    double best_md = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (result.accuracy_by_eta[i].second >= best_accuracy - max_accuracy_loss) {
            best_md = std::min(best_md, std::abs(result.md_by_eta[i].second));
        }
    }
    std::size_t chosen_idx = grid.size();
    for (std::size_t i = 0; i < grid.size(); ++i) {  // ascending eta: first hit is smallest
        if (result.accuracy_by_eta[i].second >= best_accuracy - max_accuracy_loss &&
            std::abs(result.md_by_eta[i].second) <= best_md + md_tie_tolerance) {
            chosen_idx = i;
            break;
        }
    }
    require(chosen_idx < grid.size(), ErrorCode::InvalidParam, "no eligible grid point");

    result.chosen = base;
    result.chosen.fairness = grid[chosen_idx];

    MitigationRecord record;
    record.method = "tune_fairness_weight";
    nlohmann::json per_eta = nlohmann::json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        per_eta.push_back({{"eta", grid[i]},
                           {"accuracy", result.accuracy_by_eta[i].second},
                           {"decision_md", result.md_by_eta[i].second}});
    }
    record.parameters = {{"grid", per_eta},
                         {"max_accuracy_loss", max_accuracy_loss},
                         {"md_tie_tolerance", md_tie_tolerance},
                         {"chosen_eta", grid[chosen_idx]}};
    auto as_outcome = [](const std::vector<int>& a) {
        std::vector<double> o(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) o[i] = a[i];
        return Outcome::explicit_values(std::move(o));
    };
    record.before = mean_difference(d_val, as_outcome(decisions.front()));
    record.after = mean_difference(d_val, as_outcome(decisions[chosen_idx]));
    return {std::move(result), std::move(record)};
}

}  // namespace fairaudit
