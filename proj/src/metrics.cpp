#include "fairaudit/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "fairaudit/model.hpp"

namespace fairaudit {

nlohmann::json MetricResult::to_json() const {
    nlohmann::json doc{{"name", name},
                       {"value", value ? nlohmann::json(*value) : nlohmann::json(nullptr)},
                       {"components", components},
                       {"group_sizes", {group_size_protected, group_size_favored}},
                       {"caveats", caveats}};
    return doc;
}

std::vector<double> resolve_outcome(const Dataset& d, const Outcome& outcome) {
    switch (outcome.kind) {
        case Outcome::Kind::label: {
            std::vector<double> v(d.n());
            for (std::size_t i = 0; i < d.n(); ++i) v[i] = static_cast<double>(d.y()[i]);
            return v;
        }
        case Outcome::Kind::decision: {
            require(d.decision().has_value(), ErrorCode::InvalidOutcome,
                    "dataset has no decision column");
            std::vector<double> v(d.n());
            for (std::size_t i = 0; i < d.n(); ++i) v[i] = static_cast<double>((*d.decision())[i]);
            return v;
        }
        case Outcome::Kind::explicit_values: {
            require(outcome.values.size() == d.n(), ErrorCode::InvalidOutcome,
                    "outcome vector length does not match dataset");
            for (double v : outcome.values) {
                require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorCode::InvalidOutcome,
                        "outcome values must lie in [0, 1]");
            }
            return outcome.values;
        }
    }
    fail(ErrorCode::InvalidOutcome, "unreachable outcome kind");
}

namespace {

/// Weighted group tallies over an optional row subset.
struct GroupTally {
    double w1 = 0.0, w0 = 0.0;        // group weight
    double pos1 = 0.0, pos0 = 0.0;    // weighted outcome mass
    std::size_t n1 = 0, n0 = 0;       // row counts

    bool weighted() const { return w1 > 0.0 && w0 > 0.0; }
    double p1() const { return pos1 / w1; }
    double p0() const { return pos0 / w0; }
    double md() const { return p1() - p0(); }
};

GroupTally tally(const Dataset& d, const std::vector<double>& outcome,
                 const std::vector<std::size_t>* rows = nullptr) {
    GroupTally t;
    auto add = [&](std::size_t i) {
        double w = d.weights()[i];
        if (d.s()[i] == 1) {
            t.n1 += 1;
            t.w1 += w;
            t.pos1 += w * outcome[i];
        } else {
            t.n0 += 1;
            t.w0 += w;
            t.pos0 += w * outcome[i];
        }
    };
    if (rows) {
        for (std::size_t i : *rows) add(i);
    } else {
        for (std::size_t i = 0; i < d.n(); ++i) add(i);
    }
    return t;
}

void require_groups(const GroupTally& t) {
    require(t.n1 >= 1, ErrorCode::EmptyGroup, "no protected rows for this outcome");
    require(t.n0 >= 1, ErrorCode::EmptyGroup, "no favored rows for this outcome");
}

constexpr const char* kDecompositionCaveat =
    "explained/unexplained split uses this toolkit's symmetric p* decomposition (documented in "
    "docs/metrics.md); the split is a reconstruction, not a standard form";

}  // namespace

MetricResult mean_difference(const Dataset& d, const Outcome& outcome) {
    std::vector<double> o = resolve_outcome(d, outcome);
    GroupTally t = tally(d, o);
    require_groups(t);

    MetricResult r;
    r.name = "mean_difference";
    r.group_size_protected = t.n1;
    r.group_size_favored = t.n0;
    if (!t.weighted()) {
        r.caveats.push_back("a group has zero total weight; mean difference undefined");
        return r;
    }
    r.components["p1"] = t.p1();
    r.components["p0"] = t.p0();
    r.value = t.md();
    return r;
}

MetricResult normalized_mean_difference(const Dataset& d, const Outcome& outcome) {
    std::vector<double> o = resolve_outcome(d, outcome);
    GroupTally t = tally(d, o);
    require_groups(t);

    MetricResult r;
    r.name = "normalized_mean_difference";
    r.group_size_protected = t.n1;
    r.group_size_favored = t.n0;
    if (!t.weighted()) {
        r.caveats.push_back("a group has zero total weight; normalized mean difference undefined");
        return r;
    }
    double total_w = t.w1 + t.w0;
    double p_pos = (t.pos1 + t.pos0) / total_w;
    double p_s1 = t.w1 / total_w;
    double p_s0 = t.w0 / total_w;
    double c = std::min(p_pos / p_s0, (1.0 - p_pos) / p_s1);
    double md = t.md();
    r.components["md"] = md;
    r.components["c"] = c;
    r.components["p1"] = t.p1();
    r.components["p0"] = t.p0();
    r.components["p_outcome"] = p_pos;
    r.components["p_s1"] = p_s1;
    if (c > 0.0) {
        r.value = md / c;
    } else {
        r.caveats.push_back("normalization constant C = 0; normalized value undefined");
    }
    return r;
}

namespace {

struct StratumTally {
    std::string key;
    GroupTally tally;
};

/// Tallies per stratum, with single-group strata skipped and recorded.
std::vector<StratumTally> stratum_tallies(const Dataset& d, const std::vector<double>& outcome,
                                          const std::vector<Stratum>& strata,
                                          std::vector<std::string>& caveats) {
    std::vector<StratumTally> out;
    for (const auto& stratum : strata) {
        GroupTally t = tally(d, outcome, &stratum.rows);
        if (t.n1 == 0 || t.n0 == 0 || !t.weighted()) {
            caveats.push_back("skipped stratum " + stratum.key + ": missing group");
            continue;
        }
        out.push_back({stratum.key, t});
    }
    require(!out.empty(), ErrorCode::AllStrataSkipped,
            "every stratum lacks one of the protected groups");
    return out;
}

}  // namespace

MetricResult conditional_mean_difference(const Dataset& d, const Outcome& outcome,
                                         const Stratification& spec) {
    std::vector<double> o = resolve_outcome(d, outcome);
    GroupTally overall = tally(d, o);
    require_groups(overall);

    MetricResult r;
    r.name = "conditional_mean_difference";
    r.group_size_protected = overall.n1;
    r.group_size_favored = overall.n0;

    auto strata = stratify(d, spec);
    auto included = stratum_tallies(d, o, strata, r.caveats);

    if (included.size() == 1) {
        // Single stratum reduces to the plain mean difference, bit-for-bit.
        r.components["md[" + included[0].key + "]"] = included[0].tally.md();
        r.value = included[0].tally.md();
    } else {
        double num = 0.0, den = 0.0;
        for (const auto& st : included) {
            double w = st.tally.w1 + st.tally.w0;
            r.components["md[" + st.key + "]"] = st.tally.md();
            num += w * st.tally.md();
            den += w;
        }
        r.value = num / den;
    }
    if (overall.weighted()) {
        r.components["p1"] = overall.p1();
        r.components["p0"] = overall.p0();
    }
    r.components["strata_included"] = static_cast<double>(included.size());
    r.components["strata_skipped"] = static_cast<double>(strata.size() - included.size());
    return r;
}

MetricResult unexplained_difference(const Dataset& d, const Outcome& outcome,
                                    const Stratification& spec) {
    std::vector<double> o = resolve_outcome(d, outcome);
    GroupTally overall = tally(d, o);
    require_groups(overall);

    MetricResult r;
    r.name = "unexplained_difference";
    r.group_size_protected = overall.n1;
    r.group_size_favored = overall.n0;

    auto strata = stratify(d, spec);
    auto included = stratum_tallies(d, o, strata, r.caveats);

    // Totals over the included strata only, so the identity holds even when
    // strata were skipped.
    double w1 = 0.0, w0 = 0.0;
    for (const auto& st : included) {
        w1 += st.tally.w1;
        w0 += st.tally.w0;
    }
    double total = 0.0, explained = 0.0, unexplained = 0.0;
    double pos1 = 0.0, pos0 = 0.0;
    for (const auto& st : included) {
        double share1 = st.tally.w1 / w1;  // P(stratum | S=1)
        double share0 = st.tally.w0 / w0;  // P(stratum | S=0)
        double p1 = st.tally.p1();
        double p0 = st.tally.p0();
        double p_star = 0.5 * (p1 + p0);
        explained += (share1 - share0) * p_star;
        unexplained += (p1 - p0) * 0.5 * (share1 + share0);
        pos1 += st.tally.pos1;
        pos0 += st.tally.pos0;
        r.components["md[" + st.key + "]"] = p1 - p0;
    }
    total = pos1 / w1 - pos0 / w0;

    if (included.size() < strata.size()) {
        r.caveats.push_back("components computed over included strata only");
    }
    r.caveats.push_back(kDecompositionCaveat);
    r.components["p1"] = pos1 / w1;
    r.components["p0"] = pos0 / w0;
    r.components["total"] = total;
    r.components["explained"] = explained;
    r.components["unexplained"] = unexplained;
    r.value = unexplained;
    return r;
}

MetricResult regression_test(const Dataset& d, const Outcome& outcome) {
    std::vector<double> o = resolve_outcome(d, outcome);
    GroupTally t = tally(d, o);
    require_groups(t);

    // Design: intercept, numeric features raw, categorical one-hot with the
    // first (sorted) level dropped, then s.
    std::vector<std::string> numeric_names;
    struct LevelColumn {
        const std::vector<std::string>* raw;
        std::string level;
    };
    std::vector<LevelColumn> level_columns;
    for (const auto& f : d.schema().feature_columns) {
        if (f.kind == FeatureKind::numeric) {
            numeric_names.push_back(f.name);
        } else {
            const auto& raw = d.raw_column(f.name);
            std::set<std::string> distinct(raw.begin(), raw.end());
            bool first = true;
            for (const auto& level : distinct) {
                if (first) {
                    first = false;
                    continue;
                }
                level_columns.push_back({&raw, level});
            }
        }
    }
    const std::size_t cols = 1 + numeric_names.size() + level_columns.size() + 1;
    const std::size_t n = d.n();

    double total_w = d.total_weight();
    require(total_w > static_cast<double>(cols), ErrorCode::RankDeficientDesign,
            "not enough weighted observations for the design");

    Eigen::MatrixXd x(n, cols);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sw = std::sqrt(d.weights()[i]);
        std::size_t c = 0;
        x(i, c++) = sw;
        for (const auto& name : numeric_names) x(i, c++) = sw * d.numeric_feature(name)[i];
        for (const auto& lc : level_columns) x(i, c++) = sw * ((*lc.raw)[i] == lc.level ? 1.0 : 0.0);
        x(i, c++) = sw * static_cast<double>(d.s()[i]);
        y(i) = sw * o[i];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    require(static_cast<std::size_t>(qr.rank()) == cols, ErrorCode::RankDeficientDesign,
            "design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                std::to_string(cols) + " columns)");
    Eigen::VectorXd beta = qr.solve(y);

    double rss = (y - x * beta).squaredNorm();
    double dof = total_w - static_cast<double>(cols);
    double sigma2 = rss / dof;
    Eigen::MatrixXd xtx_inv = (x.transpose() * x).ldlt().solve(
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(cols)));
    double phi = beta(static_cast<Eigen::Index>(cols - 1));
    double se = std::sqrt(std::max(0.0, sigma2 * xtx_inv(static_cast<Eigen::Index>(cols - 1),
                                                         static_cast<Eigen::Index>(cols - 1))));

    double t_stat;
    double p_value;
    if (se > 0.0) {
        t_stat = phi / se;
        p_value = std::erfc(std::abs(t_stat) / std::sqrt(2.0));
    } else if (phi == 0.0) {
        t_stat = 0.0;
        p_value = 1.0;
    } else {
        t_stat = std::copysign(1e15, phi);  // exact fit: residuals are zero
        p_value = 0.0;
    }

    MetricResult r;
    r.name = "regression_test";
    r.group_size_protected = t.n1;
    r.group_size_favored = t.n0;
    r.value = phi;
    r.components["phi"] = phi;
    r.components["se"] = se;
    r.components["t"] = t_stat;
    r.components["p_value"] = p_value;
    r.components["significant"] = p_value < 0.05 ? 1.0 : 0.0;
    return r;
}

namespace {

/// Gower-style distance over declared features: numeric contributions are
/// range-scaled absolute differences, categorical ones 0/1 mismatches.
class RowDistance {
  public:
    explicit RowDistance(const Dataset& d) {
        for (const auto& f : d.schema().feature_columns) {
            if (f.kind == FeatureKind::numeric) {
                const auto& v = d.numeric_feature(f.name);
                auto [lo, hi] = std::minmax_element(v.begin(), v.end());
                numeric_.push_back({&v, *hi - *lo});
            } else {
                categorical_.push_back(&d.raw_column(f.name));
            }
        }
        count_ = numeric_.size() + categorical_.size();
    }

    double operator()(std::size_t a, std::size_t b) const {
        if (count_ == 0) return 0.0;
        double sum = 0.0;
        for (const auto& [values, range] : numeric_) {
            if (range > 0.0) sum += std::abs((*values)[a] - (*values)[b]) / range;
        }
        for (const auto* raw : categorical_) {
            sum += ((*raw)[a] == (*raw)[b]) ? 0.0 : 1.0;
        }
        return sum / static_cast<double>(count_);
    }

  private:
    std::vector<std::pair<const std::vector<double>*, double>> numeric_;
    std::vector<const std::vector<std::string>*> categorical_;
    std::size_t count_ = 0;
};

}  // namespace

MetricResult knn_situation_test(const Dataset& d, const Outcome& outcome, int k, double t) {
    require(k >= 1, ErrorCode::InvalidParam, "k must be >= 1");
    require(t >= 0.0 && t <= 1.0, ErrorCode::InvalidParam, "t must lie in [0, 1]");
    std::vector<double> o = resolve_outcome(d, outcome);
    for (double v : o) {
        require(v == 0.0 || v == 1.0, ErrorCode::InvalidOutcome,
                "situation testing requires a 0/1 outcome");
    }
    GroupTally groups = tally(d, o);
    require_groups(groups);
    require(groups.n1 >= static_cast<std::size_t>(k) && groups.n0 >= static_cast<std::size_t>(k),
            ErrorCode::InsufficientNeighbors, "each group must contain at least k rows");

    std::vector<std::size_t> protected_rows, favored_rows, tested;
    for (std::size_t i = 0; i < d.n(); ++i) {
        (d.s()[i] == 1 ? protected_rows : favored_rows).push_back(i);
        if (d.s()[i] == 1 && o[i] == 0.0) tested.push_back(i);
    }

    MetricResult r;
    r.name = "knn_situation_test";
    r.group_size_protected = groups.n1;
    r.group_size_favored = groups.n0;
    r.components["k"] = static_cast<double>(k);
    r.components["t"] = t;
    if (tested.empty()) {
        r.value = 0.0;
        r.components["tested"] = 0.0;
        r.components["flagged"] = 0.0;
        r.caveats.push_back("no test population: no protected rows with a negative outcome");
        return r;
    }
    require(protected_rows.size() - 1 >= static_cast<std::size_t>(k),
            ErrorCode::InsufficientNeighbors,
            "protected group needs at least k rows besides each tested row");

    RowDistance distance(d);
    auto positive_fraction = [&](std::size_t row, const std::vector<std::size_t>& pool,
                                 bool exclude_self) {
        std::vector<std::pair<double, std::size_t>> order;
        order.reserve(pool.size());
        for (std::size_t j : pool) {
            if (exclude_self && j == row) continue;
            order.emplace_back(distance(row, j), j);
        }
        std::partial_sort(order.begin(), order.begin() + k, order.end());
        double pos = 0.0;
        for (int c = 0; c < k; ++c) pos += o[order[static_cast<std::size_t>(c)].second];
        return pos / static_cast<double>(k);
    };

    std::size_t flagged = 0;
    double diff_sum = 0.0;
    for (std::size_t row : tested) {
        double diff = positive_fraction(row, favored_rows, false) -
                      positive_fraction(row, protected_rows, true);
        diff_sum += diff;
        if (diff >= t) ++flagged;
    }
    r.components["tested"] = static_cast<double>(tested.size());
    r.components["flagged"] = static_cast<double>(flagged);
    r.components["mean_diff"] = diff_sum / static_cast<double>(tested.size());
    r.value = static_cast<double>(flagged) / static_cast<double>(tested.size());
    return r;
}

MetricResult propensity_stratified_difference(const Dataset& d, const Outcome& outcome, int bins) {
    require(bins >= 2, ErrorCode::InvalidParam, "bins must be >= 2");
    require(!d.schema().feature_columns.empty(), ErrorCode::InvalidParam,
            "propensity stratification needs at least one feature");
    std::vector<double> o = resolve_outcome(d, outcome);
    GroupTally overall = tally(d, o);
    require_groups(overall);

    Hyperparams h;  // defaults; eta = 0
    LogisticModel propensity = train_with_target(d, h, d.s());
    std::vector<double> scores = propensity.predict_proba_all(d);

    std::set<double> distinct(scores.begin(), scores.end());
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<double> bounds;
    if (distinct.size() <= static_cast<std::size_t>(bins)) {
        // Few distinct propensities: group exactly by score so that binary
        // features reduce to exact conditioning.
        std::map<double, int> index;
        int next = 0;
        for (double v : distinct) index[v] = next++;
        for (std::size_t i = 0; i < d.n(); ++i) {
            groups["p[" + std::to_string(index[scores[i]]) + "]"].push_back(i);
        }
    } else {
        bounds = quantile_boundaries(scores, bins);
        for (std::size_t i = 0; i < d.n(); ++i) {
            groups["bin[" + std::to_string(quantile_bin(scores[i], bounds)) + "]"].push_back(i);
        }
    }

    MetricResult r;
    r.name = "propensity_stratified_difference";
    r.group_size_protected = overall.n1;
    r.group_size_favored = overall.n0;
    if (overall.weighted()) {
        r.components["p1"] = overall.p1();
        r.components["p0"] = overall.p0();
    }
    for (std::size_t j = 0; j < bounds.size(); ++j) {
        r.components["boundary[" + std::to_string(j) + "]"] = bounds[j];
    }

    double num = 0.0, den = 0.0;
    std::size_t included = 0;
    const StratumTally* only = nullptr;
    std::vector<StratumTally> kept;
    for (const auto& [key, rows] : groups) {
        GroupTally t = tally(d, o, &rows);
        if (t.n1 == 0 || t.n0 == 0 || !t.weighted()) {
            r.caveats.push_back("skipped stratum " + key + ": missing group");
            continue;
        }
        kept.push_back({key, t});
    }
    require(!kept.empty(), ErrorCode::AllStrataSkipped,
            "every propensity stratum lacks one of the protected groups");
    for (const auto& st : kept) {
        r.components["md[" + st.key + "]"] = st.tally.md();
        num += (st.tally.w1 + st.tally.w0) * st.tally.md();
        den += st.tally.w1 + st.tally.w0;
        ++included;
        only = &st;
    }
    r.value = included == 1 ? only->tally.md() : num / den;
    r.components["strata_included"] = static_cast<double>(included);
    return r;
}

std::vector<MetricResult> feature_protected_correlation(const Dataset& d) {
    std::vector<MetricResult> out;
    double total_w = d.total_weight();
    require(total_w > 0.0, ErrorCode::InvalidParam, "total weight is zero");

    double mean_s = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) mean_s += d.weights()[i] * d.s()[i];
    mean_s /= total_w;
    double var_s = mean_s * (1.0 - mean_s);

    for (const auto& f : d.schema().feature_columns) {
        MetricResult r;
        r.name = "feature_protected_correlation[" + f.name + "]";
        r.group_size_protected = d.group_count(1);
        r.group_size_favored = d.group_count(0);

        if (f.kind == FeatureKind::numeric) {
            const auto& x = d.numeric_feature(f.name);
            double mean_x = 0.0;
            for (std::size_t i = 0; i < d.n(); ++i) mean_x += d.weights()[i] * x[i];
            mean_x /= total_w;
            double var_x = 0.0, cov = 0.0;
            for (std::size_t i = 0; i < d.n(); ++i) {
                double cx = x[i] - mean_x;
                var_x += d.weights()[i] * cx * cx;
                cov += d.weights()[i] * cx * (d.s()[i] - mean_s);
            }
            var_x /= total_w;
            cov /= total_w;
            if (var_x <= 0.0 || var_s <= 0.0) {
                r.value = 0.0;
                r.caveats.push_back("constant feature: correlation undefined, reported as 0");
            } else {
                double corr = cov / std::sqrt(var_x * var_s);
                r.components["r"] = corr;
                r.value = std::min(1.0, std::abs(corr));
            }
        } else {
            const auto& raw = d.raw_column(f.name);
            std::map<std::string, std::array<double, 2>> table;  // level -> weight by s
            for (std::size_t i = 0; i < d.n(); ++i) {
                table[raw[i]][static_cast<std::size_t>(d.s()[i])] += d.weights()[i];
            }
            if (table.size() < 2 || var_s <= 0.0) {
                r.value = 0.0;
                r.caveats.push_back("constant feature: association undefined, reported as 0");
            } else {
                double w_s[2] = {total_w * (1.0 - mean_s), total_w * mean_s};
                double chi2 = 0.0;
                for (const auto& [level, cell] : table) {
                    double level_w = cell[0] + cell[1];
                    for (int s = 0; s < 2; ++s) {
                        double expected = level_w * w_s[s] / total_w;
                        if (expected > 0.0) {
                            double diff = cell[static_cast<std::size_t>(s)] - expected;
                            chi2 += diff * diff / expected;
                        }
                    }
                }
                double v = std::sqrt(chi2 / total_w);  // min(rows-1, cols-1) = 1 for binary s
                r.components["chi2"] = chi2;
                r.value = std::min(1.0, v);
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

MetricResult support_report(const Dataset& d, int conjunction_depth) {
    require(conjunction_depth >= 0, ErrorCode::InvalidParam, "conjunction depth must be >= 0");
    std::vector<std::string> categorical;
    for (const auto& f : d.schema().feature_columns) {
        if (f.kind == FeatureKind::categorical) categorical.push_back(f.name);
    }
    require(conjunction_depth <= static_cast<int>(categorical.size()), ErrorCode::InvalidParam,
            "conjunction depth exceeds the number of categorical features");

    double total_w = d.total_weight();
    require(total_w > 0.0, ErrorCode::InvalidParam, "total weight is zero");
    double w1 = d.group_weight(1);

    MetricResult r;
    r.name = "support_report";
    r.group_size_protected = d.group_count(1);
    r.group_size_favored = d.group_count(0);
    double p_s1 = w1 / total_w;
    r.components["p_s1"] = p_s1;
    r.components["p_s0"] = 1.0 - p_s1;
    r.value = std::min(p_s1, 1.0 - p_s1);

    if (conjunction_depth >= 1) {
        // Every size-`depth` combination of categorical features, cells taken
        // from combinations observed anywhere in the data.
        std::vector<int> pick(categorical.size(), 0);
        std::fill(pick.begin(), pick.begin() + conjunction_depth, 1);
        std::sort(pick.begin(), pick.end());  // start from lexicographically first mask
        do {
            std::vector<std::string> chosen;
            for (std::size_t j = 0; j < pick.size(); ++j) {
                if (pick[j]) chosen.push_back(categorical[j]);
            }
            std::map<std::string, std::pair<double, std::size_t>> cells;  // key -> (weight, rows)
            for (std::size_t i = 0; i < d.n(); ++i) {
                std::string key;
                for (std::size_t c = 0; c < chosen.size(); ++c) {
                    if (c) key += '&';
                    key += chosen[c] + "=" + d.raw_column(chosen[c])[i];
                }
                auto& cell = cells[key];
                if (d.s()[i] == 1) {
                    cell.first += d.weights()[i];
                    cell.second += 1;
                }
            }
            for (const auto& [key, cell] : cells) {
                r.components["share[" + key + "]"] = cell.first / total_w;
                r.components["count[" + key + "]"] = static_cast<double>(cell.second);
            }
        } while (std::next_permutation(pick.begin(), pick.end()));
    }
    return r;
}

}  // namespace fairaudit
