#include "fairaudit/audit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>

#include "fairaudit/canonical_json.hpp"

namespace fairaudit {

namespace {

std::optional<double> opt_threshold(const nlohmann::json& doc, const std::string& key) {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    return doc.at(key).get<double>();
}

}  // namespace

void AuditConfig::validate() const {
    auto check = [](const std::optional<double>& v, const char* what) {
        if (v) require(*v >= 0.0, ErrorCode::InvalidConfig, std::string(what) + " must be >= 0");
    };
    check(max_abs_data_md, "max_abs_data_md");
    check(max_abs_normalized_md, "max_abs_normalized_md");
    check(max_abs_unexplained, "max_abs_unexplained");
    check(max_feature_correlation, "max_feature_correlation");
    check(min_group_support, "min_group_support");
    check(min_conjunction_support, "min_conjunction_support");
    check(max_abs_causal_md, "max_abs_causal_md");
    check(max_abs_decision_md, "max_abs_decision_md");
    check(max_group_tpr_gap, "max_group_tpr_gap");
    check(max_group_fpr_gap, "max_group_fpr_gap");
    check(knn.max_flagged, "knn.max_flagged");
    require(knn.k >= 1, ErrorCode::InvalidConfig, "knn.k must be >= 1");
    require(knn.t >= 0.0 && knn.t <= 1.0, ErrorCode::InvalidConfig, "knn.t must lie in [0, 1]");
    require(conjunction_depth >= 0, ErrorCode::InvalidConfig, "conjunction_depth must be >= 0");
    require(warn_fraction > 0.0 && warn_fraction <= 1.0, ErrorCode::InvalidConfig,
            "warn_fraction must lie in (0, 1]");
}

AuditConfig AuditConfig::from_json(const nlohmann::json& doc) {
    require(doc.is_object(), ErrorCode::InvalidConfig, "audit config must be a JSON object");
    AuditConfig cfg;
    try {
        const nlohmann::json thresholds = doc.value("thresholds", nlohmann::json::object());
        static const std::vector<std::string> known{
            "max_abs_data_md",    "max_abs_normalized_md", "max_abs_unexplained",
            "max_feature_correlation", "min_group_support", "min_conjunction_support",
            "max_abs_causal_md",  "max_abs_decision_md",   "max_group_tpr_gap",
            "max_group_fpr_gap",  "knn"};
        for (auto it = thresholds.begin(); it != thresholds.end(); ++it) {
            require(std::find(known.begin(), known.end(), it.key()) != known.end(),
                    ErrorCode::InvalidConfig, "unknown threshold key '" + it.key() + "'");
        }
        cfg.max_abs_data_md = opt_threshold(thresholds, "max_abs_data_md");
        cfg.max_abs_normalized_md = opt_threshold(thresholds, "max_abs_normalized_md");
        cfg.max_abs_unexplained = opt_threshold(thresholds, "max_abs_unexplained");
        cfg.max_feature_correlation = opt_threshold(thresholds, "max_feature_correlation");
        cfg.min_group_support = opt_threshold(thresholds, "min_group_support");
        cfg.min_conjunction_support = opt_threshold(thresholds, "min_conjunction_support");
        cfg.max_abs_causal_md = opt_threshold(thresholds, "max_abs_causal_md");
        cfg.max_abs_decision_md = opt_threshold(thresholds, "max_abs_decision_md");
        cfg.max_group_tpr_gap = opt_threshold(thresholds, "max_group_tpr_gap");
        cfg.max_group_fpr_gap = opt_threshold(thresholds, "max_group_fpr_gap");
        if (thresholds.contains("knn")) {
            const auto& k = thresholds.at("knn");
            cfg.knn.k = k.value("k", cfg.knn.k);
            cfg.knn.t = k.value("t", cfg.knn.t);
            cfg.knn.max_flagged = opt_threshold(k, "max_flagged");
        }
        if (doc.contains("stratification") && !doc.at("stratification").is_null()) {
            cfg.stratification = Stratification::from_json(doc.at("stratification"));
        }
        for (const auto& c : doc.value("sub_targets", nlohmann::json::array())) {
            cfg.sub_targets.push_back(c.get<std::string>());
        }
        cfg.conjunction_depth = doc.value("conjunction_depth", 0);
        cfg.warn_fraction = doc.value("warn_fraction", 1.0);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("malformed audit config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

AuditConfig AuditConfig::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::IoError, "cannot open audit config: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("audit config is not valid JSON: ") + e.what());
    }
    return from_json(doc);
}

nlohmann::json AuditConfig::to_json() const {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::json thresholds{{"max_abs_data_md", opt(max_abs_data_md)},
                              {"max_abs_normalized_md", opt(max_abs_normalized_md)},
                              {"max_abs_unexplained", opt(max_abs_unexplained)},
                              {"max_feature_correlation", opt(max_feature_correlation)},
                              {"min_group_support", opt(min_group_support)},
                              {"min_conjunction_support", opt(min_conjunction_support)},
                              {"max_abs_causal_md", opt(max_abs_causal_md)},
                              {"max_abs_decision_md", opt(max_abs_decision_md)},
                              {"max_group_tpr_gap", opt(max_group_tpr_gap)},
                              {"max_group_fpr_gap", opt(max_group_fpr_gap)},
                              {"knn",
                               {{"k", knn.k}, {"t", knn.t}, {"max_flagged", opt(knn.max_flagged)}}}};
    return {{"thresholds", thresholds},
            {"stratification",
             stratification ? stratification->to_json() : nlohmann::json(nullptr)},
            {"sub_targets", sub_targets},
            {"conjunction_depth", conjunction_depth},
            {"warn_fraction", warn_fraction}};
}

std::string AuditConfig::hash() const { return fnv1a_hex(canonical_dump(to_json(), 17)); }

const char* to_string(TestStatus status) {
    switch (status) {
        case TestStatus::pass: return "pass";
        case TestStatus::warn: return "warn";
        case TestStatus::fail: return "fail";
        case TestStatus::skipped: return "skipped";
    }
    return "?";
}

const char* to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::pass: return "pass";
        case Verdict::warn: return "warn";
        case Verdict::fail: return "fail";
    }
    return "?";
}

Verdict verdict_of(const std::vector<TestStatus>& statuses) {
    bool any_warn = false;
    for (TestStatus s : statuses) {
        if (s == TestStatus::fail) return Verdict::fail;
        if (s == TestStatus::warn) any_warn = true;
    }
    return any_warn ? Verdict::warn : Verdict::pass;
}

int verdict_exit_code(Verdict verdict) {
    switch (verdict) {
        case Verdict::pass: return 0;
        case Verdict::fail: return 2;
        case Verdict::warn: return 3;
    }
    return 1;
}

nlohmann::json AuditTest::to_json() const {
    return {{"id", id},
            {"name", name},
            {"metric", metric.to_json()},
            {"threshold", threshold ? nlohmann::json(*threshold) : nlohmann::json(nullptr)},
            {"status", to_string(status)}};
}

nlohmann::json AuditReport::to_json() const {
    nlohmann::json tests_doc = nlohmann::json::array();
    for (const auto& t : tests) tests_doc.push_back(t.to_json());
    return {{"metadata",
             {{"dataset_fingerprint", dataset_fingerprint},
              {"config_hash", config_hash},
              {"tool_version", tool_version},
              {"timestamp", timestamp},
              {"seed", seed}}},
            {"tests", tests_doc},
            {"verdict", to_string(verdict)}};
}

AuditReport AuditReport::from_json(const nlohmann::json& doc) {
    AuditReport report;
    try {
        std::string verdict = doc.at("verdict").get<std::string>();
        report.verdict = verdict == "pass"   ? Verdict::pass
                         : verdict == "warn" ? Verdict::warn
                                             : Verdict::fail;
        const auto& meta = doc.at("metadata");
        report.dataset_fingerprint = meta.at("dataset_fingerprint").get<std::string>();
        report.config_hash = meta.at("config_hash").get<std::string>();
        report.tool_version = meta.at("tool_version").get<std::string>();
        report.timestamp = meta.value("timestamp", "");
        report.seed = meta.at("seed").get<std::uint64_t>();
        for (const auto& t : doc.at("tests")) {
            AuditTest test;
            test.id = t.at("id").get<std::string>();
            test.name = t.at("name").get<std::string>();
            if (!t.at("threshold").is_null()) test.threshold = t.at("threshold").get<double>();
            std::string status = t.at("status").get<std::string>();
            test.status = status == "pass"   ? TestStatus::pass
                          : status == "warn" ? TestStatus::warn
                          : status == "fail" ? TestStatus::fail
                                             : TestStatus::skipped;
            const auto& metric = t.at("metric");
            test.metric.name = metric.at("name").get<std::string>();
            if (!metric.at("value").is_null()) test.metric.value = metric.at("value").get<double>();
            for (auto it = metric.at("components").begin(); it != metric.at("components").end();
                 ++it) {
                test.metric.components[it.key()] = it.value().get<double>();
            }
            test.metric.group_size_protected = metric.at("group_sizes")[0].get<std::size_t>();
            test.metric.group_size_favored = metric.at("group_sizes")[1].get<std::size_t>();
            for (const auto& c : metric.at("caveats")) {
                test.metric.caveats.push_back(c.get<std::string>());
            }
            report.tests.push_back(std::move(test));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidReport, std::string("malformed report document: ") + e.what());
    }
    return report;
}

AuditReport AuditReport::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::IoError, "cannot open report: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidReport, std::string("report is not valid JSON: ") + e.what());
    }
    return from_json(doc);
}

// ---------------------------------------------------------------------------
// Test assembly

namespace {

/// Max-type gate: fail above the threshold, warn inside the band.
TestStatus status_max(double magnitude, double threshold, double warn_fraction) {
    if (magnitude > threshold) return TestStatus::fail;
    if (magnitude > threshold * warn_fraction) return TestStatus::warn;
    return TestStatus::pass;
}

/// Min-type gate (supports): fail below the threshold, warn just above it.
TestStatus status_min(double value, double threshold, double warn_fraction) {
    if (value < threshold) return TestStatus::fail;
    if (value < threshold / warn_fraction) return TestStatus::warn;
    return TestStatus::pass;
}

class ReportBuilder {
  public:
    explicit ReportBuilder(const AuditConfig& cfg) : cfg_(cfg) {}

    /// Runs `compute` and gates |value| against a max-type threshold.
    /// Omitted thresholds and metric errors both yield `skipped`.
    void add_max(const std::string& id, const std::string& name,
                 const std::optional<double>& threshold,
                 const std::function<MetricResult()>& compute) {
        add(id, name, threshold, compute,
            [&](double v) { return status_max(std::abs(v), *threshold, cfg_.warn_fraction); });
    }

    void add_min(const std::string& id, const std::string& name,
                 const std::optional<double>& threshold,
                 const std::function<MetricResult()>& compute) {
        add(id, name, threshold, compute,
            [&](double v) { return status_min(v, *threshold, cfg_.warn_fraction); });
    }

    void push(AuditTest test) { tests_.push_back(std::move(test)); }

    std::vector<AuditTest> take() { return std::move(tests_); }

  private:
    void add(const std::string& id, const std::string& name,
             const std::optional<double>& threshold, const std::function<MetricResult()>& compute,
             const std::function<TestStatus(double)>& gate) {
        AuditTest test;
        test.id = id;
        test.name = name;
        test.threshold = threshold;
        if (!threshold) {
            test.metric.name = id;
            test.metric.caveats.push_back("threshold not configured; test disabled");
            test.status = TestStatus::skipped;
            tests_.push_back(std::move(test));
            return;
        }
        try {
            test.metric = compute();
            if (test.metric.value) {
                test.status = gate(*test.metric.value);
            } else {
                test.status = TestStatus::skipped;  // guard fired; reason already in caveats
            }
        } catch (const Error& e) {
            test.metric.name = id;
            test.metric.caveats.push_back(std::string("error: ") + e.what());
            test.status = TestStatus::skipped;
        }
        tests_.push_back(std::move(test));
    }

    const AuditConfig& cfg_;
    std::vector<AuditTest> tests_;
};

AuditReport finish(std::vector<AuditTest> tests, const Dataset& d, const AuditConfig& cfg,
                   std::uint64_t seed, const std::string& timestamp) {
    AuditReport report;
    report.tests = std::move(tests);
    std::vector<TestStatus> statuses;
    statuses.reserve(report.tests.size());
    for (const auto& t : report.tests) statuses.push_back(t.status);
    report.verdict = verdict_of(statuses);
    report.dataset_fingerprint = d.fingerprint();
    report.config_hash = cfg.hash();
    report.tool_version = kToolVersion;
    report.timestamp = timestamp;
    report.seed = seed;
    return report;
}

void add_difference_block(ReportBuilder& builder, const Dataset& d, const AuditConfig& cfg,
                          const Outcome& outcome, const std::string& suffix,
                          const std::string& label) {
    builder.add_max("D1.md" + suffix, "mean difference on " + label, cfg.max_abs_data_md,
                    [&] { return mean_difference(d, outcome); });
    builder.add_max("D1.nmd" + suffix, "normalized mean difference on " + label,
                    cfg.max_abs_normalized_md, [&] { return normalized_mean_difference(d, outcome); });
    builder.add_max("D1.cmd" + suffix, "conditional mean difference on " + label,
                    cfg.max_abs_unexplained, [&] {
                        require(cfg.stratification.has_value(), ErrorCode::InvalidConfig,
                                "no stratification configured");
                        return conditional_mean_difference(d, outcome, *cfg.stratification);
                    });
    builder.add_max("D1.unexplained" + suffix, "unexplained difference on " + label,
                    cfg.max_abs_unexplained, [&] {
                        require(cfg.stratification.has_value(), ErrorCode::InvalidConfig,
                                "no stratification configured");
                        return unexplained_difference(d, outcome, *cfg.stratification);
                    });
}

}  // namespace

AuditReport audit_data(const Dataset& d, const AuditConfig& cfg, std::uint64_t seed,
                       const std::string& timestamp) {
    cfg.validate();
    ReportBuilder builder(cfg);

    add_difference_block(builder, d, cfg, Outcome::label(), "", "labels");
    for (const auto& column : cfg.sub_targets) {
        std::string suffix = "[" + column + "]";
        try {
            Outcome outcome = Outcome::explicit_values(d.binary_column(column));
            add_difference_block(builder, d, cfg, outcome, suffix, "sub-target " + column);
        } catch (const Error& e) {
            // Column unusable: one skipped entry stands in for the whole block.
            AuditTest test;
            test.id = "D1.md" + suffix;
            test.name = "mean difference on sub-target " + column;
            test.metric.name = test.id;
            test.metric.caveats.push_back(std::string("error: ") + e.what());
            test.status = TestStatus::skipped;
            builder.push(std::move(test));
        }
    }

    for (const auto& f : d.schema().feature_columns) {
        builder.add_max("D2.corr[" + f.name + "]",
                        "association of feature " + f.name + " with the protected attribute",
                        cfg.max_feature_correlation, [&, name = f.name] {
                            for (auto& r : feature_protected_correlation(d)) {
                                if (r.name == "feature_protected_correlation[" + name + "]") {
                                    return r;
                                }
                            }
                            fail(ErrorCode::UnknownColumn, "no correlation result for " + name);
                        });
    }

    builder.add_min("D3.group_support", "protected group support", cfg.min_group_support,
                    [&] { return support_report(d, 0); });
    builder.add_min("D3.conjunction_support", "conjunction support", cfg.min_conjunction_support,
                    [&] {
                        require(cfg.conjunction_depth >= 1, ErrorCode::InvalidConfig,
                                "conjunction_depth is 0; no conjunction cells to check");
                        MetricResult base = support_report(d, cfg.conjunction_depth);
                        MetricResult r;
                        r.name = "conjunction_support";
                        r.group_size_protected = base.group_size_protected;
                        r.group_size_favored = base.group_size_favored;
                        double min_share = 1.0;
                        bool any = false;
                        for (const auto& [key, value] : base.components) {
                            if (key.rfind("share[", 0) == 0) {
                                r.components[key] = value;
                                min_share = std::min(min_share, value);
                                any = true;
                            }
                        }
                        require(any, ErrorCode::InvalidConfig, "no conjunction cells present");
                        r.value = min_share;
                        return r;
                    });

    return finish(builder.take(), d, cfg, seed, timestamp);
}

AuditReport audit_model(const LogisticModel& m, const Dataset& holdout, double threshold,
                        const AuditConfig& cfg, std::uint64_t seed, const std::string& timestamp) {
    cfg.validate();
    require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::InvalidParam,
            "threshold must lie in [0, 1]");
    ReportBuilder builder(cfg);

    builder.add_max("M1.flip", "counterfactual flip audit (decision level)", cfg.max_abs_causal_md,
                    [&] {
                        FlipAuditResult flip = flip_audit(probability_fn(m), holdout, threshold);
                        MetricResult r;
                        r.name = "flip_audit";
                        r.group_size_protected = holdout.group_count(1);
                        r.group_size_favored = holdout.group_count(0);
                        r.value = flip.causal_mean_difference_decisions;
                        r.components["decision_level"] = flip.causal_mean_difference_decisions;
                        r.components["probability_level"] =
                            flip.causal_mean_difference_probabilities;
                        r.components["rows_affected"] = static_cast<double>(flip.rows_affected);
                        return r;
                    });

    std::optional<std::vector<double>> decisions;
    auto decision_outcome = [&]() -> Outcome {
        if (!decisions) {
            std::vector<int> a = m.decide_all(holdout, threshold);
            decisions.emplace(a.begin(), a.end());
        }
        return Outcome::explicit_values(*decisions);
    };

    builder.add_max("M2.md", "decision-level mean difference", cfg.max_abs_decision_md,
                    [&] { return mean_difference(holdout, decision_outcome()); });
    builder.add_max("M2.nmd", "decision-level normalized mean difference", cfg.max_abs_decision_md,
                    [&] { return normalized_mean_difference(holdout, decision_outcome()); });

    std::optional<Evaluation> eval;
    auto evaluation = [&]() -> const Evaluation& {
        if (!eval) eval = evaluate(m, holdout, threshold);
        return *eval;
    };
    builder.add_max("M3.tpr_gap", "true-positive-rate gap", cfg.max_group_tpr_gap, [&] {
        const Evaluation& ev = evaluation();
        require(ev.protected_group.tpr.has_value() && ev.favored_group.tpr.has_value(),
                ErrorCode::MissingPositives, "a group has no positives; TPR gap undefined");
        MetricResult r;
        r.name = "tpr_gap";
        r.group_size_protected = ev.protected_group.rows;
        r.group_size_favored = ev.favored_group.rows;
        r.components["tpr_protected"] = *ev.protected_group.tpr;
        r.components["tpr_favored"] = *ev.favored_group.tpr;
        r.value = *ev.protected_group.tpr - *ev.favored_group.tpr;
        return r;
    });
    builder.add_max("M3.fpr_gap", "false-positive-rate gap", cfg.max_group_fpr_gap, [&] {
        const Evaluation& ev = evaluation();
        require(ev.protected_group.fpr.has_value() && ev.favored_group.fpr.has_value(),
                ErrorCode::EmptyGroup, "a group has no negatives; FPR gap undefined");
        MetricResult r;
        r.name = "fpr_gap";
        r.group_size_protected = ev.protected_group.rows;
        r.group_size_favored = ev.favored_group.rows;
        r.components["fpr_protected"] = *ev.protected_group.fpr;
        r.components["fpr_favored"] = *ev.favored_group.fpr;
        r.value = *ev.protected_group.fpr - *ev.favored_group.fpr;
        return r;
    });

    builder.add_max("M4.knn", "situation testing on decisions", cfg.knn.max_flagged, [&] {
        return knn_situation_test(holdout, decision_outcome(), cfg.knn.k, cfg.knn.t);
    });

    return finish(builder.take(), holdout, cfg, seed, timestamp);
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_report(const AuditReport& report, const std::string& format) {
    require(!report.tests.empty(), ErrorCode::InvalidReport, "report contains no tests");
    if (format == "json") {
        return canonical_dump(report.to_json(), 12, 2);
    }
    if (format == "markdown" || format == "md") {
        std::string out;
        std::string banner = report.verdict == Verdict::pass   ? "PASS"
                             : report.verdict == Verdict::warn ? "WARN"
                                                               : "FAIL";
        out += "# Audit report: " + banner + "\n\n";
        out += "- dataset fingerprint: `" + report.dataset_fingerprint + "`\n";
        out += "- config hash: `" + report.config_hash + "`\n";
        out += "- tool version: " + report.tool_version + "\n";
        out += "- seed: " + std::to_string(report.seed) + "\n";
        if (!report.timestamp.empty()) out += "- timestamp: " + report.timestamp + "\n";
        out += "\n| id | name | value | threshold | status |\n";
        out += "|---|---|---|---|---|\n";
        char buf[64];
        for (const auto& t : report.tests) {
            std::string value = "-";
            if (t.metric.value) {
                std::snprintf(buf, sizeof buf, "%.6g", *t.metric.value);
                value = buf;
            }
            std::string threshold = "-";
            if (t.threshold) {
                std::snprintf(buf, sizeof buf, "%.6g", *t.threshold);
                threshold = buf;
            }
            out += "| " + t.id + " | " + t.name + " | " + value + " | " + threshold + " | " +
                   to_string(t.status) + " |\n";
        }
        std::string caveats;
        for (const auto& t : report.tests) {
            for (const auto& c : t.metric.caveats) {
                caveats += "- " + t.id + ": " + c + "\n";
            }
        }
        if (!caveats.empty()) out += "\n## Caveats\n\n" + caveats;
        out += "\nVerdict: **" + std::string(banner) + "**\n";
        return out;
    }
    fail(ErrorCode::UnknownFormat, "unknown report format '" + format + "'");
}

}  // namespace fairaudit
