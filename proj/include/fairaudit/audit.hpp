#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/counterfactual.hpp"
#include "fairaudit/dataset.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/model.hpp"

namespace fairaudit {

/// Thresholds are configuration, never code: an omitted threshold disables
/// its test (status `skipped`) rather than falling back to a default, since
/// the acceptable limits are a legal/ethical decision, not a technical one.
/// `warn_fraction` in (0, 1] carves a warn band out of each threshold:
/// max-type tests warn above threshold*warn_fraction, min-type tests warn
/// below threshold/warn_fraction. At 1.0 the band is empty.
struct KnnSettings {
    int k = 10;
    double t = 0.3;
    std::optional<double> max_flagged;
};

struct AuditConfig {
    std::optional<double> max_abs_data_md;
    std::optional<double> max_abs_normalized_md;
    std::optional<double> max_abs_unexplained;
    std::optional<double> max_feature_correlation;
    std::optional<double> min_group_support;
    std::optional<double> min_conjunction_support;
    std::optional<double> max_abs_causal_md;
    std::optional<double> max_abs_decision_md;
    std::optional<double> max_group_tpr_gap;
    std::optional<double> max_group_fpr_gap;
    KnnSettings knn;

    std::optional<Stratification> stratification;
    std::vector<std::string> sub_targets;  // separately measurable event columns
    int conjunction_depth = 0;
    double warn_fraction = 1.0;

    void validate() const;
    static AuditConfig from_json(const nlohmann::json& doc);
    static AuditConfig load(const std::string& path);
    nlohmann::json to_json() const;
    std::string hash() const;
};

enum class TestStatus { pass, warn, fail, skipped };
enum class Verdict { pass, warn, fail };

const char* to_string(TestStatus status);
const char* to_string(Verdict verdict);

struct AuditTest {
    std::string id;
    std::string name;
    MetricResult metric;
    std::optional<double> threshold;
    TestStatus status = TestStatus::skipped;

    nlohmann::json to_json() const;
};

/// fail if any test failed; otherwise warn if any warned; otherwise pass.
/// Skipped tests never change the verdict (they are visible in the report).
Verdict verdict_of(const std::vector<TestStatus>& statuses);

/// CLI contract: pass 0, fail 2, warn 3 (operational errors are 1).
int verdict_exit_code(Verdict verdict);

struct AuditReport {
    std::vector<AuditTest> tests;
    Verdict verdict = Verdict::pass;
    std::string dataset_fingerprint;
    std::string config_hash;
    std::string tool_version;
    std::string timestamp;  // empty unless the caller supplies one (replayability)
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static AuditReport from_json(const nlohmann::json& doc);
    static AuditReport load(const std::string& path);
};

inline constexpr const char* kToolVersion = "0.1.0";

/// Data-stage audit: D1 difference metrics on Y and each configured
/// sub-target, D2 feature/protected association, D3 support. Metric failures
/// surface as skipped tests with the error recorded; a report is always
/// produced.
AuditReport audit_data(const Dataset& d, const AuditConfig& cfg, std::uint64_t seed = 0,
                       const std::string& timestamp = "");

/// Pre-deployment model audit on a holdout: M1 flip audit, M2 decision-level
/// differences, M3 per-group TPR/FPR gaps, M4 situation testing on
/// decisions.
AuditReport audit_model(const LogisticModel& m, const Dataset& holdout, double threshold,
                        const AuditConfig& cfg, std::uint64_t seed = 0,
                        const std::string& timestamp = "");

/// "json" renders canonically (sorted keys, 12 significant digits) so replay
/// is byte-identical; "markdown"/"md" renders a human-readable table.
std::string render_report(const AuditReport& report, const std::string& format);

}  // namespace fairaudit
