#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/dataset.hpp"

namespace fairaudit {

/// Synthetic generators, one per commonly cited cause of classifier
/// discrimination. Each produces a dataset plus a ground-truth sidecar with
/// the planted parameters and the latent merit draws, so tests can assert
/// recovery instead of re-deriving truth. Generative structures are
/// documented in docs/scenarios.md.
enum class ScenarioKind {
    clean_independent,
    direct_discrimination,
    redlining,
    over_observation,
    low_support,
    proxy_target,
    censored_feedback,
};

ScenarioKind scenario_kind_from_string(const std::string& name);
std::string to_string(ScenarioKind kind);

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::clean_independent;
    std::size_t n = 1000;
    std::uint64_t seed = 0;

    // Per-kind parameters; unset fields take the kind's documented default.
    std::optional<double> gap;                     // direct, proxy_target, censored
    std::optional<double> proxy_strength;          // redlining
    std::optional<double> protected_share;         // all kinds (low_support: 0.02)
    std::optional<double> observation_multiplier;  // over_observation
    std::optional<double> mix_ratio;               // proxy_target
    std::optional<double> hire_threshold;          // censored_feedback

    void validate() const;
};

struct GeneratedScenario {
    Dataset dataset;
    nlohmann::json sidecar;
};

GeneratedScenario generate(const ScenarioSpec& spec);

// ---------------------------------------------------------------------------
// Feedback-loop simulator

/// How nuisance incidents make it into the record. Violent incidents are
/// always recorded; nuisance incidents under `only_when_patrolled` are each
/// recorded with probability (zone patrol share)^2 -- presence is needed
/// both at occurrence and at filing. The convexity matters: with a recording
/// probability linear in patrol share, proportional reallocation preserves
/// the allocation split in expectation and no runaway loop can form (the
/// derivation is in docs/scenarios.md).
enum class ObservationRule { only_when_patrolled, always };

struct FeedbackSimConfig {
    int zones = 2;
    std::vector<double> latent_violent_rates;   // per zone, incidents per round
    std::vector<double> latent_nuisance_rates;  // per zone, incidents per round
    double patrol_budget = 1.0;
    int rounds = 50;
    ObservationRule observation_rule = ObservationRule::only_when_patrolled;
    double floor = 0.0;  // minimum allocation per zone (delta)
    std::vector<double> initial_allocation;
    std::uint64_t seed = 0;

    void validate() const;
    static FeedbackSimConfig from_json(const nlohmann::json& doc);
    static FeedbackSimConfig load(const std::string& path);
    nlohmann::json to_json() const;
};

struct SimRound {
    int round = 0;                        // 1-based
    std::vector<double> allocation;       // patrols assigned this round
    std::vector<double> shares;           // allocation / budget
    std::vector<std::uint64_t> recorded;  // recorded incidents per zone
    double disparity = 0.0;               // max share - min share
};

struct SimSeries {
    FeedbackSimConfig config;
    std::vector<SimRound> rounds;

    nlohmann::json to_json() const;
    csv::Table to_csv() const;
};

/// Each round: draw incidents from the latent rates, record them per the
/// observation rule, then reallocate patrols proportionally to additively
/// smoothed cumulative recorded counts (with the per-zone floor).
SimSeries run_feedback_sim(const FeedbackSimConfig& cfg);

}  // namespace fairaudit
