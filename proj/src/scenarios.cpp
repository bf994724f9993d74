#include "fairaudit/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "fairaudit/model.hpp"
#include "fairaudit/rng.hpp"

namespace fairaudit {

namespace {

double clamp01(double p) { return std::min(1.0, std::max(0.0, p)); }

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

constexpr const char* kCatLevels[3] = {"u", "v", "w"};

}  // namespace

ScenarioKind scenario_kind_from_string(const std::string& name) {
    if (name == "clean_independent") return ScenarioKind::clean_independent;
    if (name == "direct_discrimination") return ScenarioKind::direct_discrimination;
    if (name == "redlining") return ScenarioKind::redlining;
    if (name == "over_observation") return ScenarioKind::over_observation;
    if (name == "low_support") return ScenarioKind::low_support;
    if (name == "proxy_target") return ScenarioKind::proxy_target;
    if (name == "censored_feedback") return ScenarioKind::censored_feedback;
    fail(ErrorCode::InvalidParam, "unknown scenario kind '" + name + "'");
}

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::clean_independent: return "clean_independent";
        case ScenarioKind::direct_discrimination: return "direct_discrimination";
        case ScenarioKind::redlining: return "redlining";
        case ScenarioKind::over_observation: return "over_observation";
        case ScenarioKind::low_support: return "low_support";
        case ScenarioKind::proxy_target: return "proxy_target";
        case ScenarioKind::censored_feedback: return "censored_feedback";
    }
    fail(ErrorCode::InvalidParam, "unreachable scenario kind");
}

void ScenarioSpec::validate() const {
    require(n >= 4, ErrorCode::InvalidParam, "scenario needs n >= 4");
    auto in_unit = [](const std::optional<double>& v, const char* what, bool open) {
        if (!v) return;
        bool ok = open ? (*v > 0.0 && *v < 1.0) : (*v >= 0.0 && *v <= 1.0);
        require(ok, ErrorCode::InvalidParam, std::string(what) + " out of range");
    };
    in_unit(gap, "gap", false);
    in_unit(proxy_strength, "proxy_strength", false);
    in_unit(protected_share, "protected_share", true);
    in_unit(mix_ratio, "mix_ratio", false);
    in_unit(hire_threshold, "hire_threshold", true);
    if (observation_multiplier) {
        require(*observation_multiplier >= 1.0, ErrorCode::InvalidParam,
                "observation_multiplier must be >= 1");
    }
}

namespace {

struct ScenarioDraw {
    csv::Table table;
    std::vector<double> merit;
    bool ok = true;
};

Schema scenario_schema(ScenarioKind kind) {
    Schema schema;
    schema.protected_column = "group";
    schema.protected_value = "a";
    schema.label_column = "label";
    schema.positive_label = "1";
    schema.feature_columns = {{"x1", FeatureKind::numeric}, {"x2", FeatureKind::numeric}};
    switch (kind) {
        case ScenarioKind::clean_independent:
        case ScenarioKind::direct_discrimination:
        case ScenarioKind::low_support:
        case ScenarioKind::over_observation:
            schema.feature_columns.push_back({"cat", FeatureKind::categorical});
            break;
        case ScenarioKind::redlining:
            schema.feature_columns.push_back({"zone", FeatureKind::categorical});
            break;
        case ScenarioKind::proxy_target:
        case ScenarioKind::censored_feedback:
            break;
    }
    schema.validate();
    return schema;
}

ScenarioDraw draw_rows(const ScenarioSpec& spec, const Schema& schema, Rng& rng) {
    ScenarioDraw out;
    out.table.header.push_back("group");
    out.table.header.push_back("label");
    for (const auto& f : schema.feature_columns) out.table.header.push_back(f.name);
    if (spec.kind == ScenarioKind::proxy_target) {
        out.table.header.push_back("primary_event");
        out.table.header.push_back("nuisance_event");
    }

    const double share = spec.protected_share.value_or(
        spec.kind == ScenarioKind::low_support ? 0.02 : 0.5);
    const double gap = spec.gap.value_or(spec.kind == ScenarioKind::censored_feedback ? 0.2 : 0.3);
    const double strength = spec.proxy_strength.value_or(0.9);
    const double multiplier = spec.observation_multiplier.value_or(2.5);
    const double mix = spec.mix_ratio.value_or(0.5);
    const double hire_threshold = spec.hire_threshold.value_or(0.5);
    if (spec.kind == ScenarioKind::censored_feedback) {
        require(hire_threshold + gap < 1.0, ErrorCode::InvalidParam,
                "hire_threshold + gap must stay below 1 or no protected row can pass screening");
    }

    std::size_t generated = 0;
    std::size_t attempts = 0;
    const std::size_t max_attempts = std::max<std::size_t>(10000, 400 * spec.n);
    while (generated < spec.n) {
        require(attempts++ < max_attempts, ErrorCode::InvalidParam,
                "screening acceptance too low; relax hire_threshold or gap");
        int s = rng.bernoulli(share) ? 1 : 0;
        double u = rng.normal();

        if (spec.kind == ScenarioKind::censored_feedback) {
            double screen = sigmoid(u) - gap * s;  // biased screening score
            if (screen < hire_threshold) continue; // outcome never observed
        }

        std::vector<std::string> row;
        row.push_back(s == 1 ? "a" : "b");

        int y = 0;
        std::string extra_primary, extra_nuisance;
        double x1 = 0.0, x2 = 0.0;
        std::string cat;
        switch (spec.kind) {
            case ScenarioKind::clean_independent:
            case ScenarioKind::low_support: {
                x1 = u + 0.6 * rng.normal();
                x2 = rng.normal();
                cat = kCatLevels[rng.below(3)];
                y = rng.bernoulli(sigmoid(1.2 * u - 0.1)) ? 1 : 0;
                break;
            }
            case ScenarioKind::direct_discrimination: {
                x1 = u + 0.6 * rng.normal();
                x2 = rng.normal();
                cat = kCatLevels[rng.below(3)];
                double base = 0.35 + 0.3 * sigmoid(2.0 * u);
                y = rng.bernoulli(clamp01(base - gap * s)) ? 1 : 0;
                break;
            }
            case ScenarioKind::redlining: {
                double p_south = s == 1 ? (1.0 + strength) / 2.0 : (1.0 - strength) / 2.0;
                bool south = rng.bernoulli(p_south);
                x1 = u + 0.6 * rng.normal();
                x2 = rng.normal();
                cat = south ? "south" : "north";
                double p = 0.3 + 0.35 * sigmoid(2.0 * u) + (south ? -0.18 : 0.12);
                y = rng.bernoulli(clamp01(p)) ? 1 : 0;
                break;
            }
            case ScenarioKind::over_observation: {
                x1 = u + 0.6 * rng.normal();
                x2 = rng.normal();
                cat = kCatLevels[rng.below(3)];
                bool transgression = rng.bernoulli(sigmoid(-u - 0.5));
                double record_prob = std::min(1.0, 0.3 * (s == 1 ? multiplier : 1.0));
                bool recorded = transgression && rng.bernoulli(record_prob);
                y = recorded ? 0 : 1;  // favorable outcome = no recorded transgression
                break;
            }
            case ScenarioKind::proxy_target: {
                x1 = u + 0.6 * rng.normal();
                x2 = rng.normal();
                int primary = rng.bernoulli(0.35 + 0.3 * sigmoid(2.0 * u)) ? 1 : 0;
                int nuisance = rng.bernoulli(clamp01(0.6 - gap * s)) ? 1 : 0;
                y = rng.bernoulli(mix) ? nuisance : primary;
                extra_primary = std::to_string(primary);
                extra_nuisance = std::to_string(nuisance);
                break;
            }
            case ScenarioKind::censored_feedback: {
                x1 = u + 0.4 * rng.normal();
                x2 = rng.normal();
                y = rng.bernoulli(sigmoid(1.5 * u)) ? 1 : 0;  // productivity among the hired
                break;
            }
        }

        row.push_back(y == 1 ? "1" : "0");
        row.push_back(fmt(x1));
        row.push_back(fmt(x2));
        if (!cat.empty()) row.push_back(cat);
        if (spec.kind == ScenarioKind::proxy_target) {
            row.push_back(extra_primary);
            row.push_back(extra_nuisance);
        }
        out.table.rows.push_back(std::move(row));
        out.merit.push_back(u);
        ++generated;
    }

    // Both groups must be represented; tiny draws can miss one.
    bool has1 = false, has0 = false;
    for (const auto& row : out.table.rows) (row[0] == "a" ? has1 : has0) = true;
    out.ok = has1 && has0;
    return out;
}

}  // namespace

GeneratedScenario generate(const ScenarioSpec& spec) {
    spec.validate();
    Schema schema = scenario_schema(spec.kind);

    // Retry with a derived seed on the (tiny-n) chance a group came up empty,
    // keeping generation a pure function of the ScenarioSpec.
    ScenarioDraw draw;
    std::uint64_t attempt = 0;
    do {
        require(attempt < 64, ErrorCode::InvalidParam,
                "could not realize both protected groups; raise n or protected_share");
        Rng rng(spec.seed + attempt * 0x9e3779b97f4a7c15ull);
        draw = draw_rows(spec, schema, rng);
        ++attempt;
    } while (!draw.ok);

    GeneratedScenario out{Dataset::from_table(schema, std::move(draw.table)), {}};

    nlohmann::json planted{{"protected_share", spec.protected_share.value_or(
                                 spec.kind == ScenarioKind::low_support ? 0.02 : 0.5)}};
    switch (spec.kind) {
        case ScenarioKind::direct_discrimination:
            planted["label_gap"] = spec.gap.value_or(0.3);
            break;
        case ScenarioKind::redlining:
            planted["proxy_strength"] = spec.proxy_strength.value_or(0.9);
            planted["zone_effect"] = -0.30;
            break;
        case ScenarioKind::over_observation:
            planted["observation_multiplier"] = spec.observation_multiplier.value_or(2.5);
            planted["base_record_prob"] = 0.3;
            break;
        case ScenarioKind::proxy_target:
            planted["mix_ratio"] = spec.mix_ratio.value_or(0.5);
            planted["nuisance_gap"] = spec.gap.value_or(0.3);
            break;
        case ScenarioKind::censored_feedback:
            planted["screening_gap"] = spec.gap.value_or(0.2);
            planted["hire_threshold"] = spec.hire_threshold.value_or(0.5);
            break;
        default:
            break;
    }
    out.sidecar = {{"kind", to_string(spec.kind)},
                   {"n", spec.n},
                   {"seed", spec.seed},
                   {"planted", planted},
                   {"schema", schema.to_json()},
                   {"latent", {{"merit", draw.merit}}}};
    return out;
}

// ---------------------------------------------------------------------------
// Feedback simulator

void FeedbackSimConfig::validate() const {
    require(zones >= 2, ErrorCode::InvalidConfig, "need at least 2 zones");
    auto z = static_cast<std::size_t>(zones);
    require(latent_violent_rates.size() == z && latent_nuisance_rates.size() == z,
            ErrorCode::InvalidConfig, "latent rate vectors must have one entry per zone");
    for (double r : latent_violent_rates) {
        require(r >= 0.0, ErrorCode::InvalidConfig, "rates must be >= 0");
    }
    for (double r : latent_nuisance_rates) {
        require(r >= 0.0, ErrorCode::InvalidConfig, "rates must be >= 0");
    }
    require(patrol_budget > 0.0, ErrorCode::InvalidConfig, "patrol budget must be > 0");
    require(rounds >= 1, ErrorCode::InvalidConfig, "need at least 1 round");
    require(floor >= 0.0, ErrorCode::InvalidConfig, "floor must be >= 0");
    require(floor * zones <= patrol_budget + 1e-12, ErrorCode::InvalidConfig,
            "floor * zones exceeds the patrol budget");
    require(initial_allocation.size() == z, ErrorCode::InvalidConfig,
            "initial allocation must have one entry per zone");
    double sum = 0.0;
    for (double a : initial_allocation) {
        require(a >= 0.0, ErrorCode::InvalidConfig, "allocations must be >= 0");
        sum += a;
    }
    require(std::abs(sum - patrol_budget) <= 1e-9 * std::max(1.0, patrol_budget),
            ErrorCode::InvalidConfig, "initial allocation must sum to the patrol budget");
}

FeedbackSimConfig FeedbackSimConfig::from_json(const nlohmann::json& doc) {
    FeedbackSimConfig cfg;
    try {
        cfg.zones = doc.at("zones").get<int>();
        cfg.latent_violent_rates = doc.at("latent_violent_rates").get<std::vector<double>>();
        cfg.latent_nuisance_rates = doc.at("latent_nuisance_rates").get<std::vector<double>>();
        cfg.patrol_budget = doc.value("patrol_budget", 1.0);
        cfg.rounds = doc.at("rounds").get<int>();
        std::string rule = doc.value("observation_rule", "only_when_patrolled");
        if (rule == "only_when_patrolled") {
            cfg.observation_rule = ObservationRule::only_when_patrolled;
        } else if (rule == "always") {
            cfg.observation_rule = ObservationRule::always;
        } else {
            fail(ErrorCode::InvalidConfig, "unknown observation rule '" + rule + "'");
        }
        cfg.floor = doc.value("floor", 0.0);
        cfg.initial_allocation = doc.at("initial_allocation").get<std::vector<double>>();
        cfg.seed = doc.value("seed", 0);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("malformed simulator config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

FeedbackSimConfig FeedbackSimConfig::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::IoError, "cannot open simulator config: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, std::string("simulator config is not valid JSON: ") + e.what());
    }
    return from_json(doc);
}

nlohmann::json FeedbackSimConfig::to_json() const {
    return {{"zones", zones},
            {"latent_violent_rates", latent_violent_rates},
            {"latent_nuisance_rates", latent_nuisance_rates},
            {"patrol_budget", patrol_budget},
            {"rounds", rounds},
            {"observation_rule", observation_rule == ObservationRule::only_when_patrolled
                                     ? "only_when_patrolled"
                                     : "always"},
            {"floor", floor},
            {"initial_allocation", initial_allocation},
            {"seed", seed}};
}

SimSeries run_feedback_sim(const FeedbackSimConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    auto z = static_cast<std::size_t>(cfg.zones);

    SimSeries series;
    series.config = cfg;

    std::vector<double> allocation = cfg.initial_allocation;
    std::vector<double> cumulative(z, 0.0);

    for (int round = 1; round <= cfg.rounds; ++round) {
        SimRound entry;
        entry.round = round;
        entry.allocation = allocation;
        entry.shares.resize(z);
        entry.recorded.resize(z);
        for (std::size_t j = 0; j < z; ++j) entry.shares[j] = allocation[j] / cfg.patrol_budget;

        for (std::size_t j = 0; j < z; ++j) {
            std::uint64_t violent = rng.poisson(cfg.latent_violent_rates[j]);
            std::uint64_t nuisance = rng.poisson(cfg.latent_nuisance_rates[j]);
            std::uint64_t recorded = violent;  // violent incidents are always reported
            if (cfg.observation_rule == ObservationRule::always) {
                recorded += nuisance;
            } else {
                double p_obs = entry.shares[j] * entry.shares[j];
                for (std::uint64_t c = 0; c < nuisance; ++c) {
                    if (rng.bernoulli(p_obs)) ++recorded;
                }
            }
            entry.recorded[j] = recorded;
            cumulative[j] += static_cast<double>(recorded);
        }

        auto [lo, hi] = std::minmax_element(entry.shares.begin(), entry.shares.end());
        entry.disparity = *hi - *lo;
        series.rounds.push_back(std::move(entry));

        // Next round: allocation proportional to smoothed cumulative counts,
        // with the per-zone floor.
        double pred_total = 0.0;
        for (std::size_t j = 0; j < z; ++j) pred_total += cumulative[j] + 1.0;
        double discretionary = cfg.patrol_budget - cfg.floor * cfg.zones;
        for (std::size_t j = 0; j < z; ++j) {
            allocation[j] = cfg.floor + discretionary * (cumulative[j] + 1.0) / pred_total;
        }
    }
    return series;
}

nlohmann::json SimSeries::to_json() const {
    nlohmann::json rounds_doc = nlohmann::json::array();
    for (const auto& r : rounds) {
        rounds_doc.push_back({{"round", r.round},
                              {"allocation", r.allocation},
                              {"shares", r.shares},
                              {"recorded", r.recorded},
                              {"disparity", r.disparity}});
    }
    return {{"config", config.to_json()}, {"rounds", rounds_doc}};
}

csv::Table SimSeries::to_csv() const {
    csv::Table table;
    table.header = {"round", "zone", "allocation", "share", "recorded"};
    for (const auto& r : rounds) {
        for (std::size_t j = 0; j < r.allocation.size(); ++j) {
            table.rows.push_back({std::to_string(r.round), std::to_string(j), fmt(r.allocation[j]),
                                  fmt(r.shares[j]), std::to_string(r.recorded[j])});
        }
    }
    return table;
}

}  // namespace fairaudit
