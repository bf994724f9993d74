#include <doctest.h>

#include <cmath>

#include "fairaudit/audit.hpp"
#include "fairaudit/canonical_json.hpp"
#include "fairaudit/scenarios.hpp"
#include "support.hpp"

using namespace fairaudit;

namespace {

AuditConfig default_config() {
    AuditConfig cfg;
    cfg.max_abs_data_md = 0.05;
    cfg.max_abs_normalized_md = 0.1;
    cfg.max_abs_unexplained = 0.05;
    cfg.max_feature_correlation = 0.1;
    cfg.min_group_support = 0.05;
    cfg.min_conjunction_support = 0.01;
    cfg.max_abs_causal_md = 0.02;
    cfg.max_abs_decision_md = 0.1;
    cfg.max_group_tpr_gap = 0.1;
    cfg.max_group_fpr_gap = 0.1;
    cfg.knn.max_flagged = 0.1;
    cfg.stratification = Stratification::quantile_bins({"x1"}, 4);
    cfg.conjunction_depth = 1;
    return cfg;
}

Dataset scenario(ScenarioKind kind, std::size_t n, std::uint64_t seed) {
    ScenarioSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.seed = seed;
    return generate(spec).dataset;
}

TestStatus status_of(const AuditReport& report, const std::string& id) {
    for (const auto& t : report.tests) {
        if (t.id == id) return t.status;
    }
    FAIL("no test with id ", id);
    return TestStatus::skipped;
}

}  // namespace

TEST_CASE("canonical json: sorted keys, fixed float precision, null for non-finite") {
    nlohmann::json doc{{"b", 1.0 / 3.0}, {"a", 2}, {"c", {{"y", true}, {"x", nullptr}}}};
    CHECK(canonical_dump(doc) == R"({"a":2,"b":0.333333333333,"c":{"x":null,"y":true}})");
    CHECK(canonical_dump(nlohmann::json(1e-13)) == "1e-13");
    CHECK(canonical_dump(nlohmann::json(std::nan(""))) == "null");
    CHECK(canonical_dump(nlohmann::json(1.0 / 3.0), 17) == "0.33333333333333331");
    // indented form stays canonical
    CHECK(canonical_dump(doc, 12, 2) == canonical_dump(doc, 12, 2));
    CHECK(fnv1a_hex("abc") != fnv1a_hex("abd"));
    CHECK(fnv1a_hex("abc").size() == 16);
}

TEST_CASE("verdict algebra") {
    using S = TestStatus;
    CHECK(verdict_of({S::pass, S::pass}) == Verdict::pass);
    CHECK(verdict_of({S::pass, S::warn}) == Verdict::warn);
    CHECK(verdict_of({S::warn, S::fail}) == Verdict::fail);
    CHECK(verdict_of({S::skipped, S::skipped}) == Verdict::pass);
    CHECK(verdict_of({}) == Verdict::pass);

    // property: matches a reference fold over random status lists
    Rng rng(81);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<S> statuses;
        bool any_fail = false, any_warn = false;
        for (std::uint64_t i = 0, n = rng.below(12); i < n; ++i) {
            S s = static_cast<S>(rng.below(4));
            statuses.push_back(s);
            any_fail |= s == S::fail;
            any_warn |= s == S::warn;
        }
        Verdict expected = any_fail ? Verdict::fail : any_warn ? Verdict::warn : Verdict::pass;
        CHECK(verdict_of(statuses) == expected);
    }

    CHECK(verdict_exit_code(Verdict::pass) == 0);
    CHECK(verdict_exit_code(Verdict::fail) == 2);
    CHECK(verdict_exit_code(Verdict::warn) == 3);
}

TEST_CASE("audit_data passes clean data and rejects planted bias") {
    AuditConfig cfg = default_config();

    SUBCASE("clean passes everything") {
        AuditReport r = audit_data(scenario(ScenarioKind::clean_independent, 8000, 1), cfg);
        CHECK(r.verdict == Verdict::pass);
    }
    SUBCASE("direct discrimination fails D1") {
        AuditReport r = audit_data(scenario(ScenarioKind::direct_discrimination, 8000, 1), cfg);
        CHECK(r.verdict == Verdict::fail);
        CHECK(status_of(r, "D1.md") == TestStatus::fail);
        CHECK(status_of(r, "D2.corr[x1]") == TestStatus::pass);
    }
    SUBCASE("redlining fails D2 while the unexplained part may pass") {
        AuditConfig cfg2 = default_config();
        cfg2.stratification = Stratification::exact_on({"zone"});
        AuditReport r = audit_data(scenario(ScenarioKind::redlining, 8000, 1), cfg2);
        CHECK(r.verdict == Verdict::fail);
        CHECK(status_of(r, "D2.corr[zone]") == TestStatus::fail);
        CHECK(status_of(r, "D1.unexplained") == TestStatus::pass);
        CHECK(status_of(r, "D1.md") == TestStatus::fail);
    }
    SUBCASE("sub-target tests are first-class") {
        AuditConfig cfg3 = default_config();
        cfg3.sub_targets = {"primary_event", "nuisance_event"};
        AuditReport r = audit_data(scenario(ScenarioKind::proxy_target, 8000, 1), cfg3);
        CHECK(status_of(r, "D1.md[primary_event]") == TestStatus::pass);
        CHECK(status_of(r, "D1.md[nuisance_event]") == TestStatus::fail);
    }
}

TEST_CASE("metric errors surface as skipped tests, never abort the audit") {
    AuditConfig cfg = default_config();
    cfg.stratification = Stratification::exact_on({"no_such_column"});
    AuditReport r = audit_data(scenario(ScenarioKind::clean_independent, 500, 2), cfg);
    CHECK(status_of(r, "D1.cmd") == TestStatus::skipped);
    CHECK(status_of(r, "D1.unexplained") == TestStatus::skipped);
    CHECK(status_of(r, "D1.md") == TestStatus::pass);
    bool recorded = false;
    for (const auto& t : r.tests) {
        if (t.id == "D1.cmd") {
            for (const auto& c : t.metric.caveats) recorded |= c.find("error:") != std::string::npos;
        }
    }
    CHECK(recorded);
}

TEST_CASE("omitted thresholds disable their tests") {
    AuditConfig cfg;  // everything unset
    cfg.stratification = Stratification::quantile_bins({"x1"}, 4);
    AuditReport r = audit_data(scenario(ScenarioKind::direct_discrimination, 500, 3), cfg);
    CHECK(r.verdict == Verdict::pass);  // nothing ran, nothing failed
    for (const auto& t : r.tests) CHECK(t.status == TestStatus::skipped);
}

TEST_CASE("warn band yields warn status and verdict") {
    // planted MD of exactly -0.04 against threshold 0.05, warn band at 0.025
    Dataset d = testing::two_group(25, 11, 25, 12);
    AuditConfig cfg;
    cfg.max_abs_data_md = 0.05;
    cfg.warn_fraction = 0.5;
    AuditReport r = audit_data(d, cfg);
    CHECK(status_of(r, "D1.md") == TestStatus::warn);
    CHECK(r.verdict == Verdict::warn);
}

TEST_CASE("raising a threshold never turns pass into fail") {
    Dataset d = scenario(ScenarioKind::direct_discrimination, 2000, 5);
    AuditConfig tight = default_config();
    AuditConfig loose = tight;
    loose.max_abs_data_md = *tight.max_abs_data_md * 10;
    loose.max_abs_normalized_md = *tight.max_abs_normalized_md * 10;
    loose.max_abs_unexplained = *tight.max_abs_unexplained * 10;
    loose.max_feature_correlation = *tight.max_feature_correlation * 10;
    AuditReport a = audit_data(d, tight);
    AuditReport b = audit_data(d, loose);
    REQUIRE(a.tests.size() == b.tests.size());
    for (std::size_t i = 0; i < a.tests.size(); ++i) {
        if (a.tests[i].status == TestStatus::pass) {
            CHECK(b.tests[i].status == TestStatus::pass);
        }
    }
}

TEST_CASE("replay: identical inputs give byte-identical reports") {
    Dataset d = scenario(ScenarioKind::clean_independent, 1000, 4);
    AuditConfig cfg = default_config();
    AuditReport a = audit_data(d, cfg, 7);
    AuditReport b = audit_data(d, cfg, 7);
    CHECK(render_report(a, "json") == render_report(b, "json"));
    CHECK(a.dataset_fingerprint == b.dataset_fingerprint);
    CHECK(a.config_hash == b.config_hash);
}

TEST_CASE("audit_model separates treatment from impact") {
    AuditConfig cfg = default_config();
    Hyperparams h;
    h.max_iters = 1500;

    SUBCASE("S-blind model on clean data passes; flip value is exactly zero") {
        Dataset d = scenario(ScenarioKind::clean_independent, 3000, 6);
        auto [train_d, holdout] = split(d, 0.3, 6);
        LogisticModel m = train(train_d, h);
        AuditReport r = audit_model(m, holdout, 0.5, cfg);
        CHECK(r.verdict == Verdict::pass);
        for (const auto& t : r.tests) {
            if (t.id == "M1.flip") CHECK(*t.metric.value == 0.0);
        }
    }
    SUBCASE("protected-aware model on direct discrimination fails M1") {
        Dataset d = scenario(ScenarioKind::direct_discrimination, 3000, 6);
        Hyperparams hp = h;
        hp.include_protected = true;
        LogisticModel m = train(d, hp);
        AuditReport r = audit_model(m, d, 0.5, cfg);
        CHECK(status_of(r, "M1.flip") == TestStatus::fail);
    }
    SUBCASE("redlining-trained S-blind model passes M1 but fails M2") {
        Dataset d = scenario(ScenarioKind::redlining, 3000, 6);
        auto [train_d, holdout] = split(d, 0.3, 6);
        LogisticModel m = train(train_d, h);
        AuditReport r = audit_model(m, holdout, 0.5, cfg);
        CHECK(status_of(r, "M1.flip") == TestStatus::pass);
        CHECK(status_of(r, "M2.md") == TestStatus::fail);
        CHECK(r.verdict == Verdict::fail);
    }
}

TEST_CASE("render formats") {
    Dataset d = scenario(ScenarioKind::direct_discrimination, 600, 8);
    AuditConfig cfg = default_config();
    AuditReport r = audit_data(d, cfg);

    SUBCASE("canonical json renders identically twice") {
        CHECK(render_report(r, "json") == render_report(r, "json"));
    }
    SUBCASE("markdown carries the failure banner and rows") {
        std::string md = render_report(r, "markdown");
        CHECK(md.find("# Audit report: FAIL") != std::string::npos);
        CHECK(md.find("| D1.md |") != std::string::npos);
        CHECK(md.find("fail") != std::string::npos);
        CHECK(render_report(r, "md") == md);
    }
    SUBCASE("unknown format and empty reports are rejected") {
        CHECK_THROWS_WITH_AS(render_report(r, "yaml"), doctest::Contains("UnknownFormat"), Error);
        AuditReport empty;
        CHECK_THROWS_WITH_AS(render_report(empty, "json"), doctest::Contains("InvalidReport"),
                             Error);
    }
}

TEST_CASE("audit config json round trip and validation") {
    AuditConfig cfg = default_config();
    cfg.sub_targets = {"primary_event"};
    AuditConfig back = AuditConfig::from_json(cfg.to_json());
    CHECK(canonical_dump(back.to_json()) == canonical_dump(cfg.to_json()));
    CHECK(back.hash() == cfg.hash());

    SUBCASE("unknown threshold keys are rejected") {
        nlohmann::json doc = cfg.to_json();
        doc["thresholds"]["max_abs_typo"] = 0.1;
        CHECK_THROWS_WITH_AS(AuditConfig::from_json(doc), doctest::Contains("unknown threshold"),
                             Error);
    }
    SUBCASE("warn fraction bounds") {
        nlohmann::json doc = cfg.to_json();
        doc["warn_fraction"] = 0.0;
        CHECK_THROWS_AS(AuditConfig::from_json(doc), Error);
        doc["warn_fraction"] = 1.5;
        CHECK_THROWS_AS(AuditConfig::from_json(doc), Error);
    }
    SUBCASE("hash tracks content") {
        AuditConfig other = cfg;
        other.max_abs_data_md = 0.06;
        CHECK(other.hash() != cfg.hash());
    }
}
