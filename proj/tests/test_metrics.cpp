#include <doctest.h>

#include <cmath>

#include "fairaudit/metrics.hpp"
#include "support.hpp"

using namespace fairaudit;

namespace {

/// S=1: 10 rows / 2 positive; S=0: 10 rows / 6 positive.
Dataset twenty_rows() { return testing::two_group(10, 2, 10, 6); }

/// Two-stratum construction whose raw MD is -1/6 while every stratum is
/// balanced (per-stratum MD = 0).
Dataset simpson24() {
    testing::DatasetSpec spec;
    std::vector<std::string> x;
    auto add = [&](int s, int y, const char* stratum, int count) {
        for (int i = 0; i < count; ++i) {
            spec.s.push_back(s);
            spec.y.push_back(y);
            x.push_back(stratum);
        }
    };
    add(1, 1, "0", 2);
    add(1, 0, "0", 6);  // stratum 0: S1 8 rows, 2 positive
    add(0, 1, "0", 1);
    add(0, 0, "0", 3);  // stratum 0: S0 4 rows, 1 positive
    add(1, 1, "1", 3);
    add(1, 0, "1", 1);  // stratum 1: S1 4 rows, 3 positive
    add(0, 1, "1", 6);
    add(0, 0, "1", 2);  // stratum 1: S0 8 rows, 6 positive
    spec.features.push_back({"x", FeatureKind::categorical, x});
    return testing::build(spec);
}

Dataset with_swapped_protected(const Dataset& d) {
    Schema schema = d.schema();
    schema.protected_value = "b";  // the other literal used by the builders
    return Dataset::from_table(schema, d.to_table());
}

}  // namespace

TEST_CASE("mean difference on the 20-row example") {
    Dataset d = twenty_rows();
    MetricResult r = mean_difference(d, Outcome::label());
    CHECK(*r.value == doctest::Approx(-0.4).epsilon(1e-15));
    CHECK(r.components.at("p1") == doctest::Approx(0.2));
    CHECK(r.components.at("p0") == doctest::Approx(0.6));
    CHECK(r.group_size_protected == 10);
    CHECK(r.group_size_favored == 10);
    CHECK(r.protected_disadvantaged());
}

TEST_CASE("metrics run on recorded decisions via the outcome selector") {
    Schema schema;
    schema.protected_column = "group";
    schema.protected_value = "a";
    schema.label_column = "label";
    schema.positive_label = "1";
    schema.decision_column = "decision";
    csv::Table t;
    t.header = {"group", "label", "decision"};
    // labels balanced, decisions segregated
    for (int i = 0; i < 8; ++i) {
        t.rows.push_back({i % 2 ? "a" : "b", (i / 2) % 2 ? "1" : "0", i % 2 ? "0" : "1"});
    }
    Dataset d = Dataset::from_table(schema, std::move(t));
    CHECK(*mean_difference(d, Outcome::label()).value == 0.0);
    CHECK(*mean_difference(d, Outcome::decision()).value == -1.0);

    Dataset no_decision = testing::two_group(4, 2, 4, 2);
    CHECK_THROWS_AS(mean_difference(no_decision, Outcome::decision()), Error);
}

TEST_CASE("mean difference symmetry and extremes") {
    Dataset d = testing::two_group(6, 3, 6, 3);
    CHECK(*mean_difference(d, Outcome::label()).value == 0.0);

    // outcome equal to 1-s
    std::vector<double> inverted(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) inverted[i] = 1.0 - d.s()[i];
    CHECK(*mean_difference(d, Outcome::explicit_values(inverted)).value == -1.0);
}

TEST_CASE("normalized mean difference and its constant") {
    SUBCASE("20-row example: C = min(0.8, 1.2)") {
        MetricResult r = normalized_mean_difference(twenty_rows(), Outcome::label());
        CHECK(r.components.at("c") == doctest::Approx(0.8).epsilon(1e-15));
        CHECK(*r.value == doctest::Approx(-0.5).epsilon(1e-15));
    }
    SUBCASE("total segregation scores magnitude 1 exactly") {
        Dataset d = testing::two_group(10, 0, 10, 10);
        MetricResult r = normalized_mean_difference(d, Outcome::label());
        CHECK(r.components.at("c") == 1.0);
        CHECK(*r.value == -1.0);
    }
    SUBCASE("zero md stays zero") {
        Dataset d = testing::two_group(8, 2, 4, 1);
        MetricResult r = normalized_mean_difference(d, Outcome::label());
        CHECK(*r.value == 0.0);
    }
    SUBCASE("degenerate marginal withholds the value") {
        Dataset d = testing::two_group(5, 5, 5, 5);  // everyone positive -> P(A0) = 0
        MetricResult r = normalized_mean_difference(d, Outcome::label());
        CHECK(!r.value.has_value());
        CHECK(!r.caveats.empty());
    }
}

TEST_CASE("conditional mean difference separates the Simpson construction") {
    Dataset d = simpson24();
    MetricResult raw = mean_difference(d, Outcome::label());
    CHECK(*raw.value == doctest::Approx(-1.0 / 6.0).epsilon(1e-14));

    MetricResult cond =
        conditional_mean_difference(d, Outcome::label(), Stratification::exact_on({"x"}));
    CHECK(std::abs(*cond.value) < 1e-12);
    CHECK(cond.components.at("md[x=0]") == 0.0);
    CHECK(cond.components.at("md[x=1]") == 0.0);
}

TEST_CASE("conditional mean difference reduces to mean difference on one stratum") {
    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        Dataset d = testing::random_dataset(rng, 80);
        MetricResult md = mean_difference(d, Outcome::label());
        // a constant synthetic column groups everything into one stratum
        Dataset constant = [&] {
            csv::Table t = d.to_table();
            t.header.push_back("all");
            for (auto& row : t.rows) row.push_back("k");
            return Dataset::from_table(d.schema(), std::move(t));
        }();
        MetricResult cond = conditional_mean_difference(constant, Outcome::label(),
                                                        Stratification::exact_on({"all"}));
        MetricResult md2 = mean_difference(constant, Outcome::label());
        CHECK(*cond.value == *md2.value);  // bit-for-bit
        CHECK(*md2.value == *md.value);
    }
}

TEST_CASE("strata missing a group are skipped with a caveat") {
    testing::DatasetSpec spec;
    spec.s = {1, 1, 1, 0, 0, 1};
    spec.y = {1, 0, 1, 1, 0, 0};
    spec.features.push_back(
        {"x", FeatureKind::categorical, {"solo", "mix", "mix", "mix", "mix", "solo"}});
    Dataset d = testing::build(spec);
    MetricResult r =
        conditional_mean_difference(d, Outcome::label(), Stratification::exact_on({"x"}));
    REQUIRE(r.caveats.size() == 1);
    CHECK(r.caveats[0].find("x=solo") != std::string::npos);
    CHECK(r.components.count("md[x=mix]") == 1);
    CHECK(r.components.count("md[x=solo]") == 0);
}

TEST_CASE("all strata skipped is an error") {
    testing::DatasetSpec spec;
    spec.s = {1, 1, 0, 0};
    spec.y = {1, 0, 1, 0};
    spec.features.push_back({"x", FeatureKind::categorical, {"p", "p", "q", "q"}});
    Dataset d = testing::build(spec);
    CHECK_THROWS_WITH_AS(
        conditional_mean_difference(d, Outcome::label(), Stratification::exact_on({"x"})),
        doctest::Contains("AllStrataSkipped"), Error);
}

TEST_CASE("unexplained difference decomposition") {
    SUBCASE("Simpson 24: explained -1/6, unexplained 0") {
        MetricResult r =
            unexplained_difference(simpson24(), Outcome::label(), Stratification::exact_on({"x"}));
        CHECK(r.components.at("total") == doctest::Approx(-1.0 / 6.0).epsilon(1e-13));
        CHECK(r.components.at("explained") == doctest::Approx(-1.0 / 6.0).epsilon(1e-13));
        CHECK(std::abs(r.components.at("unexplained")) < 1e-12);
    }
    SUBCASE("single stratum: explained 0, unexplained = MD") {
        Dataset d = twenty_rows();
        Dataset constant = [&] {
            csv::Table t = d.to_table();
            t.header.push_back("all");
            for (auto& row : t.rows) row.push_back("k");
            return Dataset::from_table(d.schema(), std::move(t));
        }();
        MetricResult r = unexplained_difference(constant, Outcome::label(),
                                                Stratification::exact_on({"all"}));
        CHECK(r.components.at("explained") == 0.0);
        CHECK(r.components.at("unexplained") == doctest::Approx(-0.4).epsilon(1e-15));
    }
    SUBCASE("identity total = explained + unexplained on random data") {
        Rng rng(17);
        for (int rep = 0; rep < 50; ++rep) {
            Dataset d = testing::random_dataset(rng);
            try {
                MetricResult r = unexplained_difference(d, Outcome::label(),
                                                        Stratification::exact_on({"bucket"}));
                double gap = r.components.at("total") -
                             (r.components.at("explained") + r.components.at("unexplained"));
                CHECK(std::abs(gap) < 1e-12);
            } catch (const Error& e) {
                CHECK(e.code() == ErrorCode::AllStrataSkipped);
            }
        }
    }
}

TEST_CASE("regression test identity fit") {
    // outcome equal to s with no features: phi = 1, residuals 0
    testing::DatasetSpec spec;
    spec.s = {1, 1, 0, 0, 1, 0};
    spec.y = {1, 1, 0, 0, 1, 0};
    Dataset d = testing::build(spec);
    MetricResult r = regression_test(d, Outcome::label());
    CHECK(*r.value == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.components.at("se") == doctest::Approx(0.0));
    CHECK(r.components.at("significant") == 1.0);
}

TEST_CASE("regression test recovers a planted coefficient") {
    Rng rng(101);
    std::size_t n = 4000;
    testing::DatasetSpec spec;
    std::vector<std::string> xs;
    for (std::size_t i = 0; i < n; ++i) {
        int s = rng.bernoulli(0.5) ? 1 : 0;
        double x = 2.0 * rng.uniform01() - 1.0;
        double p = 0.5 + 0.2 * x - 0.3 * s;
        spec.s.push_back(s);
        spec.y.push_back(rng.bernoulli(p) ? 1 : 0);
        xs.push_back(testing::num(x));
    }
    spec.features.push_back({"x", FeatureKind::numeric, xs});
    Dataset d = testing::build(spec);
    MetricResult r = regression_test(d, Outcome::label());
    CHECK(*r.value == doctest::Approx(-0.3).epsilon(0.2));  // +-0.05 absolute checked in acceptance
    CHECK(std::abs(*r.value + 0.3) < 0.05);
    CHECK(r.components.at("significant") == 1.0);
}

TEST_CASE("regression test rejects rank-deficient designs") {
    // a numeric feature identical to s makes [1, x, s] collinear
    testing::DatasetSpec spec;
    std::vector<std::string> xs;
    for (int i = 0; i < 12; ++i) {
        int s = i % 2;
        spec.s.push_back(s);
        spec.y.push_back((i / 2) % 2);
        xs.push_back(testing::num(static_cast<double>(s)));
    }
    spec.features.push_back({"x", FeatureKind::numeric, xs});
    Dataset d = testing::build(spec);
    CHECK_THROWS_WITH_AS(regression_test(d, Outcome::label()),
                         doctest::Contains("RankDeficientDesign"), Error);
}

TEST_CASE("knn situation test flags a constructed neighbourhood") {
    // 7 rows: tested protected negative, 3 protected negatives, 3 unprotected
    // positives; all features identical so every distance ties.
    testing::DatasetSpec spec;
    spec.s = {1, 1, 1, 1, 0, 0, 0};
    spec.y = {0, 0, 0, 0, 1, 1, 1};
    std::vector<std::string> xs(7, "0");
    spec.features.push_back({"x", FeatureKind::numeric, xs});
    Dataset d = testing::build(spec);
    MetricResult r = knn_situation_test(d, Outcome::label(), 3, 1.0);
    CHECK(*r.value == 1.0);  // every protected negative flagged even at t = 1
    CHECK(r.components.at("mean_diff") == 1.0);
}

TEST_CASE("knn situation test edge cases") {
    SUBCASE("no protected negatives") {
        Dataset d = testing::two_group(5, 5, 5, 2);
        MetricResult r = knn_situation_test(d, Outcome::label(), 2, 0.5);
        CHECK(*r.value == 0.0);
        REQUIRE(!r.caveats.empty());
        CHECK(r.caveats[0].find("no test population") != std::string::npos);
    }
    SUBCASE("insufficient neighbours") {
        Dataset d = testing::two_group(3, 1, 3, 2);
        CHECK_THROWS_WITH_AS(knn_situation_test(d, Outcome::label(), 4, 0.5),
                             doctest::Contains("InsufficientNeighbors"), Error);
        // protected group has exactly k rows but a tested row excludes itself
        Dataset d2 = testing::two_group(3, 0, 5, 3);
        CHECK_THROWS_WITH_AS(knn_situation_test(d2, Outcome::label(), 3, 0.5),
                             doctest::Contains("InsufficientNeighbors"), Error);
    }
    SUBCASE("independent outcome rarely flags") {
        Rng rng(7);
        testing::DatasetSpec spec;
        std::vector<std::string> xs;
        for (int i = 0; i < 800; ++i) {
            spec.s.push_back(rng.bernoulli(0.5) ? 1 : 0);
            spec.y.push_back(rng.bernoulli(0.5) ? 1 : 0);
            xs.push_back(testing::num(rng.normal()));
        }
        spec.features.push_back({"x", FeatureKind::numeric, xs});
        Dataset d = testing::build(spec);
        MetricResult r = knn_situation_test(d, Outcome::label(), 10, 0.3);
        CHECK(*r.value < 0.1);
    }
}

TEST_CASE("propensity stratification equals exact conditioning on a binary feature") {
    Rng rng(23);
    testing::DatasetSpec spec;
    std::vector<std::string> xs;
    for (int i = 0; i < 600; ++i) {
        double x = rng.bernoulli(0.4) ? 1.0 : 0.0;
        int s = rng.bernoulli(x == 1.0 ? 0.7 : 0.3) ? 1 : 0;
        int y = rng.bernoulli(0.3 + 0.4 * x) ? 1 : 0;
        spec.s.push_back(s);
        spec.y.push_back(y);
        xs.push_back(testing::num(x));
    }
    spec.features.push_back({"x", FeatureKind::numeric, xs});
    Dataset d = testing::build(spec);

    MetricResult via_propensity = propensity_stratified_difference(d, Outcome::label(), 2);
    // exact conditioning oracle: stratify on the feature value itself
    Dataset with_cat = [&] {
        csv::Table t = d.to_table();
        t.header.push_back("xb");
        for (std::size_t i = 0; i < d.n(); ++i) {
            t.rows[i].push_back(d.numeric_feature("x")[i] == 1.0 ? "1" : "0");
        }
        return Dataset::from_table(d.schema(), std::move(t));
    }();
    MetricResult exact = conditional_mean_difference(with_cat, Outcome::label(),
                                                     Stratification::exact_on({"xb"}));
    CHECK(*via_propensity.value == doctest::Approx(*exact.value).epsilon(1e-9));
}

TEST_CASE("feature/protected association") {
    SUBCASE("numeric copy of s scores 1") {
        testing::DatasetSpec spec;
        std::vector<std::string> xs, gs;
        for (int i = 0; i < 40; ++i) {
            int s = i % 2;
            spec.s.push_back(s);
            spec.y.push_back((i / 2) % 2);
            xs.push_back(testing::num(static_cast<double>(s)));
            gs.push_back(s == 1 ? "one" : "zero");
        }
        spec.features.push_back({"x", FeatureKind::numeric, xs});
        spec.features.push_back({"g", FeatureKind::categorical, gs});
        Dataset d = testing::build(spec);
        auto results = feature_protected_correlation(d);
        REQUIRE(results.size() == 2);
        CHECK(*results[0].value == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(*results[1].value == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("independent feature scores low") {
        Rng rng(31);
        testing::DatasetSpec spec;
        std::vector<std::string> xs;
        for (int i = 0; i < 8000; ++i) {
            spec.s.push_back(rng.bernoulli(0.5) ? 1 : 0);
            spec.y.push_back(rng.bernoulli(0.5) ? 1 : 0);
            xs.push_back(testing::num(rng.normal()));
        }
        spec.features.push_back({"x", FeatureKind::numeric, xs});
        Dataset d = testing::build(spec);
        CHECK(*feature_protected_correlation(d)[0].value < 0.05);
    }
    SUBCASE("constant feature reports 0 with a caveat") {
        testing::DatasetSpec spec;
        spec.s = {1, 0, 1, 0};
        spec.y = {1, 0, 0, 1};
        spec.features.push_back({"x", FeatureKind::numeric, {"2", "2", "2", "2"}});
        Dataset d = testing::build(spec);
        auto results = feature_protected_correlation(d);
        CHECK(*results[0].value == 0.0);
        CHECK(!results[0].caveats.empty());
    }
}

TEST_CASE("support report") {
    SUBCASE("group shares") {
        Dataset d = testing::two_group(40, 10, 60, 30);
        MetricResult r = support_report(d, 0);
        CHECK(r.components.at("p_s1") == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(r.components.at("p_s0") == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(*r.value == doctest::Approx(0.4));
    }
    SUBCASE("depth-1 shares over a binary feature sum to P(S=1)") {
        Rng rng(13);
        testing::DatasetSpec spec;
        std::vector<std::string> gs;
        for (int i = 0; i < 200; ++i) {
            spec.s.push_back(rng.bernoulli(0.4) ? 1 : 0);
            spec.y.push_back(rng.bernoulli(0.5) ? 1 : 0);
            gs.push_back(rng.bernoulli(0.5) ? "g1" : "g0");
        }
        spec.features.push_back({"g", FeatureKind::categorical, gs});
        Dataset d = testing::build(spec);
        MetricResult r = support_report(d, 1);
        double total = r.components.at("share[g=g0]") + r.components.at("share[g=g1]");
        CHECK(total == doctest::Approx(r.components.at("p_s1")).epsilon(1e-12));
    }
    SUBCASE("depth-2 over two 3-level features yields 9 cells summing to n1") {
        Rng rng(14);
        testing::DatasetSpec spec;
        std::vector<std::string> g1, g2;
        const char* levels[3] = {"p", "q", "r"};
        for (int i = 0; i < 300; ++i) {
            spec.s.push_back(rng.bernoulli(0.5) ? 1 : 0);
            spec.y.push_back(rng.bernoulli(0.5) ? 1 : 0);
            g1.push_back(levels[rng.below(3)]);
            g2.push_back(levels[rng.below(3)]);
        }
        spec.features.push_back({"g1", FeatureKind::categorical, g1});
        spec.features.push_back({"g2", FeatureKind::categorical, g2});
        Dataset d = testing::build(spec);
        MetricResult r = support_report(d, 2);
        double count_sum = 0.0;
        int cells = 0;
        for (const auto& [key, value] : r.components) {
            if (key.rfind("count[", 0) == 0) {
                ++cells;
                count_sum += value;
            }
        }
        CHECK(cells == 9);  // enumeration oracle: every pair level occurs at n=300
        CHECK(count_sum == doctest::Approx(static_cast<double>(d.group_count(1))));
        CHECK_THROWS_AS(support_report(d, 3), Error);  // depth beyond categorical count
    }
}

TEST_CASE("scale invariance: duplicating rows or doubling weights changes nothing") {
    Rng rng(41);
    for (int rep = 0; rep < 8; ++rep) {
        Dataset d = testing::random_dataset(rng, 60);

        // duplicate every row
        csv::Table doubled = d.to_table();
        auto original_rows = doubled.rows;
        for (const auto& row : original_rows) doubled.rows.push_back(row);
        Dataset d2 = Dataset::from_table(d.schema(), std::move(doubled));

        // double every weight
        std::vector<double> w = d.weights();
        for (double& x : w) x *= 2.0;
        Dataset dw = d.with_weights(std::move(w));

        for (const Dataset* variant : {&d2, &dw}) {
            CHECK(*mean_difference(*variant, Outcome::label()).value ==
                  doctest::Approx(*mean_difference(d, Outcome::label()).value).epsilon(1e-12));
            CHECK(*normalized_mean_difference(*variant, Outcome::label()).value ==
                  doctest::Approx(*normalized_mean_difference(d, Outcome::label()).value)
                      .epsilon(1e-12));
            CHECK(*support_report(*variant, 0).value ==
                  doctest::Approx(*support_report(d, 0).value).epsilon(1e-12));
            CHECK(*feature_protected_correlation(*variant)[0].value ==
                  doctest::Approx(*feature_protected_correlation(d)[0].value).epsilon(1e-9));
        }
    }
}

TEST_CASE("sign convention flips with the protected coding") {
    Rng rng(43);
    Dataset d = testing::random_dataset(rng, 80, false);
    Dataset flipped = with_swapped_protected(d);

    CHECK(*mean_difference(flipped, Outcome::label()).value ==
          doctest::Approx(-*mean_difference(d, Outcome::label()).value).epsilon(1e-12));
    CHECK(*regression_test(flipped, Outcome::label()).value ==
          doctest::Approx(-*regression_test(d, Outcome::label()).value).epsilon(1e-8));
    CHECK(*feature_protected_correlation(flipped)[1].value ==
          doctest::Approx(*feature_protected_correlation(d)[1].value).epsilon(1e-9));
}
