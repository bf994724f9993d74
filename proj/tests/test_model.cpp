#include <doctest.h>

#include <cmath>

#include "fairaudit/model.hpp"
#include "fairaudit/scenarios.hpp"
#include "support.hpp"

using namespace fairaudit;

namespace {

/// Hand-built model over one raw numeric feature (no standardization).
LogisticModel raw_model(double weight, double bias) {
    Encoding enc;
    enc.columns.push_back({"x", true, 0.0, 1.0, ""});
    return LogisticModel(enc, {weight}, bias, Hyperparams{}, true, {});
}

Dataset single_x(const std::vector<double>& xs, const std::vector<int>& s,
                 const std::vector<int>& y) {
    testing::DatasetSpec spec;
    spec.s = s;
    spec.y = y;
    std::vector<std::string> col;
    for (double v : xs) col.push_back(testing::num(v));
    spec.features.push_back({"x", FeatureKind::numeric, col});
    return testing::build(spec);
}

Dataset separable20() {
    std::vector<double> xs;
    std::vector<int> s, y;
    for (int i = 0; i < 20; ++i) {
        double x = (i < 10) ? -2.0 - 0.1 * i : 2.0 + 0.1 * (i - 10);
        xs.push_back(x);
        s.push_back(i % 2);
        y.push_back(i < 10 ? 0 : 1);
    }
    return single_x(xs, s, y);
}

}  // namespace

TEST_CASE("predict_proba basics") {
    Dataset d = single_x({1.0, -1.0}, {1, 0}, {1, 0});

    SUBCASE("all-zero weights give 0.5 everywhere") {
        LogisticModel m = raw_model(0.0, 0.0);
        CHECK(m.predict_proba(d, 0) == 0.5);
        CHECK(m.predict_proba(d, 1) == 0.5);
    }
    SUBCASE("large bias saturates") {
        LogisticModel m = raw_model(0.0, 20.0);
        CHECK(m.predict_proba(d, 0) > 0.999);
        CHECK(m.predict_proba(d, 0) < 1.0);
    }
    SUBCASE("hand-set weights: sigmoid(1)") {
        LogisticModel m = raw_model(2.0, -1.0);
        CHECK(m.predict_proba(d, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    }
}

TEST_CASE("decide thresholds") {
    Dataset d2 = single_x({1.0, 1.0}, {1, 0}, {1, 0});
    LogisticModel m = raw_model(2.0, -1.0);  // p = sigmoid(1) = 0.73106...
    CHECK(m.decide(d2, 0, 0.0) == 1);
    CHECK(m.decide(d2, 0, 1.0) == 0);
    CHECK(m.decide(d2, 0, 0.5) == 1);
    CHECK(m.decide(d2, 0, 0.7312) == 0);
    CHECK_THROWS_AS(m.decide(d2, 0, 1.5), Error);
}

TEST_CASE("cost threshold") {
    CHECK(cost_threshold(1.0, 1.0) == 0.5);
    CHECK(cost_threshold(1.0, 9.0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(cost_threshold(9.0, 1.0) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK_THROWS_WITH_AS(cost_threshold(0.0, 1.0), doctest::Contains("NonPositiveCost"), Error);

    // expected-cost oracle: at theta* both decisions cost the same
    for (auto [cfp, cfn] : {std::pair{1.0, 9.0}, {9.0, 1.0}, {2.5, 7.5}}) {
        double theta = cost_threshold(cfp, cfn);
        CHECK((1.0 - theta) * cfp == doctest::Approx(theta * cfn).epsilon(1e-12));
    }
}

TEST_CASE("training reduces to plain logistic regression at eta 0") {
    Dataset d = separable20();
    Hyperparams h;
    h.max_iters = 3000;
    LogisticModel m = train(d, h);

    // independent loss recomputation at the trained parameters
    double nll = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        double p = m.predict_proba(d, i);
        nll += -(d.y()[i] * std::log(p) + (1 - d.y()[i]) * std::log(1.0 - p));
    }
    nll /= static_cast<double>(d.n());
    double l2 = 0.0;
    for (double w : m.weights()) l2 += w * w;
    l2 *= h.l2;
    CHECK(m.loss().nll == doctest::Approx(nll).epsilon(1e-9));
    CHECK(m.loss().l2 == doctest::Approx(l2).epsilon(1e-12));
    CHECK(m.loss().fairness >= 0.0);

    // separable data is fit perfectly at threshold 0.5
    for (std::size_t i = 0; i < d.n(); ++i) CHECK(m.decide(d, i, 0.5) == d.y()[i]);
}

TEST_CASE("training is bit-deterministic") {
    Rng rng(9);
    Dataset d = testing::random_dataset(rng, 60, false);
    Hyperparams h;
    h.max_iters = 300;
    LogisticModel a = train(d, h);
    LogisticModel b = train(d, h);
    CHECK(a.serialize() == b.serialize());
}

TEST_CASE("training rows predict inside (0, 1)") {
    Rng rng(19);
    Dataset d = testing::random_dataset(rng, 80, false);
    Hyperparams h;
    h.max_iters = 500;
    LogisticModel m = train(d, h);
    for (std::size_t i = 0; i < d.n(); ++i) {
        double p = m.predict_proba(d, i);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("gradient matches central finite differences") {
    Rng rng(77);
    for (int rep = 0; rep < 5; ++rep) {
        Dataset d = testing::random_dataset(rng, 40);
        Hyperparams h;
        h.fairness = rep;  // include the fairness term in most reps
        h.cost_fp = 1.5;
        h.cost_fn = 0.75;
        Encoding enc = build_encoding(d, rep % 2 == 1);
        std::vector<double> w(enc.width());
        for (double& v : w) v = rng.normal() * 0.5;
        double bias = rng.normal() * 0.2;

        LossValue lv = training_loss(d, enc, w, bias, h);
        const double step = 1e-6;
        double num_norm = 0.0, diff_norm = 0.0;
        for (std::size_t j = 0; j <= enc.width(); ++j) {
            auto eval = [&](double delta) {
                std::vector<double> wj = w;
                double bj = bias;
                if (j < enc.width()) {
                    wj[j] += delta;
                } else {
                    bj += delta;
                }
                return training_loss(d, enc, wj, bj, h).total;
            };
            double numeric = (eval(step) - eval(-step)) / (2.0 * step);
            double diff = numeric - lv.gradient[j];
            num_norm += numeric * numeric;
            diff_norm += diff * diff;
        }
        CHECK(std::sqrt(diff_norm) <= 1e-5 * (1.0 + std::sqrt(num_norm)));
    }
}

TEST_CASE("fairness penalty shrinks the group gap") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::redlining;
    spec.n = 800;
    spec.seed = 5;
    Dataset d = generate(spec).dataset;

    Hyperparams h;
    h.max_iters = 1500;
    std::vector<double> gaps;
    for (double eta : {0.0, 1.0, 10.0, 100.0}) {
        h.fairness = eta;
        gaps.push_back(train(d, h).loss().fairness);  // squared mean-probability gap
    }
    CHECK(gaps.back() < gaps.front());  // endpoints strictly ordered
    int inversions = 0;
    for (std::size_t i = 1; i < gaps.size(); ++i) inversions += gaps[i] > gaps[i - 1] ? 1 : 0;
    CHECK(inversions <= 1);
}

TEST_CASE("training error paths") {
    SUBCASE("single label class") {
        Dataset d = testing::two_group(4, 4, 4, 4);
        CHECK_THROWS_WITH_AS(train(d, Hyperparams{}), doctest::Contains("SingleClassLabel"), Error);
    }
    SUBCASE("divergent learning rate reports NonFiniteLoss") {
        Dataset d = separable20();
        Hyperparams h;
        h.learning_rate = 1e12;
        h.max_iters = 2000;
        CHECK_THROWS_WITH_AS(train(d, h), doctest::Contains("NonFiniteLoss"), Error);
    }
}

TEST_CASE("model serialization round trip and version gate") {
    Rng rng(55);
    Dataset d = testing::random_dataset(rng, 50, false);
    Hyperparams h;
    h.max_iters = 200;
    LogisticModel m = train(d, h);

    LogisticModel back = LogisticModel::from_json(m.to_json());
    for (std::size_t i = 0; i < d.n(); ++i) {
        CHECK(back.predict_proba(d, i) == m.predict_proba(d, i));
    }
    CHECK(back.serialize() == m.serialize());

    nlohmann::json doc = m.to_json();
    doc["version"] = 2;
    CHECK_THROWS_WITH_AS(LogisticModel::from_json(doc), doctest::Contains("UnknownVersion"), Error);
}

TEST_CASE("prediction rejects rows lacking a model feature") {
    Dataset with_x = single_x({1.0, -1.0}, {1, 0}, {1, 0});
    Hyperparams h;
    h.max_iters = 40;
    LogisticModel m = train(with_x, h);
    Dataset without_x = testing::two_group(2, 1, 2, 1);
    CHECK_THROWS_WITH_AS(m.predict_proba(without_x, 0), doctest::Contains("MissingFeature"),
                         Error);
}

TEST_CASE("prediction rejects unseen categorical levels") {
    testing::DatasetSpec spec;
    spec.s = {1, 0, 1, 0};
    spec.y = {1, 0, 0, 1};
    spec.features.push_back({"g", FeatureKind::categorical, {"a", "b", "a", "b"}});
    Dataset d = testing::build(spec);
    Hyperparams h;
    h.max_iters = 50;
    LogisticModel m = train(d, h);

    testing::DatasetSpec other = spec;
    other.features[0] = {"g", FeatureKind::categorical, {"a", "b", "c", "b"}};
    Dataset d2 = testing::build(other);
    CHECK_THROWS_WITH_AS(m.predict_proba(d2, 2), doctest::Contains("UnknownLevel"), Error);
}

TEST_CASE("evaluate computes confusion and group statistics") {
    SUBCASE("constant accept-everything decision") {
        // 10 rows, 4 positives; a huge bias accepts everyone
        Dataset d = testing::two_group(5, 2, 5, 2);
        LogisticModel m = [] {
            Encoding enc;  // no features at all: bias only
            return LogisticModel(enc, {}, 20.0, Hyperparams{}, true, {});
        }();
        Evaluation ev = evaluate(m, d, 0.5);
        CHECK(ev.protected_group.acceptance_rate == 1.0);
        CHECK(ev.favored_group.acceptance_rate == 1.0);
        CHECK(ev.decision_mean_difference == 0.0);
        CHECK(*ev.recall == 1.0);
        CHECK(*ev.precision == doctest::Approx(0.4));  // base rate
        CHECK(ev.accuracy == doctest::Approx(0.4));
    }
    SUBCASE("perfect predictor") {
        std::vector<double> xs;
        std::vector<int> s, y;
        for (int i = 0; i < 12; ++i) {
            s.push_back(i % 2);
            y.push_back(i % 3 == 0 ? 1 : 0);
            xs.push_back(y.back() == 1 ? 1.0 : -1.0);
        }
        Dataset d = single_x(xs, s, y);
        LogisticModel m = raw_model(50.0, 0.0);
        Evaluation ev = evaluate(m, d, 0.5);
        CHECK(ev.accuracy == 1.0);
        CHECK(*ev.protected_group.tpr == 1.0);
        CHECK(*ev.favored_group.tpr == 1.0);
        CHECK(*ev.protected_group.fpr == 0.0);
        CHECK(*ev.favored_group.fpr == 0.0);
    }
    SUBCASE("group without positives reports TPR absent with caveat") {
        Dataset d = testing::two_group(5, 0, 5, 3);
        LogisticModel m = [] {
            Encoding enc;
            return LogisticModel(enc, {}, 20.0, Hyperparams{}, true, {});
        }();
        Evaluation ev = evaluate(m, d, 0.5);
        CHECK(!ev.protected_group.tpr.has_value());
        CHECK(ev.favored_group.tpr.has_value());
        bool found = false;
        for (const auto& c : ev.caveats) found |= c.find("no positives") != std::string::npos;
        CHECK(found);
    }
}

TEST_CASE("cost weighting moves the learned boundary") {
    // heavily penalizing false negatives pushes probabilities upward
    Rng rng(99);
    std::vector<double> xs;
    std::vector<int> s, y;
    for (int i = 0; i < 200; ++i) {
        double x = rng.normal();
        s.push_back(rng.bernoulli(0.5) ? 1 : 0);
        y.push_back(rng.bernoulli(sigmoid(x)) ? 1 : 0);
        xs.push_back(x);
    }
    Dataset d = single_x(xs, s, y);
    Hyperparams plain;
    plain.max_iters = 800;
    Hyperparams fn_heavy = plain;
    fn_heavy.cost_fn = 9.0;
    double mean_plain = 0.0, mean_heavy = 0.0;
    LogisticModel mp = train(d, plain);
    LogisticModel mh = train(d, fn_heavy);
    for (std::size_t i = 0; i < d.n(); ++i) {
        mean_plain += mp.predict_proba(d, i);
        mean_heavy += mh.predict_proba(d, i);
    }
    CHECK(mean_heavy > mean_plain);
}
