// Python bindings: the C++ core does the work; structured results cross the
// boundary as canonical JSON strings and the python package turns them into
// dicts. Datasets and models are opaque handles.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fairaudit/audit.hpp"
#include "fairaudit/canonical_json.hpp"
#include "fairaudit/counterfactual.hpp"
#include "fairaudit/dataset.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/mitigate.hpp"
#include "fairaudit/model.hpp"
#include "fairaudit/scenarios.hpp"

namespace py = pybind11;
using namespace fairaudit;

namespace {

nlohmann::json parse_json(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidParam, std::string(what) + " is not valid JSON: " + e.what());
    }
}

Outcome outcome_from(const py::object& selector) {
    if (py::isinstance<py::str>(selector)) {
        std::string name = selector.cast<std::string>();
        if (name == "label") return Outcome::label();
        if (name == "decision") return Outcome::decision();
        fail(ErrorCode::InvalidOutcome, "outcome must be 'label', 'decision', or a sequence");
    }
    return Outcome::explicit_values(selector.cast<std::vector<double>>());
}

Stratification strat_from(const std::string& json_text) {
    return Stratification::from_json(parse_json(json_text, "stratification"));
}

std::string dump12(const nlohmann::json& doc) { return canonical_dump(doc, 12); }

ScenarioSpec scenario_spec_from(const std::string& kind, std::size_t n, std::uint64_t seed,
                                const std::string& params_json) {
    ScenarioSpec spec;
    spec.kind = scenario_kind_from_string(kind);
    spec.n = n;
    spec.seed = seed;
    nlohmann::json params = parse_json(params_json.empty() ? "{}" : params_json, "params");
    auto opt = [&](const char* key) -> std::optional<double> {
        if (params.contains(key) && !params.at(key).is_null()) return params.at(key).get<double>();
        return std::nullopt;
    };
    spec.gap = opt("gap");
    spec.proxy_strength = opt("proxy_strength");
    spec.protected_share = opt("protected_share");
    spec.observation_multiplier = opt("observation_multiplier");
    spec.mix_ratio = opt("mix_ratio");
    spec.hire_threshold = opt("hire_threshold");
    return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "discrimination-aware classification toolkit (C++ core)";

    py::register_exception<Error>(m, "FairauditError");

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("n", &Dataset::n)
        .def_property_readonly("s", [](const Dataset& d) { return d.s(); })
        .def_property_readonly("y", [](const Dataset& d) { return d.y(); })
        .def_property_readonly("weights", [](const Dataset& d) { return d.weights(); })
        .def("fingerprint", &Dataset::fingerprint)
        .def("write_csv", &Dataset::write_csv, py::arg("path"))
        .def("schema_json", [](const Dataset& d) { return dump12(d.schema().to_json()); });

    py::class_<LogisticModel>(m, "Model")
        .def("predict_proba", [](const LogisticModel& m_, const Dataset& d) {
            return m_.predict_proba_all(d);
        })
        .def("decide",
             [](const LogisticModel& m_, const Dataset& d, double threshold) {
                 return m_.decide_all(d, threshold);
             },
             py::arg("dataset"), py::arg("threshold") = 0.5)
        .def("save", &LogisticModel::save, py::arg("path"))
        .def("to_json", [](const LogisticModel& m_) { return m_.serialize(); })
        .def_property_readonly("converged", &LogisticModel::converged);

    m.def("load_csv", [](const std::string& path, const std::string& schema_json) {
        return Dataset::load_csv(path, Schema::from_json(parse_json(schema_json, "schema")));
    });
    m.def("load_model", &LogisticModel::load, py::arg("path"));

    m.def("split",
          [](const Dataset& d, double holdout_fraction, std::uint64_t seed) {
              auto [train_part, holdout] = split(d, holdout_fraction, seed);
              return py::make_tuple(train_part, holdout);
          },
          py::arg("dataset"), py::arg("holdout_fraction"), py::arg("seed") = 0);

    m.def("generate_scenario",
          [](const std::string& kind, std::size_t n, std::uint64_t seed,
             const std::string& params_json) {
              GeneratedScenario g = generate(scenario_spec_from(kind, n, seed, params_json));
              return py::make_tuple(g.dataset, canonical_dump(g.sidecar, 17));
          },
          py::arg("kind"), py::arg("n") = 1000, py::arg("seed") = 0, py::arg("params") = "");

    // metrics ----------------------------------------------------------------
    m.def("mean_difference", [](const Dataset& d, const py::object& outcome) {
        return dump12(mean_difference(d, outcome_from(outcome)).to_json());
    }, py::arg("dataset"), py::arg("outcome") = "label");
    m.def("normalized_mean_difference", [](const Dataset& d, const py::object& outcome) {
        return dump12(normalized_mean_difference(d, outcome_from(outcome)).to_json());
    }, py::arg("dataset"), py::arg("outcome") = "label");
    m.def("conditional_mean_difference",
          [](const Dataset& d, const py::object& outcome, const std::string& strat) {
              return dump12(
                  conditional_mean_difference(d, outcome_from(outcome), strat_from(strat))
                      .to_json());
          },
          py::arg("dataset"), py::arg("outcome"), py::arg("stratification"));
    m.def("unexplained_difference",
          [](const Dataset& d, const py::object& outcome, const std::string& strat) {
              return dump12(
                  unexplained_difference(d, outcome_from(outcome), strat_from(strat)).to_json());
          },
          py::arg("dataset"), py::arg("outcome"), py::arg("stratification"));
    m.def("regression_test", [](const Dataset& d, const py::object& outcome) {
        return dump12(regression_test(d, outcome_from(outcome)).to_json());
    }, py::arg("dataset"), py::arg("outcome") = "label");
    m.def("knn_situation_test",
          [](const Dataset& d, const py::object& outcome, int k, double t) {
              return dump12(knn_situation_test(d, outcome_from(outcome), k, t).to_json());
          },
          py::arg("dataset"), py::arg("outcome"), py::arg("k"), py::arg("t"));
    m.def("propensity_stratified_difference",
          [](const Dataset& d, const py::object& outcome, int bins) {
              return dump12(
                  propensity_stratified_difference(d, outcome_from(outcome), bins).to_json());
          },
          py::arg("dataset"), py::arg("outcome") = "label", py::arg("bins") = 5);
    m.def("feature_protected_correlation", [](const Dataset& d) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : feature_protected_correlation(d)) out.push_back(r.to_json());
        return dump12(out);
    });
    m.def("support_report", [](const Dataset& d, int depth) {
        return dump12(support_report(d, depth).to_json());
    }, py::arg("dataset"), py::arg("conjunction_depth") = 0);

    // model ------------------------------------------------------------------
    m.def("train", [](const Dataset& d, const std::string& hyper_json) {
        return train(d, Hyperparams::from_json(parse_json(hyper_json.empty() ? "{}" : hyper_json,
                                                          "hyperparams")));
    }, py::arg("dataset"), py::arg("hyperparams") = "");
    m.def("evaluate", [](const LogisticModel& model, const Dataset& d, double threshold) {
        return dump12(evaluate(model, d, threshold).to_json());
    }, py::arg("model"), py::arg("dataset"), py::arg("threshold") = 0.5);
    m.def("cost_threshold", &cost_threshold, py::arg("cost_fp"), py::arg("cost_fn"));

    m.def("flip_audit", [](const LogisticModel& model, const Dataset& d, double threshold) {
        return dump12(flip_audit(probability_fn(model), d, threshold).to_json());
    }, py::arg("model"), py::arg("dataset"), py::arg("threshold") = 0.5);

    // mitigation ---------------------------------------------------------
    m.def("reweight", [](const Dataset& d) {
        auto [out, record] = reweight(d);
        return py::make_tuple(out, dump12(record.to_json()));
    });
    m.def("resample", [](const Dataset& d, std::uint64_t seed) {
        auto [out, record] = resample(d, seed);
        return py::make_tuple(out, dump12(record.to_json()));
    }, py::arg("dataset"), py::arg("seed") = 0);
    m.def("massage", [](const Dataset& d) {
        auto [out, record] = massage(d);
        return py::make_tuple(out, dump12(record.to_json()));
    });
    m.def("group_thresholds",
          [](const LogisticModel& model, const Dataset& holdout, const std::string& target,
             double epsilon, double grid_step) {
              auto [pair, record] = group_thresholds(model, holdout,
                                                     threshold_target_from_string(target), epsilon,
                                                     grid_step);
              return dump12({{"thresholds", pair.to_json()}, {"record", record.to_json()}});
          },
          py::arg("model"), py::arg("holdout"), py::arg("target") = "demographic_parity",
          py::arg("epsilon") = 0.02, py::arg("grid_step") = 0.01);
    m.def("tune_fairness_weight",
          [](const Dataset& train_d, const Dataset& val_d, const std::vector<double>& grid,
             double max_accuracy_loss, const std::string& hyper_json) {
              Hyperparams base = Hyperparams::from_json(
                  parse_json(hyper_json.empty() ? "{}" : hyper_json, "hyperparams"));
              auto [result, record] =
                  tune_fairness_weight(train_d, val_d, grid, max_accuracy_loss, base);
              return dump12({{"chosen_hyperparams", result.chosen.to_json()},
                             {"record", record.to_json()}});
          },
          py::arg("train"), py::arg("val"), py::arg("eta_grid"),
          py::arg("max_accuracy_loss") = 0.05, py::arg("hyperparams") = "");

    // audit --------------------------------------------------------------
    m.def("audit_data",
          [](const Dataset& d, const std::string& config_json, std::uint64_t seed) {
              AuditConfig cfg = AuditConfig::from_json(parse_json(config_json, "audit config"));
              return render_report(audit_data(d, cfg, seed), "json");
          },
          py::arg("dataset"), py::arg("config"), py::arg("seed") = 0);
    m.def("audit_model",
          [](const LogisticModel& model, const Dataset& holdout, double threshold,
             const std::string& config_json, std::uint64_t seed) {
              AuditConfig cfg = AuditConfig::from_json(parse_json(config_json, "audit config"));
              return render_report(audit_model(model, holdout, threshold, cfg, seed), "json");
          },
          py::arg("model"), py::arg("holdout"), py::arg("threshold"), py::arg("config"),
          py::arg("seed") = 0);
    m.def("render_markdown", [](const std::string& report_json) {
        return render_report(AuditReport::from_json(parse_json(report_json, "report")), "markdown");
    });

    // simulator ------------------------------------------------------------
    m.def("run_feedback_sim", [](const std::string& config_json) {
        FeedbackSimConfig cfg = FeedbackSimConfig::from_json(parse_json(config_json, "sim config"));
        return dump12(run_feedback_sim(cfg).to_json());
    }, py::arg("config"));
}
