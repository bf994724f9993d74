// Command line surface for the fairaudit toolkit: data/model audits,
// training, mitigation, scenario generation, and the feedback simulator.
//
// Exit codes: 0 success / audit pass, 2 audit fail, 3 audit warn,
// 1 operational error. Outputs are written atomically (temp file + rename).

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fairaudit/audit.hpp"
#include "fairaudit/canonical_json.hpp"
#include "fairaudit/counterfactual.hpp"
#include "fairaudit/dataset.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/mitigate.hpp"
#include "fairaudit/model.hpp"
#include "fairaudit/scenarios.hpp"

namespace {

using namespace fairaudit;

void write_atomic(const std::string& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorCode::IoError, "cannot write " + tmp.string());
        out << bytes;
        require(out.good(), ErrorCode::IoError, "write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        fail(ErrorCode::IoError, "cannot move output into place: " + ec.message());
    }
}

std::string default_timestamp() {
    // Reports are byte-replayable, so wall-clock time is recorded only when
    // the caller opts in via SOURCE_DATE_EPOCH or --timestamp.
    const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
    if (!epoch) return "";
    char buf[32];
    std::time_t t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void emit_report(const AuditReport& report, const std::string& out_path,
                 const std::string& format) {
    std::string rendered = render_report(report, format);
    if (!out_path.empty()) {
        write_atomic(out_path, rendered);
    } else {
        std::cout << rendered;
    }
    std::cout << "verdict: " << to_string(report.verdict) << "\n";
}

void print_protected_notice() {
    std::cerr << "NOTICE: --include-protected feeds the protected attribute to the model.\n"
              << "Decisions that depend directly on protected-class membership are disparate\n"
              << "treatment and carry serious legal risk in many domains. This mode exists to\n"
              << "build demonstrations for the counterfactual flip audit.\n";
}

struct HyperFlags {
    Hyperparams params;

    void attach(CLI::App* cmd) {
        cmd->add_option("--l2", params.l2, "ridge penalty");
        cmd->add_option("--fairness", params.fairness, "fairness penalty weight (eta)");
        cmd->add_option("--cost-fp", params.cost_fp, "false positive cost");
        cmd->add_option("--cost-fn", params.cost_fn, "false negative cost");
        cmd->add_flag("--include-protected", params.include_protected,
                      "feed the protected attribute to the model (legal-risk notice applies)");
        cmd->add_option("--learning-rate", params.learning_rate, "gradient descent step size");
        cmd->add_option("--max-iters", params.max_iters, "iteration cap");
        cmd->add_option("--tolerance", params.tolerance, "gradient norm stop criterion");
    }
};

int run(int argc, char** argv) {
    CLI::App app{"discrimination-aware data and model auditing"};
    app.require_subcommand(1);

    std::string csv_path, schema_path, config_path, model_path, out_path, record_out;
    std::string format = "json";
    std::string timestamp;
    std::uint64_t seed = 0;

    // audit-data -------------------------------------------------------------
    auto* cmd_audit_data = app.add_subcommand("audit-data", "run the data-stage audit on a CSV");
    cmd_audit_data->add_option("csv", csv_path, "input CSV")->required();
    cmd_audit_data->add_option("--schema", schema_path, "schema JSON")->required();
    cmd_audit_data->add_option("--config", config_path, "audit config JSON")->required();
    cmd_audit_data->add_option("--out", out_path, "report output path");
    cmd_audit_data->add_option("--format", format, "json|md");
    cmd_audit_data->add_option("--seed", seed, "seed recorded in report metadata");
    cmd_audit_data->add_option("--timestamp", timestamp, "timestamp recorded in report metadata");

    // train ------------------------------------------------------------------
    auto* cmd_train = app.add_subcommand("train", "fit the logistic learner");
    std::string model_out;
    HyperFlags hyper;
    cmd_train->add_option("csv", csv_path, "training CSV")->required();
    cmd_train->add_option("--schema", schema_path, "schema JSON")->required();
    cmd_train->add_option("--model-out", model_out, "model output path")->required();
    cmd_train->add_option("--seed", seed, "seed recorded in the model");
    hyper.attach(cmd_train);

    // audit-model ------------------------------------------------------------
    auto* cmd_audit_model = app.add_subcommand("audit-model", "pre-deployment model audit");
    double threshold = 0.5;
    cmd_audit_model->add_option("model", model_path, "model JSON")->required();
    cmd_audit_model->add_option("csv", csv_path, "holdout CSV")->required();
    cmd_audit_model->add_option("--schema", schema_path, "schema JSON")->required();
    cmd_audit_model->add_option("--config", config_path, "audit config JSON")->required();
    cmd_audit_model->add_option("--threshold", threshold, "decision threshold");
    cmd_audit_model->add_option("--out", out_path, "report output path");
    cmd_audit_model->add_option("--format", format, "json|md");
    cmd_audit_model->add_option("--seed", seed, "seed recorded in report metadata");
    cmd_audit_model->add_option("--timestamp", timestamp, "timestamp recorded in report metadata");

    // mitigate ---------------------------------------------------------------
    auto* cmd_mitigate = app.add_subcommand("mitigate", "apply a mitigation method");
    std::string method, target_name = "demographic_parity", ranker_path;
    double epsilon = 0.02, grid_step = 0.01, max_accuracy_loss = 0.05, val_fraction = 0.3;
    std::string eta_grid_text = "0,1,10,100";
    HyperFlags tune_hyper;
    cmd_mitigate
        ->add_option("method", method,
                     "pre:reweight | pre:resample | pre:massage | post:thresholds | in:tune")
        ->required();
    cmd_mitigate->add_option("csv", csv_path, "input CSV")->required();
    cmd_mitigate->add_option("--schema", schema_path, "schema JSON")->required();
    cmd_mitigate->add_option("--out", out_path, "output path (CSV for pre:*, JSON otherwise)");
    cmd_mitigate->add_option("--record-out", record_out, "mitigation record JSON path");
    cmd_mitigate->add_option("--seed", seed, "seed for randomized methods");
    cmd_mitigate->add_option("--model", model_path, "trained model (post:thresholds)");
    cmd_mitigate->add_option("--ranker", ranker_path, "ranker model (pre:massage)");
    cmd_mitigate->add_option("--target", target_name,
                             "demographic_parity|equal_opportunity (post:thresholds)");
    cmd_mitigate->add_option("--epsilon", epsilon, "disparity tolerance (post:thresholds)");
    cmd_mitigate->add_option("--grid-step", grid_step, "threshold grid step (post:thresholds)");
    cmd_mitigate->add_option("--eta-grid", eta_grid_text, "comma separated eta grid (in:tune)");
    cmd_mitigate->add_option("--max-accuracy-loss", max_accuracy_loss,
                             "tolerated validation accuracy loss (in:tune)");
    cmd_mitigate->add_option("--val-fraction", val_fraction, "validation fraction (in:tune)");
    tune_hyper.attach(cmd_mitigate);

    // simulate ---------------------------------------------------------------
    auto* cmd_simulate = app.add_subcommand("simulate", "run the feedback-loop simulator");
    std::string sim_config_path, csv_out;
    cmd_simulate->add_option("sim-config", sim_config_path, "simulator config JSON")->required();
    cmd_simulate->add_option("--out", out_path, "series JSON output path");
    cmd_simulate->add_option("--csv-out", csv_out, "per-round CSV output path");

    // gen-scenario -----------------------------------------------------------
    auto* cmd_gen = app.add_subcommand("gen-scenario", "generate a synthetic scenario dataset");
    std::string kind_name, sidecar_path, schema_out;
    ScenarioSpec spec;
    double gap = -1, proxy_strength = -1, protected_share = -1, observation_multiplier = -1,
           mix_ratio = -1, hire_threshold = -1;
    cmd_gen->add_option("kind", kind_name, "scenario kind")->required();
    cmd_gen->add_option("--n", spec.n, "rows to generate");
    cmd_gen->add_option("--seed", seed, "generator seed");
    cmd_gen->add_option("--out", out_path, "dataset CSV path")->required();
    cmd_gen->add_option("--sidecar", sidecar_path, "ground-truth sidecar JSON path");
    cmd_gen->add_option("--schema-out", schema_out, "schema JSON path");
    cmd_gen->add_option("--gap", gap, "label/screening gap parameter");
    cmd_gen->add_option("--proxy-strength", proxy_strength, "redlining proxy strength");
    cmd_gen->add_option("--protected-share", protected_share, "protected population share");
    cmd_gen->add_option("--observation-multiplier", observation_multiplier,
                        "over-observation multiplier");
    cmd_gen->add_option("--mix-ratio", mix_ratio, "proxy-target mixture ratio");
    cmd_gen->add_option("--hire-threshold", hire_threshold, "censored-feedback screening cut");

    // render -----------------------------------------------------------------
    auto* cmd_render = app.add_subcommand("render", "re-render a report JSON");
    std::string report_path;
    cmd_render->add_option("report", report_path, "report JSON")->required();
    cmd_render->add_option("--format", format, "json|md")->required();
    cmd_render->add_option("--out", out_path, "output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            return app.exit(e);
        }
        std::cerr << e.what() << "\n";
        return 1;
    }

    if (timestamp.empty()) timestamp = default_timestamp();

    if (*cmd_audit_data) {
        Schema schema = Schema::load(schema_path);
        AuditConfig cfg = AuditConfig::load(config_path);
        Dataset d = Dataset::load_csv(csv_path, schema);
        AuditReport report = audit_data(d, cfg, seed, timestamp);
        emit_report(report, out_path, format);
        return verdict_exit_code(report.verdict);
    }

    if (*cmd_train) {
        Schema schema = Schema::load(schema_path);
        Dataset d = Dataset::load_csv(csv_path, schema);
        hyper.params.seed = seed;
        if (hyper.params.include_protected) print_protected_notice();
        LogisticModel m = train(d, hyper.params);
        write_atomic(model_out, m.serialize());
        std::cout << "trained: converged=" << (m.converged() ? "yes" : "no")
                  << " nll=" << m.loss().nll << "\n";
        return 0;
    }

    if (*cmd_audit_model) {
        Schema schema = Schema::load(schema_path);
        AuditConfig cfg = AuditConfig::load(config_path);
        Dataset d = Dataset::load_csv(csv_path, schema);
        LogisticModel m = LogisticModel::load(model_path);
        AuditReport report = audit_model(m, d, threshold, cfg, seed, timestamp);
        emit_report(report, out_path, format);
        return verdict_exit_code(report.verdict);
    }

    if (*cmd_mitigate) {
        Schema schema = Schema::load(schema_path);
        Dataset d = Dataset::load_csv(csv_path, schema);

        auto emit_record = [&](const MitigationRecord& record) {
            std::string bytes = canonical_dump(record.to_json(), 12, 2);
            if (!record_out.empty()) {
                write_atomic(record_out, bytes);
            } else {
                std::cerr << bytes << "\n";
            }
        };

        if (method == "pre:reweight" || method == "pre:resample" || method == "pre:massage") {
            require(!out_path.empty(), ErrorCode::InvalidParam,
                    "--out is required for pre-processing methods");
            std::pair<Dataset, MitigationRecord> result = [&] {
                if (method == "pre:reweight") return reweight(d);
                if (method == "pre:resample") return resample(d, seed);
                if (!ranker_path.empty()) {
                    LogisticModel ranker = LogisticModel::load(ranker_path);
                    return massage(d, &ranker);
                }
                return massage(d);
            }();
            write_atomic(out_path, csv::format(result.first.to_table()));
            result.second.seed = seed;
            emit_record(result.second);
            std::cout << "mitigated: " << method << " changed "
                      << result.second.rows_or_weights_changed << " rows/weights\n";
            return 0;
        }
        if (method == "post:thresholds") {
            require(!model_path.empty(), ErrorCode::InvalidParam,
                    "--model is required for post:thresholds");
            LogisticModel m = LogisticModel::load(model_path);
            auto [pair, record] = group_thresholds(m, d, threshold_target_from_string(target_name),
                                                   epsilon, grid_step);
            nlohmann::json doc{{"thresholds", pair.to_json()}, {"record", record.to_json()}};
            if (!out_path.empty()) {
                write_atomic(out_path, canonical_dump(doc, 12, 2));
            } else {
                std::cout << canonical_dump(doc, 12, 2);
            }
            std::cout << "thresholds: protected=" << pair.threshold_protected
                      << " favored=" << pair.threshold_favored
                      << (pair.feasible ? "" : " (infeasible)") << "\n";
            return 0;
        }
        if (method == "in:tune") {
            std::vector<double> grid;
            std::stringstream ss(eta_grid_text);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) grid.push_back(std::stod(item));
            }
            if (tune_hyper.params.include_protected) print_protected_notice();
            tune_hyper.params.seed = seed;
            auto [train_part, val_part] = split(d, val_fraction, seed);
            auto [result, record] =
                tune_fairness_weight(train_part, val_part, grid, max_accuracy_loss,
                                     tune_hyper.params);
            nlohmann::json doc{{"chosen_hyperparams", result.chosen.to_json()},
                               {"record", record.to_json()}};
            if (!out_path.empty()) {
                write_atomic(out_path, canonical_dump(doc, 12, 2));
            } else {
                std::cout << canonical_dump(doc, 12, 2);
            }
            std::cout << "chosen eta: " << result.chosen.fairness << "\n";
            return 0;
        }
        fail(ErrorCode::InvalidParam, "unknown mitigation method '" + method + "'");
    }

    if (*cmd_simulate) {
        FeedbackSimConfig cfg = FeedbackSimConfig::load(sim_config_path);
        SimSeries series = run_feedback_sim(cfg);
        std::string bytes = canonical_dump(series.to_json(), 12, 2);
        if (!out_path.empty()) {
            write_atomic(out_path, bytes);
        } else {
            std::cout << bytes;
        }
        if (!csv_out.empty()) write_atomic(csv_out, csv::format(series.to_csv()));
        std::cout << "simulated " << series.rounds.size() << " rounds; final disparity "
                  << series.rounds.back().disparity << "\n";
        return 0;
    }

    if (*cmd_gen) {
        spec.kind = scenario_kind_from_string(kind_name);
        spec.seed = seed;
        if (gap >= 0) spec.gap = gap;
        if (proxy_strength >= 0) spec.proxy_strength = proxy_strength;
        if (protected_share >= 0) spec.protected_share = protected_share;
        if (observation_multiplier >= 0) spec.observation_multiplier = observation_multiplier;
        if (mix_ratio >= 0) spec.mix_ratio = mix_ratio;
        if (hire_threshold >= 0) spec.hire_threshold = hire_threshold;
        GeneratedScenario g = generate(spec);
        write_atomic(out_path, csv::format(g.dataset.to_table()));
        if (sidecar_path.empty()) {
            // every generated dataset ships with its ground truth
            sidecar_path =
                std::filesystem::path(out_path).replace_extension(".sidecar.json").string();
        }
        write_atomic(sidecar_path, canonical_dump(g.sidecar, 17, 2));
        if (!schema_out.empty()) {
            write_atomic(schema_out, canonical_dump(g.dataset.schema().to_json(), 17, 2));
        }
        std::cout << "generated " << g.dataset.n() << " rows of " << kind_name << "\n";
        return 0;
    }

    if (*cmd_render) {
        AuditReport report = AuditReport::load(report_path);
        std::string rendered = render_report(report, format);
        if (!out_path.empty()) {
            write_atomic(out_path, rendered);
        } else {
            std::cout << rendered;
        }
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const fairaudit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
