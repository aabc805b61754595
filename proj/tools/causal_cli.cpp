// Command-line front end: runs the stratify/diagnose/match/estimate pipeline
// as subcommands over a run directory, enforcing step order and the outcome
// escrow, and writing every report as CSV/JSON artifacts.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "causal/csv.hpp"
#include "causal/dataset.hpp"
#include "causal/design.hpp"
#include "causal/digest.hpp"
#include "causal/effects.hpp"
#include "causal/errors.hpp"
#include "causal/matching.hpp"
#include "causal/propensity.hpp"
#include "causal/simulate.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace causal;

namespace {

// Exit codes, also documented in --help:
//   0 ok, 1 internal error, 2 missing prerequisite step, 3 provenance
//   (digest) mismatch, 4 escrow violation, 5 schema/validation error,
//   6 design not ready (balance gate), 7 statistical infeasibility
//   (support/binning/config/singular), 8 file i/o error.
constexpr int kExitInternal = 1;
constexpr int kExitPrerequisite = 2;
constexpr int kExitProvenance = 3;
constexpr int kExitEscrow = 4;
constexpr int kExitValidation = 5;
constexpr int kExitDesignNotReady = 6;
constexpr int kExitInfeasible = 7;
constexpr int kExitIo = 8;

struct PrerequisiteError : Error {
    using Error::Error;
};

// Pipeline defaults and their provenance. bins=10 follows the decile
// subclassification convention, |smd|<=0.1 is the common applied balance
// standard, k=10 mirrors the case study's one-to-ten matching, the caliper
// constant is convention, and the tiny ridge guarantees a finite maximizer
// under separation.
struct Defaults {
    int bins = 10;
    double threshold = 0.1;
    int k = 10;
    double caliper = MatchSpec::kCaliperAuto;  // resolves to 0.2 * sd(lp)
    double ridge = 1e-6;
    int max_iter = 50;
    double tol = 1e-8;
    std::string method = "greedy";
    std::string direction = "both";
    bool replacement = false;
    bool within_bins = false;
    int threads = 1;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + p.string());
    out << content;
    if (!out) throw IoError("write failed: " + p.string());
}

Defaults load_defaults(const std::string& config_path) {
    Defaults d;
    if (config_path.empty()) return d;
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(config_path));
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid config json: ") + e.what());
    }
    d.bins = j.value("bins", d.bins);
    d.threshold = j.value("threshold", d.threshold);
    d.k = j.value("k", d.k);
    d.caliper = j.value("caliper", d.caliper);
    d.ridge = j.value("ridge", d.ridge);
    d.max_iter = j.value("max_iter", d.max_iter);
    d.tol = j.value("tol", d.tol);
    d.method = j.value("method", d.method);
    d.direction = j.value("direction", d.direction);
    d.replacement = j.value("replacement", d.replacement);
    d.within_bins = j.value("within_bins", d.within_bins);
    d.threads = j.value("threads", d.threads);
    return d;
}

std::string now_iso8601() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Append-only step log. Timestamps are audit metadata; every data artifact
// the steps write is byte-deterministic.
class Manifest {
public:
    explicit Manifest(const fs::path& run_dir) : path_(run_dir / "manifest.json") {
        if (fs::exists(path_)) {
            json_ = ordered_json::parse(read_file(path_));
        } else {
            json_["steps"] = ordered_json::array();
        }
    }

    bool has_step(const std::string& step) const {
        for (const auto& s : json_["steps"]) {
            if (s.at("step").get<std::string>() == step) return true;
        }
        return false;
    }

    void require(const std::string& step, const std::string& wanted_by) const {
        if (!has_step(step)) {
            throw PrerequisiteError("step '" + wanted_by + "' needs '" + step +
                                    "' to have run first in this run directory");
        }
    }

    void record(const std::string& step, ordered_json inputs, ordered_json outputs,
                ordered_json config) {
        ordered_json entry;
        entry["seq"] = json_["steps"].size() + 1;
        entry["step"] = step;
        entry["timestamp"] = now_iso8601();
        entry["inputs"] = std::move(inputs);
        entry["outputs"] = std::move(outputs);
        entry["config"] = std::move(config);
        json_["steps"].push_back(std::move(entry));
        write_file(path_, json_.dump(2) + "\n");
    }

    // Deterministic one-line summaries (no timestamps) for design history.
    std::vector<std::string> history_lines() const {
        std::vector<std::string> out;
        for (const auto& s : json_["steps"]) {
            std::string line = "step " + std::to_string(s.at("seq").get<int>()) + ": " +
                               s.at("step").get<std::string>();
            if (s.contains("config") && s["config"].contains("summary")) {
                line += " (" + s["config"]["summary"].get<std::string>() + ")";
            }
            out.push_back(std::move(line));
        }
        return out;
    }

private:
    fs::path path_;
    ordered_json json_;
};

struct RunContext {
    fs::path dir;

    fs::path file(const char* name) const { return dir / name; }
};

LoadResult load_run_dataset(const RunContext& run) {
    auto meta = ordered_json::parse(read_file(run.file("meta.json")));
    CovariateSchema schema = CovariateSchema::from_json(read_file(run.file("schema.json")));
    LoadOptions opts;
    if (meta.contains("id_column") && !meta["id_column"].is_null()) {
        opts.id_column = meta["id_column"].get<std::string>();
    }
    return load_dataset(run.file("data.csv").string(), schema,
                        meta.at("outcome_column").get<std::string>(),
                        meta.at("treatment_column").get<std::string>(), opts);
}

ScoreTable rescore(const RunContext& run, const Dataset& ds, int threads) {
    PropensityModel model = PropensityModel::from_json(read_file(run.file("model.json")));
    if (model.dataset_digest != ds.digest()) {
        throw ProvenanceError("model.json was fitted on a different dataset");
    }
    return score(model, ds, threads);
}

MatchSet load_match_set(const RunContext& run, const Dataset& ds) {
    auto summary = ordered_json::parse(read_file(run.file("match.json")));
    MatchSet ms;
    ms.dataset_digest = summary.at("dataset_digest").get<std::string>();
    ms.resolved_caliper = summary.at("resolved_caliper").get<double>();
    ms.total_distance = summary.at("total_distance").get<double>();

    std::map<std::string, int> arm;
    for (std::size_t i = 0; i < ds.n_units(); ++i) arm[ds.unit_id(i)] = ds.z(i);

    CsvTable table = parse_csv(read_file(run.file("matches.csv")));
    long last_group = -1;
    for (const auto& row : table.rows) {
        long gi = std::stol(row[3]);
        if (gi != last_group) {
            MatchGroup g;
            g.focal_id = row[0];
            auto it = arm.find(g.focal_id);
            if (it == arm.end()) {
                throw ProvenanceError("matches.csv references unknown unit " + g.focal_id);
            }
            g.focal_z = it->second;
            ms.groups.push_back(std::move(g));
            last_group = gi;
        }
        ms.groups.back().clone_ids.push_back(row[1]);
        ms.groups.back().distances.push_back(std::stod(row[2]));
    }
    return ms;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const PrerequisiteError*>(&e)) return kExitPrerequisite;
    if (dynamic_cast<const ProvenanceError*>(&e)) return kExitProvenance;
    if (dynamic_cast<const EscrowViolation*>(&e)) return kExitEscrow;
    if (dynamic_cast<const SchemaError*>(&e)) return kExitValidation;
    if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
    if (dynamic_cast<const DesignNotReadyError*>(&e)) return kExitDesignNotReady;
    if (dynamic_cast<const SupportError*>(&e)) return kExitInfeasible;
    if (dynamic_cast<const BinningError*>(&e)) return kExitInfeasible;
    if (dynamic_cast<const SingularSystemError*>(&e)) return kExitInfeasible;
    if (dynamic_cast<const ConfigError*>(&e)) return kExitInfeasible;
    if (dynamic_cast<const EvaluationError*>(&e)) return kExitInfeasible;
    if (dynamic_cast<const IoError*>(&e)) return kExitIo;
    return kExitInternal;
}

const char* error_class(const std::exception& e) {
    if (dynamic_cast<const PrerequisiteError*>(&e)) return "prerequisite";
    if (dynamic_cast<const ProvenanceError*>(&e)) return "provenance";
    if (dynamic_cast<const EscrowViolation*>(&e)) return "escrow";
    if (dynamic_cast<const SchemaError*>(&e)) return "schema";
    if (dynamic_cast<const ValidationError*>(&e)) return "validation";
    if (dynamic_cast<const DesignNotReadyError*>(&e)) return "design-not-ready";
    if (dynamic_cast<const SupportError*>(&e)) return "support";
    if (dynamic_cast<const BinningError*>(&e)) return "binning";
    if (dynamic_cast<const SingularSystemError*>(&e)) return "singular-system";
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const EvaluationError*>(&e)) return "evaluation";
    if (dynamic_cast<const IoError*>(&e)) return "io";
    return "internal";
}

MatchSpec build_match_spec(const Defaults& d) {
    MatchSpec spec;
    if (d.method == "greedy") {
        spec.method = MatchMethod::greedy;
    } else if (d.method == "optimal") {
        spec.method = MatchMethod::optimal;
    } else {
        throw ConfigError("method must be greedy or optimal");
    }
    spec.k = d.k;
    spec.caliper = d.caliper;
    spec.replacement = d.replacement;
    spec.within_bins = d.within_bins;
    if (d.direction == "treated-focal") {
        spec.direction = MatchDirection::treated_focal;
    } else if (d.direction == "control-focal") {
        spec.direction = MatchDirection::control_focal;
    } else if (d.direction == "both") {
        spec.direction = MatchDirection::both;
    } else {
        throw ConfigError("direction must be treated-focal, control-focal or both");
    }
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "causal: unit-level effect estimation for a binary intervention via\n"
        "propensity-score stratification and clone matching.\n"
        "Pipeline order: load -> fit -> bin -> balance -> trim -> freeze ->\n"
        "match -> effects -> rank -> compare. Outcomes stay sealed in escrow\n"
        "until 'effects' releases them under the frozen design.\n"
        "Exit codes: 0 ok, 1 internal, 2 missing prerequisite, 3 provenance\n"
        "mismatch, 4 escrow violation, 5 schema/validation, 6 design not\n"
        "ready, 7 statistical infeasibility, 8 i/o."};
    app.require_subcommand(1);

    std::string run_dir, config_file;
    std::string data_file, schema_file, outcome_col, treatment_col, id_col;
    std::string binning = "quantile";
    std::string trim_rule = "arm-overlap";
    double lp_lo = 0.0, lp_hi = 0.0;
    bool override_balance = false;
    std::string list_a, list_b, realized_file, definition = "client-supplied";
    std::string preset, dgp_config, out_dir, truth_file;
    std::int64_t sim_n = -1;
    std::int64_t seed = -1;
    Defaults defaults;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--run-dir", run_dir, "Run directory")->required();
        cmd->add_option("--config", config_file,
                        "JSON file with pipeline defaults (flags override)");
    };

    auto* c_load = app.add_subcommand("load", "Validate and ingest a CSV dataset (step 1)");
    add_common(c_load);
    c_load->add_option("--data", data_file, "Input CSV")->required();
    c_load->add_option("--schema", schema_file, "Covariate schema JSON")->required();
    c_load->add_option("--outcome", outcome_col, "Outcome column")->required();
    c_load->add_option("--treatment", treatment_col, "Treatment column (0/1)")->required();
    c_load->add_option("--id-column", id_col, "Unit id column (default: unit_id if present)");

    auto* c_fit = app.add_subcommand("fit", "Fit the propensity model (step 3)");
    add_common(c_fit);
    c_fit->add_option("--ridge", defaults.ridge, "Ridge penalty (intercept unpenalized)");
    c_fit->add_option("--max-iter", defaults.max_iter, "IRLS iteration cap");
    c_fit->add_option("--tol", defaults.tol, "Gradient max-norm tolerance");
    c_fit->add_option("--threads", defaults.threads, "Scoring threads");

    auto* c_bin = app.add_subcommand("bin", "Stratify units on the linear propensity (step 4)");
    add_common(c_bin);
    c_bin->add_option("--bins", defaults.bins, "Number of bins");
    c_bin->add_option("--binning", binning, "quantile | fixed-width");

    auto* c_balance = app.add_subcommand("balance", "Within-bin covariate balance (step 5)");
    add_common(c_balance);
    c_balance->add_option("--threshold", defaults.threshold, "|smd| threshold");

    auto* c_trim = app.add_subcommand("trim", "Drop units off common support (step 5)");
    add_common(c_trim);
    c_trim->add_option("--trim-rule", trim_rule, "arm-overlap | lp-window");
    c_trim->add_option("--lp-lo", lp_lo, "lp window lower bound");
    c_trim->add_option("--lp-hi", lp_hi, "lp window upper bound");

    auto* c_freeze = app.add_subcommand("freeze", "Freeze the study design");
    add_common(c_freeze);
    c_freeze->add_flag("--override-balance", override_balance,
                       "Freeze even though balance failed (recorded)");

    auto* c_match = app.add_subcommand("match", "Build clone groups (step 6)");
    add_common(c_match);
    c_match->add_option("--k", defaults.k, "Clones per focal unit");
    c_match->add_option("--caliper", defaults.caliper,
                        "Max |lp| gap (omit for 0.2*sd(lp); inf disables)");
    c_match->add_option("--method", defaults.method, "greedy | optimal");
    c_match->add_option("--direction", defaults.direction,
                        "treated-focal | control-focal | both");
    c_match->add_flag("--replacement", defaults.replacement, "Reuse clones across groups");
    c_match->add_flag("--within-bins", defaults.within_bins, "Match only inside bins");

    auto* c_effects = app.add_subcommand(
        "effects", "Release escrow under the frozen design and difference clones (step 7)");
    add_common(c_effects);

    auto* c_rank = app.add_subcommand("rank", "Decile targeting list of untreated units");
    add_common(c_rank);

    auto* c_compare = app.add_subcommand("compare", "Decile-by-decile list comparison");
    add_common(c_compare);
    c_compare->add_option("--list-a", list_a, "First list CSV (default: run target list)");
    c_compare->add_option("--list-b", list_b, "Second list CSV")->required();
    c_compare->add_option("--realized", realized_file, "CSV with unit_id,realized columns")
        ->required();
    c_compare->add_option("--definition", definition, "How the realized values were defined");

    auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic population with truth");
    c_sim->add_option("--preset", preset, "ferrari | doctors | balanced | randomized");
    c_sim->add_option("--dgp", dgp_config, "DGP config JSON (alternative to --preset)");
    c_sim->add_option("--n", sim_n, "Override population size");
    c_sim->add_option("--seed", seed, "RNG seed");
    c_sim->add_option("--out", out_dir, "Output directory")->required();

    auto* c_eval = app.add_subcommand("evaluate", "Score effects against a truth file");
    add_common(c_eval);
    c_eval->add_option("--truth", truth_file, "truth.csv from simulate")->required();

    CLI11_PARSE(app, argc, argv);

    CLI::App* sub = app.get_subcommands().front();
    const std::string step = sub->get_name();

    try {
        if (!config_file.empty()) {
            Defaults file_defaults = load_defaults(config_file);
            // Flags beat the config file: only adopt file values for options
            // the user did not pass on the command line.
            auto merge = [&](const char* flag, auto& into, auto from) {
                auto* opt = sub->get_option_no_throw(flag);
                if (opt == nullptr || opt->count() == 0) into = from;
            };
            merge("--bins", defaults.bins, file_defaults.bins);
            merge("--threshold", defaults.threshold, file_defaults.threshold);
            merge("--k", defaults.k, file_defaults.k);
            merge("--caliper", defaults.caliper, file_defaults.caliper);
            merge("--ridge", defaults.ridge, file_defaults.ridge);
            merge("--max-iter", defaults.max_iter, file_defaults.max_iter);
            merge("--tol", defaults.tol, file_defaults.tol);
            merge("--method", defaults.method, file_defaults.method);
            merge("--direction", defaults.direction, file_defaults.direction);
            merge("--replacement", defaults.replacement, file_defaults.replacement);
            merge("--within-bins", defaults.within_bins, file_defaults.within_bins);
            merge("--threads", defaults.threads, file_defaults.threads);
        }

        if (step == "simulate") {
            DgpConfig cfg;
            if (!preset.empty()) {
                cfg = preset_config(preset);
            } else if (!dgp_config.empty()) {
                cfg = DgpConfig::from_json(read_file(dgp_config));
            } else {
                throw ConfigError("simulate needs --preset or --dgp");
            }
            if (sim_n > 0) cfg.n = sim_n;
            if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
            SimulatedPopulation pop = generate(cfg);
            fs::create_directories(out_dir);
            write_file(fs::path(out_dir) / "data.csv", pop.data_csv());
            write_file(fs::path(out_dir) / "truth.csv", pop.truth.to_csv());
            write_file(fs::path(out_dir) / "dgp.json", cfg.to_json());
            std::printf("simulated %zu units (%zu treated) into %s\n", pop.ids.size(),
                        static_cast<std::size_t>(std::count(pop.z.begin(), pop.z.end(), 1)),
                        out_dir.c_str());
            return 0;
        }

        RunContext run{fs::path(run_dir)};
        fs::create_directories(run.dir);
        Manifest manifest(run.dir);

        if (step == "load") {
            CovariateSchema schema = CovariateSchema::from_json(read_file(schema_file));
            LoadOptions opts;
            if (!id_col.empty()) opts.id_column = id_col;
            std::string raw = read_file(data_file);
            LoadResult result = load_dataset_text(raw, schema, outcome_col, treatment_col, opts);
            write_file(run.file("data.csv"), raw);
            write_file(run.file("schema.json"), result.resolved_schema.to_json());
            write_file(run.file("rejections.csv"), rejections_to_csv(result.rejections));
            ordered_json meta;
            meta["outcome_column"] = outcome_col;
            meta["treatment_column"] = treatment_col;
            if (!id_col.empty()) meta["id_column"] = id_col;
            meta["dataset_digest"] = result.dataset.digest();
            meta["n_units"] = result.dataset.n_units();
            meta["n_rejected"] = result.rejections.size();
            write_file(run.file("meta.json"), meta.dump(2) + "\n");
            manifest.record(
                "load", {{"data", result.dataset.digest()}},
                {{"data.csv", result.dataset.digest()},
                 {"schema.json", digest_bytes(result.resolved_schema.to_json())}},
                {{"outcome", outcome_col},
                 {"treatment", treatment_col},
                 {"summary", "n=" + std::to_string(result.dataset.n_units()) + " rejected=" +
                                 std::to_string(result.rejections.size())}});
            std::printf("loaded %zu units (%zu treated), rejected %zu rows; escrow sealed\n",
                        result.dataset.n_units(), result.dataset.n_treated(),
                        result.rejections.size());
            return 0;
        }

        manifest.require("load", step);
        if (step == "fit") {
            LoadResult lr = load_run_dataset(run);
            FitOptions fo{defaults.ridge, defaults.max_iter, defaults.tol};
            PropensityModel model = fit_propensity(lr.dataset, fo);
            ScoreTable scores = score(model, lr.dataset, defaults.threads);
            write_file(run.file("model.json"), model.to_json());
            write_file(run.file("scores.csv"), scores.to_csv());
            manifest.record("fit", {{"data.csv", lr.dataset.digest()}},
                            {{"model.json", model.digest()},
                             {"scores.csv", digest_bytes(scores.to_csv())}},
                            {{"ridge", defaults.ridge},
                             {"max_iter", defaults.max_iter},
                             {"tol", defaults.tol},
                             {"summary", std::string("converged=") +
                                             (model.converged ? "yes" : "no") + " iterations=" +
                                             std::to_string(model.iterations)}});
            std::printf("fit %s in %d iterations (gradient max-norm %s)%s\n",
                        model.converged ? "converged" : "did NOT converge", model.iterations,
                        format_double(model.final_gradient_norm).c_str(),
                        model.converged ? "" : (": " + model.message).c_str());
            return 0;
        }

        if (step == "bin") {
            manifest.require("fit", step);
            LoadResult lr = load_run_dataset(run);
            ScoreTable scores = rescore(run, lr.dataset, defaults.threads);
            BinMethod method;
            if (binning == "quantile") {
                method = BinMethod::quantile;
            } else if (binning == "fixed-width") {
                method = BinMethod::fixed_width;
            } else {
                throw ConfigError("binning must be quantile or fixed-width");
            }
            BinPlan plan = assign_bins(scores, defaults.bins, method);
            write_file(run.file("bin_plan.json"), plan.to_json());
            manifest.record("bin", {{"scores", digest_bytes(scores.to_csv())}},
                            {{"bin_plan.json", digest_bytes(plan.to_json())}},
                            {{"bins", defaults.bins},
                             {"method", binning},
                             {"summary", "bins=" + std::to_string(plan.n_bins())}});
            std::printf("assigned %zu units to %d %s bins\n", plan.unit_ids.size(),
                        plan.n_bins(), binning.c_str());
            return 0;
        }

        if (step == "balance") {
            manifest.require("bin", step);
            LoadResult lr = load_run_dataset(run);
            BinPlan plan = BinPlan::from_json(read_file(run.file("bin_plan.json")));
            BalanceReport report = balance_report(lr.dataset, plan, defaults.threshold);
            write_file(run.file("balance.csv"), report.to_csv());
            ordered_json summary;
            summary["threshold"] = report.threshold;
            summary["worst_abs_smd"] = report.worst_abs_smd;
            summary["balanced"] = report.balanced;
            summary["empty_arm_bins"] = report.empty_arm_bins;
            summary["dataset_digest"] = report.dataset_digest;
            write_file(run.file("balance.json"), summary.dump(2) + "\n");
            manifest.record("balance", {{"bin_plan", digest_bytes(plan.to_json())}},
                            {{"balance.csv", digest_bytes(report.to_csv())}},
                            {{"threshold", defaults.threshold},
                             {"summary", "worst=" + format_double(report.worst_abs_smd) +
                                             (report.balanced ? " balanced" : " NOT balanced")}});

            // Per-bin table: worst |smd| across covariates.
            std::printf("bin  n_treated  n_control  worst|smd|\n");
            for (int b = 0; b < plan.n_bins(); ++b) {
                std::int64_t nt = 0, nc = 0;
                double worst = 0.0;
                bool empty_arm = false;
                for (const auto& cell : report.cells) {
                    if (cell.bin != b) continue;
                    nt = cell.n_treated;
                    nc = cell.n_control;
                    if (cell.one_arm_empty) {
                        empty_arm = true;
                    } else {
                        worst = std::max(worst, std::abs(cell.smd));
                    }
                }
                std::printf("%3d  %9lld  %9lld  %s\n", b, static_cast<long long>(nt),
                            static_cast<long long>(nc),
                            empty_arm ? "(one arm empty)" : format_double(worst).c_str());
            }
            std::printf("%s: worst within-bin |smd| %s vs threshold %s\n",
                        report.balanced ? "balanced" : "NOT balanced",
                        format_double(report.worst_abs_smd).c_str(),
                        format_double(report.threshold).c_str());
            return 0;
        }

        if (step == "trim") {
            manifest.require("balance", step);
            LoadResult lr = load_run_dataset(run);
            ScoreTable scores = rescore(run, lr.dataset, defaults.threads);
            TrimDecision trim;
            if (trim_rule == "arm-overlap") {
                trim = trim_support(scores, TrimRule::arm_overlap);
            } else if (trim_rule == "lp-window") {
                trim = trim_support(scores, TrimRule::lp_window, lp_lo, lp_hi);
            } else {
                throw ConfigError("trim rule must be arm-overlap or lp-window");
            }
            write_file(run.file("trim.csv"), trim.to_csv());
            ordered_json tj;
            tj["rule"] = trim_rule;
            tj["support_lo"] = trim.support_lo;
            tj["support_hi"] = trim.support_hi;
            tj["n_retained"] = trim.retained_ids.size();
            tj["n_dropped"] = trim.dropped.size();
            tj["dataset_digest"] = trim.dataset_digest;
            write_file(run.file("trim.json"), tj.dump(2) + "\n");
            manifest.record("trim", {{"scores", digest_bytes(scores.to_csv())}},
                            {{"trim.csv", digest_bytes(trim.to_csv())}},
                            {{"rule", trim_rule},
                             {"summary", "retained=" + std::to_string(trim.retained_ids.size()) +
                                             " dropped=" + std::to_string(trim.dropped.size())}});
            std::printf("support [%s, %s]: retained %zu, dropped %zu\n",
                        format_double(trim.support_lo).c_str(),
                        format_double(trim.support_hi).c_str(), trim.retained_ids.size(),
                        trim.dropped.size());
            return 0;
        }

        if (step == "freeze") {
            manifest.require("trim", step);
            LoadResult lr = load_run_dataset(run);
            PropensityModel model =
                PropensityModel::from_json(read_file(run.file("model.json")));
            BinPlan plan = BinPlan::from_json(read_file(run.file("bin_plan.json")));
            double threshold = ordered_json::parse(read_file(run.file("balance.json")))
                                   .at("threshold")
                                   .get<double>();
            BalanceReport balance = balance_report(lr.dataset, plan, threshold);
            auto tj = ordered_json::parse(read_file(run.file("trim.json")));
            ScoreTable scores = rescore(run, lr.dataset, defaults.threads);
            TrimDecision trim =
                tj.at("rule").get<std::string>() == "arm-overlap"
                    ? trim_support(scores, TrimRule::arm_overlap)
                    : trim_support(scores, TrimRule::lp_window,
                                   tj.at("support_lo").get<double>(),
                                   tj.at("support_hi").get<double>());
            DesignReport design = freeze_design(model, plan, balance, trim, override_balance,
                                                manifest.history_lines());
            write_file(run.file("design.json"), design.to_json());
            manifest.record("freeze", {{"model.json", model.digest()}},
                            {{"design.json", design.digest()}},
                            {{"override", override_balance},
                             {"summary", std::string("frozen") +
                                             (design.override_used ? " (override)" : "")}});
            std::printf("design frozen (digest %s)%s\n", design.digest().c_str(),
                        design.override_used ? " with balance override recorded" : "");
            return 0;
        }

        if (step == "match") {
            manifest.require("freeze", step);
            LoadResult lr = load_run_dataset(run);
            DesignReport design = DesignReport::from_json(read_file(run.file("design.json")));
            if (design.dataset_digest != lr.dataset.digest()) {
                throw ProvenanceError("design.json references a different dataset");
            }
            ScoreTable scores = rescore(run, lr.dataset, defaults.threads);
            MatchSpec spec = build_match_spec(defaults);
            MatchSet ms = match(scores, design.trim, spec, &design.plan);
            write_file(run.file("matches.csv"), ms.to_csv());
            write_file(run.file("unmatched.csv"), ms.unmatched_csv());
            ordered_json mj;
            mj["method"] = defaults.method;
            mj["k"] = spec.k;
            mj["resolved_caliper"] = ms.resolved_caliper;
            mj["replacement"] = spec.replacement;
            mj["direction"] = defaults.direction;
            mj["within_bins"] = spec.within_bins;
            mj["n_groups"] = ms.groups.size();
            mj["n_pairs"] = ms.n_pairs();
            mj["n_unmatched"] = ms.unmatched.size();
            mj["total_distance"] = ms.total_distance;
            mj["dataset_digest"] = ms.dataset_digest;
            mj["design_digest"] = design.digest();
            write_file(run.file("match.json"), mj.dump(2) + "\n");
            manifest.record(
                "match", {{"design.json", design.digest()}},
                {{"matches.csv", digest_bytes(ms.to_csv())}},
                {{"method", defaults.method},
                 {"k", spec.k},
                 {"summary", "groups=" + std::to_string(ms.groups.size()) + " pairs=" +
                                 std::to_string(ms.n_pairs()) + " unmatched=" +
                                 std::to_string(ms.unmatched.size())}});
            std::printf("matched %zu focal units (%zu pairs, %zu unmatched), total distance %s\n",
                        ms.groups.size(), ms.n_pairs(), ms.unmatched.size(),
                        format_double(ms.total_distance).c_str());
            return 0;
        }

        if (step == "effects") {
            // Escrow gate first: without a frozen design the outcome column
            // stays sealed no matter which other steps are missing.
            if (!fs::exists(run.file("design.json"))) {
                throw EscrowViolation(
                    "outcomes are sealed: no frozen design in this run directory (run freeze)");
            }
            DesignReport design = DesignReport::from_json(read_file(run.file("design.json")));
            if (!design.frozen) {
                throw EscrowViolation("outcomes are sealed: design.json is not frozen");
            }
            manifest.require("match", step);
            LoadResult lr = load_run_dataset(run);
            Dataset released = release_escrow(lr.dataset, design);
            MatchSet ms = load_match_set(run, lr.dataset);
            EffectTable effects = unit_effects(ms, released);
            write_file(run.file("effects.csv"), effects.to_csv());
            manifest.record("effects", {{"matches.csv", digest_bytes(ms.to_csv())}},
                            {{"effects.csv", digest_bytes(effects.to_csv())}},
                            {{"escrow_released_under_design", design.digest()},
                             {"summary", "rows=" + std::to_string(effects.rows.size())}});
            bool has_treated = false;
            for (const auto& r : effects.rows) has_treated |= r.z == 1;
            if (has_treated) {
                AggregateResult att =
                    aggregate(effects, [](const EffectRow& r) { return r.z == 1; });
                std::printf("escrow released under design %s; ATT over %zu treated focals: "
                            "%s (sd %s)\n",
                            design.digest().c_str(), att.count,
                            format_double(att.mean).c_str(), format_double(att.sd).c_str());
            } else {
                std::printf("escrow released under design %s; %zu control-focal estimates\n",
                            design.digest().c_str(), effects.rows.size());
            }
            return 0;
        }

        if (step == "rank") {
            manifest.require("effects", step);
            CsvTable table = parse_csv(read_file(run.file("effects.csv")));
            EffectTable untreated;
            for (const auto& row : table.rows) {
                if (row[1] != "control") continue;
                untreated.rows.push_back({row[0], 0, std::stoi(row[2]), std::stod(row[3])});
            }
            if (untreated.rows.empty()) {
                throw SupportError("no control-focal effect estimates; run match with "
                                   "--direction control-focal or both");
            }
            TargetList list = build_target_list(untreated);
            write_file(run.file("target_list.csv"), list.to_csv());
            manifest.record(
                "rank", {{"effects.csv", digest_bytes(read_file(run.file("effects.csv")))}},
                {{"target_list.csv", digest_bytes(list.to_csv())}},
                {{"summary", "ranked=" + std::to_string(list.entries.size())}});
            std::printf("ranked %zu untreated units into deciles (10 = visit first)\n",
                        list.entries.size());
            return 0;
        }

        if (step == "compare") {
            std::string a_path = list_a.empty() ? run.file("target_list.csv").string() : list_a;
            if (list_a.empty()) manifest.require("rank", step);
            TargetList a = TargetList::from_csv(read_file(a_path));
            TargetList b = TargetList::from_csv(read_file(list_b));
            CsvTable rt = parse_csv(read_file(realized_file));
            int id_idx = rt.column_index("unit_id");
            int val_idx = rt.column_index("realized");
            if (id_idx < 0 || val_idx < 0) {
                throw ValidationError("realized csv needs unit_id and realized columns");
            }
            std::map<std::string, double> realized;
            for (const auto& row : rt.rows) {
                realized[row[static_cast<std::size_t>(id_idx)]] =
                    std::stod(row[static_cast<std::size_t>(val_idx)]);
            }
            DecileComparison cmp =
                compare_lists(a, b, realized, "causal", "traditional", definition);
            write_file(run.file("comparison.csv"), cmp.to_csv());
            manifest.record("compare",
                            {{"list_a", digest_bytes(a.to_csv())},
                             {"list_b", digest_bytes(b.to_csv())}},
                            {{"comparison.csv", digest_bytes(cmp.to_csv())}},
                            {{"definition", definition}, {"summary", "deciles compared"}});
            std::printf("list         decile  mean_realized  count\n");
            for (const auto& r : cmp.rows) {
                std::printf("%-11s  %6d  %13s  %lld\n", r.list.c_str(), r.decile,
                            format_double(r.mean_realized).c_str(),
                            static_cast<long long>(r.count));
            }
            std::printf("note: realized values are '%s'; reported under the client's "
                        "definition, not endorsed as causal\n",
                        definition.c_str());
            return 0;
        }

        if (step == "evaluate") {
            manifest.require("effects", step);
            CsvTable table = parse_csv(read_file(run.file("effects.csv")));
            EffectTable effects;
            for (const auto& row : table.rows) {
                effects.rows.push_back({row[0], row[1] == "treated" ? 1 : 0, std::stoi(row[2]),
                                        std::stod(row[3])});
            }
            SyntheticTruth truth = SyntheticTruth::from_csv(read_file(truth_file));
            RunEvaluation eval = evaluate_run(effects, truth);
            write_file(run.file("evaluation.json"), eval.to_json());
            manifest.record("evaluate", {{"truth", digest_bytes(truth.to_csv())}},
                            {{"evaluation.json", digest_bytes(eval.to_json())}},
                            {{"summary", "att_bias=" + format_double(eval.att_bias)}});
            std::printf("%s", eval.to_json().c_str());
            return 0;
        }

        throw Error("unhandled subcommand: " + step);
    } catch (const std::exception& e) {
        int code = exit_code_for(e);
        std::fprintf(stderr, "error [%s]: %s\n", error_class(e), e.what());
        if (!run_dir.empty()) {
            try {
                ordered_json err;
                err["step"] = step;
                err["error"] = error_class(e);
                err["exit_code"] = code;
                err["message"] = e.what();
                write_file(fs::path(run_dir) / "error.json", err.dump(2) + "\n");
            } catch (...) {
                // best effort
            }
        }
        return code;
    }
}
