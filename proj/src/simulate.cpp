#include "causal/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "causal/csv.hpp"
#include "causal/digest.hpp"
#include "causal/errors.hpp"
#include "causal/histogram.hpp"

namespace causal {

namespace {

using ordered_json = nlohmann::ordered_json;

double inv_logit(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

constexpr double kSqrt3 = 1.7320508075688772;

std::uint64_t scramble(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string make_id(std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "u%07zu", i + 1);
    return buf;
}

}  // namespace

double SplitMix64::normal() {
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SplitMix64 SplitMix64::unit_stream(std::uint64_t seed, std::uint64_t unit_index) {
    // Hash the pair so neighbouring units do not share shifted sequences.
    return SplitMix64(scramble(seed ^ (0xD1B54A32D192ED03ULL * (unit_index + 1))));
}

CovariateSchema DgpConfig::schema() const {
    CovariateSchema schema;
    for (const auto& cov : covariates) {
        SchemaColumn col;
        col.name = cov.name;
        col.kind = cov.kind;
        if (cov.kind == ColumnKind::categorical) {
            for (const auto& [label, prob] : cov.levels) {
                (void)prob;
                col.levels.push_back(label);
            }
            std::sort(col.levels.begin(), col.levels.end());
        }
        schema.columns.push_back(std::move(col));
    }
    return schema;
}

std::string DgpConfig::to_json() const {
    ordered_json j;
    j["name"] = name;
    j["n"] = n;
    j["seed"] = seed;
    j["generator"] = "splitmix64 + Box-Muller, one stream per unit";
    j["covariates"] = ordered_json::array();
    for (const auto& cov : covariates) {
        ordered_json c;
        c["name"] = cov.name;
        if (cov.kind == ColumnKind::numeric) {
            c["kind"] = "numeric";
            c["mean"] = cov.mean;
            c["sd"] = cov.sd;
            c["distribution"] = cov.distribution == NumericDistribution::uniform
                                    ? "uniform"
                                    : cov.distribution == NumericDistribution::lattice
                                          ? "lattice"
                                          : "normal";
            if (cov.distribution == NumericDistribution::lattice) {
                c["lattice_levels"] = cov.lattice_levels;
            }
        } else {
            c["kind"] = "categorical";
            c["levels"] = ordered_json::array();
            for (const auto& [label, prob] : cov.levels) {
                c["levels"].push_back({{"label", label}, {"prob", prob}});
            }
        }
        j["covariates"].push_back(std::move(c));
    }
    j["assignment"] = {{"intercept", assignment_intercept},
                       {"coefficients", assignment_coefficients}};
    ordered_json outcome = {{"intercept", outcome_intercept},
                            {"coefficients", outcome_coefficients},
                            {"noise_sd", noise_sd}};
    if (outcome_quadratic) {
        outcome["quadratic"] = {{"column", outcome_quadratic->column},
                                {"center", outcome_quadratic->center},
                                {"coefficient", outcome_quadratic->coefficient}};
    }
    j["outcome"] = std::move(outcome);
    j["effect"] = {{"base", effect_base}, {"slope", effect_slope}, {"column", effect_column}};
    return j.dump(2) + "\n";
}

DgpConfig DgpConfig::from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid dgp config json: ") + e.what());
    }
    DgpConfig cfg;
    cfg.name = j.value("name", "custom");
    cfg.n = j.at("n").get<std::int64_t>();
    cfg.seed = j.value("seed", 0ULL);
    for (const auto& c : j.at("covariates")) {
        CovariateSpec cov;
        cov.name = c.at("name").get<std::string>();
        if (c.value("kind", "numeric") == "numeric") {
            cov.kind = ColumnKind::numeric;
            cov.mean = c.value("mean", 0.0);
            cov.sd = c.value("sd", 1.0);
            std::string dist = c.value("distribution", "normal");
            cov.distribution = dist == "uniform"    ? NumericDistribution::uniform
                               : dist == "lattice"  ? NumericDistribution::lattice
                                                    : NumericDistribution::normal;
            cov.lattice_levels = c.value("lattice_levels", 10);
        } else {
            cov.kind = ColumnKind::categorical;
            for (const auto& l : c.at("levels")) {
                cov.levels.emplace_back(l.at("label").get<std::string>(),
                                        l.at("prob").get<double>());
            }
        }
        cfg.covariates.push_back(std::move(cov));
    }
    const auto& a = j.at("assignment");
    cfg.assignment_intercept = a.at("intercept").get<double>();
    if (a.contains("coefficients")) {
        cfg.assignment_coefficients =
            a.at("coefficients").get<std::map<std::string, double>>();
    }
    const auto& o = j.at("outcome");
    cfg.outcome_intercept = o.at("intercept").get<double>();
    if (o.contains("coefficients")) {
        cfg.outcome_coefficients = o.at("coefficients").get<std::map<std::string, double>>();
    }
    cfg.noise_sd = o.value("noise_sd", 1.0);
    if (o.contains("quadratic")) {
        QuadraticTerm q;
        q.column = o.at("quadratic").at("column").get<std::string>();
        q.center = o.at("quadratic").at("center").get<double>();
        q.coefficient = o.at("quadratic").at("coefficient").get<double>();
        cfg.outcome_quadratic = q;
    }
    const auto& e = j.at("effect");
    cfg.effect_base = e.at("base").get<double>();
    cfg.effect_slope = e.value("slope", 0.0);
    cfg.effect_column = e.value("column", "");
    return cfg;
}

DgpConfig preset_config(const std::string& name) {
    DgpConfig cfg;
    cfg.name = name;
    if (name == "ferrari" || name == "doctors") {
        cfg.n = name == "doctors" ? 250000 : 20000;
        cfg.covariates.push_back({"baseline", ColumnKind::numeric, 10.0, 4.0, {}});
        cfg.assignment_intercept = -7.3;
        cfg.assignment_coefficients["baseline"] = 0.62;
        cfg.outcome_intercept = 3.0;
        cfg.outcome_coefficients["baseline"] = 1.05;
        cfg.outcome_quadratic = QuadraticTerm{"baseline", 10.0, 0.12};
        cfg.noise_sd = 1.0;
        cfg.effect_base = 3.0;
        cfg.effect_slope = -0.5;
        cfg.effect_column = "baseline";
        if (name == "doctors") {
            CovariateSpec sp;
            sp.name = "specialty";
            sp.kind = ColumnKind::categorical;
            sp.levels = {{"Cardiology", 0.10},     {"Endocrinology", 0.08},
                         {"FamilyPractice", 0.22}, {"GeneralPractice", 0.28},
                         {"InternalMedicine", 0.20}, {"ObGyn", 0.12}};
            cfg.covariates.push_back(std::move(sp));
            cfg.assignment_coefficients["specialty=Endocrinology"] = 0.15;
            cfg.assignment_coefficients["specialty=FamilyPractice"] = 0.20;
            cfg.assignment_coefficients["specialty=GeneralPractice"] = 0.25;
            cfg.assignment_coefficients["specialty=InternalMedicine"] = 0.15;
            cfg.assignment_coefficients["specialty=ObGyn"] = -0.30;
            cfg.outcome_coefficients["specialty=Endocrinology"] = 1.0;
            cfg.outcome_coefficients["specialty=FamilyPractice"] = 0.5;
            cfg.outcome_coefficients["specialty=GeneralPractice"] = -0.5;
            cfg.outcome_coefficients["specialty=InternalMedicine"] = 0.8;
            cfg.outcome_coefficients["specialty=ObGyn"] = -1.0;
        }
    } else if (name == "balanced") {
        cfg.n = 50000;
        // The confounder is a 10-tier volume score; decile stratification on
        // the true score then aligns bins with tiers, so the large unbinned
        // imbalance vanishes within bins.
        CovariateSpec x1;
        x1.name = "x1";
        x1.distribution = NumericDistribution::lattice;
        x1.lattice_levels = 10;
        cfg.covariates.push_back(std::move(x1));
        cfg.covariates.push_back({"x2", ColumnKind::numeric, 0.0, 1.0});
        cfg.assignment_intercept = 0.0;
        cfg.assignment_coefficients["x1"] = 0.55;
        cfg.assignment_coefficients["x2"] = 0.0;
        cfg.outcome_intercept = 1.0;
        cfg.outcome_coefficients["x1"] = 2.0;
        cfg.outcome_coefficients["x2"] = 1.0;
        cfg.noise_sd = 1.0;
        cfg.effect_base = 1.0;
    } else if (name == "randomized") {
        cfg.n = 20000;
        cfg.covariates.push_back({"x1", ColumnKind::numeric, 0.0, 1.0, {}});
        cfg.assignment_intercept = -0.4;
        cfg.outcome_intercept = 1.0;
        cfg.outcome_coefficients["x1"] = 2.0;
        cfg.noise_sd = 1.0;
        cfg.effect_base = 2.0;
    } else {
        throw ConfigError("unknown preset '" + name + "'; available: ferrari, doctors, "
                          "balanced, randomized");
    }
    return cfg;
}

std::vector<std::string> preset_names() {
    return {"ferrari", "doctors", "balanced", "randomized"};
}

std::string SyntheticTruth::to_csv() const {
    CsvWriter w({"unit_id", "e_true", "y0", "y1", "tau_true"});
    for (const auto& id : ids) {
        const auto& r = rows.at(id);
        w.add_row({id, format_double(r.e_true), format_double(r.y0), format_double(r.y1),
                   format_double(r.tau)});
    }
    return w.str();
}

SyntheticTruth SyntheticTruth::from_csv(const std::string& text) {
    CsvTable table = parse_csv(text);
    int id_idx = table.column_index("unit_id");
    int e_idx = table.column_index("e_true");
    int y0_idx = table.column_index("y0");
    int y1_idx = table.column_index("y1");
    int tau_idx = table.column_index("tau_true");
    if (id_idx < 0 || e_idx < 0 || y0_idx < 0 || y1_idx < 0 || tau_idx < 0) {
        throw ValidationError("truth csv needs unit_id, e_true, y0, y1, tau_true columns");
    }
    SyntheticTruth truth;
    for (const auto& row : table.rows) {
        TruthRow r;
        r.e_true = std::stod(row[static_cast<std::size_t>(e_idx)]);
        r.y0 = std::stod(row[static_cast<std::size_t>(y0_idx)]);
        r.y1 = std::stod(row[static_cast<std::size_t>(y1_idx)]);
        r.tau = std::stod(row[static_cast<std::size_t>(tau_idx)]);
        truth.ids.push_back(row[static_cast<std::size_t>(id_idx)]);
        truth.rows.emplace(row[static_cast<std::size_t>(id_idx)], r);
    }
    return truth;
}

double SyntheticTruth::mean_tau(const std::vector<std::string>& unit_ids) const {
    if (unit_ids.empty()) throw EvaluationError("mean_tau over an empty id set");
    double s = 0.0;
    for (const auto& id : unit_ids) {
        auto it = rows.find(id);
        if (it == rows.end()) throw EvaluationError("unit id not in truth table: " + id);
        s += it->second.tau;
    }
    return s / static_cast<double>(unit_ids.size());
}

SimulatedPopulation generate(const DgpConfig& cfg) {
    if (cfg.n < 2) throw ConfigError("population size must be >= 2");
    if (cfg.covariates.empty()) throw ConfigError("config declares no covariates");
    if (cfg.noise_sd < 0) throw ConfigError("noise_sd must be >= 0");
    for (const auto& cov : cfg.covariates) {
        if (cov.kind == ColumnKind::categorical) {
            double total = 0.0;
            for (const auto& [label, prob] : cov.levels) {
                (void)label;
                if (prob < 0) throw ConfigError("negative level probability in " + cov.name);
                total += prob;
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw ConfigError("level probabilities of " + cov.name + " must sum to 1");
            }
        }
    }

    CovariateSchema schema = cfg.schema();
    auto encoded_names = schema.encoded_names();
    const std::size_t width = schema.encoded_width();

    // Resolve coefficient maps onto the encoded layout once.
    auto resolve = [&](const std::map<std::string, double>& coef, const char* what) {
        std::vector<double> out(width, 0.0);
        for (const auto& [key, value] : coef) {
            auto it = std::find(encoded_names.begin(), encoded_names.end(), key);
            if (it == encoded_names.end()) {
                throw ConfigError(std::string(what) + " coefficient references unknown encoded "
                                  "column '" + key + "'");
            }
            out[static_cast<std::size_t>(it - encoded_names.begin())] = value;
        }
        return out;
    };
    std::vector<double> alpha = resolve(cfg.assignment_coefficients, "assignment");
    std::vector<double> beta = resolve(cfg.outcome_coefficients, "outcome");

    std::size_t quad_col = width;
    if (cfg.outcome_quadratic) {
        auto [offset, w] = schema.encoded_range(cfg.outcome_quadratic->column);
        if (w != 1) throw ConfigError("quadratic term needs a numeric covariate");
        quad_col = offset;
    }
    std::size_t effect_col = width;
    if (!cfg.effect_column.empty()) {
        auto [offset, w] = schema.encoded_range(cfg.effect_column);
        if (w != 1) throw ConfigError("effect column must be numeric");
        effect_col = offset;
    }

    // For categoricals: map spec level order -> sorted (encoded) order.
    std::vector<std::vector<int>> sorted_index_of_level(cfg.covariates.size());
    for (std::size_t c = 0; c < cfg.covariates.size(); ++c) {
        const auto& cov = cfg.covariates[c];
        if (cov.kind != ColumnKind::categorical) continue;
        const auto& sorted_levels = schema.columns[c].levels;
        for (const auto& [label, prob] : cov.levels) {
            (void)prob;
            auto it = std::lower_bound(sorted_levels.begin(), sorted_levels.end(), label);
            sorted_index_of_level[c].push_back(static_cast<int>(it - sorted_levels.begin()));
        }
    }

    SimulatedPopulation pop;
    pop.config = cfg;
    const auto n = static_cast<std::size_t>(cfg.n);
    pop.ids.reserve(n);
    pop.numeric_columns.assign(cfg.covariates.size(), {});
    pop.level_columns.assign(cfg.covariates.size(), {});
    pop.z.reserve(n);
    pop.y_observed.reserve(n);
    pop.truth.ids.reserve(n);

    std::vector<double> xrow(width);
    double min_e = 1.0, max_e = 0.0;
    std::size_t n_treated = 0;

    for (std::size_t i = 0; i < n; ++i) {
        auto rng = SplitMix64::unit_stream(cfg.seed, i);
        std::fill(xrow.begin(), xrow.end(), 0.0);
        std::size_t offset = 0;
        // Draw order per unit: covariates in declaration order, then the
        // assignment uniform, then the outcome noise normal.
        for (std::size_t c = 0; c < cfg.covariates.size(); ++c) {
            const auto& cov = cfg.covariates[c];
            if (cov.kind == ColumnKind::numeric) {
                double v;
                if (cov.distribution == NumericDistribution::uniform) {
                    v = cov.mean + cov.sd * kSqrt3 * (2.0 * rng.uniform01() - 1.0);
                } else if (cov.distribution == NumericDistribution::lattice) {
                    int levels = std::max(2, cov.lattice_levels);
                    auto tier = static_cast<int>(rng.uniform01() * levels);
                    tier = std::min(tier, levels - 1);
                    double span = 2.0 * cov.sd * kSqrt3;
                    v = cov.mean - cov.sd * kSqrt3 +
                        span * (tier + 0.5) / static_cast<double>(levels);
                } else {
                    v = cov.mean + cov.sd * rng.normal();
                }
                pop.numeric_columns[c].push_back(v);
                xrow[offset] = v;
                offset += 1;
            } else {
                double u = rng.uniform01();
                int pick = static_cast<int>(cov.levels.size()) - 1;
                double cum = 0.0;
                for (std::size_t l = 0; l < cov.levels.size(); ++l) {
                    cum += cov.levels[l].second;
                    if (u < cum) {
                        pick = static_cast<int>(l);
                        break;
                    }
                }
                int sorted_idx = sorted_index_of_level[c][static_cast<std::size_t>(pick)];
                pop.level_columns[c].push_back(sorted_idx);
                std::size_t w = cov.levels.size() - 1;
                if (sorted_idx > 0) xrow[offset + static_cast<std::size_t>(sorted_idx) - 1] = 1.0;
                offset += w;
            }
        }

        double eta = cfg.assignment_intercept;
        for (std::size_t j = 0; j < width; ++j) eta += alpha[j] * xrow[j];
        double e = inv_logit(eta);
        min_e = std::min(min_e, e);
        max_e = std::max(max_e, e);
        int zi = rng.uniform01() < e ? 1 : 0;
        n_treated += static_cast<std::size_t>(zi);

        double f = cfg.outcome_intercept;
        for (std::size_t j = 0; j < width; ++j) f += beta[j] * xrow[j];
        if (cfg.outcome_quadratic) {
            double d = xrow[quad_col] - cfg.outcome_quadratic->center;
            f += cfg.outcome_quadratic->coefficient * d * d;
        }
        double tau = cfg.effect_base;
        if (effect_col < width) tau += cfg.effect_slope * xrow[effect_col];
        double eps = cfg.noise_sd * rng.normal();
        double y0 = f + eps;
        double y1 = y0 + tau;

        std::string id = make_id(i);
        pop.ids.push_back(id);
        pop.z.push_back(static_cast<std::int8_t>(zi));
        pop.y_observed.push_back(zi == 1 ? y1 : y0);
        pop.truth.ids.push_back(id);
        pop.truth.rows.emplace(std::move(id), TruthRow{e, y0, y1, tau});
    }

    if (max_e < 1e-3 || min_e > 1.0 - 1e-3) {
        throw ConfigError("degenerate propensities: every unit is nearly always (or never) "
                          "assigned; adjust the assignment coefficients");
    }
    if (n_treated == 0 || n_treated == n) {
        throw ConfigError("generated population has a single arm; adjust the assignment "
                          "intercept");
    }
    return pop;
}

std::string SimulatedPopulation::data_csv() const {
    std::vector<std::string> header{"unit_id"};
    for (const auto& cov : config.covariates) header.push_back(cov.name);
    header.emplace_back("z");
    header.emplace_back("y");
    CsvWriter w(header);

    CovariateSchema schema = config.schema();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::vector<std::string> row{ids[i]};
        for (std::size_t c = 0; c < config.covariates.size(); ++c) {
            if (config.covariates[c].kind == ColumnKind::numeric) {
                row.push_back(format_double(numeric_columns[c][i]));
            } else {
                row.push_back(
                    schema.columns[c].levels[static_cast<std::size_t>(level_columns[c][i])]);
            }
        }
        row.push_back(z[i] == 1 ? "1" : "0");
        row.push_back(format_double(y_observed[i]));
        w.add_row(std::move(row));
    }
    return w.str();
}

LoadResult SimulatedPopulation::to_dataset() const {
    return load_dataset_text(data_csv(), config.schema(), "y", "z", {});
}

SimulatedPopulation SimulatedPopulation::subsample(std::int64_t m, std::uint64_t seed) const {
    const auto n = static_cast<std::int64_t>(ids.size());
    if (m <= 0 || m > n) throw ConfigError("subsample size out of range");
    // Partial Fisher-Yates over the index vector, then restore file order.
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    SplitMix64 rng(scramble(seed ^ 0xA5A5A5A5A5A5A5A5ULL));
    for (std::int64_t i = 0; i < m; ++i) {
        auto j = i + static_cast<std::int64_t>(rng.next() %
                                               static_cast<std::uint64_t>(n - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(m));
    std::sort(idx.begin(), idx.end());

    SimulatedPopulation out;
    out.config = config;
    out.config.n = m;
    out.numeric_columns.assign(config.covariates.size(), {});
    out.level_columns.assign(config.covariates.size(), {});
    for (auto i : idx) {
        auto ui = static_cast<std::size_t>(i);
        out.ids.push_back(ids[ui]);
        for (std::size_t c = 0; c < config.covariates.size(); ++c) {
            if (config.covariates[c].kind == ColumnKind::numeric) {
                out.numeric_columns[c].push_back(numeric_columns[c][ui]);
            } else {
                out.level_columns[c].push_back(level_columns[c][ui]);
            }
        }
        out.z.push_back(z[ui]);
        out.y_observed.push_back(y_observed[ui]);
        out.truth.ids.push_back(ids[ui]);
        out.truth.rows.emplace(ids[ui], truth.rows.at(ids[ui]));
    }
    return out;
}

std::vector<std::string> SimulatedPopulation::treated_ids() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (z[i] == 1) out.push_back(ids[i]);
    }
    return out;
}

std::vector<std::string> SimulatedPopulation::control_ids() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (z[i] == 0) out.push_back(ids[i]);
    }
    return out;
}

BeforeAfterResult naive_before_after(const Dataset& ds, const std::string& baseline_column) {
    const SchemaColumn* col = ds.schema().find(baseline_column);
    if (col == nullptr || col->kind != ColumnKind::numeric) {
        throw SchemaError("baseline column must be a numeric covariate: " + baseline_column);
    }
    auto [offset, w] = ds.schema().encoded_range(baseline_column);
    (void)w;
    BeforeAfterResult out;
    double sum_t = 0.0, sum_c = 0.0;
    std::size_t n_t = 0, n_c = 0;
    for (std::size_t i = 0; i < ds.n_units(); ++i) {
        double change = ds.outcome(i) - ds.covariates(i)[offset];
        out.per_unit.emplace_back(ds.unit_id(i), change);
        if (ds.z(i) == 1) {
            sum_t += change;
            ++n_t;
        } else {
            sum_c += change;
            ++n_c;
        }
    }
    out.treated_mean_change = n_t > 0 ? sum_t / static_cast<double>(n_t) : 0.0;
    out.control_mean_change = n_c > 0 ? sum_c / static_cast<double>(n_c) : 0.0;
    return out;
}

RegressionResult naive_regression(const Dataset& ds) {
    const auto n = static_cast<Eigen::Index>(ds.n_units());
    const auto p = static_cast<Eigen::Index>(ds.encoded_width());
    Eigen::MatrixXd design(n, p + 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design(i, 0) = 1.0;
        auto x = ds.covariates(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < p; ++j) design(i, 1 + j) = x[static_cast<std::size_t>(j)];
        design(i, p + 1) = ds.z(static_cast<std::size_t>(i));
        y(i) = ds.outcome(static_cast<std::size_t>(i));
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < design.cols()) {
        throw SingularSystemError("regression design matrix is singular (collinear columns)");
    }
    Eigen::VectorXd beta = qr.solve(y);

    RegressionResult out;
    out.names.push_back("(intercept)");
    for (auto& name : ds.schema().encoded_names()) out.names.push_back(name);
    out.names.push_back("z");
    out.coefficients.assign(beta.data(), beta.data() + beta.size());
    out.z_coefficient = beta(p + 1);
    return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw EvaluationError("rank correlation needs two equal-length samples of size >= 2");
    }
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank, 1-based
            for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
            i = j + 1;
        }
        return r;
    };
    std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = sample_mean(ra), mb = sample_mean(rb);
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return num / std::sqrt(va * vb);
}

RunEvaluation evaluate_run(const EffectTable& effects, const SyntheticTruth& truth) {
    if (effects.rows.empty()) throw EvaluationError("empty effect table");
    std::vector<double> est, tru;
    std::vector<double> att_est, att_tru;
    bool any_treated = false;
    for (const auto& row : effects.rows) {
        if (row.z == 1) any_treated = true;
    }
    for (const auto& row : effects.rows) {
        auto it = truth.rows.find(row.unit_id);
        if (it == truth.rows.end()) {
            throw EvaluationError("effect table unit not in truth table: " + row.unit_id);
        }
        est.push_back(row.tau_hat);
        tru.push_back(it->second.tau);
        if (!any_treated || row.z == 1) {
            att_est.push_back(row.tau_hat);
            att_tru.push_back(it->second.tau);
        }
    }
    RunEvaluation out;
    out.att_estimate = sample_mean(att_est);
    out.att_true = sample_mean(att_tru);
    out.att_bias = out.att_estimate - out.att_true;
    double ss = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) ss += (est[i] - tru[i]) * (est[i] - tru[i]);
    out.rmse = std::sqrt(ss / static_cast<double>(est.size()));
    out.rank_correlation = est.size() >= 2 ? spearman(est, tru) : 1.0;
    out.n = est.size();
    out.estimand = any_treated ? "att-over-treated-focals" : "atc-over-control-focals";
    return out;
}

std::string RunEvaluation::to_json() const {
    ordered_json j;
    j["estimand"] = estimand;
    j["n"] = n;
    j["att_estimate"] = att_estimate;
    j["att_true"] = att_true;
    j["att_bias"] = att_bias;
    j["rmse"] = rmse;
    j["rank_correlation"] = rank_correlation;
    return j.dump(2) + "\n";
}

}  // namespace causal
