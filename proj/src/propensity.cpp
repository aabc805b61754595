#include "causal/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "causal/csv.hpp"
#include "causal/digest.hpp"
#include "causal/errors.hpp"

namespace causal {

namespace {

using ordered_json = nlohmann::ordered_json;

double log1pexp(double eta) {
    // log(1 + e^eta) without overflow.
    return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double inv_logit(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

struct Standardizer {
    Eigen::VectorXd center;
    Eigen::VectorXd scale;  // 1 for constant columns
};

Standardizer standardize(Eigen::MatrixXd& x) {
    Standardizer s;
    const auto p = x.cols();
    s.center.resize(p);
    s.scale.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double mean = x.col(j).mean();
        double sd = std::sqrt((x.col(j).array() - mean).square().sum() /
                              std::max<double>(1.0, static_cast<double>(x.rows() - 1)));
        s.center(j) = mean;
        s.scale(j) = sd > 0 ? sd : 1.0;
        x.col(j) = (x.col(j).array() - mean) / s.scale(j);
    }
    return s;
}

// Penalized log-likelihood in the standardized space; the ridge term skips
// the intercept.
double penalized_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& beta, double lambda) {
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(x.rows(), beta(0)) +
                          x * beta.tail(beta.size() - 1);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        ll += z(i) * eta(i) - log1pexp(eta(i));
    }
    double penalty = 0.5 * lambda * beta.tail(beta.size() - 1).squaredNorm();
    return ll - penalty;
}

Eigen::MatrixXd dataset_matrix(const Dataset& ds) {
    const auto n = static_cast<Eigen::Index>(ds.n_units());
    const auto p = static_cast<Eigen::Index>(ds.encoded_width());
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto row = ds.covariates(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = row[static_cast<std::size_t>(j)];
    }
    return x;
}

}  // namespace

PropensityModel fit_propensity(const Dataset& ds, const FitOptions& opts) {
    if (opts.ridge_lambda < 0) throw ConfigError("ridge_lambda must be >= 0");
    if (ds.n_treated() == 0 || ds.n_treated() == ds.n_units()) {
        throw ValidationError("propensity fit requires both arms");
    }

    const auto n = static_cast<Eigen::Index>(ds.n_units());
    Eigen::MatrixXd x = dataset_matrix(ds);
    const auto p = x.cols();
    Standardizer std_info = standardize(x);

    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = ds.z(static_cast<std::size_t>(i));

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    double ll = penalized_loglik(x, z, beta, opts.ridge_lambda);
    double grad_norm = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iter = 0;
    std::string message;

    for (; iter < opts.max_iter; ++iter) {
        Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, beta(0)) + x * beta.tail(p);
        Eigen::VectorXd mu(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu(i) = inv_logit(eta(i));
            w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
        }

        Eigen::VectorXd resid = z - mu;
        Eigen::VectorXd grad(p + 1);
        grad(0) = resid.sum();
        grad.tail(p) = x.transpose() * resid - opts.ridge_lambda * beta.tail(p);
        grad_norm = grad.cwiseAbs().maxCoeff();
        if (grad_norm <= opts.tol) {
            converged = true;
            break;
        }

        Eigen::MatrixXd hess(p + 1, p + 1);
        hess(0, 0) = w.sum();
        Eigen::MatrixXd xw = x.array().colwise() * w.array();
        hess.block(0, 1, 1, p) = xw.colwise().sum();
        hess.block(1, 0, p, 1) = hess.block(0, 1, 1, p).transpose();
        hess.block(1, 1, p, p) = x.transpose() * xw;
        hess.block(1, 1, p, p).diagonal().array() += opts.ridge_lambda;

        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        Eigen::VectorXd d = ldlt.vectorD();
        double dmax = d.cwiseAbs().maxCoeff();
        if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * dmax) {
            if (opts.ridge_lambda == 0.0) {
                throw SingularSystemError(
                    "IRLS system is singular (constant or collinear covariate column); "
                    "set ridge_lambda > 0 or drop the column");
            }
            // Ridge should have prevented this; bail out as non-converged.
            message = "IRLS system numerically singular despite ridge";
            break;
        }
        Eigen::VectorXd step = ldlt.solve(grad);

        // Step-halving keeps the penalized likelihood non-decreasing up to
        // float resolution; near the optimum Newton improvements sit below
        // that resolution, so the acceptance slack must scale with |ll|.
        const double noise = 1e-10 * (1.0 + std::abs(ll));
        double step_scale = 1.0;
        Eigen::VectorXd candidate;
        double cand_ll = -std::numeric_limits<double>::infinity();
        for (int h = 0; h < 40; ++h) {
            candidate = beta + step_scale * step;
            cand_ll = penalized_loglik(x, z, candidate, opts.ridge_lambda);
            if (cand_ll >= ll - noise) break;
            step_scale *= 0.5;
        }
        if (cand_ll < ll - std::max(noise, 1e-7 * (1.0 + std::abs(ll)))) {
            message = "IRLS step could not improve the penalized likelihood";
            break;
        }
        beta = candidate;
        ll = std::max(ll, cand_ll);
    }

    if (!converged && message.empty()) {
        message = "gradient max-norm " + format_double(grad_norm) + " after " +
                  std::to_string(iter) +
                  " iterations; possible separation (consider ridge_lambda > 0)";
    }

    // Map coefficients back to the original covariate scale.
    PropensityModel model;
    model.coefficients.resize(static_cast<std::size_t>(p) + 1);
    double intercept = beta(0);
    for (Eigen::Index j = 0; j < p; ++j) {
        double bj = beta(j + 1) / std_info.scale(j);
        model.coefficients[static_cast<std::size_t>(j) + 1] = bj;
        intercept -= bj * std_info.center(j);
    }
    model.coefficients[0] = intercept;
    model.coefficient_names.push_back("(intercept)");
    for (auto& name : ds.schema().encoded_names()) model.coefficient_names.push_back(name);
    model.converged = converged;
    model.iterations = iter;
    model.final_gradient_norm = grad_norm;
    model.ridge_lambda = opts.ridge_lambda;
    model.message = converged ? "" : message;
    model.dataset_digest = ds.digest();
    model.schema_digest = digest_bytes(ds.schema().to_json());
    return model;
}

std::string PropensityModel::to_json() const {
    ordered_json j;
    j["schema_digest"] = schema_digest;
    j["dataset_digest"] = dataset_digest;
    j["ridge_lambda"] = ridge_lambda;
    j["coefficients"] = ordered_json::array();
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
        j["coefficients"].push_back(
            {{"name", coefficient_names[i]}, {"value", coefficients[i]}});
    }
    j["converged"] = converged;
    j["iterations"] = iterations;
    j["final_gradient_norm"] = final_gradient_norm;
    if (!message.empty()) j["message"] = message;
    return j.dump(2) + "\n";
}

PropensityModel PropensityModel::from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("invalid model json: ") + e.what());
    }
    PropensityModel m;
    m.schema_digest = j.value("schema_digest", "");
    m.dataset_digest = j.value("dataset_digest", "");
    m.ridge_lambda = j.value("ridge_lambda", 0.0);
    for (const auto& c : j.at("coefficients")) {
        m.coefficient_names.push_back(c.at("name").get<std::string>());
        m.coefficients.push_back(c.at("value").get<double>());
    }
    m.converged = j.value("converged", false);
    m.iterations = j.value("iterations", 0);
    m.final_gradient_norm = j.value("final_gradient_norm", 0.0);
    m.message = j.value("message", "");
    return m;
}

std::string PropensityModel::digest() const { return digest_bytes(to_json()); }

std::vector<double> ScoreTable::lp_values() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.lp);
    return out;
}

std::vector<double> ScoreTable::lp_values(int arm) const {
    std::vector<double> out;
    for (const auto& r : rows) {
        if (r.z == arm) out.push_back(r.lp);
    }
    return out;
}

std::string ScoreTable::to_csv() const {
    CsvWriter w({"unit_id", "e", "lp"});
    for (const auto& r : rows) {
        w.add_row({r.unit_id, format_double(r.e), format_double(r.lp)});
    }
    return w.str();
}

ScoreTable score(const PropensityModel& model, const Dataset& ds, int n_threads) {
    if (model.coefficients.size() != ds.encoded_width() + 1) {
        throw SchemaError("model width " + std::to_string(model.coefficients.size()) +
                          " does not match schema width " +
                          std::to_string(ds.encoded_width() + 1));
    }
    ScoreTable table;
    table.rows.resize(ds.n_units());
    table.dataset_digest = ds.digest();
    table.model_digest = model.digest();

    auto score_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            auto xrow = ds.covariates(i);
            double eta = model.coefficients[0];
            for (std::size_t j = 0; j < xrow.size(); ++j) {
                eta += model.coefficients[j + 1] * xrow[j];
            }
            double e = std::clamp(inv_logit(eta), kProbClamp, 1.0 - kProbClamp);
            table.rows[i] = {ds.unit_id(i), ds.z(i), e, std::log(e / (1.0 - e))};
        }
    };

    const std::size_t n = ds.n_units();
    if (n_threads <= 1 || n < 2048) {
        score_range(0, n);
    } else {
        std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(n_threads), n);
        std::vector<std::thread> threads;
        std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t t = 0; t < workers; ++t) {
            std::size_t lo = t * chunk;
            std::size_t hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            threads.emplace_back(score_range, lo, hi);
        }
        for (auto& th : threads) th.join();
    }
    return table;
}

PairedHistogram score_histograms(const ScoreTable& scores, int n_bins) {
    std::vector<double> lp0 = scores.lp_values(0);
    std::vector<double> lp1 = scores.lp_values(1);
    auto edges = shared_edges(lp0, lp1, n_bins);
    return {histogram_with_edges(lp0, edges), histogram_with_edges(lp1, edges)};
}

double log_likelihood(const Dataset& ds, std::span<const double> coefficients) {
    if (coefficients.size() != ds.encoded_width() + 1) {
        throw SchemaError("coefficient vector width does not match schema");
    }
    double ll = 0.0;
    for (std::size_t i = 0; i < ds.n_units(); ++i) {
        auto xrow = ds.covariates(i);
        double eta = coefficients[0];
        for (std::size_t j = 0; j < xrow.size(); ++j) eta += coefficients[j + 1] * xrow[j];
        ll += ds.z(i) * eta - log1pexp(eta);
    }
    return ll;
}

std::vector<double> log_likelihood_gradient(const Dataset& ds,
                                            std::span<const double> coefficients) {
    if (coefficients.size() != ds.encoded_width() + 1) {
        throw SchemaError("coefficient vector width does not match schema");
    }
    std::vector<double> grad(coefficients.size(), 0.0);
    for (std::size_t i = 0; i < ds.n_units(); ++i) {
        auto xrow = ds.covariates(i);
        double eta = coefficients[0];
        for (std::size_t j = 0; j < xrow.size(); ++j) eta += coefficients[j + 1] * xrow[j];
        double resid = ds.z(i) - inv_logit(eta);
        grad[0] += resid;
        for (std::size_t j = 0; j < xrow.size(); ++j) grad[j + 1] += resid * xrow[j];
    }
    return grad;
}

}  // namespace causal
