#include "modeshare/betareg.hpp"

#include "modeshare/io.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace modeshare::betareg {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

constexpr double kEps = std::numeric_limits<double>::epsilon();

double lgam(double x) { return boost::math::lgamma(x); }
double digam(double x) { return boost::math::digamma(x); }
double trigam(double x) { return boost::math::trigamma(x); }

struct MeanTerms {
    double mu = 0.0;
    double one_minus_mu = 0.0;
    double a = 0.0;  // mu * phi
    double b = 0.0;  // (1 - mu) * phi
};

MeanTerms mean_terms(const DesignMatrix& d, Eigen::Index i, const VectorXd& beta, double phi) {
    const double eta = d.x.row(i).dot(beta);
    MeanTerms t;
    t.mu = 1.0 / (1.0 + std::exp(-eta));
    t.one_minus_mu = 1.0 / (1.0 + std::exp(eta));
    t.a = t.mu * phi;
    t.b = t.one_minus_mu * phi;
    if (!(t.mu > 0.0) || !(t.one_minus_mu > 0.0) || !(t.a > 0.0) || !(t.b > 0.0) || !std::isfinite(eta)) {
        throw NumericError(static_cast<std::size_t>(i),
                           "fitted mean saturated at 0 or 1 (linear predictor " + io::format_double(eta) + ")");
    }
    return t;
}

double weight_of(const DesignMatrix& d, Eigen::Index i) {
    return d.weights ? (*d.weights)(i) : 1.0;
}

void check_params(const VectorXd& beta, double phi, const DesignMatrix& d) {
    if (beta.size() != d.cols()) {
        throw Error("coefficient vector has " + std::to_string(beta.size()) + " entries, design has " +
                    std::to_string(d.cols()) + " columns");
    }
    if (!(phi > 0.0) || !std::isfinite(phi)) {
        throw RangeError("phi must be positive and finite");
    }
}

struct Evaluation {
    double log_lik = 0.0;
    double noise = 0.0;
    VectorXd grad;  // (beta, phi)
};

Evaluation evaluate(const VectorXd& beta, double phi, const DesignMatrix& d, bool want_grad) {
    check_params(beta, phi, d);
    const Eigen::Index p = d.cols();
    Evaluation ev;
    if (want_grad) {
        ev.grad = VectorXd::Zero(p + 1);
    }
    const double lg_phi = lgam(phi);
    const double dg_phi = want_grad ? digam(phi) : 0.0;
    double magnitude = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        const MeanTerms t = mean_terms(d, i, beta, phi);
        const double w = weight_of(d, i);
        const double y = d.y(i);
        const double log_y = std::log(y);
        const double log_1my = std::log1p(-y);
        const double lg_a = lgam(t.a);
        const double lg_b = lgam(t.b);
        const double term = lg_phi - lg_a - lg_b + (t.a - 1.0) * log_y + (t.b - 1.0) * log_1my;
        ev.log_lik += w * term;
        magnitude += w * (std::abs(lg_phi) + std::abs(lg_a) + std::abs(lg_b) + std::abs((t.a - 1.0) * log_y) +
                          std::abs((t.b - 1.0) * log_1my));
        if (want_grad) {
            const double dg_a = digam(t.a);
            const double dg_b = digam(t.b);
            const double resid = (log_y - log_1my) - (dg_a - dg_b);
            const double dmu = t.mu * t.one_minus_mu;
            ev.grad.head(p) += (w * phi * resid * dmu) * d.x.row(i).transpose();
            ev.grad(p) += w * (t.mu * resid + log_1my - dg_b + dg_phi);
        }
    }
    ev.noise = 32.0 * kEps * magnitude;
    return ev;
}

std::vector<std::string> collinear_columns(const DesignMatrix& d, const Eigen::ColPivHouseholderQR<MatrixXd>& qr) {
    const auto names = d.column_names();
    const Eigen::Index rank = qr.rank();
    const auto& perm = qr.colsPermutation().indices();
    std::vector<Eigen::Index> independent(perm.data(), perm.data() + rank);
    MatrixXd basis(d.rows(), rank);
    for (Eigen::Index k = 0; k < rank; ++k) {
        basis.col(k) = d.x.col(independent[k]);
    }
    std::vector<bool> flagged(static_cast<std::size_t>(d.cols()), false);
    for (Eigen::Index k = rank; k < d.cols(); ++k) {
        const Eigen::Index c = perm(k);
        flagged[static_cast<std::size_t>(c)] = true;
        if (rank == 0) {
            continue;
        }
        const VectorXd coef = basis.colPivHouseholderQr().solve(d.x.col(c));
        const double scale = std::max(1.0, coef.cwiseAbs().maxCoeff());
        for (Eigen::Index j = 0; j < rank; ++j) {
            if (std::abs(coef(j)) > 1e-8 * scale) {
                flagged[static_cast<std::size_t>(independent[j])] = true;
            }
        }
    }
    std::vector<std::string> out;
    for (std::size_t c = 0; c < flagged.size(); ++c) {
        if (flagged[c]) {
            out.push_back(names[c]);
        }
    }
    return out;
}

double max_abs(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

DesignMatrix normalized_weights(const DesignMatrix& d) {
    if (!d.weights) {
        return d;
    }
    DesignMatrix out = d;
    const double mean = d.weights->mean();
    *out.weights = *d.weights / mean;
    return out;
}

double pearson(const VectorXd& a, const VectorXd& b) {
    const double ma = a.mean();
    const double mb = b.mean();
    const VectorXd da = a.array() - ma;
    const VectorXd db = b.array() - mb;
    const double den = std::sqrt(da.squaredNorm() * db.squaredNorm());
    if (!(den > 0.0)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return da.dot(db) / den;
}

const char* transform_key(Transform t) { return t == Transform::log ? "log" : "identity"; }

}  // namespace

std::string_view to_string(Transform t) { return transform_key(t); }

std::string Covariate::column_name() const {
    return transform == Transform::log ? "log(" + name + ")" : name;
}

std::vector<std::string> DesignMatrix::column_names() const {
    std::vector<std::string> out;
    if (intercept) {
        out.emplace_back(kInterceptName);
    }
    for (const auto& c : covariates) {
        out.push_back(c.column_name());
    }
    return out;
}

void DesignMatrix::validate() const {
    const Eigen::Index expected = static_cast<Eigen::Index>(covariates.size()) + (intercept ? 1 : 0);
    if (x.cols() != expected) {
        throw Error("design has " + std::to_string(x.cols()) + " columns, expected " + std::to_string(expected));
    }
    if (y.size() != x.rows()) {
        throw Error("response length does not match design rows");
    }
    if (!row_ids.empty() && static_cast<Eigen::Index>(row_ids.size()) != x.rows()) {
        throw Error("row id count does not match design rows");
    }
    if (!x.allFinite()) {
        throw Error("design contains a non-finite entry");
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (!(y(i) > 0.0 && y(i) < 1.0)) {
            throw RangeError("response on row " + std::to_string(i) + " is not strictly inside (0,1)");
        }
    }
    if (weights) {
        if (weights->size() != x.rows()) {
            throw Error("weight count does not match design rows");
        }
        for (Eigen::Index i = 0; i < weights->size(); ++i) {
            if (!((*weights)(i) > 0.0) || !std::isfinite((*weights)(i))) {
                throw RangeError("weight on row " + std::to_string(i) + " is not positive");
            }
        }
    }
    if (intercept) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (x(i, 0) != 1.0) {
                throw Error("intercept column must be all ones");
            }
        }
    }
}

DesignMatrix DesignMatrix::without_row(Eigen::Index i) const {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < rows(); ++r) {
        if (r != i) {
            keep.push_back(r);
        }
    }
    return permuted(keep);
}

DesignMatrix DesignMatrix::permuted(std::span<const Eigen::Index> perm) const {
    DesignMatrix out;
    out.covariates = covariates;
    out.intercept = intercept;
    const auto n = static_cast<Eigen::Index>(perm.size());
    out.x.resize(n, cols());
    out.y.resize(n);
    if (weights) {
        out.weights = VectorXd(n);
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index r = perm[static_cast<std::size_t>(k)];
        out.x.row(k) = x.row(r);
        out.y(k) = y(r);
        if (weights) {
            (*out.weights)(k) = (*weights)(r);
        }
        if (!row_ids.empty()) {
            out.row_ids.push_back(row_ids[static_cast<std::size_t>(r)]);
        }
    }
    return out;
}

DesignMatrix make_design(std::vector<Covariate> covariates, bool intercept, std::span<const Observation> rows) {
    DesignMatrix d;
    d.covariates = std::move(covariates);
    d.intercept = intercept;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(d.covariates.size()) + (intercept ? 1 : 0);
    d.x.resize(n, p);
    d.y.resize(n);
    const bool any_weight = std::any_of(rows.begin(), rows.end(), [](const Observation& o) { return o.weight.has_value(); });
    if (any_weight) {
        d.weights = VectorXd(n);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const Observation& o = rows[static_cast<std::size_t>(i)];
        if (o.values.size() != d.covariates.size()) {
            throw Error("observation '" + o.id + "' has " + std::to_string(o.values.size()) + " values, expected " +
                        std::to_string(d.covariates.size()));
        }
        Eigen::Index col = 0;
        if (intercept) {
            d.x(i, col++) = 1.0;
        }
        for (std::size_t c = 0; c < d.covariates.size(); ++c) {
            double v = o.values[c];
            if (d.covariates[c].transform == Transform::log) {
                if (!(v > 0.0)) {
                    throw RangeError("observation '" + o.id + "': " + d.covariates[c].name +
                                     " must be positive for a log transform");
                }
                v = std::log(v);
            }
            d.x(i, col++) = v;
        }
        d.y(i) = o.y;
        if (any_weight) {
            if (!o.weight) {
                throw Error("observation '" + o.id + "' lacks a weight while others have one");
            }
            (*d.weights)(i) = *o.weight;
        }
        d.row_ids.push_back(o.id);
    }
    d.validate();
    return d;
}

double logistic(double eta) {
    if (eta >= 0.0) {
        return 1.0 / (1.0 + std::exp(-eta));
    }
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double log_likelihood(const VectorXd& beta, double phi, const DesignMatrix& design) {
    return evaluate(beta, phi, design, false).log_lik;
}

VectorXd gradient(const VectorXd& beta, double phi, const DesignMatrix& design) {
    return evaluate(beta, phi, design, true).grad;
}

MatrixXd fisher_information(const VectorXd& beta, double phi, const DesignMatrix& design) {
    check_params(beta, phi, design);
    const Eigen::Index p = design.cols();
    MatrixXd info = MatrixXd::Zero(p + 1, p + 1);
    const double tg_phi = trigam(phi);
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const MeanTerms t = mean_terms(design, i, beta, phi);
        const double w = weight_of(design, i);
        const double tg_a = trigam(t.a);
        const double tg_b = trigam(t.b);
        const double dmu = t.mu * t.one_minus_mu;
        const auto xi = design.x.row(i).transpose();
        info.topLeftCorner(p, p).noalias() += (w * phi * phi * (tg_a + tg_b) * dmu * dmu) * (xi * xi.transpose());
        const VectorXd cross = (w * phi * (tg_a * t.mu - tg_b * t.one_minus_mu) * dmu) * xi;
        info.block(0, p, p, 1) += cross;
        info(p, p) += w * (tg_a * t.mu * t.mu + tg_b * t.one_minus_mu * t.one_minus_mu - tg_phi);
    }
    info.block(p, 0, 1, p) = info.block(0, p, p, 1).transpose();
    return info;
}

StartValues start_values(const DesignMatrix& d) {
    const Eigen::Index n = d.rows();
    const Eigen::Index p = d.cols();
    StartValues s;
    s.beta = VectorXd::Zero(p);
    s.phi = 1.0;

    VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        z(i) = std::log(d.y(i)) - std::log1p(-d.y(i));
    }
    const VectorXd w = d.weights ? *d.weights : VectorXd::Ones(n);
    const VectorXd sw = w.array().sqrt();
    const MatrixXd xw = sw.asDiagonal() * d.x;
    const VectorXd zw = sw.asDiagonal() * z;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(xw);
    if (qr.rank() < p) {
        return s;
    }
    const VectorXd beta = qr.solve(zw);
    if (!beta.allFinite()) {
        return s;
    }
    s.beta = beta;

    if (n <= p) {
        return s;
    }
    const VectorXd resid = z - d.x * beta;
    const double sigma2 = (w.array() * resid.array().square()).sum() / static_cast<double>(n - p);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = logistic(d.x.row(i).dot(beta));
        const double var_mu = mu * (1.0 - mu);
        acc += 1.0 / (sigma2 * var_mu);
    }
    const double phi = acc / static_cast<double>(n) - 1.0;
    if (std::isfinite(phi) && phi > 0.0) {
        s.phi = phi;
    }
    return s;
}

FitResult fit(const DesignMatrix& input, const FitOptions& opts) {
    input.validate();
    const DesignMatrix d = normalized_weights(input);
    const Eigen::Index n = d.rows();
    const Eigen::Index p = d.cols();
    if (n <= p + 1) {
        throw Error("need more observations (" + std::to_string(n) + ") than parameters (" + std::to_string(p + 1) +
                    ")");
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(d.x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        auto cols = collinear_columns(d, qr);
        std::string list;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            list += (k ? ", " : "") + cols[k];
        }
        throw RankDeficiencyError(cols, "rank-deficient design: collinear columns " + list);
    }

    StartValues start = opts.init ? *opts.init : start_values(d);
    if (start.beta.size() != p || !start.beta.allFinite()) {
        throw Error("start coefficients do not match the design");
    }
    if (!(start.phi > 0.0) || !std::isfinite(start.phi)) {
        throw RangeError("start phi must be positive");
    }

    FitResult res;
    FittedModel& m = res.model;
    m.covariates = d.covariates;
    m.intercept = d.intercept;
    m.n_obs = static_cast<long>(n);
    m.weighted = d.weights.has_value();

    VectorXd beta = start.beta;
    double log_phi = std::log(start.phi);
    Evaluation cur;
    try {
        cur = evaluate(beta, start.phi, d, true);
    } catch (const NumericError&) {
        // start values push a mean to the boundary; restart from the null model
        beta = VectorXd::Zero(p);
        log_phi = 0.0;
        cur = evaluate(beta, 1.0, d, true);
    }
    res.log_lik_trace.push_back(cur.log_lik);
    res.log_lik_noise = cur.noise;

    auto snapshot = [&](int iter, bool converged) {
        m.beta = beta;
        m.phi = std::exp(log_phi);
        m.log_lik = cur.log_lik;
        m.n_iter = iter;
        m.converged = converged;
        m.gradient_max_norm = max_abs(cur.grad);
    };

    bool converged = false;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        const double gnorm = max_abs(cur.grad);
        if (gnorm < opts.gradient_tol) {
            converged = true;
            break;
        }
        const double phi = std::exp(log_phi);
        VectorXd score = cur.grad;
        score(p) *= phi;
        VectorXd dir;
        try {
            MatrixXd info = fisher_information(beta, phi, d);
            // change of variables phi -> log phi
            info.col(p) *= phi;
            info.row(p) *= phi;
            Eigen::LDLT<MatrixXd> ldlt(info);
            dir = ldlt.solve(score);
            if (ldlt.info() != Eigen::Success || !dir.allFinite() || ldlt.isNegative() || score.dot(dir) <= 0.0) {
                dir = score;
            }
        } catch (const std::exception&) {
            dir = score;  // information overflowed: steepest ascent
        }
        if (const double big = max_abs(dir); big > opts.max_step) {
            dir *= opts.max_step / big;
        }

        bool accepted = false;
        double t = 1.0;
        VectorXd step;
        for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
            step = t * dir;
            const VectorXd beta_try = beta + step.head(p);
            const double log_phi_try = log_phi + step(p);
            if (!std::isfinite(log_phi_try) || std::abs(log_phi_try) > 700.0) {
                continue;
            }
            Evaluation trial;
            try {
                trial = evaluate(beta_try, std::exp(log_phi_try), d, true);
            } catch (const NumericError&) {
                continue;
            }
            const bool better = trial.log_lik >= cur.log_lik;
            // a tie within rounding noise still counts when the score shrinks
            const bool tie = trial.log_lik >= cur.log_lik - std::max(cur.noise, trial.noise) &&
                             max_abs(trial.grad) < gnorm;
            if (better || tie) {
                beta = beta_try;
                log_phi = log_phi_try;
                cur = std::move(trial);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            converged = gnorm < opts.stall_gradient_tol;
            break;
        }
        res.log_lik_trace.push_back(cur.log_lik);
        res.log_lik_noise = std::max(res.log_lik_noise, cur.noise);
        if (max_abs(step) < opts.step_tol) {
            ++iter;
            const double g = max_abs(cur.grad);
            converged = g < opts.gradient_tol || g < opts.stall_gradient_tol;
            break;
        }
    }
    snapshot(iter, converged);
    if (!converged) {
        throw ConvergenceError(m, "beta regression did not converge after " + std::to_string(iter) +
                                      " iterations (gradient max-norm " + io::format_double(m.gradient_max_norm) +
                                      ")");
    }

    MatrixXd info = fisher_information(m.beta, m.phi, d);
    Eigen::LDLT<MatrixXd> ldlt(info);
    if (ldlt.info() == Eigen::Success && !ldlt.isNegative()) {
        const MatrixXd cov = ldlt.solve(MatrixXd::Identity(p + 1, p + 1));
        const VectorXd var = cov.diagonal();
        if (var.allFinite() && (var.array() > 0.0).all()) {
            m.std_errors = var.cwiseSqrt();
        }
    }
    res.diagnostics = diagnostics(m, d);
    return res;
}

FitDiagnostics diagnostics_from(double log_lik, long k, long n, double pseudo_r2) {
    FitDiagnostics dg;
    dg.log_lik = log_lik;
    dg.k = k;
    dg.n = n;
    dg.aic = -2.0 * log_lik + 2.0 * static_cast<double>(k);
    dg.bic = -2.0 * log_lik + static_cast<double>(k) * std::log(static_cast<double>(n));
    dg.pseudo_r2 = pseudo_r2;
    return dg;
}

FitDiagnostics diagnostics(const FittedModel& model, const DesignMatrix& design) {
    const DesignMatrix d = normalized_weights(design);
    const double ll = log_likelihood(model.beta, model.phi, d);
    const VectorXd eta = d.x * model.beta;
    VectorXd z(d.rows());
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        z(i) = std::log(d.y(i)) - std::log1p(-d.y(i));
    }
    const double r = pearson(eta, z);
    const double r2 = std::isfinite(r) ? std::min(1.0, r * r) : 0.0;
    return diagnostics_from(ll, model.n_params(), static_cast<long>(d.rows()), r2);
}

std::vector<std::string> FittedModel::column_names() const {
    std::vector<std::string> out;
    if (intercept) {
        out.emplace_back(kInterceptName);
    }
    for (const auto& c : covariates) {
        out.push_back(c.column_name());
    }
    return out;
}

double predict_linear(const FittedModel& model, const std::map<std::string, double>& values) {
    const auto expected = static_cast<Eigen::Index>(model.covariates.size()) + (model.intercept ? 1 : 0);
    if (model.beta.size() != expected) {
        throw Error("model coefficient count does not match its covariates");
    }
    double eta = 0.0;
    Eigen::Index col = 0;
    if (model.intercept) {
        eta += model.beta(col++);
    }
    for (const auto& c : model.covariates) {
        auto it = values.find(c.name);
        if (it == values.end()) {
            throw Error("missing covariate '" + c.name + "'");
        }
        double v = it->second;
        if (c.transform == Transform::log) {
            if (!(v > 0.0)) {
                throw RangeError("covariate '" + c.name + "' must be positive for a log transform");
            }
            v = std::log(v);
        }
        eta += model.beta(col++) * v;
    }
    return eta;
}

namespace {

double clamp_open_unit(double mu) {
    return std::clamp(mu, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

}  // namespace

double predict(const FittedModel& model, const std::map<std::string, double>& values) {
    return clamp_open_unit(logistic(predict_linear(model, values)));
}

double predict_row(const FittedModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    if (x.size() != model.beta.size()) {
        throw Error("row has " + std::to_string(x.size()) + " entries, model has " +
                    std::to_string(model.beta.size()) + " coefficients");
    }
    return clamp_open_unit(logistic(x.dot(model.beta)));
}

double compute_weights(int survey_year, std::span<const int> image_years) {
    if (image_years.empty()) {
        throw Error("compute_weights needs at least one image date");
    }
    double total = 0.0;
    for (int y : image_years) {
        const int gap = std::abs(survey_year - y);
        total += 1.0 / static_cast<double>(std::max(gap, 1));
    }
    return total;
}

FittedModel published_model(PublishedModel which) {
    FittedModel m;
    m.covariates = {{"gsv_cycle", Transform::log}, {"gsv_motorcycle", Transform::log}, {"pop_density", Transform::log}};
    m.intercept = false;
    m.beta.resize(3);
    if (which == PublishedModel::cycle) {
        m.beta << 1.138, -0.39, -0.863;
    } else {
        m.beta << -0.34, 1.48, -1.178;
    }
    m.source = "published";
    return m;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j) {
    return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::string model_to_json(const FittedModel& model, const std::optional<FitDiagnostics>& diag) {
    json doc;
    doc["format"] = "modeshare-betareg/1";
    doc["link"] = model.link;
    doc["intercept"] = model.intercept;
    json covs = json::array();
    for (const auto& c : model.covariates) {
        covs.push_back({{"name", c.name}, {"transform", transform_key(c.transform)}});
    }
    doc["covariates"] = covs;
    doc["columns"] = model.column_names();
    doc["beta"] = std::vector<double>(model.beta.data(), model.beta.data() + model.beta.size());
    doc["phi"] = number_or_null(model.phi);
    json fitmeta;
    fitmeta["source"] = model.source;
    fitmeta["log_lik"] = number_or_null(model.log_lik);
    fitmeta["n_iter"] = model.n_iter;
    fitmeta["converged"] = model.converged;
    fitmeta["gradient_max_norm"] = number_or_null(model.gradient_max_norm);
    fitmeta["n_obs"] = model.n_obs;
    fitmeta["weighted"] = model.weighted;
    if (model.std_errors) {
        fitmeta["std_errors"] =
            std::vector<double>(model.std_errors->data(), model.std_errors->data() + model.std_errors->size());
    } else {
        fitmeta["std_errors"] = nullptr;
    }
    doc["fit"] = fitmeta;
    if (diag) {
        doc["diagnostics"] = {{"log_lik", diag->log_lik}, {"aic", diag->aic},  {"bic", diag->bic},
                              {"pseudo_r2", diag->pseudo_r2}, {"n", diag->n}, {"k", diag->k}};
    } else {
        doc["diagnostics"] = nullptr;
    }
    return doc.dump(2) + "\n";
}

ModelDocument model_from_json(std::string_view text) {
    ModelDocument out;
    try {
        const json doc = json::parse(text);
        FittedModel& m = out.model;
        m.link = doc.at("link").get<std::string>();
        if (m.link != "logit") {
            throw Error("unsupported link '" + m.link + "'");
        }
        m.intercept = doc.at("intercept").get<bool>();
        for (const auto& c : doc.at("covariates")) {
            const std::string tr = c.at("transform").get<std::string>();
            Transform t;
            if (tr == "log") {
                t = Transform::log;
            } else if (tr == "identity") {
                t = Transform::identity;
            } else {
                throw Error("unknown transform '" + tr + "'");
            }
            m.covariates.push_back({c.at("name").get<std::string>(), t});
        }
        const auto beta = doc.at("beta").get<std::vector<double>>();
        m.beta = Eigen::Map<const VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
        if (m.beta.size() != static_cast<Eigen::Index>(m.covariates.size()) + (m.intercept ? 1 : 0)) {
            throw Error("beta length does not match covariates");
        }
        m.phi = number_or_nan(doc.at("phi"));
        const json& f = doc.at("fit");
        m.source = f.value("source", "fit");
        m.log_lik = number_or_nan(f.at("log_lik"));
        m.n_iter = f.value("n_iter", 0);
        m.converged = f.value("converged", false);
        m.gradient_max_norm = number_or_nan(f.at("gradient_max_norm"));
        m.n_obs = f.value("n_obs", 0L);
        m.weighted = f.value("weighted", false);
        if (f.contains("std_errors") && f.at("std_errors").is_array()) {
            const auto se = f.at("std_errors").get<std::vector<double>>();
            m.std_errors = Eigen::Map<const VectorXd>(se.data(), static_cast<Eigen::Index>(se.size()));
        }
        if (doc.contains("diagnostics") && doc.at("diagnostics").is_object()) {
            const json& dg = doc.at("diagnostics");
            FitDiagnostics d;
            d.log_lik = dg.at("log_lik").get<double>();
            d.aic = dg.at("aic").get<double>();
            d.bic = dg.at("bic").get<double>();
            d.pseudo_r2 = dg.at("pseudo_r2").get<double>();
            d.n = dg.at("n").get<long>();
            d.k = dg.at("k").get<long>();
            out.diagnostics = d;
        }
    } catch (const json::exception& e) {
        throw Error(std::string("model file: ") + e.what());
    }
    return out;
}

ModelDocument load_model(const std::filesystem::path& path) {
    return model_from_json(io::read_text(path));
}

}  // namespace modeshare::betareg
