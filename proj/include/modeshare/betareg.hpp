#pragma once

// Beta regression with a logit mean link and constant precision.
//
// For response y in (0,1) with mean mu = logistic(x'beta) and precision phi,
// the per-observation log-density is
//
//   lgamma(phi) - lgamma(mu phi) - lgamma((1-mu) phi)
//     + (mu phi - 1) log y + ((1-mu) phi - 1) log(1-y)
//
// and observation weights multiply the per-row terms.

#include "modeshare/error.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace modeshare::betareg {

enum class Transform { identity, log };

std::string_view to_string(Transform t);

/// A model input: a named source variable and the transform applied to it
/// before it enters the design.
struct Covariate {
    std::string name;
    Transform transform = Transform::log;

    std::string column_name() const;
    friend bool operator==(const Covariate&, const Covariate&) = default;
};

inline constexpr std::string_view kInterceptName = "(Intercept)";

struct DesignMatrix {
    std::vector<Covariate> covariates;
    bool intercept = false;
    Eigen::MatrixXd x;  // rows: observations; columns: intercept (if any) then covariates
    Eigen::VectorXd y;
    std::optional<Eigen::VectorXd> weights;
    std::vector<std::string> row_ids;

    Eigen::Index rows() const { return x.rows(); }
    Eigen::Index cols() const { return x.cols(); }
    std::vector<std::string> column_names() const;

    /// Throws Error describing the first violated invariant.
    void validate() const;

    /// Copy without row `i`.
    DesignMatrix without_row(Eigen::Index i) const;
    /// Copy with rows reordered: result row k = this row perm[k].
    DesignMatrix permuted(std::span<const Eigen::Index> perm) const;
};

struct Observation {
    std::string id;
    std::vector<double> values;  // raw values, one per covariate
    double y = 0.0;
    std::optional<double> weight;
};

/// Apply covariate transforms and assemble a validated design.
DesignMatrix make_design(std::vector<Covariate> covariates, bool intercept, std::span<const Observation> rows);

double logistic(double eta);

double log_likelihood(const Eigen::VectorXd& beta, double phi, const DesignMatrix& design);

/// Analytic score: d/d beta followed by d/d phi (length cols + 1).
Eigen::VectorXd gradient(const Eigen::VectorXd& beta, double phi, const DesignMatrix& design);

/// Expected (Fisher) information for (beta, phi), (cols + 1) square.
Eigen::MatrixXd fisher_information(const Eigen::VectorXd& beta, double phi, const DesignMatrix& design);

struct FittedModel {
    std::vector<Covariate> covariates;
    bool intercept = false;
    std::string link = "logit";
    Eigen::VectorXd beta;
    /// Precision; NaN for coefficient-only (published) models.
    double phi = std::numeric_limits<double>::quiet_NaN();
    double log_lik = std::numeric_limits<double>::quiet_NaN();
    int n_iter = 0;
    bool converged = false;
    double gradient_max_norm = std::numeric_limits<double>::quiet_NaN();
    std::optional<Eigen::VectorXd> std_errors;  // beta entries then phi
    long n_obs = 0;
    bool weighted = false;
    std::string source = "fit";

    std::vector<std::string> column_names() const;
    /// Number of estimated parameters: coefficients plus phi.
    long n_params() const { return static_cast<long>(beta.size()) + 1; }
};

struct FitDiagnostics {
    double log_lik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double pseudo_r2 = 0.0;
    long n = 0;
    long k = 0;
};

struct StartValues {
    Eigen::VectorXd beta;
    double phi = 1.0;
};

struct FitOptions {
    int max_iter = 200;
    double gradient_tol = 1e-8;
    double step_tol = 1e-10;
    /// A stop on step_tol only counts as converged below this gradient norm.
    double stall_gradient_tol = 1e-6;
    int max_halvings = 60;
    /// Largest change of any coefficient or of log phi in one iteration.
    double max_step = 5.0;
    std::optional<StartValues> init;
};

struct FitResult {
    FittedModel model;
    FitDiagnostics diagnostics;
    /// Log-likelihood at the start and after every accepted step.
    std::vector<double> log_lik_trace;
    /// Rounding bound on each log-likelihood evaluation.
    double log_lik_noise = 0.0;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(FittedModel last, const std::string& what) : Error(what), last_(std::move(last)) {}
    const FittedModel& last_iterate() const noexcept { return last_; }

private:
    FittedModel last_;
};

/// Weighted least squares of logit(y) for beta; method-of-moments phi.
/// Falls back to beta = 0, phi = 1 when the moment estimate is unusable.
StartValues start_values(const DesignMatrix& design);

/// Maximum-likelihood fit by Fisher scoring on (beta, log phi) with a
/// backtracking line search. Weights are rescaled to mean 1 first.
FitResult fit(const DesignMatrix& design, const FitOptions& opts = {});

/// AIC, BIC and pseudo R² (squared correlation of x'beta with logit(y)).
FitDiagnostics diagnostics(const FittedModel& model, const DesignMatrix& design);
FitDiagnostics diagnostics_from(double log_lik, long k, long n, double pseudo_r2);

/// Linear predictor for raw covariate values keyed by covariate name.
double predict_linear(const FittedModel& model, const std::map<std::string, double>& values);

/// logistic(x'beta), kept strictly inside (0,1).
double predict(const FittedModel& model, const std::map<std::string, double>& values);

/// Same, for a row already in design (transformed) space.
double predict_row(const FittedModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Sum over images of 1 / max(|survey_year - image_year|, 1).
double compute_weights(int survey_year, std::span<const int> image_years);

enum class PublishedModel { cycle, motorcycle };

/// Coefficient-only models from the reference equations (no intercept;
/// covariates log gsv_cycle, log gsv_motorcycle, log pop_density).
FittedModel published_model(PublishedModel which);

/// JSON document: covariates, link, intercept flag, beta, phi, diagnostics
/// and fit metadata. Doubles round-trip exactly.
std::string model_to_json(const FittedModel& model, const std::optional<FitDiagnostics>& diag = std::nullopt);

struct ModelDocument {
    FittedModel model;
    std::optional<FitDiagnostics> diagnostics;
};

ModelDocument model_from_json(std::string_view text);
ModelDocument load_model(const std::filesystem::path& path);

}  // namespace modeshare::betareg
