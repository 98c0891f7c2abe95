#pragma once

#include "modeshare/betareg.hpp"
#include "modeshare/error.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace modeshare::eval {

struct Series {
    std::string name;
    std::vector<double> values;
    bool log_transform = false;
};

struct CorrMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd r;
};

/// Pearson correlations between every pair of series. The diagonal is
/// exactly 1 and the matrix is exactly symmetric.
CorrMatrix corr_matrix(std::span<const Series> vars);
std::string format_corr_csv(const CorrMatrix& m);

/// All values in percentage points.
struct ErrorMetrics {
    double rmse = 0.0;
    double mae = 0.0;
    double mdae = 0.0;
};

ErrorMetrics error_metrics(std::span<const double> observed_pct, std::span<const double> predicted_pct);

struct CityPrediction {
    std::string city_id;
    double observed_pct = 0.0;
    double predicted_pct = 0.0;
    double abs_error_pp = 0.0;
};

struct EvalReport {
    std::vector<CityPrediction> rows;
    ErrorMetrics summary;
    double threshold_pp = 10.0;
    /// City ids with abs_error_pp > threshold_pp, in row order.
    std::vector<std::string> flagged;
};

EvalReport make_report(std::span<const std::string> city_ids, std::span<const double> observed_pct,
                       std::span<const double> predicted_pct, double threshold_pp = 10.0);

/// A cross-validation fold failed; names the held-out city.
class FoldError : public Error {
public:
    FoldError(std::string city_id, const std::string& what)
        : Error("fold holding out '" + city_id + "': " + what), city_id_(std::move(city_id)) {}
    const std::string& city_id() const noexcept { return city_id_; }

private:
    std::string city_id_;
};

/// Leave-one-out: refit without each row and predict it. Folds run on up to
/// `workers` threads; rows stay in design order.
EvalReport loocv(const betareg::DesignMatrix& design, std::size_t workers = 1,
                 const betareg::FitOptions& opts = {}, double threshold_pp = 10.0);

/// Rows with error above the threshold, largest error first.
std::vector<CityPrediction> residual_report(const EvalReport& report, double threshold_pp = 10.0);

/// `city_id,observed_pct,predicted_pct,abs_error_pp`
std::string format_report_csv(const EvalReport& report);
EvalReport parse_report_csv(std::string_view text, double threshold_pp = 10.0);

std::string format_residuals_csv(const std::vector<CityPrediction>& rows);

/// Summary block: n, rmse, mae, mdae, threshold and flagged ids.
std::string format_summary_json(const EvalReport& report);

/// Observed vs predicted pairs. With `min_pct`, points whose observed and
/// predicted values are both below it are left out.
std::string format_scatter_csv(const EvalReport& report, std::optional<double> min_pct = std::nullopt);

/// Minimal SVG scatter with axes and a y = x reference line.
std::string scatter_svg(const EvalReport& report, std::string_view title,
                        std::optional<double> min_pct = std::nullopt);

}  // namespace modeshare::eval
