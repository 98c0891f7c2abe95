#include "modeshare/eval.hpp"

#include "modeshare/io.hpp"
#include "modeshare/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace modeshare::eval {

CorrMatrix corr_matrix(std::span<const Series> vars) {
    if (vars.empty()) {
        throw Error("corr_matrix needs at least one series");
    }
    const std::size_t n = vars.front().values.size();
    if (n < 3) {
        throw Error("corr_matrix needs series of length >= 3");
    }
    const auto k = static_cast<Eigen::Index>(vars.size());
    Eigen::MatrixXd centered(static_cast<Eigen::Index>(n), k);
    CorrMatrix out;
    for (Eigen::Index j = 0; j < k; ++j) {
        const Series& s = vars[static_cast<std::size_t>(j)];
        if (s.values.size() != n) {
            throw Error("series '" + s.name + "' has length " + std::to_string(s.values.size()) + ", expected " +
                        std::to_string(n));
        }
        for (std::size_t i = 0; i < n; ++i) {
            double v = s.values[i];
            if (s.log_transform) {
                if (!(v > 0.0)) {
                    throw RangeError("series '" + s.name + "' has a non-positive value at position " +
                                     std::to_string(i) + " and cannot be log transformed");
                }
                v = std::log(v);
            }
            if (!std::isfinite(v)) {
                throw RangeError("series '" + s.name + "' has a non-finite value");
            }
            centered(static_cast<Eigen::Index>(i), j) = v;
        }
        const double mean = centered.col(j).mean();
        centered.col(j).array() -= mean;
        if (!(centered.col(j).squaredNorm() > 0.0)) {
            throw RangeError("series '" + s.name + "' has zero variance");
        }
        out.names.push_back(s.name);
    }
    out.r = Eigen::MatrixXd::Identity(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = a + 1; b < k; ++b) {
            const double r = centered.col(a).dot(centered.col(b)) /
                             std::sqrt(centered.col(a).squaredNorm() * centered.col(b).squaredNorm());
            out.r(a, b) = out.r(b, a) = std::clamp(r, -1.0, 1.0);
        }
    }
    return out;
}

std::string format_corr_csv(const CorrMatrix& m) {
    std::vector<std::string> header{"variable"};
    header.insert(header.end(), m.names.begin(), m.names.end());
    std::string out = io::csv_join(header) + "\n";
    for (Eigen::Index a = 0; a < m.r.rows(); ++a) {
        std::vector<std::string> row{m.names[static_cast<std::size_t>(a)]};
        for (Eigen::Index b = 0; b < m.r.cols(); ++b) {
            row.push_back(io::format_double(m.r(a, b)));
        }
        out += io::csv_join(row) + "\n";
    }
    return out;
}

ErrorMetrics error_metrics(std::span<const double> observed_pct, std::span<const double> predicted_pct) {
    if (observed_pct.size() != predicted_pct.size()) {
        throw Error("observed and predicted lists differ in length (" + std::to_string(observed_pct.size()) +
                    " vs " + std::to_string(predicted_pct.size()) + ")");
    }
    if (observed_pct.empty()) {
        throw Error("error metrics need at least one pair");
    }
    const std::size_t n = observed_pct.size();
    std::vector<double> abs_err(n);
    for (std::size_t i = 0; i < n; ++i) {
        abs_err[i] = std::abs(observed_pct[i] - predicted_pct[i]);
    }
    // sort first so the sums do not depend on input order
    std::sort(abs_err.begin(), abs_err.end());
    double sq = 0.0;
    double ab = 0.0;
    for (double e : abs_err) {
        sq += e * e;
        ab += e;
    }
    ErrorMetrics m;
    m.rmse = std::sqrt(sq / static_cast<double>(n));
    m.mae = ab / static_cast<double>(n);
    m.mdae = n % 2 == 1 ? abs_err[n / 2] : 0.5 * (abs_err[n / 2 - 1] + abs_err[n / 2]);
    return m;
}

EvalReport make_report(std::span<const std::string> city_ids, std::span<const double> observed_pct,
                       std::span<const double> predicted_pct, double threshold_pp) {
    if (city_ids.size() != observed_pct.size()) {
        throw Error("city id count does not match observations");
    }
    EvalReport r;
    r.threshold_pp = threshold_pp;
    r.summary = error_metrics(observed_pct, predicted_pct);
    for (std::size_t i = 0; i < city_ids.size(); ++i) {
        CityPrediction p{city_ids[i], observed_pct[i], predicted_pct[i], std::abs(observed_pct[i] - predicted_pct[i])};
        if (p.abs_error_pp > threshold_pp) {
            r.flagged.push_back(p.city_id);
        }
        r.rows.push_back(std::move(p));
    }
    return r;
}

EvalReport loocv(const betareg::DesignMatrix& design, std::size_t workers, const betareg::FitOptions& opts,
                 double threshold_pp) {
    design.validate();
    const auto n = static_cast<std::size_t>(design.rows());
    const auto k = static_cast<std::size_t>(design.cols()) + 1;
    if (n <= k + 2) {
        throw Error("leave-one-out needs more than " + std::to_string(k + 2) + " rows, got " + std::to_string(n));
    }
    std::vector<std::string> ids = design.row_ids;
    if (ids.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            ids.push_back("row" + std::to_string(i));
        }
    }
    std::vector<double> predicted(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        try {
            const betareg::FitResult f = betareg::fit(design.without_row(row), opts);
            predicted[i] = 100.0 * betareg::predict_row(f.model, design.x.row(row));
        } catch (const Error& e) {
            throw FoldError(ids[i], e.what());
        }
    });
    std::vector<double> observed(n);
    for (std::size_t i = 0; i < n; ++i) {
        observed[i] = 100.0 * design.y(static_cast<Eigen::Index>(i));
    }
    return make_report(ids, observed, predicted, threshold_pp);
}

std::vector<CityPrediction> residual_report(const EvalReport& report, double threshold_pp) {
    std::vector<CityPrediction> out;
    for (const auto& r : report.rows) {
        if (r.abs_error_pp > threshold_pp) {
            out.push_back(r);
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const CityPrediction& a, const CityPrediction& b) { return a.abs_error_pp > b.abs_error_pp; });
    return out;
}

namespace {

std::string prediction_rows(const std::vector<CityPrediction>& rows) {
    std::string out = "city_id,observed_pct,predicted_pct,abs_error_pp\n";
    for (const auto& r : rows) {
        out += io::csv_join({r.city_id, io::format_double(r.observed_pct), io::format_double(r.predicted_pct),
                             io::format_double(r.abs_error_pp)}) +
               "\n";
    }
    return out;
}

}  // namespace

std::string format_report_csv(const EvalReport& report) { return prediction_rows(report.rows); }

std::string format_residuals_csv(const std::vector<CityPrediction>& rows) { return prediction_rows(rows); }

EvalReport parse_report_csv(std::string_view text, double threshold_pp) {
    const io::CsvTable t = io::parse_csv(text);
    const std::size_t c_id = t.require("city_id");
    const std::size_t c_obs = t.require("observed_pct");
    const std::size_t c_pred = t.require("predicted_pct");
    std::vector<std::string> ids;
    std::vector<double> obs;
    std::vector<double> pred;
    for (const auto& row : t.rows()) {
        const auto o = io::parse_double(row.fields[c_obs]);
        const auto p = io::parse_double(row.fields[c_pred]);
        if (!o || !p) {
            throw RowError(row.line, "observed_pct and predicted_pct must be numbers");
        }
        ids.push_back(row.fields[c_id]);
        obs.push_back(*o);
        pred.push_back(*p);
    }
    if (ids.empty()) {
        throw Error("evaluation report has no rows");
    }
    return make_report(ids, obs, pred, threshold_pp);
}

std::string format_summary_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["n"] = report.rows.size();
    j["rmse_pp"] = report.summary.rmse;
    j["mae_pp"] = report.summary.mae;
    j["mdae_pp"] = report.summary.mdae;
    j["threshold_pp"] = report.threshold_pp;
    j["flagged"] = report.flagged;
    return j.dump(2) + "\n";
}

namespace {

bool visible(const CityPrediction& r, std::optional<double> min_pct) {
    return !min_pct || r.observed_pct >= *min_pct || r.predicted_pct >= *min_pct;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string format_scatter_csv(const EvalReport& report, std::optional<double> min_pct) {
    std::string out = "city_id,observed_pct,predicted_pct\n";
    for (const auto& r : report.rows) {
        if (visible(r, min_pct)) {
            out += io::csv_join({r.city_id, io::format_double(r.observed_pct), io::format_double(r.predicted_pct)}) +
                   "\n";
        }
    }
    return out;
}

std::string scatter_svg(const EvalReport& report, std::string_view title, std::optional<double> min_pct) {
    constexpr double kSize = 400.0;
    constexpr double kMargin = 50.0;
    double hi = 1.0;
    for (const auto& r : report.rows) {
        if (visible(r, min_pct)) {
            hi = std::max({hi, r.observed_pct, r.predicted_pct});
        }
    }
    hi = std::ceil(hi / 10.0) * 10.0;
    const auto sx = [&](double v) { return kMargin + v / hi * kSize; };
    const auto sy = [&](double v) { return kMargin + kSize - v / hi * kSize; };
    const std::string total = fixed(kSize + 2 * kMargin, 0);

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + total + "\" height=\"" + total + "\">\n";
    s += "<text x=\"" + fixed(kMargin, 0) + "\" y=\"30\" font-size=\"14\">" + xml_escape(title) + "</text>\n";
    s += "<line x1=\"" + fixed(sx(0), 2) + "\" y1=\"" + fixed(sy(0), 2) + "\" x2=\"" + fixed(sx(hi), 2) +
         "\" y2=\"" + fixed(sy(0), 2) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + fixed(sx(0), 2) + "\" y1=\"" + fixed(sy(0), 2) + "\" x2=\"" + fixed(sx(0), 2) +
         "\" y2=\"" + fixed(sy(hi), 2) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + fixed(sx(0), 2) + "\" y1=\"" + fixed(sy(0), 2) + "\" x2=\"" + fixed(sx(hi), 2) +
         "\" y2=\"" + fixed(sy(hi), 2) + "\" stroke=\"grey\" stroke-dasharray=\"4 4\"/>\n";
    s += "<text x=\"" + fixed(sx(hi / 2), 2) + "\" y=\"" + fixed(sy(0) + 35, 2) +
         "\" font-size=\"12\" text-anchor=\"middle\">observed (%)</text>\n";
    s += "<text x=\"15\" y=\"" + fixed(sy(hi / 2), 2) + "\" font-size=\"12\" transform=\"rotate(-90 15 " +
         fixed(sy(hi / 2), 2) + ")\" text-anchor=\"middle\">predicted (%)</text>\n";
    s += "<text x=\"" + fixed(sx(hi), 2) + "\" y=\"" + fixed(sy(0) + 15, 2) +
         "\" font-size=\"10\" text-anchor=\"end\">" + fixed(hi, 0) + "</text>\n";
    for (const auto& r : report.rows) {
        if (!visible(r, min_pct)) {
            continue;
        }
        s += "<circle cx=\"" + fixed(sx(r.observed_pct), 2) + "\" cy=\"" + fixed(sy(r.predicted_pct), 2) +
             "\" r=\"3\" fill=\"steelblue\"><title>" + xml_escape(r.city_id) + "</title></circle>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace modeshare::eval
