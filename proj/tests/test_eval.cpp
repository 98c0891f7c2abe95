#include "support.hpp"

#include "modeshare/betareg.hpp"
#include "modeshare/eval.hpp"

#include <doctest.h>

#include <json.hpp>

#include <random>

using namespace modeshare;
using namespace modeshare::eval;

namespace {

const Eigen::VectorXd& headline_beta() {
    static const Eigen::VectorXd b = (Eigen::VectorXd(3) << 1.138, -0.39, -0.863).finished();
    return b;
}

struct HighError {
    const char* city;
    double observed;
    double predicted;
    double dif;
};

constexpr HighError kHighError[] = {{"Paris", 2, 17.96, 15.96},
                              {"Cali, Colombia", 16.6, 1.78, 14.82},
                              {"Kaohsiung, Taiwan", 61.3, 47.91, 13.39},
                              {"Trieste", 15.83, 29.19, 13.36},
                              {"Palembang, Indonesia", 43.09, 31.85, 11.24}};

EvalReport high_error_report() {
    std::vector<std::string> ids;
    std::vector<double> obs;
    std::vector<double> pred;
    for (const auto& r : kHighError) {
        ids.emplace_back(r.city);
        obs.push_back(r.observed);
        pred.push_back(r.predicted);
    }
    return make_report(ids, obs, pred);
}

}  // namespace

TEST_CASE("correlation matrix") {
    std::vector<Series> s{{"a", {1, 2, 3, 5}, false}, {"b", {-1, -2, -3, -5}, false}, {"c", {1, 10, 100, 1000}, true}};
    const auto m = corr_matrix(s);
    CHECK(m.names == std::vector<std::string>{"a", "b", "c"});
    for (int i = 0; i < 3; ++i) {
        CHECK(m.r(i, i) == 1.0);
        for (int j = 0; j < 3; ++j) {
            CHECK(m.r(i, j) == m.r(j, i));
        }
    }
    CHECK(m.r(0, 1) == doctest::Approx(-1.0).epsilon(1e-14));
    // log10 of c is 0,1,2,3 which is affine in 1,2,3,4 but not in a
    const double ma = 11.0 / 4;
    double sxy = 0, sxx = 0, syy = 0;
    const double av[] = {1, 2, 3, 5};
    for (int i = 0; i < 4; ++i) {
        sxy += (av[i] - ma) * (i - 1.5);
        sxx += (av[i] - ma) * (av[i] - ma);
        syy += (i - 1.5) * (i - 1.5);
    }
    CHECK(m.r(0, 2) == doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-12));

    std::vector<Series> flat{{"a", {1, 2, 3}, false}, {"const", {4, 4, 4}, false}};
    try {
        corr_matrix(flat);
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("const") != std::string::npos);
    }
    std::vector<Series> neg{{"a", {1, 2, 3}, false}, {"b", {1, -2, 3}, true}};
    CHECK_THROWS_AS(corr_matrix(neg), Error);
    std::vector<Series> shortv{{"a", {1, 2}, false}, {"b", {1, 3}, false}};
    CHECK_THROWS_AS(corr_matrix(shortv), Error);
    CHECK(format_corr_csv(m).rfind("variable,a,b,c\n", 0) == 0);
}

TEST_CASE("error metrics") {
    const std::vector<double> obs{10, 20, 30};
    const std::vector<double> pred{11, 18, 39};
    const auto e = error_metrics(obs, pred);
    CHECK(e.rmse == doctest::Approx(std::sqrt(86.0 / 3.0)).epsilon(1e-14));
    CHECK(e.rmse == doctest::Approx(5.3541).epsilon(1e-4));
    CHECK(e.mae == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(e.mdae == doctest::Approx(2.0).epsilon(1e-14));

    const auto z = error_metrics(obs, obs);
    CHECK(z.rmse == 0.0);
    CHECK(z.mae == 0.0);
    CHECK(z.mdae == 0.0);

    const std::vector<double> o4{0, 0, 0, 0};
    const std::vector<double> p4{1, 4, 2, 10};
    CHECK(error_metrics(o4, p4).mdae == 3.0);

    CHECK_THROWS_AS(error_metrics(obs, std::vector<double>{1, 2}), Error);
    CHECK_THROWS_AS(error_metrics(std::vector<double>{}, std::vector<double>{}), Error);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 80);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> a(17);
        std::vector<double> b(17);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
        }
        const auto base = error_metrics(a, b);
        CHECK(base.rmse >= base.mae);
        std::vector<std::size_t> perm(a.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> pa;
        std::vector<double> pb;
        for (auto i : perm) {
            pa.push_back(a[i]);
            pb.push_back(b[i]);
        }
        const auto p = error_metrics(pa, pb);
        CHECK(p.rmse == doctest::Approx(base.rmse).epsilon(1e-14));
        CHECK(p.mae == doctest::Approx(base.mae).epsilon(1e-14));
        CHECK(p.mdae == base.mdae);
    }
}

TEST_CASE("high-error motorcycle cities") {
    const auto rep = high_error_report();
    CHECK(rep.summary.mdae == doctest::Approx(13.39).epsilon(1e-12));
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        CHECK(rep.rows[i].abs_error_pp == doctest::Approx(kHighError[i].dif).epsilon(1e-12));
    }
    const auto flagged = residual_report(rep);
    REQUIRE(flagged.size() == 5);
    CHECK(flagged[0].city_id == "Paris");
    CHECK(flagged[0].abs_error_pp == doctest::Approx(15.96).epsilon(1e-12));
    CHECK(flagged[1].city_id == "Cali, Colombia");
    CHECK(flagged[1].abs_error_pp == doctest::Approx(14.82).epsilon(1e-12));
    for (std::size_t i = 1; i < flagged.size(); ++i) {
        CHECK(flagged[i - 1].abs_error_pp >= flagged[i].abs_error_pp);
    }
    CHECK(rep.flagged.size() == 5);
    CHECK(residual_report(rep, 20.0).empty());
    CHECK(residual_report(rep, 13.39).size() == 2);

    const auto back = parse_report_csv(format_report_csv(rep));
    CHECK(format_report_csv(back) == format_report_csv(rep));
    CHECK(format_report_csv(rep).find("\"Cali, Colombia\"") != std::string::npos);

    const auto js = nlohmann::json::parse(format_summary_json(rep));
    CHECK(js.at("n") == 5);
    CHECK(js.at("mdae_pp").get<double>() == rep.summary.mdae);
    CHECK(js.at("flagged").size() == 5);
}

TEST_CASE("scatter export") {
    const auto rep = high_error_report();
    const std::string csv = format_scatter_csv(rep);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
    const std::string filtered = format_scatter_csv(rep, 16.0);
    CHECK(filtered.find("Paris") != std::string::npos);
    CHECK(filtered.find("Trieste") != std::string::npos);
    CHECK(format_scatter_csv(rep, 50.0).find("Paris") == std::string::npos);
    const std::string svg = scatter_svg(rep, "motorcycle");
    CHECK(svg.rfind("<svg", 0) == 0);
    std::size_t circles = 0;
    for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) {
        ++circles;
    }
    CHECK(circles == 5);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
}

TEST_CASE("loocv equals an explicit refit loop") {
    const auto design = testsupport::simulate_headline_design(77, 20, headline_beta(), 30.0);
    const auto rep = loocv(design, 4);
    REQUIRE(rep.rows.size() == 20);
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const auto f = betareg::fit(design.without_row(i));
        const double manual = 100.0 * betareg::predict_row(f.model, design.x.row(i));
        const auto& row = rep.rows[static_cast<std::size_t>(i)];
        CHECK(row.city_id == design.row_ids[static_cast<std::size_t>(i)]);
        CHECK(row.predicted_pct == manual);
        CHECK(row.observed_pct == 100.0 * design.y(i));
    }
    const auto serial = loocv(design, 1);
    CHECK(format_report_csv(serial) == format_report_csv(rep));
}

TEST_CASE("loocv size limits") {
    const auto ok = testsupport::simulate_headline_design(3, 7, headline_beta(), 30.0);
    CHECK(loocv(ok).rows.size() == 7);
    const auto small = testsupport::simulate_headline_design(3, 6, headline_beta(), 30.0);
    CHECK_THROWS_AS(loocv(small), Error);
}

TEST_CASE("loocv on duplicated cities") {
    // Holding out either copy of a city leaves the same training multiset,
    // so both copies must get the same held-out prediction.
    const auto base = testsupport::simulate_headline_design(21, 30, headline_beta(), 30.0);
    auto d = base;
    d.x.conservativeResize(60, Eigen::NoChange);
    d.y.conservativeResize(60);
    d.x.bottomRows(30) = base.x;
    d.y.tail(30) = base.y;
    for (int i = 0; i < 30; ++i) {
        d.row_ids.push_back(base.row_ids[static_cast<std::size_t>(i)] + "b");
    }
    const auto rep = loocv(d, 4);
    double worst = 0.0;
    for (std::size_t i = 0; i < 30; ++i) {
        worst = std::max(worst, std::abs(rep.rows[i].predicted_pct - rep.rows[i + 30].predicted_pct));
    }
    MESSAGE("max twin disagreement = " << worst << " pp");
    CHECK(worst < 0.1);
}

TEST_CASE("loocv isolates each fold from its own row") {
    auto d = testsupport::simulate_headline_design(8, 25, headline_beta(), 30.0);
    const auto before = loocv(d, 2);
    const Eigen::Index target = 7;
    d.y(target) = 0.9;  // outlier
    const auto after = loocv(d, 2);
    CHECK(after.rows[target].predicted_pct == before.rows[target].predicted_pct);
    int changed = 0;
    for (std::size_t i = 0; i < after.rows.size(); ++i) {
        if (static_cast<Eigen::Index>(i) != target && after.rows[i].predicted_pct != before.rows[i].predicted_pct) {
            ++changed;
        }
    }
    CHECK(changed == 24);
}

TEST_CASE("a failing fold names the held-out city") {
    // column x1 is non-zero only in row 4, so dropping that row leaves it all zero
    std::mt19937_64 rng(2);
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(12, 2);
    x.col(1).setZero();
    x(4, 1) = 1.0;
    for (int i = 0; i < 12; ++i) {
        x(i, 0) = 0.1 * i - 0.5;
    }
    Eigen::VectorXd y(12);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    for (int i = 0; i < 12; ++i) {
        y(i) = u(rng);
    }
    const auto d = testsupport::raw_design(x, y);
    try {
        loocv(d);
        FAIL("expected FoldError");
    } catch (const FoldError& e) {
        CHECK(e.city_id() == "c4");
    }
}
