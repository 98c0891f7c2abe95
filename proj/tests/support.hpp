#pragma once

// Independent test-side oracles and data generators. Nothing here calls the
// library's numerical code.

#include "modeshare/betareg.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace testsupport {

// Straight-line Beta log-density sum with the logit mean link.
inline double beta_loglik_oracle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                                 double phi, const Eigen::VectorXd* w = nullptr) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double eta = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            eta += x(i, j) * beta(j);
        }
        const double mu = 1.0 / (1.0 + std::exp(-eta));
        const double p = mu * phi;
        const double q = (1.0 - mu) * phi;
        const double term = std::lgamma(phi) - std::lgamma(p) - std::lgamma(q) + (p - 1.0) * std::log(y(i)) +
                            (q - 1.0) * std::log(1.0 - y(i));
        total += (w ? (*w)(i) : 1.0) * term;
    }
    return total;
}

// Digamma by upward recurrence and the asymptotic series.
inline double digamma_oracle(double x) {
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132)))));
    return acc + std::log(x) - 0.5 * inv - series;
}

// Central finite difference of f at v along each coordinate, h relative.
template <class F>
Eigen::VectorXd central_difference(F&& f, const Eigen::VectorXd& v, double rel_h = 1e-6) {
    Eigen::VectorXd g(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        const double h = rel_h * std::max(1.0, std::abs(v(k)));
        Eigen::VectorXd up = v;
        Eigen::VectorXd dn = v;
        up(k) += h;
        dn(k) -= h;
        g(k) = (f(up) - f(dn)) / (up(k) - dn(k));
    }
    return g;
}

inline double beta_draw(std::mt19937_64& rng, double a, double b) {
    for (;;) {
        std::gamma_distribution<double> ga(a, 1.0);
        std::gamma_distribution<double> gb(b, 1.0);
        const double u = ga(rng);
        const double v = gb(rng);
        const double y = u / (u + v);
        if (y > 0.0 && y < 1.0) {
            return y;
        }
    }
}

struct SimCity {
    double gsv_cycle;
    double gsv_motorcycle;
    double pop_density;
};

// Log-normal covariates around the training medians, clamped to the observed
// ranges of the city sample.
inline std::vector<SimCity> simulate_covariates(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<SimCity> out;
    for (int i = 0; i < n; ++i) {
        SimCity c;
        c.gsv_cycle = std::clamp(155.0 * std::exp(1.10 * z(rng)), 17.0, 2719.0);
        c.gsv_motorcycle = std::clamp(142.0 * std::exp(1.50 * z(rng)), 32.0, 4400.0);
        c.pop_density = std::clamp(3502.0 * std::exp(0.66 * z(rng)), 1084.0, 21635.0);
        out.push_back(c);
    }
    return out;
}

// Beta-regression responses for a design: y ~ Beta(mu phi, (1-mu) phi).
inline Eigen::VectorXd simulate_response(std::mt19937_64& rng, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                                         double phi) {
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mu = 1.0 / (1.0 + std::exp(-x.row(i).dot(beta)));
        y(i) = beta_draw(rng, mu * phi, (1.0 - mu) * phi);
    }
    return y;
}

inline modeshare::betareg::DesignMatrix raw_design(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                   bool intercept = false) {
    modeshare::betareg::DesignMatrix d;
    d.intercept = intercept;
    for (Eigen::Index j = intercept ? 1 : 0; j < x.cols(); ++j) {
        d.covariates.push_back({"x" + std::to_string(j), modeshare::betareg::Transform::identity});
    }
    d.x = x;
    d.y = y;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        d.row_ids.push_back("c" + std::to_string(i));
    }
    return d;
}

// Simulated headline-model design (three log covariates, no intercept).
inline modeshare::betareg::DesignMatrix simulate_headline_design(std::uint64_t seed, int n,
                                                                 const Eigen::VectorXd& beta, double phi) {
    std::mt19937_64 rng(seed);
    const auto cities = simulate_covariates(rng, n);
    Eigen::MatrixXd x(n, 3);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = std::log(cities[static_cast<std::size_t>(i)].gsv_cycle);
        x(i, 1) = std::log(cities[static_cast<std::size_t>(i)].gsv_motorcycle);
        x(i, 2) = std::log(cities[static_cast<std::size_t>(i)].pop_density);
    }
    auto d = raw_design(x, simulate_response(rng, x, beta, phi));
    d.covariates = {{"gsv_cycle", modeshare::betareg::Transform::log},
                    {"gsv_motorcycle", modeshare::betareg::Transform::log},
                    {"pop_density", modeshare::betareg::Transform::log}};
    return d;
}

// Brute-force maximiser of the single-covariate likelihood on a lattice,
// refined around the best node until the spacing reaches `resolution`.
struct GridOptimum {
    double beta;
    double phi;
};

inline GridOptimum grid_search_1d(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double beta_lo, double beta_hi,
                                  double log_phi_lo, double log_phi_hi, double resolution) {
    auto ll = [&](double b, double lp) {
        Eigen::VectorXd bv(1);
        bv(0) = b;
        return beta_loglik_oracle(x, y, bv, std::exp(lp));
    };
    double bl = beta_lo, bh = beta_hi, pl = log_phi_lo, ph = log_phi_hi;
    double best_b = 0.5 * (bl + bh), best_p = 0.5 * (pl + ph);
    const int nodes = 41;
    for (;;) {
        double best = -INFINITY;
        const double db = (bh - bl) / (nodes - 1);
        const double dp = (ph - pl) / (nodes - 1);
        for (int i = 0; i < nodes; ++i) {
            for (int j = 0; j < nodes; ++j) {
                const double b = bl + i * db;
                const double p = pl + j * dp;
                const double v = ll(b, p);
                if (v > best) {
                    best = v;
                    best_b = b;
                    best_p = p;
                }
            }
        }
        if (db <= resolution && dp <= resolution) {
            break;
        }
        bl = best_b - 2 * db;
        bh = best_b + 2 * db;
        pl = best_p - 2 * dp;
        ph = best_p + 2 * dp;
    }
    return {best_b, std::exp(best_p)};
}

// Scratch directory removed at scope exit.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("modeshare_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testsupport

#include "modeshare/detections.hpp"

namespace testsupport {

// 8000-image city with exactly `pedal` and `motor` detections at or above
// the default confidence, plus sub-threshold noise and other classes.
inline void city_fixture(std::uint64_t seed, long long pedal, long long motor, std::size_t n_images,
                         std::vector<modeshare::detections::Detection>& dets, std::vector<std::string>& manifest) {
    using modeshare::detections::VehicleClass;
    std::mt19937_64 rng(seed);
    manifest.clear();
    dets.clear();
    for (std::size_t i = 0; i < n_images; ++i) {
        manifest.push_back("pt" + std::to_string(i / 4) + "_h" + std::to_string((i % 4) * 90));
    }
    std::uniform_int_distribution<std::size_t> img(0, n_images - 1);
    std::uniform_real_distribution<double> conf_hi(0.25, 1.0);
    std::uniform_real_distribution<double> conf_lo(0.0, 0.2499);
    auto add = [&](VehicleClass c, double conf) {
        const double x = static_cast<double>(rng() % 600);
        const double y = static_cast<double>(rng() % 600);
        dets.push_back({manifest[img(rng)], c, conf, {x, y, x + 20, y + 30}});
    };
    for (long long k = 0; k < pedal; ++k) {
        add(VehicleClass::pedal, conf_hi(rng));
    }
    for (long long k = 0; k < motor; ++k) {
        add(VehicleClass::motor, conf_hi(rng));
    }
    for (int k = 0; k < 300; ++k) {
        add(k % 2 ? VehicleClass::pedal : VehicleClass::motor, conf_lo(rng));
    }
    for (int k = 0; k < 40; ++k) {
        add(k % 2 ? VehicleClass::cargo : VehicleClass::rickshaw, conf_hi(rng));
    }
    std::shuffle(dets.begin(), dets.end(), rng);
}

}  // namespace testsupport
