#include "support.hpp"

#include "modeshare/config.hpp"
#include "modeshare/detections.hpp"
#include "modeshare/error.hpp"
#include "modeshare/eval.hpp"
#include "modeshare/io.hpp"
#include "modeshare/pipeline.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <map>
#include <random>

#include <sys/wait.h>

using namespace modeshare;
namespace fs = std::filesystem;

namespace {

std::string pct_text(double share) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", 100.0 * share);
    return buf;
}

std::string square_geojson(double lat, double lon, double half) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  R"({"type":"Polygon","coordinates":[[[%.6f,%.6f],[%.6f,%.6f],[%.6f,%.6f],[%.6f,%.6f],[%.6f,%.6f]]]})",
                  lon - half, lat - half, lon + half, lat - half, lon + half, lat + half, lon - half, lat + half,
                  lon - half, lat - half);
    return buf;
}

std::string roads_geojson(double lat, double lon) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  R"({"type":"FeatureCollection","features":[)"
                  R"({"type":"Feature","properties":{"edge_id":"e1"},"geometry":{"type":"LineString","coordinates":[[%.6f,%.6f],[%.6f,%.6f]]}},)"
                  R"({"type":"Feature","properties":{"edge_id":"e2"},"geometry":{"type":"LineString","coordinates":[[%.6f,%.6f],[%.6f,%.6f],[%.6f,%.6f]]}}]})",
                  lon, lat, lon + 0.01, lat, lon, lat, lon, lat + 0.005, lon + 0.004, lat + 0.008);
    return buf;
}

double logistic3(const double* b, double a, double m, double d) {
    return 1.0 / (1.0 + std::exp(-(b[0] * std::log(a) + b[1] * std::log(m) + b[2] * std::log(d))));
}

// A 20-city training set plus three demo cities, laid out as the pipeline
// expects, with shares simulated from the headline coefficients.
struct Fixture {
    testsupport::TempDir dir{"pipeline"};
    fs::path config;

    Fixture() {
        const fs::path root = dir.path;
        for (const char* sub : {"detections", "roads", "boundaries", "population", "metadata"}) {
            fs::create_directories(root / sub);
        }
        std::mt19937_64 rng(2024);
        const auto cov = testsupport::simulate_covariates(rng, 23);
        const double bc[] = {1.138, -0.39, -0.863};
        const double bm[] = {-0.34, 1.48, -1.178};
        std::string table = std::string(dataset::kCityTableHeader) + "\n";
        std::string manual = "city_id,tp_cycle,tp_motorcycle\n";
        for (int i = 0; i < 23; ++i) {
            const auto& c = cov[static_cast<std::size_t>(i)];
            const std::string id = "city" + std::to_string(100 + i);
            const bool demo = i >= 20;
            const auto pedal = static_cast<long long>(std::llround(c.gsv_cycle));
            const auto motor = static_cast<long long>(std::llround(c.gsv_motorcycle));
            std::vector<detections::Detection> dets;
            std::vector<std::string> manifest;
            testsupport::city_fixture(static_cast<std::uint64_t>(i), pedal, motor, 400, dets, manifest);
            testsupport::write_file(root / "detections" / (id + ".csv"), detections::format_detections(dets));
            std::string m;
            for (const auto& s : manifest) {
                m += s + "\n";
            }
            testsupport::write_file(root / "detections" / (id + ".images.txt"), m);

            const double area = 120.0;
            const double population = std::round(c.pop_density * area);
            const double dens = population / area;
            auto draw = [&](const double* b) {
                const double mu = logistic3(b, static_cast<double>(pedal), static_cast<double>(motor), dens);
                return std::clamp(testsupport::beta_draw(rng, mu * 30.0, (1.0 - mu) * 30.0), 0.0005, 0.95);
            };
            const double ys = draw(bc);
            const double ym = draw(bm);
            table += io::csv_join({id, "City " + std::to_string(i), i % 3 ? "NL" : "GB", demo ? "demo" : "training",
                                   demo ? "" : pct_text(ys), demo ? "" : pct_text(ym), "2019", "all_trips",
                                   io::format_double(population), io::format_double(area)}) +
                     "\n";
            if (i < 4) {
                manual += id + "," + std::to_string(pedal * 3 / 4) + "," + (i == 2 ? "Na" : std::to_string(motor / 2)) +
                          "\n";
            }
            if (i < 2) {
                const double lat = 52.0 + i;
                const double lon = 4.0 + i;
                testsupport::write_file(root / "roads" / (id + ".geojson"), roads_geojson(lat, lon));
                testsupport::write_file(root / "boundaries" / (id + ".geojson"), square_geojson(lat, lon, 0.05));
                std::string grid = "# cell_size_m=1000\nlat,lon,population\n";
                for (int a = -6; a <= 6; ++a) {
                    for (int b = -6; b <= 6; ++b) {
                        grid += io::format_double(lat + 0.01 * a) + "," + io::format_double(lon + 0.01 * b) + ",100\n";
                    }
                }
                testsupport::write_file(root / "population" / (id + ".csv"), grid);
            }
        }
        testsupport::write_file(root / "cities.csv", table);
        testsupport::write_file(root / "manual.csv", manual);
        testsupport::write_file(root / "gt.csv", "image_id,class,x_min,y_min,x_max,y_max\n"
                                                 "a,pedal,0,0,10,10\n"
                                                 "a,motor,20,20,40,40\n"
                                                 "b,pedal,0,0,10,10\n");
        testsupport::write_file(root / "labelled.csv", "image_id,class,confidence,x_min,y_min,x_max,y_max\n"
                                                       "a,pedal,0.9,0,0,10,10\n"
                                                       "a,motor,0.8,21,20,40,40\n"
                                                       "b,pedal,0.7,50,50,60,60\n"
                                                       "b,cargo,0.1,0,0,10,10\n");
        config = root / "run.toml";
        testsupport::write_file(config, "[paths]\n"
                                        "city_table = \"cities.csv\"\n"
                                        "detections = \"detections\"\n"
                                        "roads = \"roads\"\n"
                                        "boundaries = \"boundaries\"\n"
                                        "population = \"population\"\n"
                                        "manual_counts = \"manual.csv\"\n"
                                        "ground_truth = \"gt.csv\"\n"
                                        "labelled_detections = \"labelled.csv\"\n"
                                        "[sampling]\n"
                                        "spacing_m = 50\n"
                                        "max_points = 20\n"
                                        "seed = 11\n"
                                        "[model]\n"
                                        "mode = \"cycle\"\n"
                                        "[run]\n"
                                        "workers = 4\n");
    }

    config::PipelineConfig load(const fs::path& out, std::vector<std::pair<std::string, std::string>> extra = {}) const {
        extra.emplace_back("run.out", out.string());
        return config::load_config(config, extra);
    }
};

constexpr pipeline::Stage kAll[] = {pipeline::Stage::sample,  pipeline::Stage::aggregate,
                                    pipeline::Stage::eval_detections, pipeline::Stage::fit,
                                    pipeline::Stage::loocv,   pipeline::Stage::predict,
                                    pipeline::Stage::report};

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            out[fs::relative(e.path(), root).generic_string()] = testsupport::slurp(e.path());
        }
    }
    return out;
}

}  // namespace

TEST_CASE("stage names") {
    for (auto s : kAll) {
        CHECK(pipeline::parse_stage(pipeline::to_string(s)) == s);
    }
    CHECK(pipeline::to_string(pipeline::Stage::eval_detections) == "eval-detections");
    CHECK_FALSE(pipeline::parse_stage("train").has_value());
}

TEST_CASE("full pipeline run is deterministic and leaves inputs alone") {
    Fixture fx;
    const auto inputs_before = snapshot(fx.dir.path);
    const fs::path out_a = fx.dir.path.parent_path() / (fx.dir.path.filename().string() + "_a");
    const fs::path out_b = fx.dir.path.parent_path() / (fx.dir.path.filename().string() + "_b");
    fs::remove_all(out_a);
    fs::remove_all(out_b);

    for (const auto& out : {out_a, out_b}) {
        const auto cfg = fx.load(out);
        for (auto s : kAll) {
            INFO("stage " << pipeline::to_string(s));
            CHECK_NOTHROW(pipeline::run(s, cfg));
        }
        // motorcycle predictions with the bundled model
        CHECK_NOTHROW(pipeline::run(pipeline::Stage::predict, fx.load(out, {{"model.mode", "motorcycle"}})));
    }
    CHECK(snapshot(fx.dir.path) == inputs_before);

    const auto a = snapshot(out_a);
    const auto b = snapshot(out_b);
    CHECK(a == b);
    for (const char* f : {"sample/city100/points.csv", "sample/city100/requests.csv", "sample/summary.csv",
                          "city_counts.csv", "saturation/city100.csv", "manual_comparison.csv",
                          "population_density.csv", "detection_metrics.csv", "model_cycle.json", "design_cycle.csv",
                          "loocv_cycle.csv", "loocv_cycle_summary.json", "residuals_cycle.csv",
                          "predictions_cycle.csv", "demo_cycle.csv", "demo_cycle_summary.json", "map_cycle.csv",
                          "report_cycle.json", "scatter_cycle.csv", "scatter_cycle.svg",
                          "demo_motorcycle_summary.json"}) {
        CHECK_MESSAGE(a.count(f) == 1, f);
    }
    for (const auto& [name, _] : a) {
        CHECK(name.find(".tmp") == std::string::npos);
    }

    // 8000 requests per 2000 points holds per point here: 4 requests each
    const auto pts = io::parse_csv(a.at("sample/city100/points.csv"));
    const auto req = io::parse_csv(a.at("sample/city100/requests.csv"));
    CHECK(req.rows().size() == 4 * pts.rows().size());
    CHECK(pts.rows().size() <= 20);

    // aggregated counts reproduce the generated per-class totals
    const auto counts = detections::parse_city_counts(a.at("city_counts.csv"));
    REQUIRE(counts.size() == 23);
    std::mt19937_64 rng(2024);
    const auto cov = testsupport::simulate_covariates(rng, 23);
    for (std::size_t i = 0; i < 23; ++i) {
        CHECK(counts[i].gsv_cycle == std::llround(cov[i].gsv_cycle));
        CHECK(counts[i].gsv_motorcycle == std::llround(cov[i].gsv_motorcycle));
        CHECK(counts[i].n_images == 400);
    }

    // report summary carries exactly the eval module's mdae
    const auto cfg = fx.load(out_a);
    const auto records = dataset::apply_commute_adjustment(dataset::load_city_table(fx.dir.path / "cities.csv"), {});
    const auto design = pipeline::build_design(records, counts, config::Mode::cycle, false).design;
    CHECK(design.rows() == 20);
    const auto direct = eval::loocv(design, 1);
    const auto report = nlohmann::json::parse(a.at("report_cycle.json"));
    CHECK(report.at("loocv").at("mdae_pp").get<double>() == direct.summary.mdae);
    CHECK(report.at("loocv").at("rmse_pp").get<double>() == direct.summary.rmse);
    CHECK(nlohmann::json::parse(a.at("loocv_cycle_summary.json")).at("mdae_pp").get<double>() ==
          direct.summary.mdae);

    for (const char* mode : {"cycle", "motorcycle"}) {
        const auto demo = io::parse_csv(a.at(std::string("demo_") + mode + ".csv"));
        REQUIRE(demo.rows().size() == 3);
        const std::size_t c = demo.require("predicted_pct");
        for (const auto& row : demo.rows()) {
            const double v = *io::parse_double(row.fields[c]);
            CHECK(v > 0.0);
            CHECK(v < 100.0);
        }
    }
    const auto summary = nlohmann::json::parse(a.at("demo_motorcycle_summary.json"));
    CHECK(summary.at("model_source") == "published");
    CHECK(summary.at("min_pct").get<double>() <= summary.at("median_pct").get<double>());

    const auto metrics = a.at("detection_metrics.csv");
    CHECK(metrics.find("pedal") != std::string::npos);
    CHECK(a.at("manual_comparison.csv").find("Na") != std::string::npos);

    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("empty city table is a configuration error") {
    Fixture fx;
    testsupport::write_file(fx.dir.path / "cities.csv", std::string(dataset::kCityTableHeader) + "\n");
    const auto cfg = fx.load(fx.dir.path / "out");
    try {
        pipeline::run(pipeline::Stage::fit, cfg);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "paths.city_table");
    }
    CHECK_FALSE(fs::exists(fx.dir.path / "out" / "model_cycle.json"));
}

TEST_CASE("failed commit removes what it wrote") {
    testsupport::TempDir dir("commit");
    testsupport::write_file(dir.path / "blocker", "not a directory");
    const std::vector<pipeline::Artifact> arts{{"first.txt", "1"}, {"blocker/second.txt", "2"}};
    CHECK_THROWS(pipeline::commit(dir.path, arts));
    CHECK_FALSE(fs::exists(dir.path / "first.txt"));
    CHECK(testsupport::slurp(dir.path / "blocker") == "not a directory");
}

#ifdef MODESHARE_CLI_PATH
TEST_CASE("command line exit codes") {
    Fixture fx;
    const fs::path out = fx.dir.path / "cli_out";
    const std::string cli = MODESHARE_CLI_PATH;
    auto run = [&](const std::string& args) {
        const std::string cmd = "\"" + cli + "\" " + args + " > \"" + (fx.dir.path / "log.txt").string() + "\" 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    const std::string base = "--config \"" + fx.config.string() + "\" --out \"" + out.string() + "\"";
    CHECK(run("aggregate " + base) == 0);
    CHECK(fs::exists(out / "city_counts.csv"));
    CHECK(run("fit " + base + " --seed 5 --model.mode=motorcycle") == 0);
    CHECK(fs::exists(out / "model_motorcycle.json"));
    CHECK(run("fit " + base + " --sampling.spacing_m 5") == 2);
    CHECK(testsupport::slurp(fx.dir.path / "log.txt").find("sampling.spacing_m") != std::string::npos);
    CHECK(run("fit " + base + " --model.colour=red") == 2);
    CHECK(run("frobnicate " + base) != 0);
    // a training set too small for leave-one-out fails the stage
    std::string table = std::string(dataset::kCityTableHeader) + "\n";
    const auto full = io::read_csv(fx.dir.path / "cities.csv");
    for (std::size_t i = 0; i < 5; ++i) {
        table += io::csv_join(full.rows()[i].fields) + "\n";
    }
    testsupport::write_file(fx.dir.path / "small.csv", table);
    CHECK(run("loocv " + base + " --paths.city_table=small.csv") == 1);
    CHECK_FALSE(fs::exists(out / "loocv_cycle.csv"));
}
#endif
