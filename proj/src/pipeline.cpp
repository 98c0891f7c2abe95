#include "modeshare/pipeline.hpp"

#include "modeshare/detmetrics.hpp"
#include "modeshare/error.hpp"
#include "modeshare/eval.hpp"
#include "modeshare/io.hpp"
#include "modeshare/parallel.hpp"
#include "modeshare/sampler.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>

namespace modeshare::pipeline {
namespace fs = std::filesystem;
using config::Mode;
using config::PipelineConfig;

namespace {

const fs::path& require_path(const std::optional<fs::path>& p, const char* key) {
    if (!p) {
        throw ConfigError(key, "required by this subcommand");
    }
    return *p;
}

/// Stems of files in `dir` ending in `suffix`, sorted.
std::vector<std::string> city_files(const fs::path& dir, std::string_view suffix) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (e.is_regular_file() && name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            out.push_back(name.substr(0, name.size() - suffix.size()));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<dataset::CityRecord> load_cities(const PipelineConfig& cfg) {
    const fs::path& path = require_path(cfg.paths.city_table, "paths.city_table");
    std::vector<dataset::CityRecord> records;
    try {
        records = dataset::load_city_table(path);
    } catch (const Error& e) {
        throw ConfigError("paths.city_table", e.what());
    }
    if (records.empty()) {
        throw ConfigError("paths.city_table", "city table has no rows");
    }
    return dataset::apply_commute_adjustment(std::move(records), cfg.commute);
}

std::vector<detections::CityCounts> load_counts(const PipelineConfig& cfg) {
    fs::path path = cfg.paths.counts ? *cfg.paths.counts : cfg.run.out / "city_counts.csv";
    if (!fs::exists(path)) {
        throw ConfigError("paths.counts", "no counts table (run aggregate first or set paths.counts): " +
                                              path.string());
    }
    return detections::load_city_counts(path);
}

std::map<std::string, double> load_weights(const PipelineConfig& cfg,
                                           const std::vector<dataset::CityRecord>& records) {
    const fs::path& dir = require_path(cfg.paths.metadata, "paths.metadata");
    std::map<std::string, double> weights;
    for (const auto& r : records) {
        const fs::path f = dir / (r.city_id + ".csv");
        if (!r.survey_year || !fs::exists(f)) {
            continue;
        }
        std::vector<int> years;
        for (const auto& m : sampler::FixtureMetadataClient::load(f).entries()) {
            if (m.available && m.capture_year) {
                years.push_back(*m.capture_year);
            }
        }
        if (!years.empty()) {
            weights[r.city_id] = betareg::compute_weights(*r.survey_year, years);
        }
    }
    return weights;
}

std::string mode_tag(Mode m) { return std::string(config::to_string(m)); }

DesignBuild design_for(const PipelineConfig& cfg) {
    const auto records = load_cities(cfg);
    const auto counts = load_counts(cfg);
    std::map<std::string, double> weights;
    if (cfg.model.weighted) {
        weights = load_weights(cfg, records);
    }
    return build_design(records, counts, cfg.model.mode, cfg.model.intercept, cfg.model.weighted ? &weights : nullptr);
}

std::string design_csv(const DesignBuild& b) {
    const auto& d = b.design;
    std::vector<std::string> header{"city_id"};
    for (const auto& n : d.column_names()) {
        header.push_back(n);
    }
    header.emplace_back("y");
    if (d.weights) {
        header.emplace_back("weight");
    }
    std::string out = io::csv_join(header) + "\n";
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        std::vector<std::string> row{d.row_ids[static_cast<std::size_t>(i)]};
        for (Eigen::Index j = 0; j < d.cols(); ++j) {
            row.push_back(io::format_double(d.x(i, j)));
        }
        row.push_back(io::format_double(d.y(i)));
        if (d.weights) {
            row.push_back(io::format_double((*d.weights)(i)));
        }
        out += io::csv_join(row) + "\n";
    }
    for (const auto& e : b.excluded) {
        out += "# excluded " + e + "\n";
    }
    return out;
}

std::vector<Artifact> stage_sample(const PipelineConfig& cfg) {
    const fs::path& roads = require_path(cfg.paths.roads, "paths.roads");
    const auto cities = city_files(roads, ".geojson");
    if (cities.empty()) {
        throw ConfigError("paths.roads", "no <city_id>.geojson road networks found");
    }
    std::unique_ptr<sampler::MetadataClient> live;
    if (cfg.sampling.metadata == config::MetadataSource::live) {
        live = std::make_unique<sampler::HttpMetadataClient>(sampler::HttpMetadataClient::from_environment());
    }
    struct CityOut {
        std::vector<Artifact> files;
        std::string summary;
    };
    std::vector<CityOut> outs(cities.size());
    const bool city_parallel = cfg.sampling.metadata != config::MetadataSource::live;
    parallel_for(cities.size(), city_parallel ? cfg.run.workers : 1, [&](std::size_t i) {
        const std::string& id = cities[i];
        try {
            const auto network = sampler::load_road_network(roads / (id + ".geojson"));
            sampler::SamplingOptions opts;
            opts.spacing_m = cfg.sampling.spacing_m;
            opts.max_points = cfg.sampling.max_points;
            opts.seed = cfg.sampling.seed ^ fnv1a(id);
            auto points = sampler::sample_points(network, opts);
            const std::size_t sampled = points.size();
            const fs::path dir = fs::path("sample") / id;
            CityOut& o = outs[i];
            o.files.push_back({dir / "points.csv", sampler::format_points_csv(points)});
            if (cfg.sampling.metadata != config::MetadataSource::none) {
                sampler::AvailabilityResult av;
                if (live) {
                    av = sampler::filter_by_availability(points, *live, cfg.run.workers);
                } else {
                    const fs::path f = require_path(cfg.paths.metadata, "paths.metadata") / (id + ".csv");
                    const auto client = sampler::FixtureMetadataClient::load(f);
                    av = sampler::filter_by_availability(points, client, 1);
                }
                o.files.push_back({dir / "metadata.csv", sampler::format_metadata_csv(av.metadata)});
                points = std::move(av.kept);
            }
            const auto requests = sampler::plan_requests(points);
            o.files.push_back({dir / "requests.csv", sampler::format_requests_csv(requests)});
            o.summary = io::csv_join({id, std::to_string(sampled), std::to_string(points.size()),
                                      std::to_string(requests.size())}) +
                        "\n";
        } catch (const Error& e) {
            throw Error("city '" + id + "': " + e.what());
        }
    });
    std::vector<Artifact> all;
    std::string summary = "city_id,sampled_points,kept_points,requests\n";
    for (auto& o : outs) {
        for (auto& f : o.files) {
            all.push_back(std::move(f));
        }
        summary += o.summary;
    }
    all.push_back({"sample/summary.csv", summary});
    return all;
}

std::vector<Artifact> stage_aggregate(const PipelineConfig& cfg) {
    const fs::path& dir = require_path(cfg.paths.detections, "paths.detections");
    std::vector<std::string> cities;
    for (const auto& id : city_files(dir, ".csv")) {
        if (fs::exists(dir / (id + ".images.txt"))) {
            cities.push_back(id);
        }
    }
    if (cities.empty()) {
        throw ConfigError("paths.detections", "no <city_id>.csv with matching <city_id>.images.txt found");
    }
    std::vector<detections::CityCounts> counts(cities.size());
    std::vector<std::string> saturation(cities.size());
    parallel_for(cities.size(), cfg.run.workers, [&](std::size_t i) {
        const std::string& id = cities[i];
        try {
            const auto dets = detections::load_detections(dir / (id + ".csv"));
            const auto manifest = detections::load_manifest(dir / (id + ".images.txt"));
            counts[i] = detections::aggregate_city_counts(id, dets, manifest, cfg.thresholds.confidence);
            std::string csv = "class,images_seen,detections_per_image\n";
            for (auto cls : {detections::VehicleClass::pedal, detections::VehicleClass::motor}) {
                const auto curve = detections::saturation_curve(dets, manifest, cls, cfg.thresholds.saturation_step,
                                                                cfg.thresholds.confidence);
                for (const auto& p : curve) {
                    csv += std::string(detections::to_string(cls)) + "," + std::to_string(p.images_seen) + "," +
                           io::format_double(p.detections_per_image) + "\n";
                }
            }
            saturation[i] = std::move(csv);
        } catch (const Error& e) {
            throw Error("city '" + id + "': " + e.what());
        }
    });
    std::vector<Artifact> out;
    out.push_back({"city_counts.csv", detections::format_city_counts(counts)});
    for (std::size_t i = 0; i < cities.size(); ++i) {
        out.push_back({fs::path("saturation") / (cities[i] + ".csv"), saturation[i]});
    }

    if (cfg.paths.manual_counts) {
        const auto manual = detections::load_manual_counts(*cfg.paths.manual_counts);
        std::vector<detections::ManualComparison> rows;
        for (const auto& m : manual) {
            auto it = std::find_if(counts.begin(), counts.end(),
                                   [&](const detections::CityCounts& c) { return c.city_id == m.city_id; });
            if (it == counts.end()) {
                throw ConsistencyError("manual counts list city '" + m.city_id + "' with no detections");
            }
            rows.push_back(detections::compare_manual(*it, m));
        }
        out.push_back({"manual_comparison.csv", detections::format_manual_comparison(rows)});
    }

    if (cfg.paths.boundaries && cfg.paths.population) {
        std::string csv = "city_id,population,area_km2,pop_density\n";
        for (const auto& id : city_files(*cfg.paths.boundaries, ".geojson")) {
            const fs::path grid_file = *cfg.paths.population / (id + ".csv");
            if (!fs::exists(grid_file)) {
                continue;
            }
            const auto boundary = dataset::load_boundary(*cfg.paths.boundaries / (id + ".geojson"));
            const auto grid = dataset::load_population_grid(grid_file);
            const double density = dataset::compute_population_density(grid, boundary);
            csv += io::csv_join({id, io::format_double(density * boundary.area_km2),
                                 io::format_double(boundary.area_km2), io::format_double(density)}) +
                   "\n";
        }
        out.push_back({"population_density.csv", csv});
    }
    return out;
}

std::vector<Artifact> stage_eval_detections(const PipelineConfig& cfg) {
    const auto gts = detmetrics::load_ground_truth(require_path(cfg.paths.ground_truth, "paths.ground_truth"));
    const auto dets =
        detections::load_detections(require_path(cfg.paths.labelled_detections, "paths.labelled_detections"));
    const auto report = detmetrics::evaluate(dets, gts, cfg.thresholds.iou, cfg.thresholds.confidence);
    return {{"detection_metrics.csv", detmetrics::format_metrics_csv(report)}};
}

std::vector<Artifact> stage_fit(const PipelineConfig& cfg) {
    const DesignBuild b = design_for(cfg);
    const betareg::FitResult r = betareg::fit(b.design);
    const std::string tag = mode_tag(cfg.model.mode);
    return {{"model_" + tag + ".json", betareg::model_to_json(r.model, r.diagnostics)},
            {"design_" + tag + ".csv", design_csv(b)}};
}

std::vector<Artifact> stage_loocv(const PipelineConfig& cfg) {
    const DesignBuild b = design_for(cfg);
    const eval::EvalReport rep = eval::loocv(b.design, cfg.run.workers, {}, cfg.thresholds.residual_pp);
    const std::string tag = mode_tag(cfg.model.mode);
    return {{"loocv_" + tag + ".csv", eval::format_report_csv(rep)},
            {"loocv_" + tag + "_summary.json", eval::format_summary_json(rep)},
            {"residuals_" + tag + ".csv",
             eval::format_residuals_csv(eval::residual_report(rep, cfg.thresholds.residual_pp))}};
}

std::string pct_or_empty(const std::optional<double>& share) {
    return share ? io::format_double(100.0 * *share) : std::string();
}

std::vector<Artifact> stage_predict(const PipelineConfig& cfg) {
    const auto records = load_cities(cfg);
    const auto counts = load_counts(cfg);
    betareg::FittedModel model;
    if (cfg.paths.model) {
        model = betareg::load_model(*cfg.paths.model).model;
    } else {
        model = betareg::published_model(cfg.model.mode == Mode::cycle ? betareg::PublishedModel::cycle
                                                                       : betareg::PublishedModel::motorcycle);
    }
    std::map<std::string, const detections::CityCounts*> by_id;
    for (const auto& c : counts) {
        by_id[c.city_id] = &c;
    }

    const std::string header = "city_id,name,country,role,observed_pct,predicted_pct\n";
    std::string all = header;
    std::string demo = header;
    std::string map = "city_id,name,country,role,lat,lon,predicted_pct\n";
    std::vector<double> demo_pct;
    for (const auto& r : records) {
        auto it = by_id.find(r.city_id);
        if (it == by_id.end()) {
            continue;
        }
        double pct = 0.0;
        try {
            pct = 100.0 * betareg::predict(model, covariate_values(r, *it->second));
        } catch (const Error& e) {
            throw Error("city '" + r.city_id + "': " + e.what());
        }
        const auto& observed = cfg.model.mode == Mode::cycle ? r.cycle_share : r.motorcycle_share;
        const std::string role(dataset::to_string(r.role));
        const std::string line =
            io::csv_join({r.city_id, r.name, r.country, role, pct_or_empty(observed), io::format_double(pct)}) + "\n";
        all += line;
        if (r.role == dataset::CityRole::demo) {
            demo += line;
            demo_pct.push_back(pct);
        }
        std::string lat;
        std::string lon;
        if (cfg.paths.boundaries) {
            const fs::path f = *cfg.paths.boundaries / (r.city_id + ".geojson");
            if (fs::exists(f)) {
                const auto b = dataset::load_boundary(f);
                double sl = 0.0;
                double so = 0.0;
                std::size_t n = 0;
                for (const auto& v : b.polygons.front().rings.front()) {
                    sl += v.lat;
                    so += v.lon;
                    ++n;
                }
                // closing vertex repeats the first
                const auto& first = b.polygons.front().rings.front().front();
                sl -= first.lat;
                so -= first.lon;
                --n;
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.7f", sl / static_cast<double>(n));
                lat = buf;
                std::snprintf(buf, sizeof buf, "%.7f", so / static_cast<double>(n));
                lon = buf;
            }
        }
        map += io::csv_join({r.city_id, r.name, r.country, role, lat, lon, io::format_double(pct)}) + "\n";
    }

    nlohmann::ordered_json summary;
    summary["mode"] = mode_tag(cfg.model.mode);
    summary["model_source"] = model.source;
    summary["n_demo"] = demo_pct.size();
    if (!demo_pct.empty()) {
        std::sort(demo_pct.begin(), demo_pct.end());
        const std::size_t n = demo_pct.size();
        summary["min_pct"] = demo_pct.front();
        summary["median_pct"] = n % 2 ? demo_pct[n / 2] : 0.5 * (demo_pct[n / 2 - 1] + demo_pct[n / 2]);
        summary["max_pct"] = demo_pct.back();
    }
    const std::string tag = mode_tag(cfg.model.mode);
    return {{"predictions_" + tag + ".csv", all},
            {"demo_" + tag + ".csv", demo},
            {"demo_" + tag + "_summary.json", summary.dump(2) + "\n"},
            {"map_" + tag + ".csv", map}};
}

std::vector<Artifact> stage_report(const PipelineConfig& cfg) {
    const std::string tag = mode_tag(cfg.model.mode);
    const fs::path loocv_file = cfg.run.out / ("loocv_" + tag + ".csv");
    if (!fs::exists(loocv_file)) {
        throw ConfigError("run.out", "missing " + loocv_file.string() + " (run loocv first)");
    }
    const eval::EvalReport rep = eval::parse_report_csv(io::read_text(loocv_file), cfg.thresholds.residual_pp);

    nlohmann::ordered_json doc;
    doc["mode"] = tag;
    doc["loocv"] = nlohmann::ordered_json::parse(eval::format_summary_json(rep));
    nlohmann::ordered_json flagged = nlohmann::ordered_json::array();
    for (const auto& r : eval::residual_report(rep, cfg.thresholds.residual_pp)) {
        flagged.push_back({{"city_id", r.city_id},
                           {"observed_pct", r.observed_pct},
                           {"predicted_pct", r.predicted_pct},
                           {"abs_error_pp", r.abs_error_pp}});
    }
    doc["residuals"] = flagged;
    const fs::path model_file = cfg.run.out / ("model_" + tag + ".json");
    if (fs::exists(model_file)) {
        doc["model"] = nlohmann::ordered_json::parse(io::read_text(model_file));
    } else {
        doc["model"] = nullptr;
    }
    const fs::path metrics_file = cfg.run.out / "detection_metrics.csv";
    if (fs::exists(metrics_file)) {
        const io::CsvTable t = io::read_csv(metrics_file);
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (const auto& row : t.rows()) {
            nlohmann::ordered_json o;
            for (std::size_t c = 0; c < t.header().size(); ++c) {
                o[t.header()[c]] = row.fields[c];
            }
            rows.push_back(o);
        }
        doc["detection_metrics"] = rows;
    } else {
        doc["detection_metrics"] = nullptr;
    }
    return {{"report_" + tag + ".json", doc.dump(2) + "\n"},
            {"scatter_" + tag + ".csv", eval::format_scatter_csv(rep, cfg.run.plot_min_pct)},
            {"scatter_" + tag + ".svg",
             eval::scatter_svg(rep, "LOOCV " + tag + " mode share", cfg.run.plot_min_pct)}};
}

}  // namespace

std::optional<Stage> parse_stage(std::string_view name) {
    for (Stage s : {Stage::sample, Stage::aggregate, Stage::eval_detections, Stage::fit, Stage::loocv,
                    Stage::predict, Stage::report}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    return std::nullopt;
}

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::sample: return "sample";
        case Stage::aggregate: return "aggregate";
        case Stage::eval_detections: return "eval-detections";
        case Stage::fit: return "fit";
        case Stage::loocv: return "loocv";
        case Stage::predict: return "predict";
        case Stage::report: return "report";
    }
    return "";
}

std::vector<Artifact> run_stage(Stage stage, const PipelineConfig& cfg) {
    switch (stage) {
        case Stage::sample: return stage_sample(cfg);
        case Stage::aggregate: return stage_aggregate(cfg);
        case Stage::eval_detections: return stage_eval_detections(cfg);
        case Stage::fit: return stage_fit(cfg);
        case Stage::loocv: return stage_loocv(cfg);
        case Stage::predict: return stage_predict(cfg);
        case Stage::report: return stage_report(cfg);
    }
    return {};
}

std::vector<fs::path> commit(const fs::path& out, const std::vector<Artifact>& artifacts) {
    std::vector<fs::path> written;
    try {
        for (const auto& a : artifacts) {
            const fs::path p = out / a.relative;
            fs::create_directories(p.parent_path());
            io::write_atomic(p, a.contents);
            written.push_back(p);
        }
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) {
            fs::remove(p, ec);
        }
        throw;
    }
    return written;
}

std::vector<fs::path> run(Stage stage, const PipelineConfig& cfg) {
    return commit(cfg.run.out, run_stage(stage, cfg));
}

std::vector<betareg::Covariate> model_covariates() {
    return {{"gsv_cycle", betareg::Transform::log},
            {"gsv_motorcycle", betareg::Transform::log},
            {"pop_density", betareg::Transform::log}};
}

std::map<std::string, double> covariate_values(const dataset::CityRecord& record,
                                               const detections::CityCounts& counts) {
    return {{"gsv_cycle", static_cast<double>(counts.gsv_cycle)},
            {"gsv_motorcycle", static_cast<double>(counts.gsv_motorcycle)},
            {"pop_density", record.pop_density}};
}

DesignBuild build_design(const std::vector<dataset::CityRecord>& records,
                         const std::vector<detections::CityCounts>& counts, Mode mode, bool intercept,
                         const std::map<std::string, double>* weights) {
    std::map<std::string, const detections::CityCounts*> by_id;
    for (const auto& c : counts) {
        by_id[c.city_id] = &c;
    }
    DesignBuild out;
    std::vector<betareg::Observation> rows;
    for (const auto& r : records) {
        if (r.role != dataset::CityRole::training) {
            continue;
        }
        const auto& share = mode == Mode::cycle ? r.cycle_share : r.motorcycle_share;
        if (!share) {
            out.excluded.push_back(r.city_id + ": no " + mode_tag(mode) + " share");
            continue;
        }
        auto it = by_id.find(r.city_id);
        if (it == by_id.end()) {
            out.excluded.push_back(r.city_id + ": no detection counts");
            continue;
        }
        std::optional<double> w;
        if (weights) {
            auto wi = weights->find(r.city_id);
            if (wi == weights->end()) {
                out.excluded.push_back(r.city_id + ": no image dates for weighting");
                continue;
            }
            w = wi->second;
        }
        const auto values = covariate_values(r, *it->second);
        betareg::Observation o;
        o.id = r.city_id;
        for (const auto& c : model_covariates()) {
            const double v = values.at(c.name);
            if (!(v > 0.0)) {
                throw RangeError("city '" + r.city_id + "': " + c.name + " is zero and cannot be log transformed");
            }
            o.values.push_back(v);
        }
        o.y = *share;
        o.weight = w;
        rows.push_back(std::move(o));
    }
    if (rows.empty()) {
        throw Error("no training cities have both a " + mode_tag(mode) + " share and detection counts");
    }
    out.design = betareg::make_design(model_covariates(), intercept, rows);
    return out;
}

}  // namespace modeshare::pipeline
