#pragma once

#include "modeshare/betareg.hpp"
#include "modeshare/config.hpp"
#include "modeshare/dataset.hpp"
#include "modeshare/detections.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modeshare::pipeline {

enum class Stage { sample, aggregate, eval_detections, fit, loocv, predict, report };

std::optional<Stage> parse_stage(std::string_view name);
std::string_view to_string(Stage s);

/// One output file, relative to the output directory.
struct Artifact {
    std::filesystem::path relative;
    std::string contents;
};

/// Compute a stage's artifacts without touching the output directory.
std::vector<Artifact> run_stage(Stage stage, const config::PipelineConfig& cfg);

/// Write artifacts atomically under `out`. If any write fails, files written
/// by this call are removed before the error propagates.
std::vector<std::filesystem::path> commit(const std::filesystem::path& out, const std::vector<Artifact>& artifacts);

std::vector<std::filesystem::path> run(Stage stage, const config::PipelineConfig& cfg);

/// Covariates of the headline models, in design column order.
std::vector<betareg::Covariate> model_covariates();

struct DesignBuild {
    betareg::DesignMatrix design;
    std::vector<std::string> excluded;  // "city_id: reason"
};

/// Training rows with a share for `mode` and detection counts. With
/// `weights`, only cities that have a weight are used.
DesignBuild build_design(const std::vector<dataset::CityRecord>& records,
                         const std::vector<detections::CityCounts>& counts, config::Mode mode, bool intercept,
                         const std::map<std::string, double>* weights = nullptr);

/// Covariate values for prediction, keyed by covariate name.
std::map<std::string, double> covariate_values(const dataset::CityRecord& record,
                                               const detections::CityCounts& counts);

}  // namespace modeshare::pipeline
