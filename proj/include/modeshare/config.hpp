#pragma once

// Pipeline configuration: a small TOML subset ([section] headers and
// key = value lines with string, number or boolean values) whose every key
// can be overridden by a dotted name such as `sampling.seed`.

#include "modeshare/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modeshare::config {

struct RawValue {
    std::string text;
    bool quoted = false;
    std::string origin;  // "file:line" or "command line"
};

/// Flat dotted-key view of a config document.
using RawConfig = std::map<std::string, RawValue>;

/// Throws ConfigError naming the offending key (or "line N" for syntax).
RawConfig parse_toml(std::string_view text, std::string_view source = "config");

/// Apply `key=value` overrides. Throws ConfigError on malformed input.
void apply_override(RawConfig& raw, std::string_view dotted_key, std::string_view value);

enum class Mode { cycle, motorcycle };
std::string_view to_string(Mode m);

enum class MetadataSource { none, fixture, live };
std::string_view to_string(MetadataSource s);

struct PipelineConfig {
    std::filesystem::path base_dir;  // relative paths resolve against this

    struct Paths {
        std::optional<std::filesystem::path> city_table;
        std::optional<std::filesystem::path> boundaries;   // dir of <city_id>.geojson
        std::optional<std::filesystem::path> population;   // dir of <city_id>.csv
        std::optional<std::filesystem::path> roads;        // dir of <city_id>.geojson
        std::optional<std::filesystem::path> detections;   // dir of <city_id>.csv + <city_id>.images.txt
        std::optional<std::filesystem::path> metadata;     // dir of <city_id>.csv fixtures
        std::optional<std::filesystem::path> ground_truth;
        std::optional<std::filesystem::path> labelled_detections;
        std::optional<std::filesystem::path> manual_counts;
        std::optional<std::filesystem::path> counts;
        std::optional<std::filesystem::path> model;
    } paths;

    struct Sampling {
        double spacing_m = 50.0;
        std::size_t max_points = 2000;
        std::uint64_t seed = 1;
        MetadataSource metadata = MetadataSource::none;
    } sampling;

    struct Thresholds {
        double confidence = 0.25;
        double iou = 0.5;
        double residual_pp = 10.0;
        std::size_t saturation_step = 100;
    } thresholds;

    struct Model {
        Mode mode = Mode::cycle;
        bool intercept = false;
        bool weighted = false;
    } model;

    dataset::CommuteFactors commute;

    struct Run {
        std::filesystem::path out = "out";
        std::size_t workers = 1;
        std::optional<double> plot_min_pct;
    } run;
};

/// Typed, validated configuration. Unknown keys, wrong types, out-of-range
/// values and missing referenced paths raise ConfigError.
PipelineConfig build_config(const RawConfig& raw, const std::filesystem::path& base_dir);

PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace modeshare::config
