#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace modeshare::detections {

enum class VehicleClass { motor = 0, pedal = 1, cargo = 2, rickshaw = 3 };

inline constexpr std::array<VehicleClass, 4> kAllClasses = {VehicleClass::motor, VehicleClass::pedal,
                                                            VehicleClass::cargo, VehicleClass::rickshaw};

std::string_view to_string(VehicleClass c);
std::optional<VehicleClass> parse_class(std::string_view s);

/// Pixel rectangle, min corner inclusive.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    bool valid() const { return x_min < x_max && y_min < y_max; }
    double area() const { return (x_max - x_min) * (y_max - y_min); }
};

struct Detection {
    std::string image_id;
    VehicleClass cls = VehicleClass::motor;
    double confidence = 0.0;
    Box box;
};

/// Detector output CSV `image_id,class,confidence,x_min,y_min,x_max,y_max`.
std::vector<Detection> parse_detections(std::string_view text);
std::vector<Detection> load_detections(const std::filesystem::path& path);
std::string format_detections(const std::vector<Detection>& dets);

/// Image manifest: one image_id per line, in acquisition order.
std::vector<std::string> parse_manifest(std::string_view text);
std::vector<std::string> load_manifest(const std::filesystem::path& path);

struct CityCounts {
    std::string city_id;
    long long gsv_cycle = 0;       // pedal detections
    long long gsv_motorcycle = 0;  // motor detections
    long long gsv_cargo = 0;
    long long gsv_rickshaw = 0;
    long long n_images = 0;

    long long count(VehicleClass c) const;
    long long& count(VehicleClass c);

    /// Associative merge of per-class counts over disjoint detection subsets.
    /// n_images is not summed (it belongs to the shared manifest).
    CityCounts& merge_detections(const CityCounts& other);

    friend bool operator==(const CityCounts&, const CityCounts&) = default;
};

inline constexpr double kDefaultConfidence = 0.25;

/// Count detections with confidence >= threshold per class. n_images is the
/// manifest size. Throws ConsistencyError for a detection whose image is not
/// in the manifest.
CityCounts aggregate_city_counts(std::string city_id, std::span<const Detection> dets,
                                 std::span<const std::string> manifest, double conf_threshold = kDefaultConfidence);

/// Per-image counts of one class, in manifest order.
std::vector<long long> per_image_counts(std::span<const Detection> dets, std::span<const std::string> manifest,
                                        VehicleClass cls, double conf_threshold = kDefaultConfidence);

std::string format_city_counts(const std::vector<CityCounts>& counts);
std::vector<CityCounts> parse_city_counts(std::string_view text);
std::vector<CityCounts> load_city_counts(const std::filesystem::path& path);

/// Manually verified true-positive counts; nullopt marks an "Na" entry.
struct ManualCounts {
    std::string city_id;
    std::optional<long long> tp_cycle;
    std::optional<long long> tp_motorcycle;
    std::optional<long long> printed_yolo_sum;
    std::optional<long long> printed_tp_sum;
};

/// CSV `city_id,tp_cycle,tp_motorcycle[,yolo_sum,tp_sum]`; "Na" or empty = absent.
std::vector<ManualCounts> parse_manual_counts(std::string_view text);
std::vector<ManualCounts> load_manual_counts(const std::filesystem::path& path);

struct ClassComparison {
    long long automated = 0;
    std::optional<long long> manual_tp;
    std::optional<double> ratio;  // manual / automated; absent when skipped
    bool skipped = false;
};

struct ManualComparison {
    std::string city_id;
    ClassComparison cycle;
    ClassComparison motorcycle;
    long long yolo_sum = 0;
    std::optional<long long> tp_sum;
    bool yolo_sum_mismatch = false;  // printed sum disagreed with recomputed sum
    bool tp_sum_mismatch = false;
    std::vector<std::string> notes;
};

ManualComparison compare_manual(const CityCounts& automated, const ManualCounts& manual);

std::string format_manual_comparison(const std::vector<ManualComparison>& rows);

struct SaturationPoint {
    std::size_t images_seen = 0;
    double detections_per_image = 0.0;
};

/// Cumulative detections / cumulative images, sampled every `step` images
/// (and at the final image if it is not a multiple of `step`).
std::vector<SaturationPoint> saturation_curve(std::span<const long long> per_image, std::size_t step);

std::vector<SaturationPoint> saturation_curve(std::span<const Detection> dets, std::span<const std::string> manifest,
                                              VehicleClass cls, std::size_t step,
                                              double conf_threshold = kDefaultConfidence);

std::string format_saturation_csv(const std::vector<SaturationPoint>& series);

}  // namespace modeshare::detections
