#pragma once

#include "modeshare/detections.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace modeshare::detmetrics {

using detections::Box;
using detections::Detection;
using detections::VehicleClass;

/// Intersection over union; 0 for disjoint boxes.
double iou(const Box& a, const Box& b);

struct GroundTruthBox {
    std::string image_id;
    VehicleClass cls = VehicleClass::motor;
    Box box;
};

/// Ground-truth CSV `image_id,class,x_min,y_min,x_max,y_max`.
std::vector<GroundTruthBox> parse_ground_truth(std::string_view text);
std::vector<GroundTruthBox> load_ground_truth(const std::filesystem::path& path);

struct ScoredMatch {
    double confidence = 0.0;
    bool true_positive = false;
};

struct ClassMatches {
    std::vector<ScoredMatch> ranked;  // descending confidence
    long long n_ground_truth = 0;
    long long false_negatives = 0;

    long long true_positives() const;
    long long false_positives() const;
};

struct MatchResult {
    std::array<ClassMatches, 4> per_class;

    const ClassMatches& of(VehicleClass c) const { return per_class[static_cast<std::size_t>(c)]; }
    ClassMatches& of(VehicleClass c) { return per_class[static_cast<std::size_t>(c)]; }
};

inline constexpr double kDefaultIou = 0.50;

/// Greedy matching per image and class: detections at or above conf_thr are
/// visited by descending confidence and take the unmatched same-class ground
/// truth with the highest IoU >= iou_thr (ties go to the earlier ground truth).
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                             double iou_thr = kDefaultIou, double conf_thr = detections::kDefaultConfidence);

/// All-point interpolated area under the precision-recall curve.
/// Throws RangeError when the class has no ground truth.
double average_precision(const MatchResult& match, VehicleClass cls);

/// Unweighted mean; throws RangeError for an empty list.
double mean_ap(std::span<const double> aps);

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1(double precision, double recall);

struct ClassMetrics {
    VehicleClass cls = VehicleClass::motor;
    std::optional<double> ap;  // absent when the class has no ground truth
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
};

struct MetricsReport {
    std::vector<ClassMetrics> classes;
    long long total_tp = 0;
    long long total_fp = 0;
    long long total_fn = 0;
    double precision = 0.0;  // TP / (TP + FP)
    double recall = 0.0;     // TP / (TP + FN)
    double f1 = 0.0;
    double map = 0.0;  // mean AP over classes with ground truth
};

MetricsReport evaluate(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                       double iou_thr = kDefaultIou, double conf_thr = detections::kDefaultConfidence);

/// CSV `class,ap,tp,fp,fn,precision,recall,f1`; the last row `all` carries
/// mAP in the ap column.
std::string format_metrics_csv(const MetricsReport& report);

}  // namespace modeshare::detmetrics
