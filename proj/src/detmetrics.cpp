#include "modeshare/detmetrics.hpp"

#include "modeshare/error.hpp"
#include "modeshare/io.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <utility>

namespace modeshare::detmetrics {

double iou(const Box& a, const Box& b) {
    const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (ix <= 0.0 || iy <= 0.0) {
        return 0.0;
    }
    const double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

std::vector<GroundTruthBox> parse_ground_truth(std::string_view text) {
    const io::CsvTable table = io::parse_csv(text);
    const std::size_t c_img = table.require("image_id");
    const std::size_t c_cls = table.require("class");
    const std::size_t c_x0 = table.require("x_min");
    const std::size_t c_y0 = table.require("y_min");
    const std::size_t c_x1 = table.require("x_max");
    const std::size_t c_y1 = table.require("y_max");
    std::vector<GroundTruthBox> out;
    for (const auto& row : table.rows()) {
        GroundTruthBox g;
        g.image_id = row.fields[c_img];
        auto cls = detections::parse_class(row.fields[c_cls]);
        if (!cls) {
            throw RowError(row.line, "unknown class '" + row.fields[c_cls] + "'");
        }
        g.cls = *cls;
        auto x0 = io::parse_double(row.fields[c_x0]);
        auto y0 = io::parse_double(row.fields[c_y0]);
        auto x1 = io::parse_double(row.fields[c_x1]);
        auto y1 = io::parse_double(row.fields[c_y1]);
        if (!x0 || !y0 || !x1 || !y1) {
            throw RowError(row.line, "unparseable number in ground-truth box");
        }
        g.box = {*x0, *y0, *x1, *y1};
        if (!g.box.valid()) {
            throw RowError(row.line, "degenerate ground-truth box");
        }
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<GroundTruthBox> load_ground_truth(const std::filesystem::path& path) {
    return parse_ground_truth(io::read_text(path));
}

long long ClassMatches::true_positives() const {
    return std::count_if(ranked.begin(), ranked.end(), [](const ScoredMatch& m) { return m.true_positive; });
}

long long ClassMatches::false_positives() const {
    return static_cast<long long>(ranked.size()) - true_positives();
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, double iou_thr,
                             double conf_thr) {
    if (!(iou_thr >= 0.0 && iou_thr <= 1.0) || !(conf_thr >= 0.0 && conf_thr <= 1.0)) {
        throw RangeError("thresholds must lie in [0,1]");
    }
    using Key = std::pair<std::string_view, int>;
    std::map<Key, std::vector<std::size_t>> gt_groups;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        gt_groups[{gts[g].image_id, static_cast<int>(gts[g].cls)}].push_back(g);
    }
    std::map<Key, std::vector<std::size_t>> det_groups;
    for (std::size_t d = 0; d < dets.size(); ++d) {
        if (dets[d].confidence >= conf_thr) {
            det_groups[{dets[d].image_id, static_cast<int>(dets[d].cls)}].push_back(d);
        }
    }

    std::vector<char> is_tp(dets.size(), 0);
    std::vector<char> gt_used(gts.size(), 0);
    for (auto& [key, members] : det_groups) {
        std::stable_sort(members.begin(), members.end(),
                         [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
        auto git = gt_groups.find(key);
        if (git == gt_groups.end()) {
            continue;
        }
        for (std::size_t d : members) {
            double best = -1.0;
            std::size_t best_g = 0;
            for (std::size_t g : git->second) {
                if (gt_used[g]) {
                    continue;
                }
                const double o = iou(dets[d].box, gts[g].box);
                if (o >= iou_thr && o > best) {
                    best = o;
                    best_g = g;
                }
            }
            if (best >= 0.0) {
                gt_used[best_g] = 1;
                is_tp[d] = 1;
            }
        }
    }

    MatchResult res;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        auto& cm = res.of(gts[g].cls);
        ++cm.n_ground_truth;
        if (!gt_used[g]) {
            ++cm.false_negatives;
        }
    }
    std::vector<std::size_t> order;
    for (std::size_t d = 0; d < dets.size(); ++d) {
        if (dets[d].confidence >= conf_thr) {
            order.push_back(d);
        }
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
    for (std::size_t d : order) {
        res.of(dets[d].cls).ranked.push_back({dets[d].confidence, is_tp[d] != 0});
    }
    return res;
}

double average_precision(const MatchResult& match, VehicleClass cls) {
    const ClassMatches& cm = match.of(cls);
    if (cm.n_ground_truth == 0) {
        throw RangeError("average precision undefined: class '" + std::string(detections::to_string(cls)) +
                         "' has no ground truth");
    }
    const std::size_t n = cm.ranked.size();
    std::vector<double> precision(n);
    std::vector<double> recall(n);
    long long tp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        tp += cm.ranked[k].true_positive ? 1 : 0;
        precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
        recall[k] = static_cast<double>(tp) / static_cast<double>(cm.n_ground_truth);
    }
    for (std::size_t k = n; k-- > 1;) {
        precision[k - 1] = std::max(precision[k - 1], precision[k]);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        ap += (recall[k] - prev_recall) * precision[k];
        prev_recall = recall[k];
    }
    return ap;
}

double mean_ap(std::span<const double> aps) {
    if (aps.empty()) {
        throw RangeError("mean AP of an empty list");
    }
    return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

double f1(double precision, double recall) {
    if (!(precision >= 0.0 && precision <= 1.0 && recall >= 0.0 && recall <= 1.0)) {
        throw RangeError("precision and recall must lie in [0,1]");
    }
    if (precision + recall == 0.0) {
        return 0.0;
    }
    return 2.0 * precision * recall / (precision + recall);
}

MetricsReport evaluate(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, double iou_thr,
                       double conf_thr) {
    const MatchResult match = match_detections(dets, gts, iou_thr, conf_thr);
    MetricsReport rep;
    std::vector<double> aps;
    for (auto c : detections::kAllClasses) {
        const ClassMatches& cm = match.of(c);
        ClassMetrics m;
        m.cls = c;
        m.tp = cm.true_positives();
        m.fp = cm.false_positives();
        m.fn = cm.false_negatives;
        if (cm.n_ground_truth > 0) {
            m.ap = average_precision(match, c);
            aps.push_back(*m.ap);
        }
        rep.total_tp += m.tp;
        rep.total_fp += m.fp;
        rep.total_fn += m.fn;
        rep.classes.push_back(m);
    }
    const auto tp = static_cast<double>(rep.total_tp);
    rep.precision = rep.total_tp + rep.total_fp > 0 ? tp / static_cast<double>(rep.total_tp + rep.total_fp) : 0.0;
    rep.recall = rep.total_tp + rep.total_fn > 0 ? tp / static_cast<double>(rep.total_tp + rep.total_fn) : 0.0;
    rep.f1 = f1(rep.precision, rep.recall);
    rep.map = aps.empty() ? 0.0 : mean_ap(aps);
    return rep;
}

std::string format_metrics_csv(const MetricsReport& report) {
    std::string out = "class,ap,tp,fp,fn,precision,recall,f1\n";
    for (const auto& m : report.classes) {
        const double p = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
        const double r = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
        out += io::csv_join({std::string(detections::to_string(m.cls)), m.ap ? io::format_double(*m.ap) : "",
                             std::to_string(m.tp), std::to_string(m.fp), std::to_string(m.fn), io::format_double(p),
                             io::format_double(r), io::format_double(f1(p, r))});
        out.push_back('\n');
    }
    out += io::csv_join({"all", io::format_double(report.map), std::to_string(report.total_tp),
                         std::to_string(report.total_fp), std::to_string(report.total_fn),
                         io::format_double(report.precision), io::format_double(report.recall),
                         io::format_double(report.f1)});
    out.push_back('\n');
    return out;
}

}  // namespace modeshare::detmetrics
