#ifndef SCOUT_METRICS_HPP
#define SCOUT_METRICS_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scout/tensor.hpp"

namespace scout {

double iou(const Box& a, const Box& b);

struct Detection {
    std::string frame_id;
    Box box;
    int class_id = 0;
    double score = 0.0;
};

struct GroundTruth {
    std::string frame_id;
    Box box;
    int class_id = 0;
};

/// All-point interpolated AP for one class. Detections are matched greedily
/// in descending score order (input order breaks ties) to the unmatched
/// same-frame ground truth with the highest IoU >= iou_threshold.
double average_precision(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts, int class_id,
                         double iou_threshold);

struct MapResult {
    std::map<int, double> per_class;
    double mean = 0.0;
};

/// AP averaged over IoU thresholds 0.50:0.05:0.95 per class, then over the
/// requested classes that appear in the ground truth.
MapResult coco_map(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                   const std::vector<int>& classes);

struct InterestSample {
    std::string frame_id;
    double score = 0.0;
    bool interesting = false;
};

/// Online precision area with tolerance delta >= 1: frames are ranked by
/// score (mission order breaks ties), only the first ceil(delta * n_gt)
/// ranks count, and each hit at rank j contributes precision@j / n_gt.
double auc_op(const std::vector<InterestSample>& sequence, double delta);

double bandwidth_ratio(std::size_t sent, std::size_t total);

struct MissionReport {
    static constexpr int kSchemaVersion = 1;
    std::string mission_id;
    std::map<std::string, double> per_class_ap;
    std::optional<double> map;
    std::map<int, double> auc_op; // keyed by delta
    std::optional<double> bandwidth_ratio;
    std::map<std::string, double> timings;

    friend bool operator==(const MissionReport&, const MissionReport&) = default;
};

std::string report_to_json(const MissionReport& report);
MissionReport report_from_json(const std::string& text);

void emit_report(const MissionReport& report, const std::string& path);
MissionReport load_report(const std::string& path);

} // namespace scout

#endif // SCOUT_METRICS_HPP
