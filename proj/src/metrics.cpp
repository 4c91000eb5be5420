#include "scout/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace scout {

double iou(const Box& a, const Box& b) {
    const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double average_precision(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts, int class_id,
                         double iou_threshold) {
    std::vector<const GroundTruth*> truth;
    for (const auto& g : gts) {
        if (g.class_id == class_id) truth.push_back(&g);
    }
    if (truth.empty()) return 0.0;

    std::vector<const Detection*> ranked;
    for (const auto& d : dets) {
        if (d.class_id == class_id) ranked.push_back(&d);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Detection* a, const Detection* b) { return a->score > b->score; });

    std::vector<bool> matched(truth.size(), false);
    std::vector<double> precision;
    std::vector<double> recall;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < ranked.size(); ++k) {
        const Detection& d = *ranked[k];
        double best_iou = -1.0;
        std::size_t best = truth.size();
        for (std::size_t g = 0; g < truth.size(); ++g) {
            if (matched[g] || truth[g]->frame_id != d.frame_id) continue;
            const double o = iou(d.box, truth[g]->box);
            if (o >= iou_threshold && o > best_iou) {
                best_iou = o;
                best = g;
            }
        }
        if (best < truth.size()) {
            matched[best] = true;
            ++tp;
        }
        precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(truth.size()));
    }

    // Precision envelope, then area under the step curve.
    for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < precision.size(); ++k) {
        ap += (recall[k] - prev_recall) * precision[k];
        prev_recall = recall[k];
    }
    return ap;
}

MapResult coco_map(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                   const std::vector<int>& classes) {
    std::set<int> present;
    for (const auto& g : gts) present.insert(g.class_id);

    MapResult out;
    for (int c : classes) {
        if (!present.contains(c)) continue;
        double sum = 0.0;
        for (int i = 0; i < 10; ++i) sum += average_precision(dets, gts, c, (50.0 + 5.0 * i) / 100.0);
        out.per_class[c] = sum / 10.0;
    }
    if (!out.per_class.empty()) {
        double total = 0.0;
        for (const auto& [c, ap] : out.per_class) total += ap;
        out.mean = total / static_cast<double>(out.per_class.size());
    }
    return out;
}

double auc_op(const std::vector<InterestSample>& sequence, double delta) {
    if (!(delta >= 1.0)) throw InvalidInput("auc_op: delta must be >= 1");
    const auto n_gt = static_cast<std::size_t>(
        std::count_if(sequence.begin(), sequence.end(), [](const InterestSample& s) { return s.interesting; }));
    if (n_gt == 0) throw UndefinedMetric("auc_op: no ground-truth interesting frames");

    std::vector<std::size_t> order(sequence.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sequence[a].score > sequence[b].score; });

    const auto budget = static_cast<std::size_t>(std::ceil(delta * static_cast<double>(n_gt)));
    double area = 0.0;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < order.size() && j < budget; ++j) {
        if (!sequence[order[j]].interesting) continue;
        ++hits;
        area += static_cast<double>(hits) / static_cast<double>(j + 1);
    }
    return area / static_cast<double>(n_gt);
}

double bandwidth_ratio(std::size_t sent, std::size_t total) {
    if (total == 0) throw InvalidInput("bandwidth_ratio: no frames");
    if (sent > total) throw InvalidInput("bandwidth_ratio: more frames sent than seen");
    return static_cast<double>(sent) / static_cast<double>(total);
}

std::string report_to_json(const MissionReport& report) {
    nlohmann::json j;
    j["schema_version"] = MissionReport::kSchemaVersion;
    j["mission_id"] = report.mission_id;
    j["per_class_ap"] = report.per_class_ap;
    if (report.map) j["map"] = *report.map;
    if (!report.auc_op.empty()) {
        nlohmann::json a = nlohmann::json::object();
        for (const auto& [delta, v] : report.auc_op) a["delta_" + std::to_string(delta)] = v;
        j["auc_op"] = a;
    }
    if (report.bandwidth_ratio) j["bandwidth_ratio"] = *report.bandwidth_ratio;
    j["timings"] = report.timings;
    return j.dump(2);
}

MissionReport report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.value("schema_version", 0) != MissionReport::kSchemaVersion) {
        throw InvalidInput("unsupported report schema version");
    }
    MissionReport r;
    r.mission_id = j.at("mission_id").get<std::string>();
    r.per_class_ap = j.value("per_class_ap", std::map<std::string, double>{});
    if (j.contains("map")) r.map = j["map"].get<double>();
    if (j.contains("auc_op")) {
        for (const auto& [key, v] : j["auc_op"].items()) {
            if (key.rfind("delta_", 0) != 0) throw InvalidInput("bad auc_op key " + key);
            r.auc_op[std::stoi(key.substr(6))] = v.get<double>();
        }
    }
    if (j.contains("bandwidth_ratio")) r.bandwidth_ratio = j["bandwidth_ratio"].get<double>();
    r.timings = j.value("timings", std::map<std::string, double>{});
    return r;
}

void emit_report(const MissionReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write report to " + path);
    out << report_to_json(report) << '\n';
    if (!out) throw IoError("failed writing report to " + path);
}

MissionReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read report " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return report_from_json(ss.str());
}

} // namespace scout
