#ifndef SCOUT_HEAD_HPP
#define SCOUT_HEAD_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "scout/proposals.hpp"
#include "scout/tensor.hpp"

namespace scout {

inline constexpr int kNovelCapacity = 10;
inline constexpr int kBackground = -1;

/// Final layer of the detector: a cosine classifier over n_classes + 1 rows
/// (background last) and a per-class linear box regressor.
///
/// Committed parameters are always float32-representable so that the wire
/// encoding reproduces them bit-exactly on the receiving side.
struct HeadParams {
    Eigen::MatrixXd class_weights; // (n_classes + 1) x d
    Eigen::MatrixXd box_weights;   // (4 * n_classes) x d, rows 4c..4c+3 for class c
    Eigen::VectorXd box_bias;      // 4 * n_classes
    double alpha = 20.0;
    std::uint64_t version = 0;
    int base_count = 0;
    std::vector<std::string> class_names;

    int classes() const { return static_cast<int>(class_names.size()); }
    int dimension() const { return static_cast<int>(class_weights.cols()); }
    int background_row() const { return classes(); }
    int novel_count() const { return classes() - base_count; }
    bool empty() const { return class_names.empty(); }

    /// Row of the class_weights matrix for a class id (kBackground allowed).
    int row_of(int class_id) const { return class_id == kBackground ? background_row() : class_id; }

    int find_class(const std::string& name) const;

    friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

/// One labelled region: a pooled feature, its class (kBackground for
/// background) and the (dx, dy, dw, dh) regression target.
struct TrainingSample {
    Eigen::VectorXd feature;
    int class_id = kBackground;
    Eigen::Vector4d box_target = Eigen::Vector4d::Zero();
};

struct HeadOutput {
    Eigen::VectorXd class_scores; // n_classes + 1, background last
    Eigen::MatrixXd deltas;       // n_classes x 4
};

struct HeadGradient {
    Eigen::MatrixXd class_weights;
    Eigen::MatrixXd box_weights;
    Eigen::VectorXd box_bias;
};

struct LossAndGrad {
    double loss = 0.0;
    double classification = 0.0;
    double regression = 0.0;
    HeadGradient grad;
};

/// Class rows start at the normalized mean feature of each base class; the
/// background row is a seeded random unit vector. Box regressors start at
/// zero (identity transform).
HeadParams init_head(const std::vector<std::string>& base_classes, const std::vector<TrainingSample>& base_set,
                     int dimension, double alpha, std::uint64_t seed);

HeadOutput forward(const HeadParams& p, const Eigen::VectorXd& feature);

struct Detection2D {
    Box box;
    int class_id = 0;
    double score = 0.0;
};

struct DetectConfig {
    double score_threshold = 0.05;
    double nms_iou = 0.5;
    int max_detections = 100;
};

std::vector<Detection2D> detect(const HeadParams& p, const std::vector<ProposalFeature>& proposals,
                                ImageDims dims, const DetectConfig& config = {});

/// Greedy per-class non-maximum suppression; input need not be sorted.
std::vector<Detection2D> nms(std::vector<Detection2D> dets, double iou_threshold);

/// Mean cross-entropy plus mean smooth-L1 (beta = 1) over foreground samples.
LossAndGrad loss_and_grad(const HeadParams& p, const std::vector<TrainingSample>& batch);

/// Appends a class initialized to the shot's feature. An existing name
/// returns its id untouched. Throws CapacityError beyond kNovelCapacity.
std::pair<HeadParams, int> register_novel_class(const HeadParams& p, const std::string& name,
                                                const Eigen::VectorXd& first_feature);

/// Standard box encoding relative to a reference (proposal) box.
Eigen::Vector4d encode_box_delta(const Box& reference, const Box& target);
Box apply_box_delta(const Box& reference, const Eigen::Vector4d& delta);

/// Rounds every trainable entry to the nearest float32.
void round_to_wire_precision(HeadParams& p);

} // namespace scout

#endif // SCOUT_HEAD_HPP
