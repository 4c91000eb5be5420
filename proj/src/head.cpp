#include "scout/head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "scout/metrics.hpp"
#include "scout/similarity.hpp"

namespace scout {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
    const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
}

// Cosine logits alpha * cos(f, w_c) for every class row.
Eigen::VectorXd cosine_logits(const HeadParams& p, const Eigen::VectorXd& f) {
    Eigen::VectorXd z(p.class_weights.rows());
    for (Eigen::Index c = 0; c < z.size(); ++c) z[c] = p.alpha * cosine_sim(f, p.class_weights.row(c).transpose());
    return z;
}

void check_feature(const HeadParams& p, const Eigen::VectorXd& f) {
    if (f.size() != p.dimension()) throw InvalidInput("feature dimension does not match the head");
}

Eigen::VectorXd unit_or_zero(const Eigen::VectorXd& v) {
    const double n = v.norm();
    return n < kNormGuard ? v : Eigen::VectorXd(v / n);
}

// Keeps exp(dw) bounded for wild regressors (log(1000 / 16), the usual cap).
constexpr double kMaxLogScale = 4.135166556742356;

} // namespace

int HeadParams::find_class(const std::string& name) const {
    const auto it = std::find(class_names.begin(), class_names.end(), name);
    return it == class_names.end() ? -1 : static_cast<int>(it - class_names.begin());
}

HeadParams init_head(const std::vector<std::string>& base_classes, const std::vector<TrainingSample>& base_set,
                     int dimension, double alpha, std::uint64_t seed) {
    if (dimension < 1) throw InvalidInput("feature dimension must be >= 1");
    if (base_classes.empty()) throw InvalidInput("at least one base class is required");

    const int n = static_cast<int>(base_classes.size());
    HeadParams p;
    p.alpha = alpha;
    p.version = 1;
    p.base_count = n;
    p.class_names = base_classes;
    p.class_weights = Eigen::MatrixXd::Zero(n + 1, dimension);
    p.box_weights = Eigen::MatrixXd::Zero(4 * n, dimension);
    p.box_bias = Eigen::VectorXd::Zero(4 * n);

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n, dimension);
    std::vector<int> counts(n, 0);
    for (const auto& s : base_set) {
        if (s.class_id == kBackground) continue;
        if (s.class_id < 0 || s.class_id >= n) throw InvalidInput("base sample has an undeclared class id");
        if (s.feature.size() != dimension) throw InvalidInput("base sample has the wrong feature dimension");
        sums.row(s.class_id) += s.feature.transpose();
        ++counts[s.class_id];
    }
    for (int c = 0; c < n; ++c) {
        if (counts[c] == 0) throw InvalidInput("base class '" + base_classes[c] + "' has no samples");
        p.class_weights.row(c) = unit_or_zero(sums.row(c).transpose() / counts[c]).transpose();
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd bg(dimension);
    for (int k = 0; k < dimension; ++k) bg[k] = gauss(rng);
    p.class_weights.row(n) = bg.normalized().transpose();

    round_to_wire_precision(p);
    return p;
}

HeadOutput forward(const HeadParams& p, const Eigen::VectorXd& feature) {
    check_feature(p, feature);
    HeadOutput out;
    out.class_scores = softmax(cosine_logits(p, feature));
    out.deltas.resize(p.classes(), 4);
    const Eigen::VectorXd flat = p.box_weights * feature + p.box_bias;
    for (int c = 0; c < p.classes(); ++c) out.deltas.row(c) = flat.segment<4>(4 * c).transpose();
    return out;
}

Eigen::Vector4d encode_box_delta(const Box& reference, const Box& target) {
    const double rw = reference.width();
    const double rh = reference.height();
    const double rx = reference.x_min + 0.5 * rw;
    const double ry = reference.y_min + 0.5 * rh;
    const double tw = target.width();
    const double th = target.height();
    const double tx = target.x_min + 0.5 * tw;
    const double ty = target.y_min + 0.5 * th;
    return {(tx - rx) / rw, (ty - ry) / rh, std::log(tw / rw), std::log(th / rh)};
}

Box apply_box_delta(const Box& reference, const Eigen::Vector4d& delta) {
    const double rw = reference.width();
    const double rh = reference.height();
    const double cx = reference.x_min + 0.5 * rw + delta[0] * rw;
    const double cy = reference.y_min + 0.5 * rh + delta[1] * rh;
    const double w = rw * std::exp(std::min(delta[2], kMaxLogScale));
    const double h = rh * std::exp(std::min(delta[3], kMaxLogScale));
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::vector<Detection2D> nms(std::vector<Detection2D> dets, double iou_threshold) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection2D& a, const Detection2D& b) { return a.score > b.score; });
    std::vector<Detection2D> kept;
    for (const auto& d : dets) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection2D& k) {
            return k.class_id == d.class_id && iou(k.box, d.box) > iou_threshold;
        });
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

std::vector<Detection2D> detect(const HeadParams& p, const std::vector<ProposalFeature>& proposals,
                                ImageDims dims, const DetectConfig& config) {
    if (p.empty() || proposals.empty()) return {};
    if (!(config.score_threshold > 0.0 && config.score_threshold < 1.0) ||
        !(config.nms_iou > 0.0 && config.nms_iou < 1.0)) {
        throw InvalidInput("detect thresholds must lie in (0, 1)");
    }

    std::vector<Detection2D> raw;
    for (const auto& prop : proposals) {
        const HeadOutput out = forward(p, prop.vector);
        Eigen::Index best = 0;
        const double score = out.class_scores.maxCoeff(&best);
        if (best == p.background_row() || score < config.score_threshold) continue;
        const int cls = static_cast<int>(best);
        Box box = apply_box_delta(prop.box, out.deltas.row(cls).transpose());
        try {
            box = clip_box(box, dims);
        } catch (const InvalidInput&) {
            continue;
        }
        raw.push_back({box, cls, score});
    }
    auto kept = nms(std::move(raw), config.nms_iou);
    if (static_cast<int>(kept.size()) > config.max_detections) kept.resize(config.max_detections);
    return kept;
}

LossAndGrad loss_and_grad(const HeadParams& p, const std::vector<TrainingSample>& batch) {
    if (batch.empty()) throw InvalidInput("loss_and_grad needs a non-empty batch");

    const int d = p.dimension();
    LossAndGrad out;
    out.grad.class_weights = Eigen::MatrixXd::Zero(p.class_weights.rows(), d);
    out.grad.box_weights = Eigen::MatrixXd::Zero(p.box_weights.rows(), d);
    out.grad.box_bias = Eigen::VectorXd::Zero(p.box_bias.size());

    const Eigen::VectorXd row_norms = p.class_weights.rowwise().norm();
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    const auto foreground = std::count_if(batch.begin(), batch.end(),
                                          [](const TrainingSample& s) { return s.class_id != kBackground; });
    const double inv_fg = foreground > 0 ? 1.0 / static_cast<double>(foreground) : 0.0;

    for (const auto& s : batch) {
        if (s.class_id != kBackground && (s.class_id < 0 || s.class_id >= p.classes())) {
            throw InvalidInput("batch references an unregistered class id");
        }
        check_feature(p, s.feature);

        const double fnorm = s.feature.norm();
        const Eigen::VectorXd z = cosine_logits(p, s.feature);
        const Eigen::VectorXd prob = softmax(z);
        const int target = p.row_of(s.class_id);
        const double log_sum = z.maxCoeff() + std::log((z.array() - z.maxCoeff()).exp().sum());
        out.classification += (log_sum - z[target]) * inv_batch;

        // dCE/dz = prob - onehot; dz_c/dw_c = alpha / (|w||f|) * (f - (w.f / |w|^2) w).
        if (fnorm >= kNormGuard) {
            for (Eigen::Index c = 0; c < z.size(); ++c) {
                const double wn = row_norms[c];
                if (wn < kNormGuard) continue;
                const double g = (prob[c] - (c == target ? 1.0 : 0.0)) * inv_batch;
                const auto w = p.class_weights.row(c);
                const double dot = w.dot(s.feature.transpose());
                out.grad.class_weights.row(c) +=
                    g * p.alpha / (wn * fnorm) * (s.feature.transpose() - (dot / (wn * wn)) * w);
            }
        }

        if (s.class_id == kBackground) continue;
        const int c = s.class_id;
        const Eigen::Vector4d pred = p.box_weights.middleRows<4>(4 * c) * s.feature + p.box_bias.segment<4>(4 * c);
        for (int k = 0; k < 4; ++k) {
            const double r = pred[k] - s.box_target[k];
            const double a = std::abs(r);
            out.regression += (a < 1.0 ? 0.5 * r * r : a - 0.5) * inv_fg;
            const double dr = (a < 1.0 ? r : (r > 0 ? 1.0 : -1.0)) * inv_fg;
            out.grad.box_weights.row(4 * c + k) += dr * s.feature.transpose();
            out.grad.box_bias[4 * c + k] += dr;
        }
    }
    out.loss = out.classification + out.regression;
    return out;
}

std::pair<HeadParams, int> register_novel_class(const HeadParams& p, const std::string& name,
                                                const Eigen::VectorXd& first_feature) {
    if (const int existing = p.find_class(name); existing >= 0) return {p, existing};
    if (p.novel_count() >= kNovelCapacity) {
        throw CapacityError("novel class capacity (" + std::to_string(kNovelCapacity) + ") exhausted");
    }
    check_feature(p, first_feature);

    const int n = p.classes();
    const int d = p.dimension();
    HeadParams q = p;
    q.class_names.push_back(name);
    q.class_weights.resize(n + 2, d);
    q.class_weights.topRows(n) = p.class_weights.topRows(n);
    q.class_weights.row(n) = unit_or_zero(first_feature).transpose();
    q.class_weights.row(n + 1) = p.class_weights.row(n);

    q.box_weights.conservativeResize(4 * (n + 1), d);
    q.box_weights.bottomRows<4>().setZero();
    q.box_bias.conservativeResize(4 * (n + 1));
    q.box_bias.tail<4>().setZero();
    q.version = p.version + 1;
    round_to_wire_precision(q);
    return {std::move(q), n};
}

void round_to_wire_precision(HeadParams& p) {
    p.class_weights = p.class_weights.cast<float>().cast<double>();
    p.box_weights = p.box_weights.cast<float>().cast<double>();
    p.box_bias = p.box_bias.cast<float>().cast<double>();
}

} // namespace scout
