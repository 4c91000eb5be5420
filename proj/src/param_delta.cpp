#include "scout/param_delta.hpp"

namespace scout {

namespace {

std::size_t expected_weight_count(int classes, int d) {
    return static_cast<std::size_t>(classes + 1) * d + static_cast<std::size_t>(4 * classes) * d +
           static_cast<std::size_t>(4 * classes);
}

} // namespace

ParamDelta snapshot_delta(const HeadParams& p) {
    ParamDelta delta;
    delta.version = p.version;
    delta.dimension = p.dimension();
    delta.base_count = p.base_count;
    delta.alpha = p.alpha;
    delta.class_names = p.class_names;
    delta.weights.reserve(expected_weight_count(p.classes(), p.dimension()));
    for (Eigen::Index r = 0; r < p.class_weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.class_weights.cols(); ++c) {
            delta.weights.push_back(static_cast<float>(p.class_weights(r, c)));
        }
    }
    for (Eigen::Index r = 0; r < p.box_weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.box_weights.cols(); ++c) {
            delta.weights.push_back(static_cast<float>(p.box_weights(r, c)));
        }
    }
    for (Eigen::Index i = 0; i < p.box_bias.size(); ++i) delta.weights.push_back(static_cast<float>(p.box_bias[i]));
    return delta;
}

HeadParams apply_delta(const HeadParams& local, const ParamDelta& delta) {
    if (delta.version <= local.version) return local;
    const int n = delta.classes();
    const int d = delta.dimension;
    if (!local.empty() && local.dimension() != d) {
        throw SyncError("parameter update has feature dimension " + std::to_string(d) + ", expected " +
                        std::to_string(local.dimension()));
    }
    if (n < 1 || d < 1 || delta.weights.size() != expected_weight_count(n, d)) {
        throw SyncError("parameter update payload does not match its header");
    }

    HeadParams p;
    p.version = delta.version;
    p.alpha = delta.alpha;
    p.base_count = delta.base_count;
    p.class_names = delta.class_names;
    p.class_weights.resize(n + 1, d);
    p.box_weights.resize(4 * n, d);
    p.box_bias.resize(4 * n);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < p.class_weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < d; ++c) p.class_weights(r, c) = delta.weights[k++];
    }
    for (Eigen::Index r = 0; r < p.box_weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < d; ++c) p.box_weights(r, c) = delta.weights[k++];
    }
    for (Eigen::Index i = 0; i < p.box_bias.size(); ++i) p.box_bias[i] = delta.weights[k++];
    return p;
}

nlohmann::json delta_header(const ParamDelta& delta) {
    return {{"version", delta.version},        {"n_classes", delta.classes()},
            {"d", delta.dimension},            {"class_names", delta.class_names},
            {"blob_len", 4 * delta.weights.size()}, {"n_base", delta.base_count},
            {"alpha", delta.alpha}};
}

Bytes delta_blob(const ParamDelta& delta) {
    Bytes out;
    out.reserve(4 * delta.weights.size());
    for (float v : delta.weights) put_f32_le(out, v);
    return out;
}

ParamDelta decode_delta(const nlohmann::json& header, std::span<const std::uint8_t> blob) {
    ParamDelta delta;
    try {
        delta.version = header.at("version").get<std::uint64_t>();
        delta.dimension = header.at("d").get<int>();
        delta.base_count = header.at("n_base").get<int>();
        delta.alpha = header.at("alpha").get<double>();
        delta.class_names = header.at("class_names").get<std::vector<std::string>>();
        if (header.at("n_classes").get<int>() != delta.classes()) {
            throw SyncError("n_classes disagrees with class_names");
        }
    } catch (const nlohmann::json::exception& e) {
        throw SyncError(std::string("malformed parameter update header: ") + e.what());
    }
    if (blob.size() % 4 != 0) throw SyncError("parameter blob is not a whole number of floats");
    ByteReader r(blob);
    delta.weights.reserve(blob.size() / 4);
    while (r.remaining() > 0) delta.weights.push_back(r.f32_le());
    return delta;
}

} // namespace scout
