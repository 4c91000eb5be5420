#include "scout/visual_memory.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "scout/bytes.hpp"

namespace scout {

Eigen::VectorXd attention_weights(const Eigen::VectorXd& similarities, double gamma) {
    Eigen::VectorXd logits(similarities.size());
    for (Eigen::Index i = 0; i < similarities.size(); ++i) {
        const double s = std::clamp(similarities[i], 0.0, kSimilarityCeiling);
        logits[i] = gamma * std::tan(std::numbers::pi / 2.0 * s);
    }
    const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

VisualMemory::VisualMemory(const MemoryConfig& config)
    : gamma_write_(config.gamma_write), gamma_read_(config.gamma_read) {
    if (config.cubes < 1) throw InvalidInput("visual memory needs at least one cube");
    if (!(config.gamma_write > 0.0) || !(config.gamma_read > 0.0)) {
        throw InvalidInput("memory gains must be positive");
    }
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    cubes_.reserve(config.cubes);
    for (int i = 0; i < config.cubes; ++i) {
        FeatureTensor cube(config.channels, config.width, config.height);
        for (Eigen::Index k = 0; k < cube.size(); ++k) cube.flat()[k] = noise(rng);
        cubes_.push_back(std::move(cube));
    }
}

VisualMemory::VisualMemory(std::vector<FeatureTensor> cubes, double gamma_write, double gamma_read)
    : cubes_(std::move(cubes)), gamma_write_(gamma_write), gamma_read_(gamma_read) {
    if (cubes_.empty()) throw InvalidInput("visual memory needs at least one cube");
    if (!(gamma_write > 0.0) || !(gamma_read > 0.0)) throw InvalidInput("memory gains must be positive");
    for (const auto& c : cubes_) {
        if (!c.same_shape(cubes_.front())) throw InvalidInput("memory cubes must share one shape");
        if (!c.flat().allFinite()) throw InvalidInput("memory cube has non-finite entries");
    }
}

void VisualMemory::check_frame(const FeatureTensor& x) const {
    if (!x.same_shape(cubes_.front())) throw InvalidInput("frame shape does not match memory cubes");
    if (x.flat().norm() < kNormGuard) throw InvalidInput("frame is all zeros");
}

Eigen::VectorXd VisualMemory::write(const FeatureTensor& x) {
    check_frame(x);
    Eigen::VectorXd d(size());
    for (int i = 0; i < size(); ++i) d[i] = cosine_sim(x.flat(), cubes_[i].flat());
    const Eigen::VectorXd w = attention_weights(d, gamma_write_);
    for (int i = 0; i < size(); ++i) {
        cubes_[i].flat() = (1.0 - w[i]) * cubes_[i].flat() + w[i] * x.flat();
    }
    ++writes_;
    return w;
}

InterestResult VisualMemory::read(const FeatureTensor& x) const {
    check_frame(x);
    InterestResult r;
    r.similarities.resize(size());
    r.shifts.resize(size());
    for (int i = 0; i < size(); ++i) {
        const ShiftSimilarity s = max_shift_sim(x, cubes_[i]);
        r.similarities[i] = std::clamp(s.similarity, 0.0, kSimilarityCeiling);
        r.shifts[i] = s.shift;
    }
    r.read_weights = attention_weights(r.similarities, gamma_read_);

    // Each cube is translated onto x before blending so the recall is
    // aligned with the frame it answers.
    r.recalled = FeatureTensor(x.channels(), x.width(), x.height());
    for (int i = 0; i < size(); ++i) {
        const FeatureTensor aligned = roll(cubes_[i], -r.shifts[i].dy, -r.shifts[i].dx);
        r.recalled.flat() += r.read_weights[i] * aligned.flat();
    }
    r.confidence = std::clamp(cosine_sim(r.recalled.flat(), x.flat()), 0.0, 1.0);
    r.score = 1.0 - r.confidence;
    return r;
}

InterestResult VisualMemory::process_frame(const FeatureTensor& x) {
    write(x);
    return read(x);
}

bool VisualMemory::warmup(std::span<const FeatureTensor> frames) {
    if (frames.empty()) return false;
    for (const auto& f : frames) write(f);
    return true;
}

void VisualMemory::save(const std::filesystem::path& path) const {
    const FeatureTensor& first = cubes_.front();
    Bytes out;
    put_u32_le(out, static_cast<std::uint32_t>(size()));
    put_u32_le(out, static_cast<std::uint32_t>(first.channels()));
    put_u32_le(out, static_cast<std::uint32_t>(first.width()));
    put_u32_le(out, static_cast<std::uint32_t>(first.height()));
    put_f64_le(out, gamma_write_);
    put_f64_le(out, gamma_read_);
    for (const auto& cube : cubes_) {
        for (Eigen::Index k = 0; k < cube.size(); ++k) put_f32_le(out, static_cast<float>(cube.flat()[k]));
    }
    write_file(path.string(), out);
}

VisualMemory VisualMemory::load(const std::filesystem::path& path) {
    const Bytes raw = read_file(path.string());
    ByteReader r(raw);
    const auto n = static_cast<int>(r.u32_le());
    const auto c = static_cast<int>(r.u32_le());
    const auto w = static_cast<int>(r.u32_le());
    const auto h = static_cast<int>(r.u32_le());
    VisualMemory mem;
    mem.gamma_write_ = r.f64_le();
    mem.gamma_read_ = r.f64_le();
    if (n < 1 || !(mem.gamma_write_ > 0.0) || !(mem.gamma_read_ > 0.0)) {
        throw InvalidInput("memory snapshot header is invalid");
    }
    const auto per_cube = static_cast<std::size_t>(c) * w * h;
    if (r.remaining() != 4 * per_cube * n) throw InvalidInput("memory snapshot size does not match header");
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd data(static_cast<Eigen::Index>(per_cube));
        for (std::size_t k = 0; k < per_cube; ++k) data[static_cast<Eigen::Index>(k)] = r.f32_le();
        mem.cubes_.emplace_back(c, w, h, std::move(data));
    }
    return mem;
}

} // namespace scout
