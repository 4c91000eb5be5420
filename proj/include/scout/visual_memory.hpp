#ifndef SCOUT_VISUAL_MEMORY_HPP
#define SCOUT_VISUAL_MEMORY_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scout/similarity.hpp"
#include "scout/tensor.hpp"

namespace scout {

struct MemoryConfig {
    int cubes = 10;
    int channels = 8;
    int width = 16;
    int height = 16;
    double gamma_write = 5.0;
    double gamma_read = 5.0;
    std::uint64_t seed = 0;
};

struct InterestResult {
    double score = 1.0;      // 1 - confidence
    double confidence = 0.0; // cosine(recalled, x), clamped to [0, 1]
    FeatureTensor recalled;
    Eigen::VectorXd read_weights;
    Eigen::VectorXd similarities; // clamped shift-maximized similarity per cube
    std::vector<Shift> shifts;
};

/// Upper clamp on similarities fed to tan(pi/2 * s); keeps the softmax finite.
inline constexpr double kSimilarityCeiling = 1.0 - 1e-6;

/// Numerically stable softmax of gamma * tan(pi/2 * s).
Eigen::VectorXd attention_weights(const Eigen::VectorXd& similarities, double gamma);

/// Online visual memory of N feature cubes. Writing blends the frame into
/// every cube in proportion to a sharpened cosine match; reading recalls a
/// translation-aligned blend of the cubes and reports how well it matches.
class VisualMemory {
public:
    explicit VisualMemory(const MemoryConfig& config);

    /// Memory with explicit cube contents (resume, tests).
    VisualMemory(std::vector<FeatureTensor> cubes, double gamma_write, double gamma_read);

    int size() const { return static_cast<int>(cubes_.size()); }
    double gamma_write() const { return gamma_write_; }
    double gamma_read() const { return gamma_read_; }
    std::uint64_t writes() const { return writes_; }
    const std::vector<FeatureTensor>& cubes() const { return cubes_; }

    /// Blends x into the cubes; returns the write weights (sum to 1).
    Eigen::VectorXd write(const FeatureTensor& x);

    InterestResult read(const FeatureTensor& x) const;

    /// write(x) then read(x) on the updated memory.
    InterestResult process_frame(const FeatureTensor& x);

    /// Writes every frame in order. Returns false (and leaves the memory
    /// untouched) for an empty sequence.
    bool warmup(std::span<const FeatureTensor> frames);

    /// Snapshot: N, C, W, H as u32 LE, gamma_w and gamma_v as f64 LE, then
    /// the cube entries as f32 LE.
    void save(const std::filesystem::path& path) const;
    static VisualMemory load(const std::filesystem::path& path);

    friend bool operator==(const VisualMemory&, const VisualMemory&) = default;

private:
    VisualMemory() = default;
    void check_frame(const FeatureTensor& x) const;

    std::vector<FeatureTensor> cubes_;
    double gamma_write_ = 0.0;
    double gamma_read_ = 0.0;
    std::uint64_t writes_ = 0;
};

} // namespace scout

#endif // SCOUT_VISUAL_MEMORY_HPP
