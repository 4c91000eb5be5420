#ifndef SCOUT_PARAM_DELTA_HPP
#define SCOUT_PARAM_DELTA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "scout/bytes.hpp"
#include "scout/head.hpp"

namespace scout {

/// Versioned copy of the full final layer, as pushed from station to robot.
struct ParamDelta {
    std::uint64_t version = 0;
    int dimension = 0;
    int base_count = 0;
    double alpha = 20.0;
    std::vector<std::string> class_names;
    std::vector<float> weights; // class rows, then box rows, then box bias

    int classes() const { return static_cast<int>(class_names.size()); }

    friend bool operator==(const ParamDelta&, const ParamDelta&) = default;
};

ParamDelta snapshot_delta(const HeadParams& p);

/// Returns `local` untouched when the delta is not newer. A delta whose
/// feature dimension disagrees with a non-empty local head is a SyncError.
HeadParams apply_delta(const HeadParams& local, const ParamDelta& delta);

/// Wire form: JSON header {version, n_classes, d, class_names, blob_len,
/// n_base, alpha} plus little-endian float32 blob.
nlohmann::json delta_header(const ParamDelta& delta);
Bytes delta_blob(const ParamDelta& delta);
ParamDelta decode_delta(const nlohmann::json& header, std::span<const std::uint8_t> blob);

} // namespace scout

#endif // SCOUT_PARAM_DELTA_HPP
