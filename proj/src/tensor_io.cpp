#include "scout/bytes.hpp"
#include "scout/tensor.hpp"

namespace scout {

void write_tensor(const std::filesystem::path& path, const FeatureTensor& t) {
    Bytes out;
    out.reserve(12 + 4 * static_cast<std::size_t>(t.size()));
    put_u32_le(out, static_cast<std::uint32_t>(t.channels()));
    put_u32_le(out, static_cast<std::uint32_t>(t.width()));
    put_u32_le(out, static_cast<std::uint32_t>(t.height()));
    for (Eigen::Index i = 0; i < t.size(); ++i) put_f32_le(out, static_cast<float>(t.flat()[i]));
    write_file(path.string(), out);
}

FeatureTensor read_tensor(const std::filesystem::path& path) {
    const Bytes raw = read_file(path.string());
    ByteReader r(raw);
    const auto c = static_cast<int>(r.u32_le());
    const auto w = static_cast<int>(r.u32_le());
    const auto h = static_cast<int>(r.u32_le());
    if (c <= 0 || w <= 0 || h <= 0) throw InvalidInput("tensor file has a zero dimension");
    const auto n = static_cast<std::size_t>(c) * w * h;
    if (r.remaining() != 4 * n) throw InvalidInput("tensor file size does not match its header");
    Eigen::VectorXd data(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) data[static_cast<Eigen::Index>(i)] = r.f32_le();
    return FeatureTensor(c, w, h, std::move(data));
}

} // namespace scout
