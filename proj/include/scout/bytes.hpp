#ifndef SCOUT_BYTES_HPP
#define SCOUT_BYTES_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "scout/errors.hpp"

namespace scout {

using Bytes = std::vector<std::uint8_t>;

inline void put_u32_le(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u32_be(Bytes& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32_le(Bytes& out, float v) { put_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_f64_le(Bytes& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

/// Bounds-checked little/big-endian reader over a byte span.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }

    std::uint32_t u32_le() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint32_t u32_be() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
        pos_ += 4;
        return v;
    }

    float f32_le() { return std::bit_cast<float>(u32_le()); }

    double f64_le() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }

    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw FramingError("unexpected end of data");
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

Bytes read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> data);

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(const std::string& text);

} // namespace scout

#endif // SCOUT_BYTES_HPP
