#ifndef SCOUT_IMAGE_HPP
#define SCOUT_IMAGE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scout/bytes.hpp"

namespace scout {

/// 8-bit interleaved RGB raster.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t& at(int x, int y, int ch) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + ch]; }
    std::uint8_t at(int x, int y, int ch) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
    }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Decodes PNG or JPEG bytes (sniffed from the signature) to RGB.
Image decode_image(std::span<const std::uint8_t> bytes);
Image load_image(const std::string& path);

Bytes encode_png(const Image& img);
void save_png(const std::string& path, const Image& img);

} // namespace scout

#endif // SCOUT_IMAGE_HPP
