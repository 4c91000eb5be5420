#include "scout/image.hpp"

#include <csetjmp>
#include <cstdio>
#include <memory>

#include <jpeglib.h>
#include <png.h>

namespace scout {

namespace {

bool is_png(std::span<const std::uint8_t> b) {
    static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    return b.size() >= 8 && std::equal(sig, sig + 8, b.begin());
}

bool is_jpeg(std::span<const std::uint8_t> b) {
    return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw InvalidInput(std::string("png decode failed: ") + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    Image out(static_cast<int>(image.width), static_cast<int>(image.height));
    if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
        png_image_free(&image);
        throw InvalidInput(std::string("png decode failed: ") + image.message);
    }
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr info) {
    auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
    std::longjmp(err->jump, 1);
}

Image decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct info{};
    JpegErrorManager err{};
    info.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;

    // Only heap state changes between setjmp and a possible longjmp.
    auto out = std::make_unique<Image>();
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&info);
        throw InvalidInput("jpeg decode failed");
    }
    jpeg_create_decompress(&info);
    jpeg_mem_src(&info, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&info, TRUE);
    info.out_color_space = JCS_RGB;
    jpeg_start_decompress(&info);
    out->width = static_cast<int>(info.output_width);
    out->height = static_cast<int>(info.output_height);
    out->rgb.assign(static_cast<std::size_t>(out->width) * out->height * 3, 0);
    while (info.output_scanline < info.output_height) {
        JSAMPROW row = out->rgb.data() + static_cast<std::size_t>(info.output_scanline) * out->width * 3;
        jpeg_read_scanlines(&info, &row, 1);
    }
    jpeg_finish_decompress(&info);
    jpeg_destroy_decompress(&info);
    return std::move(*out);
}

} // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return decode_png(bytes);
    if (is_jpeg(bytes)) return decode_jpeg(bytes);
    throw InvalidInput("unrecognized image format");
}

Image load_image(const std::string& path) { return decode_image(read_file(path)); }

Bytes encode_png(const Image& img) {
    if (img.width <= 0 || img.height <= 0) throw InvalidInput("cannot encode empty image");
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.rgb.data(), 0, nullptr)) {
        throw IoError(std::string("png encode failed: ") + image.message);
    }
    Bytes out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.rgb.data(), 0, nullptr)) {
        throw IoError(std::string("png encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

void save_png(const std::string& path, const Image& img) { write_file(path, encode_png(img)); }

} // namespace scout
