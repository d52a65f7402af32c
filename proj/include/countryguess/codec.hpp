#pragma once

// PNG and JPEG decoding/encoding through libpng and libjpeg.

#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "error.hpp"
#include "image.hpp"
#include "json_io.hpp"

namespace countryguess {

enum class ImageFormat { png, jpeg, unknown };

inline ImageFormat sniff_format(std::span<const unsigned char> bytes) {
    static constexpr unsigned char png_sig[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) return ImageFormat::png;
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return ImageFormat::jpeg;
    return ImageFormat::unknown;
}

namespace detail {

inline RgbImage decode_png(std::span<const unsigned char> bytes) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        std::string msg = img.message;
        png_image_free(&img);
        throw DecodeError("png: " + msg);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw DecodeError("png: " + msg);
    }
    const int w = static_cast<int>(img.width), h = static_cast<int>(img.height);
    std::vector<Rgb> px(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = {buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
    return RgbImage(w, h, std::move(px));
}

struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Corrupt-data warnings (truncated streams, bad Huffman codes) are fatal.
inline void jpeg_strict_message(j_common_ptr cinfo, int msg_level) {
    if (msg_level < 0) jpeg_error_exit(cinfo);
}

// libjpeg reports errors through longjmp; no C++ objects with destructors may
// live between setjmp and the calls that can jump.
inline bool decode_jpeg_raw(std::span<const unsigned char> bytes, std::vector<unsigned char>& out, int& w, int& h,
                            std::string& error) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    jerr.pub.emit_message = jpeg_strict_message;
    jerr.message[0] = '\0';
    if (setjmp(jerr.jump)) {
        error = jerr.message;
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    out.resize(static_cast<std::size_t>(w) * h * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

inline RgbImage decode_jpeg(std::span<const unsigned char> bytes) {
    std::vector<unsigned char> buf;
    int w = 0, h = 0;
    std::string error;
    if (!decode_jpeg_raw(bytes, buf, w, h, error)) throw DecodeError("jpeg: " + error);
    std::vector<Rgb> px(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = {buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
    return RgbImage(w, h, std::move(px));
}

inline bool encode_jpeg_raw(const unsigned char* rgb, int w, int h, int quality, unsigned char*& mem, unsigned long& size,
                            std::string& error) {
    jpeg_compress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    jerr.message[0] = '\0';
    if (setjmp(jerr.jump)) {
        error = jerr.message;
        jpeg_destroy_compress(&cinfo);
        return false;
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &mem, &size);
    cinfo.image_width = static_cast<JDIMENSION>(w);
    cinfo.image_height = static_cast<JDIMENSION>(h);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        auto* row = const_cast<JSAMPROW>(rgb + static_cast<std::size_t>(cinfo.next_scanline) * w * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    return true;
}

inline std::vector<unsigned char> interleave(const RgbImage& img) {
    std::vector<unsigned char> buf(img.pixel_count() * 3);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const auto& p = img.pixels()[i];
        buf[3 * i] = p.r;
        buf[3 * i + 1] = p.g;
        buf[3 * i + 2] = p.b;
    }
    return buf;
}

} // namespace detail

/// Decodes PNG or JPEG bytes.
inline RgbImage decode_image(std::span<const unsigned char> bytes) {
    switch (sniff_format(bytes)) {
    case ImageFormat::png: return detail::decode_png(bytes);
    case ImageFormat::jpeg: return detail::decode_jpeg(bytes);
    case ImageFormat::unknown: break;
    }
    throw DecodeError("unrecognized image format (expected PNG or JPEG)");
}

inline Panorama decode_panorama(std::span<const unsigned char> bytes, std::optional<double> north_offset_deg) {
    return Panorama(decode_image(bytes), north_offset_deg);
}

inline Panorama load_panorama(const fs::path& path, std::optional<double> north_offset_deg) {
    auto bytes = read_bytes(path);
    try {
        return decode_panorama(bytes, north_offset_deg);
    } catch (const ShapeError& e) {
        throw ShapeError(path.string() + ": " + e.what());
    } catch (const DecodeError& e) {
        throw DecodeError(path.string() + ": " + e.what());
    }
}

inline std::vector<unsigned char> encode_png(const RgbImage& img) {
    if (img.empty()) throw ArgumentError("cannot encode an empty image");
    png_image pimg;
    std::memset(&pimg, 0, sizeof pimg);
    pimg.version = PNG_IMAGE_VERSION;
    pimg.width = static_cast<png_uint_32>(img.width());
    pimg.height = static_cast<png_uint_32>(img.height());
    pimg.format = PNG_FORMAT_RGB;
    auto buf = detail::interleave(img);
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&pimg, nullptr, &size, 0, buf.data(), 0, nullptr))
        throw DecodeError(std::string("png encode: ") + pimg.message);
    std::vector<unsigned char> out(size);
    if (!png_image_write_to_memory(&pimg, out.data(), &size, 0, buf.data(), 0, nullptr))
        throw DecodeError(std::string("png encode: ") + pimg.message);
    out.resize(size);
    return out;
}

inline std::vector<unsigned char> encode_jpeg(const RgbImage& img, int quality = 92) {
    if (img.empty()) throw ArgumentError("cannot encode an empty image");
    auto buf = detail::interleave(img);
    unsigned char* mem = nullptr;
    unsigned long size = 0;
    std::string error;
    bool ok = detail::encode_jpeg_raw(buf.data(), img.width(), img.height(), quality, mem, size, error);
    std::vector<unsigned char> out;
    if (ok) out.assign(mem, mem + size);
    std::free(mem);
    if (!ok) throw DecodeError("jpeg encode: " + error);
    return out;
}

inline void save_png(const fs::path& path, const RgbImage& img) {
    auto bytes = encode_png(img);
    write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

} // namespace countryguess
