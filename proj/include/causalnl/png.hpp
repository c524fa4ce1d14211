#ifndef CAUSALNL_PNG_HPP
#define CAUSALNL_PNG_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "causalnl/common.hpp"

namespace causalnl {

/// Row-major 8-bit RGB raster.
struct RgbImage {
    int width = 0, height = 0;
    std::vector<unsigned char> pixels; // 3 bytes per pixel

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 255) {}

    void set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
        if (x < 0 || x >= width || y < 0 || y >= height) return;
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        pixels[i] = r;
        pixels[i + 1] = g;
        pixels[i + 2] = b;
    }
};

namespace detail {

inline void png_be32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

inline void png_chunk(std::ostream& out, const char type[4], const std::vector<unsigned char>& data) {
    std::vector<unsigned char> head;
    png_be32(head, static_cast<std::uint32_t>(data.size()));
    out.write(reinterpret_cast<const char*>(head.data()), 4);
    out.write(type, 4);
    if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    std::vector<unsigned char> tail;
    png_be32(tail, static_cast<std::uint32_t>(crc));
    out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

} // namespace detail

inline void write_png(const RgbImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("png: cannot write " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<unsigned char> ihdr;
    detail::png_be32(ihdr, static_cast<std::uint32_t>(img.width));
    detail::png_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    detail::png_chunk(out, "IHDR", ihdr);

    // Scanlines with filter byte 0, zlib-compressed.
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(img.height) * (1 + 3 * img.width));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        const unsigned char* row = img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3;
        raw.insert(raw.end(), row, row + static_cast<std::size_t>(img.width) * 3);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> deflated(bound);
    if (compress2(deflated.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw FormatError("png: deflate failed");
    deflated.resize(bound);
    detail::png_chunk(out, "IDAT", deflated);
    detail::png_chunk(out, "IEND", {});
}

/// Reads just the dimensions from a PNG header; throws on non-PNG content.
inline std::pair<int, int> read_png_size(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("png: cannot open " + path);
    unsigned char head[24];
    if (!in.read(reinterpret_cast<char*>(head), 24)) throw FormatError("png: truncated header");
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (std::memcmp(head, sig, 8) != 0) throw FormatError("png: bad signature");
    if (std::memcmp(head + 12, "IHDR", 4) != 0) throw FormatError("png: missing IHDR");
    auto be32 = [&](int off) {
        return (int(head[off]) << 24) | (int(head[off + 1]) << 16) | (int(head[off + 2]) << 8) |
               int(head[off + 3]);
    };
    return {be32(16), be32(20)};
}

} // namespace causalnl

#endif
