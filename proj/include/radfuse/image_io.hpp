#pragma once

#include <png.h>

#include <cctype>
#include <fstream>
#include <string>
#include <vector>

#include "radfuse/core.hpp"

namespace radfuse {

namespace detail {

inline void skip_pgm_whitespace(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

inline int read_pgm_int(std::istream& in, const std::string& path) {
    skip_pgm_whitespace(in);
    int v = -1;
    if (!(in >> v) || v < 0) throw Error("PGM " + path + ": malformed header");
    return v;
}

}  // namespace detail

// Binary PGM (P5), 8- or 16-bit. Raw sample values are returned; spacing comes
// from the caller since PGM carries none.
inline Image read_pgm(const std::string& path, double spacing_mm) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5') throw Error("PGM " + path + ": not a binary P5 file");
    const int w = detail::read_pgm_int(in, path);
    const int h = detail::read_pgm_int(in, path);
    const int maxval = detail::read_pgm_int(in, path);
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw Error("PGM " + path + ": unsupported dimensions or depth");
    in.get();  // single whitespace before raster

    const bool wide = maxval > 255;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<unsigned char> raw(n * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw Error("PGM " + path + ": truncated raster");

    Image img(w, h, spacing_mm);
    for (std::size_t i = 0; i < n; ++i)
        img.data[i] = wide ? static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]) : static_cast<double>(raw[i]);
    return img;
}

// Samples above maxval are clamped.
inline void write_pgm(const std::string& path, const Grid<std::uint16_t>& pixels, int maxval) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image " + path);
    out << "P5\n" << pixels.width << ' ' << pixels.height << '\n' << maxval << '\n';
    const bool wide = maxval > 255;
    std::vector<unsigned char> raw;
    raw.reserve(pixels.size() * (wide ? 2 : 1));
    for (auto v : pixels.data) {
        const auto c = std::min<std::uint16_t>(v, static_cast<std::uint16_t>(maxval));
        if (wide) raw.push_back(static_cast<unsigned char>(c >> 8));
        raw.push_back(static_cast<unsigned char>(c & 0xff));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw Error("failed writing image " + path);
}

// Grayscale PNG, 8- or 16-bit. Color images are rejected.
inline Image read_png(const std::string& path, double spacing_mm) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw Error("PNG " + path + ": " + image.message);
    if (image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA)) {
        png_image_free(&image);
        throw Error("PNG " + path + ": only single-channel grayscale is supported");
    }
    const bool wide = (image.format & PNG_FORMAT_FLAG_LINEAR) != 0;
    image.format = wide ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
    const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
    Image img(w, h, spacing_mm);
    if (wide) {
        std::vector<png_uint_16> buf(PNG_IMAGE_SIZE(image) / sizeof(png_uint_16));
        if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr))
            throw Error("PNG " + path + ": " + image.message);
        for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = buf[i];
    } else {
        std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
        if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr))
            throw Error("PNG " + path + ": " + image.message);
        for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = buf[i];
    }
    return img;
}

inline void write_png8(const std::string& path, const Grid<std::uint8_t>& pixels) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(pixels.width);
    image.height = static_cast<png_uint_32>(pixels.height);
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data.data(), 0, nullptr))
        throw Error("PNG " + path + ": " + image.message);
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                                                   [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

// Dispatches on extension: .pgm or .png.
inline Image read_image(const std::string& path, double spacing_mm) {
    if (ends_with(path, ".png")) return read_png(path, spacing_mm);
    if (ends_with(path, ".pgm")) return read_pgm(path, spacing_mm);
    throw Error("unsupported image format: " + path);
}

}  // namespace radfuse
