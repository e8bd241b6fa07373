#include "pointqa/raster.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <zlib.h>

#include "pointqa/errors.hpp"
#include "pointqa/random.hpp"

namespace pointqa {

RgbImage::RgbImage(int w, int h, std::array<std::uint8_t, 3> fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw ContractError("raster size must be positive");
    pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) std::copy(fill.begin(), fill.end(), pixels.begin() + static_cast<long>(i));
}

namespace {

struct PixelRange {
    int x0, y0, x1, y1;
};

PixelRange clip(const RgbImage& img, const BoundingBox& b) {
    return {std::clamp(static_cast<int>(std::floor(b.x)), 0, img.width), std::clamp(static_cast<int>(std::floor(b.y)), 0, img.height),
            std::clamp(static_cast<int>(std::ceil(b.x + b.w)), 0, img.width),
            std::clamp(static_cast<int>(std::ceil(b.y + b.h)), 0, img.height)};
}

void put(RgbImage& img, int x, int y, std::array<std::uint8_t, 3> c) {
    const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) + static_cast<std::size_t>(x)) * 3;
    img.pixels[i] = c[0];
    img.pixels[i + 1] = c[1];
    img.pixels[i + 2] = c[2];
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
    append_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    append_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void RgbImage::fill_rect(const BoundingBox& box, std::array<std::uint8_t, 3> color) {
    const auto r = clip(*this, box);
    for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) put(*this, x, y, color);
    }
}

void RgbImage::outline_rect(const BoundingBox& box, std::array<std::uint8_t, 3> color) {
    const auto r = clip(*this, box);
    if (r.x0 >= r.x1 || r.y0 >= r.y1) return;
    for (int x = r.x0; x < r.x1; ++x) {
        put(*this, x, r.y0, color);
        put(*this, x, r.y1 - 1, color);
    }
    for (int y = r.y0; y < r.y1; ++y) {
        put(*this, r.x0, y, color);
        put(*this, r.x1 - 1, y, color);
    }
}

std::array<std::uint8_t, 3> color_for(const std::string& name) {
    static const std::map<std::string, std::array<std::uint8_t, 3>> known = {
        {"red", {220, 40, 40}},     {"blue", {40, 80, 220}},    {"green", {40, 170, 60}},  {"yellow", {235, 210, 40}},
        {"white", {245, 245, 245}}, {"black", {20, 20, 20}},    {"orange", {240, 140, 30}}, {"purple", {140, 60, 180}},
        {"pink", {240, 150, 190}},  {"brown", {130, 80, 40}},   {"gray", {128, 128, 128}}, {"grey", {128, 128, 128}},
    };
    auto it = known.find(name);
    if (it != known.end()) return it->second;
    const std::uint64_t h = stable_hash(name);
    return {static_cast<std::uint8_t>(64 + (h & 0x7f)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0x7f)),
            static_cast<std::uint8_t>(64 + ((h >> 16) & 0x7f))};
}

RgbImage rasterize(const ImageAnnotation& image) {
    RgbImage img(image.width, image.height, {200, 200, 200});
    for (const auto& obj : image.objects) {
        std::array<std::uint8_t, 3> c = color_for(obj.canonical_name());
        for (const auto& a : obj.attributes) {
            if (a == "red" || a == "blue" || a == "green" || a == "yellow" || a == "white" || a == "black" ||
                a == "orange" || a == "purple" || a == "pink" || a == "brown" || a == "gray" || a == "grey") {
                c = color_for(a);
                break;
            }
        }
        img.fill_rect(obj.box, c);
        img.outline_rect(obj.box, {30, 30, 30});
    }
    return img;
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
    std::vector<std::uint8_t> raw;
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    raw.reserve((stride + 1) * static_cast<std::size_t>(image.height));
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);
        const auto row = image.pixels.begin() + static_cast<long>(static_cast<std::size_t>(y) * stride);
        raw.insert(raw.end(), row, row + static_cast<long>(stride));
    }
    uLongf len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> z(len);
    if (compress2(z.data(), &len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw IoError("zlib compression failed");
    }
    z.resize(len);

    std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> ihdr;
    append_u32(ihdr, static_cast<std::uint32_t>(image.width));
    append_u32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    chunk(out, "IHDR", ihdr);
    chunk(out, "IDAT", z);
    chunk(out, "IEND", {});
    return out;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    static const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += alphabet[v & 63];
    }
    if (i < bytes.size()) {
        std::uint32_t v = bytes[i] << 16;
        if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += i + 1 < bytes.size() ? alphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

}  // namespace pointqa
