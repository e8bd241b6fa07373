#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pointqa/scene_graph.hpp"

namespace pointqa {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB

    RgbImage(int w, int h, std::array<std::uint8_t, 3> fill);
    void fill_rect(const BoundingBox& box, std::array<std::uint8_t, 3> color);
    void outline_rect(const BoundingBox& box, std::array<std::uint8_t, 3> color);
};

// Known color words map to fixed RGB values; anything else gets a hashed gray-free tint.
std::array<std::uint8_t, 3> color_for(const std::string& name);

// Deterministic drawing of an annotation: each object box filled with its first
// recognized color attribute and outlined.
RgbImage rasterize(const ImageAnnotation& image);

std::vector<std::uint8_t> encode_png(const RgbImage& image);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

}  // namespace pointqa
