#pragma once

#include <json.hpp>

namespace pointqa {

// Axis-aligned box in pixel units, half-open: [x, x+w) x [y, y+h).
struct BoundingBox {
    double x = 0;
    double y = 0;
    double w = 0;
    double h = 0;

    double area() const { return w * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
    bool valid() const { return w > 0 && h > 0; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Point {
    int x = 0;
    int y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct ImageSize {
    int width = 0;
    int height = 0;
};

// Throws InvalidGeometry for w <= 0 or h <= 0.
void require_valid(const BoundingBox& box);

// Intersection over union; 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

double intersection_area(const BoundingBox& a, const BoundingBox& b);

bool contains(const BoundingBox& box, const Point& p);

// Floor of the exact center, so the result is a pixel inside the box.
Point center_point(const BoundingBox& box);

bool within_image(const BoundingBox& box, ImageSize size);
bool within_image(const Point& p, ImageSize size);

// Builds an (x, y, w, h) box from corner coordinates.
BoundingBox from_corners(double x1, double y1, double x2, double y2);

void to_json(nlohmann::json& j, const BoundingBox& box);
void from_json(const nlohmann::json& j, BoundingBox& box);
void to_json(nlohmann::json& j, const Point& p);
void from_json(const nlohmann::json& j, Point& p);

}  // namespace pointqa
