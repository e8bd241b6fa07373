#include "pointqa/geometry.hpp"

#include <algorithm>
#include <cmath>


#include "pointqa/errors.hpp"

namespace pointqa {

void require_valid(const BoundingBox& box) {
    if (!(box.w > 0) || !(box.h > 0)) {
        throw InvalidGeometry("degenerate box: w=" + std::to_string(box.w) +
                              " h=" + std::to_string(box.h));
    }
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0 || ih <= 0) return 0.0;
    return iw * ih;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
    require_valid(a);
    require_valid(b);
    const double inter = intersection_area(a, b);
    if (inter == 0.0) return 0.0;
    return inter / (a.area() + b.area() - inter);
}

bool contains(const BoundingBox& box, const Point& p) {
    require_valid(box);
    return box.x <= p.x && p.x < box.right() && box.y <= p.y && p.y < box.bottom();
}

Point center_point(const BoundingBox& box) {
    require_valid(box);
    Point p{static_cast<int>(std::floor(box.x + box.w / 2.0)),
            static_cast<int>(std::floor(box.y + box.h / 2.0))};
    // Sub-pixel boxes can put the floored center left of x; clamp back inside.
    p.x = std::max(p.x, static_cast<int>(std::ceil(box.x)));
    p.y = std::max(p.y, static_cast<int>(std::ceil(box.y)));
    return p;
}

bool within_image(const BoundingBox& box, ImageSize size) {
    return box.x >= 0 && box.y >= 0 && box.right() <= size.width && box.bottom() <= size.height;
}

bool within_image(const Point& p, ImageSize size) {
    return p.x >= 0 && p.y >= 0 && p.x < size.width && p.y < size.height;
}

BoundingBox from_corners(double x1, double y1, double x2, double y2) {
    return BoundingBox{std::min(x1, x2), std::min(y1, y2), std::abs(x2 - x1), std::abs(y2 - y1)};
}

namespace {

nlohmann::json number(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) return static_cast<long long>(v);
    return v;
}

}  // namespace

void to_json(nlohmann::json& j, const BoundingBox& box) {
    j = nlohmann::json{{"x", number(box.x)}, {"y", number(box.y)}, {"w", number(box.w)}, {"h", number(box.h)}};
}

void from_json(const nlohmann::json& j, BoundingBox& box) {
    box.x = j.at("x").get<double>();
    box.y = j.at("y").get<double>();
    box.w = j.at("w").get<double>();
    box.h = j.at("h").get<double>();
}

void to_json(nlohmann::json& j, const Point& p) { j = nlohmann::json{{"x", p.x}, {"y", p.y}}; }

void from_json(const nlohmann::json& j, Point& p) {
    p.x = j.at("x").get<int>();
    p.y = j.at("y").get<int>();
}

}  // namespace pointqa
