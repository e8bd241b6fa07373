#pragma once

// Independent reference implementations used only by tests. None of these call
// into the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pointqa/features.hpp"
#include "pointqa/instance.hpp"
#include "pointqa/nn/tape.hpp"

namespace oracle {

// Integer-coordinate box as unit cells [x, x+w) x [y, y+h).
struct CellBox {
    long x, y, w, h;
};

inline CellBox cells(const pointqa::BoundingBox& b) {
    return {std::lround(b.x), std::lround(b.y), std::lround(b.w), std::lround(b.h)};
}

// Enumerates every unit cell of both boxes and counts shared and total cells.
inline double cell_iou(const CellBox& a, const CellBox& b) {
    std::set<std::pair<long, long>> in_a;
    for (long y = a.y; y < a.y + a.h; ++y) {
        for (long x = a.x; x < a.x + a.w; ++x) in_a.insert({x, y});
    }
    std::size_t shared = 0;
    std::size_t b_cells = 0;
    for (long y = b.y; y < b.y + b.h; ++y) {
        for (long x = b.x; x < b.x + b.w; ++x) {
            ++b_cells;
            if (in_a.count({x, y})) ++shared;
        }
    }
    const std::size_t uni = in_a.size() + b_cells - shared;
    return uni == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(uni);
}

inline double cell_iou(const pointqa::BoundingBox& a, const pointqa::BoundingBox& b) {
    return cell_iou(cells(a), cells(b));
}

// Point-in-box by enumerating the box's pixel columns and rows.
inline bool cell_contains(const CellBox& b, long px, long py) {
    bool col = false, row = false;
    for (long x = b.x; x < b.x + b.w; ++x) col = col || x == px;
    for (long y = b.y; y < b.y + b.h; ++y) row = row || y == py;
    return col && row;
}

inline std::set<int> containing_indices(const pointqa::ProposalSet& props, const pointqa::Point& p) {
    std::set<int> out;
    for (std::size_t i = 0; i < props.size(); ++i) {
        if (cell_contains(cells(props.boxes[i]), p.x, p.y)) out.insert(static_cast<int>(i));
    }
    return out;
}

// Greedy same-class duplicate suppression, largest area first, via cell IoU.
inline int dedup_count(std::vector<pointqa::BoundingBox> boxes, double dedup_iou) {
    std::stable_sort(boxes.begin(), boxes.end(), [](const auto& a, const auto& b) { return a.w * a.h > b.w * b.h; });
    std::vector<pointqa::BoundingBox> kept;
    for (const auto& b : boxes) {
        bool dup = false;
        for (const auto& k : kept) dup = dup || cell_iou(b, k) >= dedup_iou;
        if (!dup) kept.push_back(b);
    }
    return static_cast<int>(kept.size());
}

// Singularizer with its own irregular table, for subject extraction checks.
inline std::string singular(const std::string& w) {
    static const std::map<std::string, std::string> irregular = {
        {"people", "person"}, {"men", "man"}, {"women", "woman"}, {"children", "child"},
        {"sheep", "sheep"},   {"mice", "mouse"}, {"geese", "goose"}, {"feet", "foot"}, {"teeth", "tooth"}};
    if (auto it = irregular.find(w); it != irregular.end()) return it->second;
    auto ends = [&](const std::string& s) { return w.size() > s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0; };
    if (ends("ies")) return w.substr(0, w.size() - 3) + "y";
    if (ends("ches") || ends("shes") || ends("xes") || ends("sses")) return w.substr(0, w.size() - 2);
    if (ends("s") && !ends("ss")) return w.substr(0, w.size() - 1);
    return w;
}

// P(X >= k) for X ~ Binomial(n, 1/2) from Pascal's triangle.
inline double binomial_upper_tail_half(std::size_t k, std::size_t n) {
    std::vector<double> row{1.0};
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> next(row.size() + 1, 0.0);
        for (std::size_t j = 0; j < row.size(); ++j) {
            next[j] += 0.5 * row[j];
            next[j + 1] += 0.5 * row[j];
        }
        row = std::move(next);
    }
    double p = 0;
    for (std::size_t j = k; j <= n; ++j) p += row[j];
    return p;
}

// Fraction of equal (prediction, label) pairs.
inline double recount_accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& labels) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) ok += predictions[i] == labels[i] ? 1 : 0;
    return predictions.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(predictions.size());
}

// Modal-A by exhaustive scan: highest training count within the answer set,
// ties to the smallest string.
inline std::string modal_answer(const std::vector<std::string>& answer_set, const pointqa::Dataset& train) {
    std::string best;
    long best_count = -1;
    for (const auto& a : answer_set) {
        long c = 0;
        for (const auto& inst : train) c += inst.answer == a ? 1 : 0;
        if (c > best_count || (c == best_count && a < best)) {
            best = a;
            best_count = c;
        }
    }
    return best;
}

struct GradCheck {
    double max_rel_error = 0;
    std::string worst;
    std::size_t checked = 0;
};

// Relative error with a floor on the denominator so that gradients that are
// zero up to rounding are compared absolutely.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central finite differences of loss() over every entry of every parameter
// (or every stride-th entry), compared against analytic gradients.
inline GradCheck check_gradients(pointqa::nn::ParameterSet& params, const pointqa::nn::Gradients& analytic,
                                 const std::function<double()>& loss, double eps = 1e-5, std::size_t stride = 1) {
    GradCheck out;
    std::size_t counter = 0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& m = params[p].value;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            if (counter++ % stride != 0) continue;
            const double saved = m.data()[i];
            m.data()[i] = saved + eps;
            const double up = loss();
            m.data()[i] = saved - eps;
            const double down = loss();
            m.data()[i] = saved;
            const double numeric = (up - down) / (2 * eps);
            const double err = relative_error(analytic[p].data()[i], numeric);
            ++out.checked;
            if (err > out.max_rel_error) {
                out.max_rel_error = err;
                out.worst = params[p].name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return out;
}

}  // namespace oracle
