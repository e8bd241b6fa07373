#include "pointqa/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "pointqa/errors.hpp"

namespace pointqa {

void ProposalSet::validate() const {
    if (boxes.empty()) throw ContractError("proposal set " + image_id + " is empty");
    if (scores.size() != boxes.size() || static_cast<std::size_t>(features.rows()) != boxes.size()) {
        throw ContractError("proposal set " + image_id + " has mismatched lengths");
    }
    for (const auto& b : boxes) require_valid(b);
}

std::string to_string(SelectionStrategy s) {
    switch (s) {
        case SelectionStrategy::all_containing: return "all_containing";
        case SelectionStrategy::top_score: return "top_score";
        case SelectionStrategy::smallest: return "smallest";
        case SelectionStrategy::full_image: return "full_image";
        case SelectionStrategy::gt_box: return "gt_box";
    }
    return "all_containing";
}

SelectionStrategy parse_strategy(const std::string& name) {
    if (name == "all_containing" || name == "point") return SelectionStrategy::all_containing;
    if (name == "top_score") return SelectionStrategy::top_score;
    if (name == "smallest") return SelectionStrategy::smallest;
    if (name == "full_image" || name == "none") return SelectionStrategy::full_image;
    if (name == "gt_box") return SelectionStrategy::gt_box;
    throw ConfigError("unknown selection strategy '" + name + "'");
}

std::size_t SelectedRegions::num_valid() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

namespace {

std::size_t nearest_center(const ProposalSet& proposals, const Point& p) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        const auto& b = proposals.boxes[i];
        const double dx = b.x + b.w / 2.0 - p.x;
        const double dy = b.y + b.h / 2.0 - p.y;
        const double d = dx * dx + dy * dy;
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

}  // namespace

SelectedRegions select_regions(const ProposalSet& proposals, const std::optional<Point>& point,
                               const std::optional<BoundingBox>& gt_box, SelectionStrategy strategy, std::size_t n) {
    proposals.validate();
    if (n == 0) throw ContractError("select_regions: N must be >= 1");
    if (strategy == SelectionStrategy::gt_box && !gt_box) {
        throw ContractError("select_regions: gt_box strategy requires a ground-truth box");
    }
    if (strategy != SelectionStrategy::full_image && strategy != SelectionStrategy::gt_box && !point) {
        throw ContractError("select_regions: strategy " + to_string(strategy) + " requires a point");
    }

    SelectedRegions out;
    out.strategy = strategy;
    std::vector<std::size_t> chosen;
    const std::size_t p = proposals.size();

    if (strategy == SelectionStrategy::full_image) {
        chosen.resize(p);
        std::iota(chosen.begin(), chosen.end(), 0);
    } else if (strategy == SelectionStrategy::gt_box) {
        for (std::size_t i = 0; i < p; ++i) {
            if (iou(proposals.boxes[i], *gt_box) >= kGtBoxIouThreshold) chosen.push_back(i);
        }
        if (chosen.empty()) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < p; ++i) {
                if (iou(proposals.boxes[i], *gt_box) > iou(proposals.boxes[best], *gt_box)) best = i;
            }
            chosen.push_back(best);
            out.fallback = true;
        }
    } else {
        std::vector<std::size_t> containing;
        for (std::size_t i = 0; i < p; ++i) {
            if (contains(proposals.boxes[i], *point)) containing.push_back(i);
        }
        if (containing.empty()) {
            containing.push_back(nearest_center(proposals, *point));
            out.fallback = true;
        }
        if (strategy == SelectionStrategy::all_containing) {
            chosen = containing;
        } else if (strategy == SelectionStrategy::top_score) {
            chosen.push_back(*std::max_element(containing.begin(), containing.end(), [&](std::size_t a, std::size_t b) {
                return proposals.scores[a] < proposals.scores[b];
            }));
        } else {
            chosen.push_back(*std::min_element(containing.begin(), containing.end(), [&](std::size_t a, std::size_t b) {
                return proposals.boxes[a].area() < proposals.boxes[b].area();
            }));
        }
    }

    if (chosen.size() > n) {
        std::vector<std::size_t> by_score = chosen;
        std::stable_sort(by_score.begin(), by_score.end(),
                         [&](std::size_t a, std::size_t b) { return proposals.scores[a] > proposals.scores[b]; });
        by_score.resize(n);
        std::sort(by_score.begin(), by_score.end());
        chosen = std::move(by_score);
    }

    const int d = proposals.dim();
    out.features = FeatureMatrix::Zero(static_cast<Eigen::Index>(n), d);
    out.boxes.assign(n, BoundingBox{});
    out.mask.assign(n, false);
    out.source_index.assign(n, -1);
    for (std::size_t r = 0; r < chosen.size(); ++r) {
        const std::size_t i = chosen[r];
        out.features.row(static_cast<Eigen::Index>(r)) = proposals.features.row(static_cast<Eigen::Index>(i));
        out.boxes[r] = proposals.boxes[i];
        out.mask[r] = true;
        out.source_index[r] = static_cast<int>(i);
    }
    return out;
}

namespace {

constexpr char kMagic[4] = {'P', 'Q', 'F', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw CorruptFeature("truncated feature file", bytes_.size());
    }
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_proposals(const ProposalSet& proposals) {
    proposals.validate();
    std::vector<std::uint8_t> out;
    const auto p = static_cast<std::uint32_t>(proposals.size());
    const auto d = static_cast<std::uint32_t>(proposals.dim());
    out.reserve(12 + p * 20 + static_cast<std::size_t>(p) * d * 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, p);
    put_u32(out, d);
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        const auto& b = proposals.boxes[i];
        put_f32(out, static_cast<float>(b.x));
        put_f32(out, static_cast<float>(b.y));
        put_f32(out, static_cast<float>(b.w));
        put_f32(out, static_cast<float>(b.h));
        put_f32(out, proposals.scores[i]);
    }
    for (Eigen::Index r = 0; r < proposals.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < proposals.features.cols(); ++c) put_f32(out, proposals.features(r, c));
    }
    return out;
}

ProposalSet decode_proposals(const std::vector<std::uint8_t>& bytes, const std::string& image_id) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CorruptFeature("bad magic in feature file for " + image_id, 0);
    }
    Reader r(bytes);
    r.u32();  // magic
    const std::size_t count_offset = r.pos();
    const std::uint32_t p = r.u32();
    const std::uint32_t d = r.u32();
    if (p == 0) throw CorruptFeature("zero proposals", count_offset);
    if (d == 0) throw CorruptFeature("zero feature dimension", count_offset + 4);
    const std::size_t expected = 12 + static_cast<std::size_t>(p) * 20 + static_cast<std::size_t>(p) * d * 4;
    if (bytes.size() < expected) throw CorruptFeature("truncated feature file", bytes.size());
    if (bytes.size() > expected) throw CorruptFeature("trailing bytes in feature file", expected);

    ProposalSet out;
    out.image_id = image_id;
    out.boxes.reserve(p);
    out.scores.reserve(p);
    for (std::uint32_t i = 0; i < p; ++i) {
        const std::size_t record_offset = r.pos();
        BoundingBox b;
        b.x = r.f32();
        b.y = r.f32();
        b.w = r.f32();
        b.h = r.f32();
        const float score = r.f32();
        if (!b.valid()) throw CorruptFeature("degenerate proposal box", record_offset);
        if (!(score >= 0.0f && score <= 1.0f)) throw CorruptFeature("objectness score outside [0,1]", record_offset + 16);
        out.boxes.push_back(b);
        out.scores.push_back(score);
    }
    out.features.resize(p, d);
    for (std::uint32_t i = 0; i < p; ++i) {
        for (std::uint32_t c = 0; c < d; ++c) out.features(i, c) = r.f32();
    }
    return out;
}

void write_proposals(const std::filesystem::path& path, const ProposalSet& proposals) {
    const auto bytes = encode_proposals(proposals);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ProposalSet read_proposals(const std::filesystem::path& path, const std::string& image_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_proposals(bytes, image_id);
}

ProposalSet load_proposals(const std::filesystem::path& feature_dir, const std::string& image_id) {
    return read_proposals(feature_dir / (image_id + ".pqf"), image_id);
}

FeatureStore::FeatureStore(std::map<std::string, ProposalSet> sets) : sets_(std::move(sets)) {
    int d = -1;
    for (const auto& [id, set] : sets_) {
        set.validate();
        if (d >= 0 && set.dim() != d) throw ContractError("feature dimension differs across images");
        d = set.dim();
    }
}

FeatureStore FeatureStore::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot read " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    in >> manifest;
    std::map<std::string, ProposalSet> sets;
    for (const auto& [id, rel] : manifest.items()) sets.emplace(id, read_proposals(dir / rel.get<std::string>(), id));
    return FeatureStore(std::move(sets));
}

void FeatureStore::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = nlohmann::json::object();
    for (const auto& [id, set] : sets_) {
        const std::string rel = id + ".pqf";
        write_proposals(dir / rel, set);
        manifest[id] = rel;
    }
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

const ProposalSet* FeatureStore::find(const std::string& image_id) const {
    auto it = sets_.find(image_id);
    return it == sets_.end() ? nullptr : &it->second;
}

const ProposalSet& FeatureStore::at(const std::string& image_id) const {
    const auto* set = find(image_id);
    if (!set) throw ContractError("no features for image " + image_id);
    return *set;
}

int FeatureStore::dim() const { return sets_.empty() ? 0 : sets_.begin()->second.dim(); }

}  // namespace pointqa
