#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pointqa/geometry.hpp"

namespace pointqa {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ProposalSet {
    std::string image_id;
    std::vector<BoundingBox> boxes;
    std::vector<float> scores;
    FeatureMatrix features;  // P x D

    std::size_t size() const { return boxes.size(); }
    int dim() const { return static_cast<int>(features.cols()); }
    // Throws ContractError unless sizes agree, P >= 1 and every box is valid.
    void validate() const;
};

enum class SelectionStrategy { all_containing, top_score, smallest, full_image, gt_box };

std::string to_string(SelectionStrategy s);
SelectionStrategy parse_strategy(const std::string& name);

struct SelectedRegions {
    FeatureMatrix features;          // N x D, padded rows exactly zero
    std::vector<BoundingBox> boxes;  // N, padding boxes all-zero
    std::vector<bool> mask;          // N
    std::vector<int> source_index;   // proposal index per row, -1 for padding
    SelectionStrategy strategy = SelectionStrategy::all_containing;
    bool fallback = false;           // no proposal qualified; nearest one used

    std::size_t num_valid() const;
};

// Point-conditioned proposal selection. Truncation beyond n keeps the
// highest-scoring rows; surviving rows stay in proposal order.
SelectedRegions select_regions(const ProposalSet& proposals, const std::optional<Point>& point,
                               const std::optional<BoundingBox>& gt_box, SelectionStrategy strategy, std::size_t n);

inline constexpr double kGtBoxIouThreshold = 0.5;

// Binary .pqf codec; little-endian, magic "PQF1".
std::vector<std::uint8_t> encode_proposals(const ProposalSet& proposals);
ProposalSet decode_proposals(const std::vector<std::uint8_t>& bytes, const std::string& image_id);
void write_proposals(const std::filesystem::path& path, const ProposalSet& proposals);
ProposalSet read_proposals(const std::filesystem::path& path, const std::string& image_id);

// Reads {feature_dir}/{image_id}.pqf.
ProposalSet load_proposals(const std::filesystem::path& feature_dir, const std::string& image_id);

// Read-only proposal sets keyed by image_id.
class FeatureStore {
public:
    FeatureStore() = default;
    explicit FeatureStore(std::map<std::string, ProposalSet> sets);

    // Loads every entry of {dir}/manifest.json.
    static FeatureStore load(const std::filesystem::path& dir);
    // Writes one .pqf per image plus manifest.json.
    void save(const std::filesystem::path& dir) const;

    const ProposalSet* find(const std::string& image_id) const;
    const ProposalSet& at(const std::string& image_id) const;
    std::size_t size() const { return sets_.size(); }
    int dim() const;
    const std::map<std::string, ProposalSet>& sets() const { return sets_; }

private:
    std::map<std::string, ProposalSet> sets_;
};

}  // namespace pointqa
