#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointqa/geometry.hpp"

namespace pointqa {

enum class Split { train, val, test_dev, test_final, test };

std::string to_string(Split s);
Split parse_split(const std::string& name);

struct InstanceMeta {
    std::string task;  // local | looktwice | general | verbal | spatial | synthetic
    std::optional<std::string> category;
    std::string object_class;
    std::optional<std::string> supercategory;
    std::optional<std::string> question_form;
    std::optional<std::vector<std::string>> answer_set;
    std::optional<bool> synthesized;
    std::optional<std::string> source_qa_id;
};

struct PointQAInstance {
    std::string qa_id;
    std::string image_id;
    std::string question;
    std::optional<Point> point;
    std::optional<BoundingBox> gt_box;
    std::string answer;
    Split split = Split::train;
    InstanceMeta meta;
};

using Dataset = std::vector<PointQAInstance>;

nlohmann::json to_json(const PointQAInstance& inst);
PointQAInstance instance_from_json(const nlohmann::json& j);

Dataset read_instances(const std::filesystem::path& path);
void write_instances(const std::filesystem::path& path, const Dataset& instances);

// Writes {prefix}.{split}.jsonl for every listed split (empty files included),
// preserving the dataset's order within each split.
std::vector<std::filesystem::path> write_split_files(const std::filesystem::path& dir, const std::string& prefix,
                                                     const Dataset& dataset, const std::vector<Split>& splits);

// Reads every {prefix}.*.jsonl file in dir.
Dataset read_split_files(const std::filesystem::path& dir, const std::string& prefix);

struct SplitFraction {
    Split split;
    double fraction;
};

const std::vector<SplitFraction>& local_split_fractions();    // 0.7 / 0.1 / 0.1 / 0.1
const std::vector<SplitFraction>& default_split_fractions();  // 0.8 / 0.1 / 0.1

// Throws ConfigError unless fractions are non-negative and sum to 1 within 1e-9.
void validate_fractions(const std::vector<SplitFraction>& fractions);

// Seeded shuffle of image_ids, then contiguous blocks sized floor(f*n) plus a
// largest-remainder correction, so every split is within one image of its share.
std::map<std::string, Split> assign_splits(const std::vector<std::string>& image_ids,
                                           const std::vector<SplitFraction>& fractions, std::uint64_t seed);

Dataset filter_split(const Dataset& data, Split split);

}  // namespace pointqa
