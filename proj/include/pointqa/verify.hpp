#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointqa/instance.hpp"

namespace pointqa {

struct ConstraintResult {
    std::string name;
    std::size_t checked = 0;
    std::vector<std::string> violations;  // first few offending ids

    bool passed() const { return violations.empty(); }
    void fail(const std::string& what);
};

struct VerifyReport {
    std::vector<ConstraintResult> results;

    bool passed() const;
    nlohmann::json to_json() const;
    void append(std::vector<ConstraintResult> more);
};

// Point-necessity, IoU < threshold against a differing-answer sibling, point in
// gt_box, answer in answer_set, one split per image.
std::vector<ConstraintResult> check_local(const Dataset& data, double iou_threshold);

// Eval images satisfy o_i != o_j and a_i != a_j over human questions; the three
// forms of one question agree; synthesized counterparts stay in train and differ
// from their source in class and answer.
std::vector<ConstraintResult> check_looktwice(const Dataset& data);

// Exact yes/no balance (global and per image), complete sibling pairs, distinct points.
std::vector<ConstraintResult> check_general(const Dataset& data);

// Paired qa_ids, D_S question is a token deletion of its D_V sibling, D_S point in gt_box.
std::vector<ConstraintResult> check_verbal_spatial(const Dataset& verbal, const Dataset& spatial);

// Runs every checker whose {prefix}.*.jsonl files exist in dir.
VerifyReport verify_directory(const std::filesystem::path& dir, double iou_threshold = 0.2);

}  // namespace pointqa
