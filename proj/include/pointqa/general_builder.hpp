#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointqa/build_report.hpp"
#include "pointqa/instance.hpp"
#include "pointqa/scene_graph.hpp"

namespace pointqa {

// Rewrites "Which X is/are/has/have Y?" into the pointing form, anchoring on
// the earliest template verb that leaves both X and Y non-empty.
std::optional<std::string> transform_which_question(const std::string& question);

struct GeneralBuilderConfig {
    std::vector<SplitFraction> split_fractions = default_split_fractions();
    std::uint64_t seed = 0;
};

struct GeneralBuildResult {
    Dataset dataset;
    BuildReport report;
};

GeneralBuildResult build_general_dataset(const AnnotationStore& store, const GeneralBuilderConfig& config);

}  // namespace pointqa
