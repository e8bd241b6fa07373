#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointqa/build_report.hpp"
#include "pointqa/instance.hpp"
#include "pointqa/scene_graph.hpp"

namespace pointqa {

struct LocalBuilderConfig {
    double iou_threshold = 0.2;
    std::vector<SplitFraction> split_fractions = local_split_fractions();
    std::uint64_t seed = 0;
    AttributeTaxonomy taxonomy;

    void validate() const;
};

// Two same-class objects whose attributes of one category differ.
struct LocalPair {
    std::size_t first;  // object indices into the image
    std::size_t second;
    AttributeCategory category;
    std::string first_attribute;
    std::string second_attribute;
};

std::vector<LocalPair> find_local_pairs(const ImageAnnotation& img, const AttributeTaxonomy& taxonomy,
                                        double iou_threshold);

// "What color is this shirt?" / "What action is this person doing?"
std::string local_question(AttributeCategory category, const std::string& object_class);

struct LocalBuildResult {
    Dataset dataset;
    BuildReport report;
};

LocalBuildResult build_local_dataset(const AnnotationStore& store, const LocalBuilderConfig& config);

}  // namespace pointqa
