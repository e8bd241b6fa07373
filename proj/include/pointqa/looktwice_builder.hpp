#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "pointqa/build_report.hpp"
#include "pointqa/instance.hpp"
#include "pointqa/random.hpp"
#include "pointqa/scene_graph.hpp"

namespace pointqa {

// object class -> beings | vehicles | objects
using SupercategoryMap = std::map<std::string, std::string>;

void validate_supercategory_map(const SupercategoryMap& map);

// "How many trucks are there?" -> "truck"; nullopt for non-counting questions.
std::optional<std::string> extract_count_subject(const std::string& question);

// Uniform choice among objects whose canonical name equals subject.
const ObjectAnnotation* match_subject_to_region(const std::string& subject, const ImageAnnotation& img, Rng& rng);

// 1 -> "1", 2 -> "2", n >= 3 -> ">2". Throws ContractError for n < 1.
std::string bin_count_answer(int n);

struct GeneralizedQuestions {
    std::string supercategory_form;
    std::string generic_form;
};

// Throws UnmappedClass when object_class has no supercategory.
GeneralizedQuestions generalize_question(const std::string& object_class, const SupercategoryMap& super_map);

// Same-class objects that survive greedy area-descending duplicate suppression.
std::vector<const ObjectAnnotation*> dedup_instances(const ImageAnnotation& img, const std::string& object_class,
                                                     double dedup_iou);
int count_instances(const ImageAnnotation& img, const std::string& object_class, double dedup_iou);

struct LookTwiceConfig {
    SupercategoryMap supercategory_of;
    std::size_t min_class_frequency = 100;
    double dedup_iou = 0.5;
    double val_fraction = 0.1;   // of constraint-satisfying images
    double test_fraction = 0.1;  // of constraint-satisfying images
    std::uint64_t seed = 0;

    void validate() const;
};

struct LookTwiceBuildResult {
    Dataset dataset;
    BuildReport report;
};

LookTwiceBuildResult build_looktwice_dataset(const AnnotationStore& store, const LookTwiceConfig& config);

}  // namespace pointqa
