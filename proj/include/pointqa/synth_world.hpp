#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointqa/build_report.hpp"
#include "pointqa/features.hpp"
#include "pointqa/instance.hpp"
#include "pointqa/looktwice_builder.hpp"
#include "pointqa/scene_graph.hpp"

namespace pointqa {

// local:   several same-class objects per image with distinct colors and actions;
//          color lives on the object box, action only on the surrounding context box.
// count:   2-3 classes per image with balanced counts and a fixed proposal total;
//          emits "How many Xs are there?" source questions.
// compare: four same-class objects of distinct sizes at a per-image scale; emits
//          "Which X is the largest?" and "Which X is <color>?" with answer boxes.
enum class SynthScenario { local, count, compare };

std::string to_string(SynthScenario s);
SynthScenario parse_scenario(const std::string& name);

struct SynthWorldConfig {
    SynthScenario scenario = SynthScenario::local;
    std::size_t num_images = 100;
    std::size_t min_objects = 4;
    std::size_t max_objects = 6;
    std::vector<std::string> classes{"shirt", "car", "dog", "cup"};
    std::vector<std::string> colors{"red", "blue", "green", "yellow"};
    std::vector<std::string> actions{"standing", "sitting", "running", "sleeping"};
    SupercategoryMap supercategories;  // count scenario; defaults to "objects"
    int canvas_width = 320;
    int canvas_height = 240;
    int feature_dim = 24;
    double noise = 0.1;
    std::size_t jitter_per_object = 2;
    std::size_t spurious_per_image = 4;
    std::size_t total_proposals = 0;  // count scenario: spurious boxes pad up to this
    std::uint64_t seed = 0;

    // Throws ConfigError.
    void validate() const;
    // Minimum D for the vocabularies: class, color, action blocks + background + 4 geometry.
    int required_dim() const;
};

nlohmann::json to_json(const SynthWorldConfig& config);
SynthWorldConfig synth_config_from_json(const nlohmann::json& j);

enum class ProposalKind { object, jitter, context, spurious };

struct SynthObject {
    std::string object_id;
    std::string object_class;
    std::string color;
    std::string action;
    BoundingBox box;
};

// Answers questions by reading the generated world state.
class SynthOracle {
public:
    SynthOracle() = default;
    explicit SynthOracle(std::map<std::string, std::vector<SynthObject>> objects);

    // Supported: "What color is this X?", "What action is this X doing?",
    // "How many of these [super] are there?", "How many Xs are there?",
    // "Is this X the largest?", "Is this X <color>?". nullopt when the question
    // is not understood or the point hits no (matching) object.
    std::optional<std::string> answer(const std::string& image_id, const std::string& question,
                                      const std::optional<Point>& point) const;

    const SynthObject* object_at(const std::string& image_id, const Point& p) const;
    const std::vector<SynthObject>& objects(const std::string& image_id) const;

private:
    std::map<std::string, std::vector<SynthObject>> objects_;
};

struct SynthWorld {
    SynthWorldConfig config;
    AnnotationStore annotations;
    FeatureStore features;
    SynthOracle oracle;
    std::map<std::string, std::vector<ProposalKind>> proposal_kinds;

    // Attribute -> category map and supercategory map matching the world's vocabularies.
    std::map<std::string, std::string> category_map() const;
    SupercategoryMap supercategory_map() const;
};

SynthWorld synth_world_generate(const SynthWorldConfig& config);

// Least-squares linear probe from object-box features to one attribute block
// ("color" or "class"); fits on even images and reports accuracy on odd ones.
double linear_probe_accuracy(const SynthWorld& world, const std::string& target);

struct SynthBuildOptions {
    std::uint64_t seed = 0;
    double iou_threshold = 0.2;          // local
    std::size_t min_class_frequency = 1;  // count
    double val_fraction = 0.2;           // count
    double test_fraction = 0.2;          // count
};

struct SynthDataset {
    std::string prefix;  // local | looktwice | general
    Dataset dataset;
    BuildReport report;
};

// Runs the builder matching the world's scenario: local -> Local, count ->
// LookTwice, compare -> General.
SynthDataset build_synth_dataset(const SynthWorld& world, const SynthBuildOptions& options);

}  // namespace pointqa
