#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pointqa/geometry.hpp"

namespace pointqa {

struct ObjectAnnotation {
    std::string object_id;
    std::vector<std::string> names;  // first is canonical
    BoundingBox box;
    std::vector<std::string> attributes;

    const std::string& canonical_name() const { return names.front(); }
};

struct AnswerBox {
    BoundingBox box;
    bool correct = false;
};

struct SourceQA {
    std::string qa_id;
    std::string question;
    std::string answer;
    std::optional<std::vector<AnswerBox>> answer_boxes;
};

struct ImageAnnotation {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<ObjectAnnotation> objects;
    std::vector<SourceQA> source_qas;
    std::optional<std::string> image_uri;

    ImageSize size() const { return {width, height}; }
};

// Immutable, image_id-ordered collection of annotations.
class AnnotationStore {
public:
    AnnotationStore() = default;
    // Sorts by image_id; throws ContractError on duplicate ids.
    explicit AnnotationStore(std::vector<ImageAnnotation> images, std::size_t skipped = 0);

    std::size_t size() const { return images_.size(); }
    bool empty() const { return images_.empty(); }
    std::size_t skipped() const { return skipped_; }

    const ImageAnnotation* find(const std::string& image_id) const;
    const ImageAnnotation& at(const std::string& image_id) const;

    auto begin() const { return images_.begin(); }
    auto end() const { return images_.end(); }
    const std::vector<ImageAnnotation>& images() const { return images_; }

private:
    std::vector<ImageAnnotation> images_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t skipped_ = 0;
};

inline constexpr std::size_t kMinRecordsForCorruptRate = 10;

// Reads the JSON-Lines annotation format. Malformed lines are skipped and
// counted; more than 10% malformed (in files of at least
// kMinRecordsForCorruptRate records) raises CorruptInput.
AnnotationStore load_annotations(const std::filesystem::path& path);

// Parses and normalizes one record; throws on any schema violation.
ImageAnnotation parse_image_annotation(const nlohmann::json& record);
nlohmann::json to_json(const ImageAnnotation& image);
void write_annotations(const std::filesystem::path& path, const AnnotationStore& store);

enum class AttributeCategory { color, shape, action };

std::string to_string(AttributeCategory c);
std::optional<AttributeCategory> parse_category(const std::string& name);

struct AttributeTaxonomy {
    std::map<std::string, AttributeCategory> category_of;  // canonical -> category
    std::map<std::string, std::string> canonical_of;       // raw -> canonical
    std::vector<std::string> uncategorized;                // top-k attributes missing a category
    std::vector<std::string> dropped_size;                 // top-k attributes in the size category

    bool empty() const { return category_of.empty(); }
    std::optional<std::string> canonical(const std::string& raw) const;
    std::optional<AttributeCategory> category(const std::string& canonical) const;
};

// Top-k attribute frequency cut (ties lexicographic), synonym collapsing, and
// removal of the "size" category. Throws ContractError when top_k == 0.
AttributeTaxonomy build_taxonomy(const AnnotationStore& store, std::size_t top_k,
                                 const std::map<std::string, std::string>& synonym_map,
                                 const std::map<std::string, std::string>& category_map);

std::map<std::string, std::string> load_string_map(const std::filesystem::path& path);

// Raw attribute frequency over every object in the store.
std::map<std::string, std::size_t> attribute_frequencies(const AnnotationStore& store);

}  // namespace pointqa
