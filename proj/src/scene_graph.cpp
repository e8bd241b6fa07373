#include "pointqa/scene_graph.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "pointqa/errors.hpp"
#include "pointqa/text.hpp"

namespace pointqa {

AnnotationStore::AnnotationStore(std::vector<ImageAnnotation> images, std::size_t skipped)
    : images_(std::move(images)), skipped_(skipped) {
    std::sort(images_.begin(), images_.end(),
              [](const ImageAnnotation& a, const ImageAnnotation& b) { return a.image_id < b.image_id; });
    for (std::size_t i = 0; i < images_.size(); ++i) {
        if (!index_.emplace(images_[i].image_id, i).second) {
            throw ContractError("duplicate image_id " + images_[i].image_id);
        }
    }
}

const ImageAnnotation* AnnotationStore::find(const std::string& image_id) const {
    auto it = index_.find(image_id);
    return it == index_.end() ? nullptr : &images_[it->second];
}

const ImageAnnotation& AnnotationStore::at(const std::string& image_id) const {
    const auto* img = find(image_id);
    if (!img) throw ContractError("unknown image_id " + image_id);
    return *img;
}

namespace {

std::string require_string(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_string()) throw ContractError(std::string(key) + " must be a string");
    return v.get<std::string>();
}

std::string id_string(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw ContractError(std::string(key) + " must be a string");
}

}  // namespace

ImageAnnotation parse_image_annotation(const nlohmann::json& record) {
    if (!record.is_object()) throw ContractError("record is not an object");
    ImageAnnotation img;
    img.image_id = id_string(record, "image_id");
    img.width = record.at("width").get<int>();
    img.height = record.at("height").get<int>();
    if (img.width <= 0 || img.height <= 0) throw ContractError("non-positive image size");
    if (auto it = record.find("image_uri"); it != record.end() && it->is_string()) {
        img.image_uri = it->get<std::string>();
    }
    const auto& objects = record.at("objects");
    if (!objects.is_array()) throw ContractError("objects must be an array");
    std::set<std::string> ids;
    for (const auto& o : objects) {
        ObjectAnnotation obj;
        obj.object_id = id_string(o, "object_id");
        if (!ids.insert(obj.object_id).second) throw ContractError("duplicate object_id " + obj.object_id);
        for (const auto& n : o.at("names")) {
            auto name = text::normalize(n.get<std::string>());
            if (!name.empty()) obj.names.push_back(std::move(name));
        }
        if (obj.names.empty()) throw ContractError("object without names");
        obj.box = o.at("box").get<BoundingBox>();
        require_valid(obj.box);
        if (!within_image(obj.box, img.size())) throw ContractError("object box outside image");
        if (auto it = o.find("attributes"); it != o.end()) {
            for (const auto& a : *it) {
                auto attr = text::normalize(a.get<std::string>());
                if (attr.empty()) continue;
                if (std::find(obj.attributes.begin(), obj.attributes.end(), attr) == obj.attributes.end()) {
                    obj.attributes.push_back(std::move(attr));
                }
            }
        }
        img.objects.push_back(std::move(obj));
    }
    if (auto it = record.find("source_qas"); it != record.end()) {
        for (const auto& q : *it) {
            SourceQA qa;
            qa.qa_id = id_string(q, "qa_id");
            qa.question = text::trim(require_string(q, "question"));
            // Collapse internal whitespace but keep case; questions are emitted verbatim.
            qa.question = text::join(text::split_whitespace(qa.question));
            if (!text::ends_with(qa.question, "?")) throw ContractError("question must end with '?'");
            qa.answer = text::normalize(id_string(q, "answer"));
            if (auto boxes = q.find("answer_boxes"); boxes != q.end() && !boxes->is_null()) {
                std::vector<AnswerBox> parsed;
                for (const auto& b : *boxes) {
                    AnswerBox ab;
                    ab.box = b.at("box").get<BoundingBox>();
                    require_valid(ab.box);
                    ab.correct = b.value("correct", false);
                    parsed.push_back(ab);
                }
                qa.answer_boxes = std::move(parsed);
            }
            img.source_qas.push_back(std::move(qa));
        }
    }
    return img;
}

nlohmann::json to_json(const ImageAnnotation& img) {
    nlohmann::json j;
    j["image_id"] = img.image_id;
    j["width"] = img.width;
    j["height"] = img.height;
    if (img.image_uri) j["image_uri"] = *img.image_uri;
    j["objects"] = nlohmann::json::array();
    for (const auto& o : img.objects) {
        j["objects"].push_back({{"object_id", o.object_id},
                                {"names", o.names},
                                {"box", o.box},
                                {"attributes", o.attributes}});
    }
    j["source_qas"] = nlohmann::json::array();
    for (const auto& q : img.source_qas) {
        nlohmann::json qj{{"qa_id", q.qa_id}, {"question", q.question}, {"answer", q.answer}};
        if (q.answer_boxes) {
            qj["answer_boxes"] = nlohmann::json::array();
            for (const auto& ab : *q.answer_boxes) {
                qj["answer_boxes"].push_back({{"box", ab.box}, {"correct", ab.correct}});
            }
        }
        j["source_qas"].push_back(std::move(qj));
    }
    return j;
}

AnnotationStore load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read annotations at " + path.string());
    std::vector<ImageAnnotation> images;
    std::set<std::string> seen;
    std::size_t total = 0;
    std::size_t bad = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        ++total;
        try {
            auto img = parse_image_annotation(nlohmann::json::parse(line));
            if (!seen.insert(img.image_id).second) throw ContractError("duplicate image_id");
            images.push_back(std::move(img));
        } catch (const std::exception& e) {
            ++bad;
            spdlog::debug("skipping annotation record {}: {}", total, e.what());
        }
    }
    // The malformed-rate cut needs a sample; tiny files only report their skips.
    if (total >= kMinRecordsForCorruptRate && bad * 10 > total) {
        throw CorruptInput(path.string() + ": " + std::to_string(bad) + " of " + std::to_string(total) +
                               " records malformed",
                           bad);
    }
    return AnnotationStore(std::move(images), bad);
}

void write_annotations(const std::filesystem::path& path, const AnnotationStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& img : store) out << to_json(img).dump() << '\n';
}

std::string to_string(AttributeCategory c) {
    switch (c) {
        case AttributeCategory::color: return "color";
        case AttributeCategory::shape: return "shape";
        case AttributeCategory::action: return "action";
    }
    return "color";
}

std::optional<AttributeCategory> parse_category(const std::string& name) {
    if (name == "color") return AttributeCategory::color;
    if (name == "shape") return AttributeCategory::shape;
    if (name == "action") return AttributeCategory::action;
    return std::nullopt;
}

std::optional<std::string> AttributeTaxonomy::canonical(const std::string& raw) const {
    auto it = canonical_of.find(raw);
    if (it == canonical_of.end()) return std::nullopt;
    return it->second;
}

std::optional<AttributeCategory> AttributeTaxonomy::category(const std::string& canonical) const {
    auto it = category_of.find(canonical);
    if (it == category_of.end()) return std::nullopt;
    return it->second;
}

std::map<std::string, std::size_t> attribute_frequencies(const AnnotationStore& store) {
    std::map<std::string, std::size_t> freq;
    for (const auto& img : store) {
        for (const auto& obj : img.objects) {
            for (const auto& a : obj.attributes) ++freq[a];
        }
    }
    return freq;
}

AttributeTaxonomy build_taxonomy(const AnnotationStore& store, std::size_t top_k,
                                 const std::map<std::string, std::string>& synonym_map,
                                 const std::map<std::string, std::string>& category_map) {
    if (top_k == 0) throw ContractError("build_taxonomy: top_k must be >= 1");
    auto freq = attribute_frequencies(store);
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > top_k) ranked.resize(top_k);

    auto lookup = [](const std::map<std::string, std::string>& m, const std::string& key)
        -> std::optional<std::string> {
        auto it = m.find(key);
        if (it == m.end()) return std::nullopt;
        return text::normalize(it->second);
    };

    AttributeTaxonomy tax;
    for (const auto& [raw, count] : ranked) {
        (void)count;
        const std::string canonical = lookup(synonym_map, raw).value_or(raw);
        auto category_name = lookup(category_map, canonical);
        if (!category_name) category_name = lookup(category_map, raw);
        if (!category_name) {
            tax.uncategorized.push_back(raw);
            continue;
        }
        if (*category_name == "size") {
            tax.dropped_size.push_back(raw);
            continue;
        }
        auto category = parse_category(*category_name);
        if (!category) {
            tax.uncategorized.push_back(raw);
            continue;
        }
        auto [it, inserted] = tax.category_of.emplace(canonical, *category);
        if (!inserted && it->second != *category) {
            // Conflicting categories for one canonical form: first (most frequent) wins.
            spdlog::warn("attribute '{}' mapped to both {} and {}", canonical, to_string(it->second),
                         to_string(*category));
        }
        tax.canonical_of[raw] = canonical;
        tax.canonical_of.emplace(canonical, canonical);
    }
    return tax;
}

std::map<std::string, std::string> load_string_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(path.string() + ": expected a JSON object");
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : j.items()) out[text::normalize(k)] = text::normalize(v.get<std::string>());
    return out;
}

}  // namespace pointqa
