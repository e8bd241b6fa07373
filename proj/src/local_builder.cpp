#include "pointqa/local_builder.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "pointqa/errors.hpp"

namespace pointqa {

void LocalBuilderConfig::validate() const {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ConfigError("iou_threshold must be in (0, 1]");
    validate_fractions(split_fractions);
    if (taxonomy.empty()) throw ConfigError("attribute taxonomy is empty");
}

std::string local_question(AttributeCategory category, const std::string& object_class) {
    if (category == AttributeCategory::action) return "What action is this " + object_class + " doing?";
    return "What " + to_string(category) + " is this " + object_class + "?";
}

namespace {

using CategoryAttributes = std::map<AttributeCategory, std::set<std::string>>;

CategoryAttributes categorize(const ObjectAnnotation& obj, const AttributeTaxonomy& taxonomy) {
    CategoryAttributes out;
    for (const auto& raw : obj.attributes) {
        auto canonical = taxonomy.canonical(raw);
        if (!canonical) continue;
        auto category = taxonomy.category(*canonical);
        if (!category) continue;
        out[*category].insert(*canonical);
    }
    return out;
}

bool ambiguous(const CategoryAttributes& attrs) {
    return std::any_of(attrs.begin(), attrs.end(), [](const auto& kv) { return kv.second.size() > 1; });
}

}  // namespace

std::vector<LocalPair> find_local_pairs(const ImageAnnotation& img, const AttributeTaxonomy& taxonomy,
                                        double iou_threshold) {
    std::vector<CategoryAttributes> attrs;
    attrs.reserve(img.objects.size());
    for (const auto& obj : img.objects) attrs.push_back(categorize(obj, taxonomy));

    std::vector<LocalPair> pairs;
    for (std::size_t i = 0; i < img.objects.size(); ++i) {
        if (ambiguous(attrs[i])) continue;
        for (std::size_t j = i + 1; j < img.objects.size(); ++j) {
            if (ambiguous(attrs[j])) continue;
            const auto& a = img.objects[i];
            const auto& b = img.objects[j];
            if (a.canonical_name() != b.canonical_name()) continue;
            if (iou(a.box, b.box) >= iou_threshold) continue;
            for (const auto& [category, values] : attrs[i]) {
                auto other = attrs[j].find(category);
                if (other == attrs[j].end()) continue;
                const auto& ai = *values.begin();
                const auto& aj = *other->second.begin();
                if (ai != aj) pairs.push_back({i, j, category, ai, aj});
            }
        }
    }
    return pairs;
}

LocalBuildResult build_local_dataset(const AnnotationStore& store, const LocalBuilderConfig& config) {
    config.validate();
    LocalBuildResult result;
    auto& report = result.report;

    for (const auto& img : store) {
        report.count("images_scanned");
        const auto pairs = find_local_pairs(img, config.taxonomy, config.iou_threshold);
        if (pairs.empty()) continue;
        report.count("pairs", pairs.size());

        // All attributes of each (class, category) seen on any object in the image.
        std::map<std::pair<std::string, AttributeCategory>, std::set<std::string>> answers_in_image;
        for (const auto& obj : img.objects) {
            for (const auto& [category, values] : categorize(obj, config.taxonomy)) {
                answers_in_image[{obj.canonical_name(), category}].insert(values.begin(), values.end());
            }
        }

        std::set<std::tuple<std::string, int, int>> emitted;
        std::size_t serial = 0;
        auto emit = [&](std::size_t obj_index, AttributeCategory category, const std::string& answer) {
            const auto& obj = img.objects[obj_index];
            const auto question = local_question(category, obj.canonical_name());
            const Point point = center_point(obj.box);
            if (!emitted.emplace(question, point.x, point.y).second) {
                report.skip("duplicate_question_point");
                return;
            }
            PointQAInstance inst;
            inst.qa_id = img.image_id + "-local-" + std::to_string(serial++);
            inst.image_id = img.image_id;
            inst.question = question;
            inst.point = point;
            inst.gt_box = obj.box;
            inst.answer = answer;
            inst.meta.task = "local";
            inst.meta.category = to_string(category);
            inst.meta.object_class = obj.canonical_name();
            const auto& valid = answers_in_image[{obj.canonical_name(), category}];
            inst.meta.answer_set = std::vector<std::string>(valid.begin(), valid.end());
            report.count("questions_" + to_string(category));
            result.dataset.push_back(std::move(inst));
        };
        for (const auto& p : pairs) {
            emit(p.first, p.category, p.first_attribute);
            emit(p.second, p.category, p.second_attribute);
        }
    }

    std::vector<std::string> image_ids;
    for (const auto& inst : result.dataset) {
        if (image_ids.empty() || image_ids.back() != inst.image_id) image_ids.push_back(inst.image_id);
    }
    const auto splits = assign_splits(image_ids, config.split_fractions, config.seed);
    for (auto& inst : result.dataset) {
        inst.split = splits.at(inst.image_id);
        report.count("questions_" + to_string(inst.split));
    }
    for (const auto& [id, split] : splits) report.count("images_" + to_string(split));
    report.count("questions", result.dataset.size());
    report.count("images", image_ids.size());
    return result;
}

}  // namespace pointqa
