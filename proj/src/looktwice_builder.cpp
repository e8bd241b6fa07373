#include "pointqa/looktwice_builder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pointqa/errors.hpp"
#include "pointqa/text.hpp"

namespace pointqa {

void validate_supercategory_map(const SupercategoryMap& map) {
    static const std::set<std::string> allowed = {"beings", "vehicles", "objects"};
    for (const auto& [cls, super] : map) {
        if (!allowed.contains(super)) {
            throw ConfigError("supercategory for '" + cls + "' must be beings, vehicles or objects, got '" + super + "'");
        }
    }
}

std::optional<std::string> extract_count_subject(const std::string& question) {
    const auto words = text::word_tokens(question);
    if (words.size() < 3 || words[0] != "how" || words[1] != "many") return std::nullopt;
    // Tokens that end the subject noun phrase.
    static const std::set<std::string> stop = {
        "are", "is", "were", "was", "can", "could", "do", "does", "did", "have", "has", "had", "will",
        "would", "should", "in", "on", "at", "of", "there", "here", "visible", "shown", "to", "for",
        "with", "near", "by", "under", "above", "behind", "inside", "outside", "from", "that", "which",
        "who", "being", "sitting", "standing", "you", "we", "they", "this", "these", "the", "appear"};
    std::vector<std::string> phrase;
    for (std::size_t i = 2; i < words.size() && !stop.contains(words[i]); ++i) phrase.push_back(words[i]);
    if (phrase.empty()) return std::nullopt;
    return text::singularize(phrase.back());
}

const ObjectAnnotation* match_subject_to_region(const std::string& subject, const ImageAnnotation& img, Rng& rng) {
    std::vector<const ObjectAnnotation*> matches;
    for (const auto& obj : img.objects) {
        if (obj.canonical_name() == subject) matches.push_back(&obj);
    }
    if (matches.empty()) return nullptr;
    return matches[uniform_index(rng, matches.size())];
}

std::string bin_count_answer(int n) {
    if (n < 1) throw ContractError("count must be >= 1, got " + std::to_string(n));
    if (n == 1) return "1";
    if (n == 2) return "2";
    return ">2";
}

GeneralizedQuestions generalize_question(const std::string& object_class, const SupercategoryMap& super_map) {
    auto it = super_map.find(object_class);
    if (it == super_map.end()) throw UnmappedClass("no supercategory for '" + object_class + "'");
    return {"How many of these " + it->second + " are there?", "How many of these are there?"};
}

std::vector<const ObjectAnnotation*> dedup_instances(const ImageAnnotation& img, const std::string& object_class,
                                                     double dedup_iou) {
    std::vector<const ObjectAnnotation*> candidates;
    for (const auto& obj : img.objects) {
        if (obj.canonical_name() == object_class) candidates.push_back(&obj);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto* a, const auto* b) { return a->box.area() > b->box.area(); });
    std::vector<const ObjectAnnotation*> kept;
    for (const auto* c : candidates) {
        bool duplicate = std::any_of(kept.begin(), kept.end(),
                                     [&](const auto* k) { return iou(c->box, k->box) >= dedup_iou; });
        if (!duplicate) kept.push_back(c);
    }
    return kept;
}

int count_instances(const ImageAnnotation& img, const std::string& object_class, double dedup_iou) {
    const int n = static_cast<int>(dedup_instances(img, object_class, dedup_iou).size());
    if (n == 0) throw ContractError("class '" + object_class + "' not present in image " + img.image_id);
    return n;
}

void LookTwiceConfig::validate() const {
    if (supercategory_of.empty()) throw ConfigError("supercategory map is missing");
    validate_supercategory_map(supercategory_of);
    if (!(dedup_iou > 0 && dedup_iou <= 1)) throw ConfigError("dedup_iou must be in (0, 1]");
    if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction > 1) {
        throw ConfigError("val/test fractions must be non-negative and sum to at most 1");
    }
}

namespace {

struct CountQuestion {
    const ImageAnnotation* image;
    const SourceQA* qa;
    const ObjectAnnotation* region;
    std::string object_class;
    std::string answer;
};

void emit_forms(Dataset& out, const CountQuestion& q, const std::string& object_question,
                const std::string& qa_id_base, const SupercategoryMap& super_map, Split split, bool synthesized) {
    const auto forms = generalize_question(q.object_class, super_map);
    const Point point = center_point(q.region->box);
    const std::pair<const char*, const std::string*> variants[] = {
        {"object", &object_question},
        {"supercategory", &forms.supercategory_form},
        {"generic", &forms.generic_form},
    };
    for (const auto& [form, question] : variants) {
        PointQAInstance inst;
        inst.qa_id = qa_id_base + "-" + form;
        inst.image_id = q.image->image_id;
        inst.question = *question;
        inst.point = point;
        inst.gt_box = q.region->box;
        inst.answer = q.answer;
        inst.split = split;
        inst.meta.task = "looktwice";
        inst.meta.object_class = q.object_class;
        inst.meta.supercategory = super_map.at(q.object_class);
        inst.meta.question_form = form;
        inst.meta.synthesized = synthesized;
        inst.meta.source_qa_id = q.qa->qa_id;
        inst.meta.answer_set = std::vector<std::string>{"1", "2", ">2"};
        out.push_back(std::move(inst));
    }
}

bool satisfies_constraint(const std::vector<CountQuestion>& questions) {
    for (std::size_t i = 0; i < questions.size(); ++i) {
        for (std::size_t j = i + 1; j < questions.size(); ++j) {
            if (questions[i].object_class != questions[j].object_class && questions[i].answer != questions[j].answer) {
                return true;
            }
        }
    }
    return false;
}

}  // namespace

LookTwiceBuildResult build_looktwice_dataset(const AnnotationStore& store, const LookTwiceConfig& config) {
    config.validate();
    LookTwiceBuildResult result;
    auto& report = result.report;
    Rng match_rng(config.seed);

    // Pass 1: subject extraction and region matching.
    std::vector<CountQuestion> matched;
    for (const auto& img : store) {
        for (const auto& qa : img.source_qas) {
            auto subject = extract_count_subject(qa.question);
            if (!subject) {
                report.skip("not_counting");
                continue;
            }
            auto count = text::parse_count(qa.answer);
            if (!count || *count < 1) {
                report.skip("bad_count_answer");
                continue;
            }
            const auto* region = match_subject_to_region(*subject, img, match_rng);
            if (!region) {
                report.skip("no_matching_region");
                continue;
            }
            matched.push_back({&img, &qa, region, *subject, bin_count_answer(*count)});
        }
    }

    // Pass 2: class frequency and supercategory filters.
    std::map<std::string, std::size_t> class_freq;
    for (const auto& q : matched) ++class_freq[q.object_class];
    std::map<const ImageAnnotation*, std::vector<CountQuestion>> by_image;
    std::vector<const ImageAnnotation*> image_order;
    for (auto& q : matched) {
        if (class_freq[q.object_class] < config.min_class_frequency) {
            report.skip("rare_class");
            continue;
        }
        if (!config.supercategory_of.contains(q.object_class)) {
            report.skip("unmapped_class");
            continue;
        }
        auto& bucket = by_image[q.image];
        if (bucket.empty()) image_order.push_back(q.image);
        bucket.push_back(q);
    }

    // Pass 3: eval eligibility and split assignment.
    std::vector<std::string> eligible;
    for (const auto* img : image_order) {
        if (satisfies_constraint(by_image[img])) eligible.push_back(img->image_id);
    }
    Rng split_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    shuffle(eligible, split_rng);
    const auto n_eligible = static_cast<double>(eligible.size());
    const auto n_val = static_cast<std::size_t>(std::llround(config.val_fraction * n_eligible));
    const auto n_test =
        std::min(eligible.size() - n_val, static_cast<std::size_t>(std::llround(config.test_fraction * n_eligible)));
    std::map<std::string, Split> eval_split;
    for (std::size_t i = 0; i < n_val; ++i) eval_split[eligible[i]] = Split::val;
    for (std::size_t i = n_val; i < n_val + n_test; ++i) eval_split[eligible[i]] = Split::test;
    report.count("eligible_images", eligible.size());

    // Pass 4: emission, with counterpart synthesis for train questions.
    Rng synth_rng(config.seed ^ 0xc2b2ae3d27d4eb4fULL);
    for (const auto* img : image_order) {
        auto it = eval_split.find(img->image_id);
        const Split split = it == eval_split.end() ? Split::train : it->second;
        report.count("images_" + to_string(split));
        for (const auto& q : by_image[img]) {
            emit_forms(result.dataset, q, q.qa->question, q.qa->qa_id, config.supercategory_of, split, false);
            report.count("human_questions_" + to_string(split));
            if (split != Split::train) continue;

            std::set<std::string> classes;
            for (const auto& obj : img->objects) classes.insert(obj.canonical_name());
            std::vector<std::pair<std::string, int>> candidates;
            for (const auto& cls : classes) {
                if (cls == q.object_class || !config.supercategory_of.contains(cls)) continue;
                const int n = count_instances(*img, cls, config.dedup_iou);
                if (bin_count_answer(n) != q.answer) candidates.emplace_back(cls, n);
            }
            if (candidates.empty()) {
                report.skip("no_counterpart");
                continue;
            }
            const auto& [cls, n] = candidates[uniform_index(synth_rng, candidates.size())];
            const auto kept = dedup_instances(*img, cls, config.dedup_iou);
            CountQuestion counterpart{img, q.qa, kept[uniform_index(synth_rng, kept.size())], cls, bin_count_answer(n)};
            emit_forms(result.dataset, counterpart, "How many " + text::pluralize(cls) + " are there?",
                       q.qa->qa_id + "-syn", config.supercategory_of, split, true);
            report.count("synthesized_questions");
        }
    }
    report.count("instances", result.dataset.size());
    return result;
}

}  // namespace pointqa
