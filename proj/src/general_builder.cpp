#include "pointqa/general_builder.hpp"

#include <algorithm>

#include "pointqa/random.hpp"
#include "pointqa/text.hpp"

namespace pointqa {

namespace {

std::string bare(const std::string& token) {
    std::string out = text::lowercase(token);
    while (!out.empty() && (out.back() == '?' || out.back() == ',')) out.pop_back();
    return out;
}

}  // namespace

std::optional<std::string> transform_which_question(const std::string& question) {
    auto tokens = text::split_whitespace(question);
    if (tokens.size() < 4 || bare(tokens[0]) != "which") return std::nullopt;
    // Drop the question mark; it is re-added to the output.
    std::string& last = tokens.back();
    while (!last.empty() && last.back() == '?') last.pop_back();
    if (last.empty()) tokens.pop_back();

    for (std::size_t k = 2; k + 1 < tokens.size(); ++k) {
        const std::string verb = bare(tokens[k]);
        if (verb != "is" && verb != "are" && verb != "has" && verb != "have") continue;
        const std::string subject = text::join({tokens.begin() + 1, tokens.begin() + static_cast<long>(k)});
        const std::string description = text::join({tokens.begin() + static_cast<long>(k) + 1, tokens.end()});
        if (verb == "is") return "Is this " + subject + " " + description + "?";
        if (verb == "are") return "Are these " + subject + " " + description + "?";
        if (verb == "has") return "Does this " + subject + " have " + description + "?";
        return "Do these " + subject + " have " + description + "?";
    }
    return std::nullopt;
}

GeneralBuildResult build_general_dataset(const AnnotationStore& store, const GeneralBuilderConfig& config) {
    validate_fractions(config.split_fractions);
    GeneralBuildResult result;
    auto& report = result.report;
    Rng rng(config.seed);

    for (const auto& img : store) {
        for (const auto& qa : img.source_qas) {
            if (!qa.answer_boxes) continue;
            const auto& boxes = *qa.answer_boxes;
            if (boxes.size() != 4) {
                report.skip("answer_box_count");
                continue;
            }
            const auto correct_count = std::count_if(boxes.begin(), boxes.end(), [](const AnswerBox& b) { return b.correct; });
            if (correct_count != 1) {
                report.skip("correct_box_marking");
                continue;
            }
            auto pointing = transform_which_question(qa.question);
            if (!pointing) {
                report.skip("no_template");
                continue;
            }
            std::size_t correct = 0;
            std::vector<std::size_t> incorrect;
            for (std::size_t i = 0; i < boxes.size(); ++i) {
                if (boxes[i].correct) correct = i;
                else incorrect.push_back(i);
            }
            const std::size_t wrong = incorrect[uniform_index(rng, incorrect.size())];

            auto make = [&](std::size_t box_index, const char* answer) {
                PointQAInstance inst;
                inst.qa_id = qa.qa_id + "-" + answer;
                inst.image_id = img.image_id;
                inst.question = *pointing;
                inst.point = center_point(boxes[box_index].box);
                inst.gt_box = boxes[box_index].box;
                inst.answer = answer;
                inst.meta.task = "general";
                auto words = text::split_whitespace(*pointing);
                inst.meta.object_class = words.size() > 2 ? text::lowercase(words[2]) : "";
                inst.meta.answer_set = std::vector<std::string>{"no", "yes"};
                inst.meta.source_qa_id = qa.qa_id;
                return inst;
            };
            result.dataset.push_back(make(correct, "yes"));
            result.dataset.push_back(make(wrong, "no"));
            report.count("source_questions");
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
    report.count("questions", result.dataset.size());
    report.count("images", image_ids.size());
    return result;
}

}  // namespace pointqa
