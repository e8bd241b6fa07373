#include "pointqa/verbal_spatial_builder.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "pointqa/text.hpp"

namespace pointqa {

namespace {

const std::set<std::string>& wh_words() {
    static const std::set<std::string> s = {"what", "which", "who", "whom", "whose", "where", "when", "why", "how"};
    return s;
}

const std::set<std::string>& determiners() {
    static const std::set<std::string> s = {"the", "a", "an", "this", "that", "these", "those"};
    return s;
}

// Multi-word prepositions first so the longest match wins.
const std::vector<std::vector<std::string>>& prepositions() {
    static const std::vector<std::vector<std::string>> p = {
        {"to", "the", "left", "of"}, {"to", "the", "right", "of"}, {"in", "front", "of"}, {"next", "to"},
        {"on"}, {"in"}, {"at"}, {"near"}, {"behind"}, {"under"}, {"above"}, {"by"}, {"with"},
    };
    return p;
}

// Words that end a noun phrase: auxiliaries and common verbs.
bool is_clause_word(const std::string& w) {
    static const std::set<std::string> aux = {
        "is", "are", "was", "were", "be", "been", "do", "does", "did", "has", "have", "had", "can", "could",
        "will", "would", "should", "may", "might", "wearing", "holding", "doing", "made", "used", "look", "looks"};
    static const std::set<std::string> ing_nouns = {
        "building", "ceiling",  "clothing", "painting", "railing", "awning",  "ring",    "king",
        "string",   "thing",    "something", "nothing", "everything", "wing", "swing", "evening",
        "morning",  "icing",    "frosting", "topping",  "bedding",  "siding",  "wedding", "pudding",
        "dumpling", "lighting", "sibling",  "spring",   "stuffing", "parking", "sing"};
    if (aux.contains(w)) return true;
    return w.size() > 4 && text::ends_with(w, "ing") && !ing_nouns.contains(w);
}

std::string bare(const std::string& token) {
    std::string out = text::lowercase(token);
    while (!out.empty() && std::string_view("?,.!;:").find(out.back()) != std::string_view::npos) out.pop_back();
    return out;
}

std::size_t match_preposition(const std::vector<std::string>& words, std::size_t at) {
    for (const auto& prep : prepositions()) {
        if (at + prep.size() > words.size()) continue;
        if (std::equal(prep.begin(), prep.end(), words.begin() + static_cast<long>(at))) return prep.size();
    }
    return 0;
}

}  // namespace

std::optional<VerbalDisambiguation> detect_verbal_disambiguation(const std::string& question) {
    const auto tokens = text::split_whitespace(question);
    std::vector<std::string> words;
    for (const auto& t : tokens) words.push_back(bare(t));
    if (words.empty() || !wh_words().contains(words[0])) return std::nullopt;

    std::size_t det = 1;
    while (det < words.size() && !determiners().contains(words[det])) ++det;
    if (det >= words.size()) return std::nullopt;

    // Noun phrase after the determiner; stops at a preposition or clause word.
    std::size_t np_end = det + 1;
    while (np_end < words.size() && match_preposition(words, np_end) == 0 && !is_clause_word(words[np_end])) ++np_end;
    if (np_end == det + 1 || np_end >= words.size()) return std::nullopt;
    const std::size_t prep_len = match_preposition(words, np_end);
    if (prep_len == 0) return std::nullopt;

    std::size_t pp_end = np_end + prep_len;
    while (pp_end < words.size() && !is_clause_word(words[pp_end])) ++pp_end;
    if (pp_end == np_end + prep_len) return std::nullopt;

    VerbalDisambiguation found;
    found.subject = words[np_end - 1];
    found.prep_phrase = text::join({words.begin() + static_cast<long>(np_end), words.begin() + static_cast<long>(pp_end)});
    found.phrase_begin = np_end;
    found.phrase_end = pp_end;
    return found;
}

std::string remove_phrase(const std::string& question, const VerbalDisambiguation& found) {
    auto tokens = text::split_whitespace(question);
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i < found.phrase_begin || i >= found.phrase_end) kept.push_back(tokens[i]);
    }
    std::string out = text::join(kept);
    while (!out.empty() && (out.back() == '?' || out.back() == ' ' || out.back() == ',')) out.pop_back();
    return out + "?";
}

VerbalSpatialResult build_dv_ds(const AnnotationStore& store, const VerbalSpatialConfig& config) {
    validate_fractions(config.split_fractions);
    VerbalSpatialResult result;
    auto& report = result.report;

    for (const auto& img : store) {
        for (const auto& qa : img.source_qas) {
            auto found = detect_verbal_disambiguation(qa.question);
            if (!found) {
                report.skip("no_verbal_disambiguation");
                continue;
            }
            const std::string subject = text::singularize(found->subject);
            std::vector<const ObjectAnnotation*> matches;
            for (const auto& obj : img.objects) {
                if (text::singularize(obj.canonical_name()) == subject) matches.push_back(&obj);
            }
            if (matches.size() < 2) {
                report.skip(matches.empty() ? "subject_not_annotated" : "subject_appears_once");
                continue;
            }
            const auto phrase_words = text::word_tokens(found->prep_phrase);
            const std::set<std::string> phrase_set(phrase_words.begin(), phrase_words.end());
            auto overlap = [&](const ObjectAnnotation* obj) {
                std::size_t n = 0;
                for (const auto& a : obj->attributes) {
                    for (const auto& w : text::word_tokens(a)) n += phrase_set.contains(w);
                }
                return n;
            };
            const ObjectAnnotation* best = matches.front();
            for (const auto* m : matches) {
                const auto a = overlap(m);
                const auto b = overlap(best);
                if (a > b || (a == b && m->box.area() > best->box.area())) best = m;
            }

            PointQAInstance verbal;
            verbal.qa_id = qa.qa_id;
            verbal.image_id = img.image_id;
            verbal.question = qa.question;
            verbal.gt_box = best->box;
            verbal.answer = qa.answer;
            verbal.meta.task = "verbal";
            verbal.meta.object_class = best->canonical_name();
            verbal.meta.source_qa_id = qa.qa_id;

            PointQAInstance spatial = verbal;
            spatial.question = remove_phrase(qa.question, *found);
            spatial.point = center_point(best->box);
            spatial.meta.task = "spatial";

            result.verbal.push_back(std::move(verbal));
            result.spatial.push_back(std::move(spatial));
        }
    }

    std::vector<std::string> image_ids;
    for (const auto& inst : result.verbal) {
        if (image_ids.empty() || image_ids.back() != inst.image_id) image_ids.push_back(inst.image_id);
    }
    const auto splits = assign_splits(image_ids, config.split_fractions, config.seed);
    for (auto* set : {&result.verbal, &result.spatial}) {
        for (auto& inst : *set) inst.split = splits.at(inst.image_id);
    }
    report.count("questions", result.verbal.size());
    report.count("images", image_ids.size());
    return result;
}

}  // namespace pointqa
