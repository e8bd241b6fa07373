#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointqa/build_report.hpp"
#include "pointqa/instance.hpp"
#include "pointqa/scene_graph.hpp"

namespace pointqa {

struct VerbalDisambiguation {
    std::string subject;       // head noun, lowercase
    std::string prep_phrase;   // lowercase, e.g. "on the left"
    std::size_t phrase_begin;  // whitespace-token range of the phrase in the question
    std::size_t phrase_end;
};

// Rule-based: subject = head of the first determiner-led noun phrase after the
// wh-word; the phrase must follow it directly and open with a listed preposition.
std::optional<VerbalDisambiguation> detect_verbal_disambiguation(const std::string& question);

// The question with the prepositional phrase removed and punctuation restored.
std::string remove_phrase(const std::string& question, const VerbalDisambiguation& found);

struct VerbalSpatialConfig {
    std::vector<SplitFraction> split_fractions = default_split_fractions();
    std::uint64_t seed = 0;
};

struct VerbalSpatialResult {
    Dataset verbal;   // D_V: original question, no point
    Dataset spatial;  // D_S: phrase removed, point at the matched object
    BuildReport report;
};

VerbalSpatialResult build_dv_ds(const AnnotationStore& store, const VerbalSpatialConfig& config);

}  // namespace pointqa
