#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointqa/trainer.hpp"

namespace pointqa {

// Question templates with an "{object}" slot, e.g.
// "What color is this {object}?" -> "What action is this {object} doing?".
struct QuestionSwap {
    std::string from;
    std::string to;
};

// Fills the slot of `to` when question matches `from` (case-insensitive,
// whitespace-normalized); nullopt otherwise.
std::optional<std::string> apply_swap(const QuestionSwap& swap, const std::string& question);

struct SwapStats {
    std::size_t pairs = 0;
    std::size_t increases = 0;
    std::size_t decreases = 0;
    std::size_t ties = 0;
    double median_area_before = 0;
    double median_area_after = 0;
    double p_value = 1;  // one-sided sign test for "area increases"
};

struct AttentionStats {
    std::size_t examples = 0;
    std::optional<double> mean_max_local;
    std::optional<double> mean_max_global;
    std::optional<double> median_max_local_area;
    std::optional<SwapStats> swap;

    nlohmann::json to_json() const;
};

// P(X >= successes) for X ~ Binomial(trials, 1/2).
double sign_test_p(std::size_t successes, std::size_t trials);

AttentionStats attention_analysis(const Model& model, const QuestionVocabulary& vocab,
                                  const std::vector<Example>& examples,
                                  const std::optional<QuestionSwap>& swap = std::nullopt);

struct WordDelta {
    std::string word;
    std::size_t count = 0;
    double accuracy_a = 0;
    double accuracy_b = 0;
    std::optional<double> delta;  // a - b; null when count == 0
};

struct ContextWordAnalysis {
    double overall_a = 0;
    double overall_b = 0;
    double overall_delta = 0;
    std::vector<WordDelta> words;

    nlohmann::json to_json() const;
};

// Both reports must cover the same qa_ids. Words match whole question tokens.
ContextWordAnalysis context_word_analysis(const EvalReport& a, const EvalReport& b, const std::vector<std::string>& words);

}  // namespace pointqa
