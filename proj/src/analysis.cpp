#include "pointqa/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pointqa/errors.hpp"
#include "pointqa/text.hpp"

namespace pointqa {

namespace {

constexpr std::string_view kSlot = "{object}";

std::optional<double> median(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<double> mean(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Area of the box carrying the largest local weight.
std::optional<double> max_local_area(const Prediction& p, const RegionInput& point) {
    const auto& w = p.attention.local;
    if (w.empty()) return std::nullopt;
    const auto i = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
    if (i >= point.boxes.size()) return std::nullopt;
    return point.boxes[i].area();
}

}  // namespace

std::optional<std::string> apply_swap(const QuestionSwap& swap, const std::string& question) {
    const std::string from = text::normalize(swap.from);
    const std::string q = text::normalize(question);
    const auto slot = from.find(kSlot);
    if (slot == std::string::npos) return q == from ? std::optional<std::string>(swap.to) : std::nullopt;
    const std::string prefix = from.substr(0, slot);
    const std::string suffix = from.substr(slot + kSlot.size());
    if (q.size() <= prefix.size() + suffix.size()) return std::nullopt;
    if (!text::starts_with(q, prefix) || !text::ends_with(q, suffix)) return std::nullopt;
    const std::string object = q.substr(prefix.size(), q.size() - prefix.size() - suffix.size());
    std::string out = swap.to;
    const auto to_slot = out.find(kSlot);
    if (to_slot != std::string::npos) out.replace(to_slot, kSlot.size(), object);
    return out;
}

double sign_test_p(std::size_t successes, std::size_t trials) {
    if (successes > trials) throw ContractError("sign test: successes exceed trials");
    if (trials == 0) return 1.0;
    const double n = static_cast<double>(trials);
    double p = 0;
    for (std::size_t k = successes; k <= trials; ++k) {
        const double kk = static_cast<double>(k);
        p += std::exp(std::lgamma(n + 1) - std::lgamma(kk + 1) - std::lgamma(n - kk + 1) - n * std::log(2.0));
    }
    return std::min(1.0, p);
}

AttentionStats attention_analysis(const Model& model, const QuestionVocabulary& vocab,
                                  const std::vector<Example>& examples, const std::optional<QuestionSwap>& swap) {
    AttentionStats stats;
    std::vector<double> max_local, max_global, areas, before, after;
    SwapStats s;
    for (const auto& ex : examples) {
        const Prediction p = model.predict(ex.input);
        ++stats.examples;
        if (!p.attention.local.empty()) {
            max_local.push_back(*std::max_element(p.attention.local.begin(), p.attention.local.end()));
        }
        if (p.attention.global && !p.attention.global->empty()) {
            max_global.push_back(*std::max_element(p.attention.global->begin(), p.attention.global->end()));
        }
        const auto area = max_local_area(p, ex.input.point);
        if (area) areas.push_back(*area);
        if (!swap || !area) continue;
        const auto swapped = apply_swap(*swap, ex.instance->question);
        if (!swapped) continue;
        ModelInput alt = ex.input;
        alt.tokens = vocab.encode(*swapped);
        const auto area2 = max_local_area(model.predict(alt), alt.point);
        if (!area2) continue;
        ++s.pairs;
        before.push_back(*area);
        after.push_back(*area2);
        if (*area2 > *area) {
            ++s.increases;
        } else if (*area2 < *area) {
            ++s.decreases;
        } else {
            ++s.ties;
        }
    }
    stats.mean_max_local = mean(max_local);
    stats.mean_max_global = mean(max_global);
    stats.median_max_local_area = median(areas);
    if (swap) {
        s.median_area_before = median(before).value_or(0);
        s.median_area_after = median(after).value_or(0);
        s.p_value = sign_test_p(s.increases, s.increases + s.decreases);
        stats.swap = s;
    }
    return stats;
}

nlohmann::json AttentionStats::to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j = {{"examples", examples},
                        {"mean_max_local", opt(mean_max_local)},
                        {"mean_max_global", opt(mean_max_global)},
                        {"median_max_local_area", opt(median_max_local_area)}};
    if (swap) {
        j["swap"] = {{"pairs", swap->pairs},
                     {"increases", swap->increases},
                     {"decreases", swap->decreases},
                     {"ties", swap->ties},
                     {"median_area_before", swap->median_area_before},
                     {"median_area_after", swap->median_area_after},
                     {"p_value", swap->p_value}};
    }
    return j;
}

ContextWordAnalysis context_word_analysis(const EvalReport& a, const EvalReport& b, const std::vector<std::string>& words) {
    if (a.records.size() != b.records.size()) throw ContractError("reports cover different datasets");
    std::map<std::string, const EvalRecord*> by_id;
    for (const auto& r : b.records) by_id.emplace(r.qa_id, &r);
    ContextWordAnalysis out;
    out.overall_a = a.accuracy();
    out.overall_b = b.accuracy();
    out.overall_delta = out.overall_a - out.overall_b;
    for (const auto& word : words) {
        const std::string w = text::lowercase(word);
        WordDelta d;
        d.word = word;
        std::size_t correct_a = 0, correct_b = 0;
        for (const auto& ra : a.records) {
            auto it = by_id.find(ra.qa_id);
            if (it == by_id.end()) throw ContractError("reports cover different datasets");
            const auto tokens = text::word_tokens(ra.question);
            if (std::find(tokens.begin(), tokens.end(), w) == tokens.end()) continue;
            ++d.count;
            if (ra.correct) ++correct_a;
            if (it->second->correct) ++correct_b;
        }
        if (d.count > 0) {
            d.accuracy_a = static_cast<double>(correct_a) / static_cast<double>(d.count);
            d.accuracy_b = static_cast<double>(correct_b) / static_cast<double>(d.count);
            d.delta = d.accuracy_a - d.accuracy_b;
        }
        out.words.push_back(std::move(d));
    }
    return out;
}

nlohmann::json ContextWordAnalysis::to_json() const {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& d : words) {
        w.push_back({{"word", d.word},
                     {"count", d.count},
                     {"accuracy_a", d.count ? nlohmann::json(d.accuracy_a) : nlohmann::json(nullptr)},
                     {"accuracy_b", d.count ? nlohmann::json(d.accuracy_b) : nlohmann::json(nullptr)},
                     {"delta", d.delta ? nlohmann::json(*d.delta) : nlohmann::json(nullptr)}});
    }
    return {{"overall_a", overall_a}, {"overall_b", overall_b}, {"overall_delta", overall_delta}, {"words", w}};
}

}  // namespace pointqa
