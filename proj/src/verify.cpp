#include "pointqa/verify.hpp"

#include <map>
#include <set>

#include "pointqa/text.hpp"

namespace pointqa {

namespace {

constexpr std::size_t kMaxViolations = 20;

std::string image_question_key(const PointQAInstance& inst) { return inst.image_id + "\n" + inst.question; }

ConstraintResult one_split_per_image(const Dataset& data, const std::string& name) {
    ConstraintResult r{name + ".split_per_image", 0, {}};
    std::map<std::string, Split> split_of;
    for (const auto& inst : data) {
        ++r.checked;
        auto [it, inserted] = split_of.emplace(inst.image_id, inst.split);
        if (!inserted && it->second != inst.split) r.fail(inst.qa_id);
    }
    return r;
}

ConstraintResult point_in_box(const Dataset& data, const std::string& name) {
    ConstraintResult r{name + ".point_in_gt_box", 0, {}};
    for (const auto& inst : data) {
        if (!inst.point || !inst.gt_box) continue;
        ++r.checked;
        if (!contains(*inst.gt_box, *inst.point)) r.fail(inst.qa_id);
    }
    return r;
}

ConstraintResult answer_in_set(const Dataset& data, const std::string& name) {
    ConstraintResult r{name + ".answer_in_answer_set", 0, {}};
    for (const auto& inst : data) {
        if (!inst.meta.answer_set) continue;
        ++r.checked;
        const auto& set = *inst.meta.answer_set;
        if (std::find(set.begin(), set.end(), inst.answer) == set.end()) r.fail(inst.qa_id);
    }
    return r;
}

std::string strip_form(const std::string& qa_id) {
    for (const char* suffix : {"-object", "-supercategory", "-generic"}) {
        if (text::ends_with(qa_id, suffix)) return qa_id.substr(0, qa_id.size() - std::string(suffix).size());
    }
    return qa_id;
}

bool is_eval(Split s) { return s != Split::train; }

}  // namespace

void ConstraintResult::fail(const std::string& what) {
    if (violations.size() < kMaxViolations) violations.push_back(what);
}

bool VerifyReport::passed() const {
    for (const auto& r : results) {
        if (!r.passed()) return false;
    }
    return true;
}

void VerifyReport::append(std::vector<ConstraintResult> more) {
    for (auto& r : more) results.push_back(std::move(r));
}

nlohmann::json VerifyReport::to_json() const {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& r : results) {
        checks.push_back({{"name", r.name}, {"checked", r.checked}, {"passed", r.passed()}, {"violations", r.violations}});
    }
    return {{"passed", passed()}, {"checks", checks}};
}

std::vector<ConstraintResult> check_local(const Dataset& data, double iou_threshold) {
    std::map<std::string, std::vector<const PointQAInstance*>> groups;
    for (const auto& inst : data) groups[image_question_key(inst)].push_back(&inst);

    ConstraintResult necessity{"local.point_necessity", 0, {}};
    ConstraintResult overlap{"local.iou_below_threshold", 0, {}};
    for (const auto& [key, members] : groups) {
        std::set<std::string> answers;
        for (const auto* m : members) answers.insert(m->answer);
        ++necessity.checked;
        if (answers.size() < 2) necessity.fail(members.front()->qa_id);
        for (const auto* m : members) {
            ++overlap.checked;
            bool ok = false;
            for (const auto* other : members) {
                if (other == m || other->answer == m->answer || !m->gt_box || !other->gt_box) continue;
                if (iou(*m->gt_box, *other->gt_box) < iou_threshold) {
                    ok = true;
                    break;
                }
            }
            if (!ok) overlap.fail(m->qa_id);
        }
    }
    return {necessity, overlap, point_in_box(data, "local"), answer_in_set(data, "local"), one_split_per_image(data, "local")};
}

std::vector<ConstraintResult> check_looktwice(const Dataset& data) {
    ConstraintResult eval_constraint{"looktwice.eval_two_question_constraint", 0, {}};
    ConstraintResult forms{"looktwice.forms_agree", 0, {}};
    ConstraintResult synthesized{"looktwice.synthesized_counterparts", 0, {}};
    ConstraintResult labels{"looktwice.binned_answers", 0, {}};

    std::map<std::string, std::vector<const PointQAInstance*>> by_question;
    std::map<std::string, std::vector<const PointQAInstance*>> eval_by_image;
    for (const auto& inst : data) {
        ++labels.checked;
        if (inst.answer != "1" && inst.answer != "2" && inst.answer != ">2") labels.fail(inst.qa_id);
        by_question[strip_form(inst.qa_id)].push_back(&inst);
        const bool synth = inst.meta.synthesized.value_or(false);
        if (is_eval(inst.split) && !synth && inst.meta.question_form.value_or("object") == "object") {
            eval_by_image[inst.image_id].push_back(&inst);
        }
    }
    for (const auto& [image, qs] : eval_by_image) {
        ++eval_constraint.checked;
        bool ok = false;
        for (std::size_t i = 0; i < qs.size() && !ok; ++i) {
            for (std::size_t j = i + 1; j < qs.size() && !ok; ++j) {
                ok = qs[i]->meta.object_class != qs[j]->meta.object_class && qs[i]->answer != qs[j]->answer;
            }
        }
        if (!ok) eval_constraint.fail(image);
    }
    for (const auto& [base, members] : by_question) {
        ++forms.checked;
        const auto* first = members.front();
        for (const auto* m : members) {
            if (m->point != first->point || m->answer != first->answer || m->image_id != first->image_id ||
                m->split != first->split) {
                forms.fail(base);
                break;
            }
        }
        if (!first->meta.synthesized.value_or(false)) continue;
        ++synthesized.checked;
        if (is_eval(first->split)) {
            synthesized.fail(base);
            continue;
        }
        const std::string source = first->meta.source_qa_id.value_or("");
        auto it = by_question.find(source);
        if (it == by_question.end()) {
            synthesized.fail(base);
            continue;
        }
        const auto* src = it->second.front();
        if (src->meta.object_class == first->meta.object_class || src->answer == first->answer) synthesized.fail(base);
    }
    return {eval_constraint, forms, synthesized, labels, point_in_box(data, "looktwice"),
            one_split_per_image(data, "looktwice")};
}

std::vector<ConstraintResult> check_general(const Dataset& data) {
    ConstraintResult balance{"general.yes_no_balance", 0, {}};
    ConstraintResult pairs{"general.complete_sibling_pairs", 0, {}};
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_image;
    std::map<std::string, std::vector<const PointQAInstance*>> by_source;
    std::size_t yes = 0, no = 0;
    for (const auto& inst : data) {
        if (inst.answer == "yes") {
            ++yes;
            ++per_image[inst.image_id].first;
        } else if (inst.answer == "no") {
            ++no;
            ++per_image[inst.image_id].second;
        } else {
            balance.fail(inst.qa_id);
        }
        by_source[inst.meta.source_qa_id.value_or(inst.qa_id)].push_back(&inst);
    }
    ++balance.checked;
    if (yes != no) balance.fail("global: " + std::to_string(yes) + " yes vs " + std::to_string(no) + " no");
    for (const auto& [image, counts] : per_image) {
        ++balance.checked;
        if (counts.first != counts.second) balance.fail(image);
    }
    for (const auto& [source, members] : by_source) {
        ++pairs.checked;
        if (members.size() != 2) {
            pairs.fail(source);
            continue;
        }
        const auto* a = members[0];
        const auto* b = members[1];
        const bool ok = a->image_id == b->image_id && a->question == b->question && a->split == b->split &&
                        a->answer != b->answer && a->point && b->point && *a->point != *b->point;
        if (!ok) pairs.fail(source);
    }
    return {balance, pairs, point_in_box(data, "general"), one_split_per_image(data, "general")};
}

std::vector<ConstraintResult> check_verbal_spatial(const Dataset& verbal, const Dataset& spatial) {
    ConstraintResult paired{"verbal_spatial.paired_ids", 0, {}};
    ConstraintResult removal{"verbal_spatial.phrase_removal", 0, {}};
    ConstraintResult no_point{"verbal_spatial.verbal_has_no_point", 0, {}};
    std::map<std::string, const PointQAInstance*> v_by_id;
    for (const auto& v : verbal) {
        v_by_id.emplace(v.qa_id, &v);
        ++no_point.checked;
        if (v.point) no_point.fail(v.qa_id);
    }
    ++paired.checked;
    if (verbal.size() != spatial.size()) paired.fail("size mismatch");
    for (const auto& s : spatial) {
        ++paired.checked;
        auto it = v_by_id.find(s.qa_id);
        if (it == v_by_id.end()) {
            paired.fail(s.qa_id);
            continue;
        }
        const auto& v = *it->second;
        if (v.answer != s.answer || v.split != s.split || !s.point) paired.fail(s.qa_id);
        ++removal.checked;
        const auto vt = text::word_tokens(v.question);
        const auto st = text::word_tokens(s.question);
        // st must be vt with one contiguous, non-empty run removed.
        std::size_t prefix = 0;
        while (prefix < st.size() && prefix < vt.size() && st[prefix] == vt[prefix]) ++prefix;
        bool ok = st.size() < vt.size();
        if (ok) {
            const std::size_t removed = vt.size() - st.size();
            for (std::size_t i = prefix; i < st.size(); ++i) {
                if (st[i] != vt[i + removed]) {
                    ok = false;
                    break;
                }
            }
        }
        if (!ok || !text::ends_with(s.question, "?")) removal.fail(s.qa_id);
    }
    return {paired, removal, no_point, point_in_box(spatial, "spatial"), one_split_per_image(spatial, "spatial")};
}

VerifyReport verify_directory(const std::filesystem::path& dir, double iou_threshold) {
    VerifyReport report;
    auto has = [&](const std::string& prefix) {
        if (!std::filesystem::is_directory(dir)) return false;
        for (const auto& e : std::filesystem::directory_iterator(dir)) {
            const std::string name = e.path().filename().string();
            if (text::starts_with(name, prefix + ".") && text::ends_with(name, ".jsonl")) return true;
        }
        return false;
    };
    if (has("local")) report.append(check_local(read_split_files(dir, "local"), iou_threshold));
    if (has("looktwice")) report.append(check_looktwice(read_split_files(dir, "looktwice")));
    if (has("general")) report.append(check_general(read_split_files(dir, "general")));
    if (has("dv") && has("ds")) {
        report.append(check_verbal_spatial(read_split_files(dir, "dv"), read_split_files(dir, "ds")));
    }
    return report;
}

}  // namespace pointqa
