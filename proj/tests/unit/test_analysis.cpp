#include <doctest.h>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "pointqa/analysis.hpp"
#include "pointqa/errors.hpp"
#include "pointqa/verify.hpp"
#include "synth_fixture.hpp"

using namespace pointqa;

namespace {

EvalRecord record(const std::string& id, const std::string& question, bool correct) {
    EvalRecord r;
    r.qa_id = id;
    r.question = question;
    r.label = "yes";
    r.prediction = correct ? "yes" : "no";
    r.correct = correct;
    return r;
}

EvalReport report_of(std::vector<EvalRecord> records) {
    EvalReport rep;
    for (const auto& r : records) rep.overall.add(r.correct);
    rep.records = std::move(records);
    return rep;
}

bool has_failure(const std::vector<ConstraintResult>& results, const std::string& name) {
    for (const auto& r : results) {
        if (r.name == name) return !r.passed();
    }
    FAIL("no check named " << name);
    return false;
}

bool all_pass(const std::vector<ConstraintResult>& results) {
    bool ok = true;
    for (const auto& r : results) {
        if (!r.passed()) {
            MESSAGE(r.name << " failed on " << r.violations.front());
            ok = false;
        }
    }
    return ok;
}

PointQAInstance spatial_pair_member(const std::string& id, const std::string& question, std::optional<Point> point) {
    PointQAInstance inst;
    inst.qa_id = id;
    inst.image_id = "img";
    inst.question = question;
    inst.point = point;
    inst.gt_box = BoundingBox{0, 0, 20, 20};
    inst.answer = "phone";
    inst.split = Split::train;
    return inst;
}

}  // namespace

TEST_SUITE("analysis") {
    TEST_CASE("sign test matches the exact binomial tail") {
        CHECK(sign_test_p(10, 10) == doctest::Approx(1.0 / 1024));
        CHECK(sign_test_p(0, 7) == doctest::Approx(1.0));
        CHECK(sign_test_p(0, 0) == 1.0);
        CHECK(sign_test_p(5, 10) == doctest::Approx(638.0 / 1024));
        for (std::size_t n = 1; n <= 60; ++n) {
            for (std::size_t k = 0; k <= n; ++k) {
                CHECK(sign_test_p(k, n) == doctest::Approx(oracle::binomial_upper_tail_half(k, n)).epsilon(1e-9));
            }
        }
        CHECK_THROWS_AS(sign_test_p(4, 3), ContractError);
    }

    TEST_CASE("question swaps fill the object slot") {
        const QuestionSwap swap{"What color is this {object}?", "What action is this {object} doing?"};
        CHECK(apply_swap(swap, "What color is this shirt?") == "What action is this shirt doing?");
        CHECK(apply_swap(swap, "what  COLOR is this red car?") == "What action is this red car doing?");
        CHECK_FALSE(apply_swap(swap, "What shape is this shirt?"));
        CHECK_FALSE(apply_swap(swap, "What color is this ?"));
        const QuestionSwap fixed{"What is this?", "What is that?"};
        CHECK(apply_swap(fixed, "what is this?") == "What is that?");
    }

    TEST_CASE("attention analysis counts swap pairs") {
        auto p = fixtures::prepare(SynthScenario::local, 16, SelectionStrategy::all_containing);
        auto m = make_model(fixtures::config_for(*p, Architecture::pythia_local, Streams::point_q));
        const QuestionSwap swap{"What color is this {object}?", "What action is this {object} doing?"};
        const auto stats = attention_analysis(*m, p->vocab, p->train_examples, swap);
        CHECK(stats.examples == p->train_examples.size());
        REQUIRE(stats.swap);
        std::size_t color_questions = 0;
        for (const auto& ex : p->train_examples) color_questions += apply_swap(swap, ex.instance->question) ? 1 : 0;
        CHECK(stats.swap->pairs == color_questions);
        CHECK(stats.swap->increases + stats.swap->decreases + stats.swap->ties == stats.swap->pairs);
        CHECK(stats.swap->p_value ==
              doctest::Approx(oracle::binomial_upper_tail_half(stats.swap->increases,
                                                               stats.swap->increases + stats.swap->decreases)));
        REQUIRE(stats.mean_max_local);
        CHECK(*stats.mean_max_local > 0);
        CHECK(*stats.mean_max_local <= 1);
        CHECK_FALSE(stats.mean_max_global);

        const auto plain = attention_analysis(*m, p->vocab, p->train_examples);
        CHECK_FALSE(plain.swap);
        CHECK(plain.to_json().contains("mean_max_local"));
    }

    TEST_CASE("context word deltas") {
        const auto a = report_of({record("1", "Is this the largest dog?", true), record("2", "Is this the largest cat?", true),
                                  record("3", "Is this the largest cup?", false), record("4", "Is this red?", true)});
        const auto b = report_of({record("1", "Is this the largest dog?", false), record("2", "Is this the largest cat?", true),
                                  record("3", "Is this the largest cup?", false), record("4", "Is this red?", true)});
        const auto r = context_word_analysis(a, b, {"largest", "smallest", "red"});
        CHECK(r.overall_delta == doctest::Approx(0.25));
        REQUIRE(r.words.size() == 3);
        CHECK(r.words[0].count == 3);
        CHECK(*r.words[0].delta == doctest::Approx(1.0 / 3));
        CHECK(r.words[1].count == 0);
        CHECK_FALSE(r.words[1].delta);
        CHECK(r.to_json()["words"][1]["delta"].is_null());
        CHECK(*r.words[2].delta == 0.0);

        const auto same = context_word_analysis(a, a, {"largest", "red"});
        CHECK(same.overall_delta == 0.0);
        for (const auto& w : same.words) CHECK(*w.delta == 0.0);

        const auto shorter = report_of({record("1", "Is this the largest dog?", true)});
        CHECK_THROWS_AS(context_word_analysis(a, shorter, {"largest"}), ContractError);
        const auto other = report_of({record("9", "Is this the largest dog?", true), record("2", "x?", true),
                                      record("3", "x?", true), record("4", "x?", true)});
        CHECK_THROWS_AS(context_word_analysis(a, other, {"largest"}), ContractError);
    }
}

TEST_SUITE("verify") {
    TEST_CASE("synthetic local data satisfies every local check") {
        auto p = fixtures::prepare(SynthScenario::local, 30, SelectionStrategy::all_containing);
        CHECK(all_pass(check_local(p->data.dataset, 0.2)));

        Dataset moved = p->data.dataset;
        auto& inst = moved.front();
        inst.point = Point{static_cast<int>(inst.gt_box->x + inst.gt_box->w + 1), inst.point->y};
        CHECK(has_failure(check_local(moved, 0.2), "local.point_in_gt_box"));

        moved = p->data.dataset;
        moved.front().split = moved.front().split == Split::train ? Split::val : Split::train;
        CHECK(has_failure(check_local(moved, 0.2), "local.split_per_image"));

        moved = p->data.dataset;
        moved.front().answer = "not in the set";
        CHECK(has_failure(check_local(moved, 0.2), "local.answer_in_answer_set"));

        moved = p->data.dataset;
        const std::string key = moved.front().image_id + moved.front().question;
        const std::string answer = moved.front().answer;
        for (auto& i : moved) {
            if (i.image_id + i.question == key) i.answer = answer;
        }
        CHECK(has_failure(check_local(moved, 0.2), "local.point_necessity"));
    }

    TEST_CASE("synthetic count and compare data pass their checks") {
        auto count = fixtures::prepare(SynthScenario::count, 40, SelectionStrategy::all_containing);
        CHECK(all_pass(check_looktwice(count->data.dataset)));
        auto compare = fixtures::prepare(SynthScenario::compare, 20, SelectionStrategy::all_containing);
        CHECK(all_pass(check_general(compare->data.dataset)));

        Dataset flipped = compare->data.dataset;
        flipped.front().answer = flipped.front().answer == "yes" ? "no" : "yes";
        const auto r = check_general(flipped);
        CHECK(has_failure(r, "general.yes_no_balance"));
        CHECK(has_failure(r, "general.complete_sibling_pairs"));

        Dataset relabeled = count->data.dataset;
        relabeled.front().answer = "3";
        CHECK(has_failure(check_looktwice(relabeled), "looktwice.binned_answers"));
    }

    TEST_CASE("verbal and spatial pairs") {
        const Dataset verbal{spatial_pair_member("q1", "What is the man in the red shirt holding?", std::nullopt)};
        Dataset spatial{spatial_pair_member("q1", "What is the man holding?", Point{5, 5})};
        CHECK(all_pass(check_verbal_spatial(verbal, spatial)));
        spatial[0].question = "What is the woman holding?";
        CHECK(has_failure(check_verbal_spatial(verbal, spatial), "verbal_spatial.phrase_removal"));
        spatial[0].question = "What is the man holding?";
        spatial[0].qa_id = "q2";
        CHECK(has_failure(check_verbal_spatial(verbal, spatial), "verbal_spatial.paired_ids"));
        spatial[0].qa_id = "q1";
        spatial[0].point = Point{50, 50};
        CHECK(has_failure(check_verbal_spatial(verbal, spatial), "spatial.point_in_gt_box"));
    }

    TEST_CASE("directory verification runs the checks for the files present") {
        const auto dir = fixtures::temp_dir("verify");
        CHECK(verify_directory(dir).results.empty());
        auto p = fixtures::prepare(SynthScenario::local, 20, SelectionStrategy::all_containing);
        write_split_files(dir, "local", p->data.dataset,
                          {Split::train, Split::val, Split::test_dev, Split::test_final});
        const auto report = verify_directory(dir);
        CHECK(report.results.size() == 5);
        CHECK(report.passed());
        CHECK(report.to_json()["passed"] == true);
    }
}
