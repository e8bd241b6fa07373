#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "pointqa/checkpoint.hpp"
#include "pointqa/errors.hpp"
#include "pointqa/synth_world.hpp"
#include "pointqa/trainer.hpp"
#include "synth_fixture.hpp"

using namespace pointqa;
using fixtures::config_for;
using fixtures::prepare;

namespace {

TrainConfig short_run(std::size_t iterations) {
    TrainConfig t;
    t.max_iterations = iterations;
    t.batch_size = 8;
    t.eval_interval = 10;
    t.patience = 1000;
    t.seed = 4;
    return t;
}

}  // namespace

TEST_SUITE("trainer") {
    TEST_CASE("early stopping keeps the first best and stops after patience") {
        EarlyStopping s(3);
        const std::vector<double> vals{0.5, 0.6, 0.6, 0.6, 0.6};
        std::size_t stopped_at = 0;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            s.update(i + 1, vals[i]);
            if (s.should_stop(i + 1)) {
                stopped_at = i + 1;
                break;
            }
        }
        CHECK(stopped_at == 5);
        CHECK(s.best_iteration() == 2);
        CHECK(s.best_value() == 0.6);
        CHECK_THROWS_AS(EarlyStopping(0), ConfigError);
    }

    TEST_CASE("train config validation and json") {
        TrainConfig c;
        c.learning_rate = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = TrainConfig{};
        c.batch_size = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = TrainConfig{};
        c.optimizer = nn::OptimizerKind::adam;
        c.warmup_decay = true;
        c.max_iterations = 77;
        CHECK(to_json(train_config_from_json(to_json(c))) == to_json(c));
    }

    TEST_CASE("prepared examples carry labels and the full image stream") {
        auto p = prepare(SynthScenario::local, 12, SelectionStrategy::all_containing);
        REQUIRE_FALSE(p->train_examples.empty());
        for (const auto& ex : p->train_examples) {
            CHECK(ex.label >= 0);
            CHECK(p->answers[static_cast<std::size_t>(ex.label)] == ex.instance->answer);
            const auto& props = p->world.features.at(ex.instance->image_id);
            CHECK(ex.input.image.rows() == std::min<std::size_t>(props.size(), 32));
            CHECK(ex.input.point.rows() >= 1);
            for (const auto& b : ex.input.point.boxes) CHECK(contains(b, *ex.instance->point));
        }
    }

    TEST_CASE("training lowers the loss and is deterministic") {
        auto p = prepare(SynthScenario::local, 30, SelectionStrategy::all_containing);
        const auto c = config_for(*p, Architecture::pythia_local, Streams::point_q);
        auto a = make_model(c);
        auto b = make_model(c);
        const auto ra = train(*a, p->train_examples, p->val_examples, short_run(60));
        const auto rb = train(*b, p->train_examples, p->val_examples, short_run(60));
        CHECK(encode_checkpoint(*a, p->vocab) == encode_checkpoint(*b, p->vocab));
        REQUIRE(ra.log.size() == 60);
        double early = 0, late = 0;
        for (std::size_t i = 0; i < 10; ++i) {
            early += ra.log[i].loss;
            late += ra.log[50 + i].loss;
        }
        CHECK(late < early);
        CHECK(ra.best_iteration % 10 == 0);
        CHECK(ra.best_val_accuracy == doctest::Approx(accuracy(*a, p->val_examples)));
        for (std::size_t i = 0; i < ra.log.size(); ++i) CHECK(ra.log[i].loss == rb.log[i].loss);
    }

    TEST_CASE("training restores the best validation parameters") {
        auto p = prepare(SynthScenario::local, 20, SelectionStrategy::all_containing);
        auto m = make_model(config_for(*p, Architecture::mcan, Streams::point_q));
        auto cfg = short_run(40);
        cfg.eval_interval = 5;
        cfg.patience = 10;
        const auto r = train(*m, p->train_examples, p->val_examples, cfg);
        double best_logged = 0;
        for (const auto& e : r.log) {
            if (e.val_accuracy) best_logged = std::max(best_logged, *e.val_accuracy);
        }
        CHECK(r.best_val_accuracy == best_logged);
        CHECK(accuracy(*m, p->val_examples) == doctest::Approx(best_logged));
        if (r.stopped_early) CHECK(r.iterations - r.best_iteration >= 10);
    }

    TEST_CASE("a non-finite loss raises TrainingDiverged") {
        auto p = prepare(SynthScenario::local, 8, SelectionStrategy::all_containing);
        auto m = make_model(config_for(*p, Architecture::pythia_local, Streams::point_q));
        for (auto& param : m->parameters()) param.value.setConstant(std::numeric_limits<double>::quiet_NaN());
        CHECK_THROWS_AS(train(*m, p->train_examples, p->val_examples, short_run(5)), TrainingDiverged);
    }

    TEST_CASE("evaluation agrees with a recount and does not depend on jobs") {
        auto p = prepare(SynthScenario::local, 20, SelectionStrategy::all_containing);
        auto m = make_model(config_for(*p, Architecture::pythia_local, Streams::two_stream));
        const auto one = evaluate(*m, p->val_examples, 1);
        const auto three = evaluate(*m, p->val_examples, 3);
        std::vector<std::string> preds, labels;
        for (const auto& r : one.records) {
            preds.push_back(r.prediction);
            labels.push_back(r.label);
        }
        CHECK(one.accuracy() == doctest::Approx(oracle::recount_accuracy(preds, labels)).epsilon(1e-12));
        CHECK(one.accuracy() == accuracy(*m, p->val_examples));
        CHECK(one.to_json(true) == three.to_json(true));
        REQUIRE(one.mean_max_local);
        REQUIRE(one.mean_max_global);
        std::size_t total = 0;
        for (const auto& [value, cell] : one.breakdowns.at("answer")) total += cell.total;
        CHECK(total == p->val_examples.size());
        CHECK_THROWS_AS(evaluate(*m, {}), ContractError);
    }

    TEST_CASE("modal baseline matches an exhaustive scan") {
        Rng rng(17);
        const std::vector<std::string> pool{"red", "blue", "green", "white", "black", "brown"};
        for (int trial = 0; trial < 50; ++trial) {
            Dataset train(30);
            for (auto& inst : train) inst.answer = pool[uniform_index(rng, pool.size())];
            const auto freq = answer_frequencies(train);
            PointQAInstance inst;
            std::vector<std::string> set;
            for (const auto& a : pool) {
                if (uniform_unit(rng) < 0.5) set.push_back(a);
            }
            if (set.empty()) set.push_back("purple");
            inst.meta.answer_set = set;
            CHECK(baseline_modal_answer(inst, freq) == oracle::modal_answer(set, train));
        }
    }

    TEST_CASE("question-only predictors score exactly one half on paired yes/no data") {
        auto p = prepare(SynthScenario::compare, 30, SelectionStrategy::all_containing);
        const auto& data = p->data.dataset;
        REQUIRE(data.size() >= 20);
        std::set<std::string> answers;
        for (const auto& inst : data) answers.insert(inst.answer);
        CHECK(answers == std::set<std::string>{"no", "yes"});

        const auto freq = answer_frequencies(p->train);
        CHECK(evaluate_modal_baseline(p->val, freq).accuracy() == 0.5);

        for (auto arch : {Architecture::pythia_local, Architecture::mcan}) {
            auto m = make_model(config_for(*p, arch, Streams::q_only));
            train(*m, p->train_examples, p->val_examples, short_run(20));
            CHECK(evaluate(*m, p->val_examples).accuracy() == 0.5);
        }
    }

    TEST_CASE("train log lines") {
        const auto dir = fixtures::temp_dir("train_log");
        write_train_log(dir / "log.jsonl", {{1, 2.5, std::nullopt}, {2, 2.0, 0.25}});
        std::ifstream in(dir / "log.jsonl");
        std::string a, b;
        std::getline(in, a);
        std::getline(in, b);
        CHECK(nlohmann::json::parse(a).at("val_accuracy").is_null());
        CHECK(nlohmann::json::parse(b).at("val_accuracy") == 0.25);
    }
}

TEST_SUITE("checkpoint") {
    TEST_CASE("round trip preserves configuration, vocabulary and predictions") {
        const auto c = fixtures::tiny_config(Architecture::lxmert, Streams::three_stream);
        auto m = make_model(c);
        const QuestionVocabulary vocab({"what", "color", "is", "this", "shirt"});
        const auto bytes = encode_checkpoint(*m, vocab);
        CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PQCK");
        const auto loaded = decode_checkpoint(bytes);
        CHECK(to_json(loaded.model->config()) == to_json(c));
        CHECK(loaded.vocabulary.words() == vocab.words());
        CHECK(encode_checkpoint(*loaded.model, loaded.vocabulary) == bytes);
        Rng rng(2);
        const auto in = fixtures::random_input(rng, c);
        const auto a = m->predict(in).distribution.probs;
        const auto b = loaded.model->predict(in).distribution.probs;
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-5);
    }

    TEST_CASE("files round trip") {
        const auto dir = fixtures::temp_dir("checkpoint");
        auto m = make_model(fixtures::tiny_config(Architecture::pythia_global, Streams::three_stream));
        save_checkpoint(dir / "m.pqck", *m, QuestionVocabulary({"a"}));
        const auto loaded = load_checkpoint(dir / "m.pqck");
        CHECK(loaded.model->config().architecture == Architecture::pythia_global);
        CHECK_THROWS_AS(load_checkpoint(dir / "missing.pqck"), IoError);
    }

    TEST_CASE("corrupt checkpoints are rejected") {
        auto m = make_model(fixtures::tiny_config(Architecture::mcan, Streams::point_q));
        const auto bytes = encode_checkpoint(*m, QuestionVocabulary({"a"}));
        auto bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(decode_checkpoint(bad), CorruptFeature);
        bad = bytes;
        bad[4] = 9;
        CHECK_THROWS_AS(decode_checkpoint(bad), CorruptFeature);
        bad.assign(bytes.begin(), bytes.end() - 3);
        CHECK_THROWS_AS(decode_checkpoint(bad), CorruptFeature);
        bad.assign(bytes.begin(), bytes.begin() + 20);
        CHECK_THROWS_AS(decode_checkpoint(bad), CorruptFeature);
    }
}

TEST_SUITE("optimizer") {
    TEST_CASE("warmup and decay schedule") {
        CHECK(nn::warmup_decay_rate(1.0, 1, 100) == doctest::Approx(0.1));
        CHECK(nn::warmup_decay_rate(1.0, 10, 100) == doctest::Approx(1.0));
        CHECK(nn::warmup_decay_rate(1.0, 100, 100) == doctest::Approx(0.1));
        CHECK(nn::warmup_decay_rate(1.0, 55, 100) == doctest::Approx(0.55));
        double prev = 2.0;
        for (std::size_t it = 10; it <= 100; ++it) {
            const double r = nn::warmup_decay_rate(1.0, it, 100);
            CHECK(r <= prev);
            prev = r;
        }
    }

    TEST_CASE("first step moves each coordinate by the learning rate against the gradient sign") {
        for (auto kind : {nn::OptimizerKind::adamax, nn::OptimizerKind::adam}) {
            nn::ParameterSet ps;
            ps.add("w", nn::Matrix::Zero(1, 3));
            nn::Optimizer opt(ps, {kind, 0.01});
            nn::Gradients g{nn::Matrix(1, 3)};
            g[0] << 2.0, -0.5, 0.0;
            opt.step(ps, g, 0.01);
            CHECK(ps[0].value(0, 0) == doctest::Approx(-0.01).epsilon(1e-4));
            CHECK(ps[0].value(0, 1) == doctest::Approx(0.01).epsilon(1e-4));
            CHECK(ps[0].value(0, 2) == 0.0);
        }
    }

    TEST_CASE("gradient norm and optimizer names") {
        nn::Gradients g{nn::Matrix::Constant(2, 2, 3.0)};
        CHECK(nn::gradient_norm(g) == doctest::Approx(6.0));
        CHECK(nn::parse_optimizer("adam") == nn::OptimizerKind::adam);
        CHECK_THROWS_AS(nn::parse_optimizer("sgd"), ConfigError);
    }

    TEST_CASE("adam minimizes a quadratic") {
        nn::ParameterSet ps;
        ps.add("w", nn::Matrix::Constant(1, 2, 3.0));
        nn::Optimizer opt(ps, {nn::OptimizerKind::adam, 0.05});
        for (int i = 0; i < 2000; ++i) {
            nn::Gradients g{2.0 * ps[0].value};
            opt.step(ps, g, 0.05);
        }
        CHECK(ps[0].value.norm() < 1e-2);
    }
}
