#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "numerics.hpp"
#include "oracle.hpp"
#include "pointqa/errors.hpp"
#include "pointqa/models.hpp"

using namespace pointqa;
using nn::Matrix;
using nn::Tape;

namespace {

using namespace numerics;

void require_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

}  // namespace

TEST_SUITE("models") {
    TEST_CASE("config validation") {
        auto c = fixtures::tiny_config(Architecture::pythia_global, Streams::point_q);
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = fixtures::tiny_config(Architecture::pythia_local, Streams::three_stream);
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = fixtures::tiny_config(Architecture::mcan, Streams::point_q);
        c.heads = 3;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = fixtures::tiny_config(Architecture::mcan, Streams::point_q);
        c.answers.clear();
        CHECK_THROWS_AS(c.validate(), ConfigError);
        CHECK_THROWS_AS(parse_architecture("resnet"), ConfigError);
        CHECK_THROWS_AS(parse_streams("four_stream"), ConfigError);
    }

    TEST_CASE("default layer counts build an lxmert model") {
        ModelConfig c;
        c.architecture = Architecture::lxmert;
        c.streams = Streams::three_stream;
        CHECK(c.language_layers == 5);
        CHECK(c.image_layers == 3);
        CHECK(c.point_layers == 3);
        CHECK(c.cross_layers == 3);
        c.d = 8;
        c.heads = 2;
        c.feature_dim = 4;
        c.vocab_size = 10;
        c.answers = {"yes", "no"};
        auto m = make_model(c);
        Rng rng(3);
        const auto p = m->predict(fixtures::random_input(rng, c));
        CHECK(p.distribution.probs.size() == 2);
    }

    TEST_CASE("config json round trip") {
        auto c = fixtures::tiny_config(Architecture::lxmert, Streams::two_stream);
        const auto back = model_config_from_json(to_json(c));
        CHECK(to_json(back) == to_json(c));
    }

    TEST_CASE("gradients match finite differences for every layout") {
        for (const auto& layout : all_layouts()) {
            CAPTURE(name_of(layout));
            auto c = fixtures::tiny_config(layout.arch, layout.streams);
            auto m = make_model(c);
            Rng rng(11);
            perturb(m->parameters(), rng);
            const auto in = fixtures::random_input(rng, c);
            const auto g = analytic_gradients(*m, in, 1);
            const auto check = oracle::check_gradients(m->parameters(), g, [&] { return loss_of(*m, in, 1); });
            CAPTURE(check.worst);
            CHECK(check.checked == m->parameters().scalar_count());
            CHECK(check.max_rel_error < 1e-4);
        }
    }

    TEST_CASE("masked padding rows do not change the output") {
        for (const auto& layout : all_layouts()) {
            CAPTURE(name_of(layout));
            auto c = fixtures::tiny_config(layout.arch, layout.streams);
            auto m = make_model(c);
            Rng rng(21);
            const auto in = fixtures::random_input(rng, c);
            ModelInput pad = in;
            pad.image = padded(in.image, 10);
            pad.point = padded(in.point, 10);
            const auto a = m->predict(in);
            const auto b = m->predict(pad);
            require_close(a.distribution.probs, b.distribution.probs, 1e-6);
            if (!b.attention.local.empty()) {
                const auto& w = b.attention.local;
                for (std::size_t i = a.attention.local.size(); i < w.size(); ++i) CHECK(w[i] == 0.0);
            }
        }
    }

    TEST_CASE("region order does not change the output") {
        for (const auto& layout : all_layouts()) {
            CAPTURE(name_of(layout));
            auto c = fixtures::tiny_config(layout.arch, layout.streams);
            auto m = make_model(c);
            Rng rng(31);
            const auto in = fixtures::random_input(rng, c, 6, 4);
            ModelInput perm = in;
            perm.image = permuted(in.image, {3, 0, 5, 1, 4, 2});
            perm.point = permuted(in.point, {2, 3, 1, 0});
            require_close(m->predict(in).distribution.probs, m->predict(perm).distribution.probs, 1e-6);
        }
    }

    TEST_CASE("distributions and attention weights are normalized") {
        for (const auto& layout : all_layouts()) {
            CAPTURE(name_of(layout));
            auto c = fixtures::tiny_config(layout.arch, layout.streams);
            auto m = make_model(c);
            Rng rng(41);
            for (int trial = 0; trial < 5; ++trial) {
                const auto p = m->predict(fixtures::random_input(rng, c, 2 + trial, 1 + trial));
                const auto& probs = p.distribution.probs;
                CHECK(std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) < 1e-6);
                CHECK(std::all_of(probs.begin(), probs.end(), [](double v) { return v >= 0.0; }));
                if (!p.attention.local.empty()) {
                    const auto& w = p.attention.local;
                    CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-6);
                }
                if (p.attention.global) {
                    const auto& w = *p.attention.global;
                    CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-6);
                }
                for (const auto& layer : p.attention.per_layer) {
                    for (Eigen::Index r = 0; r < layer.rows(); ++r) CHECK(std::abs(layer.row(r).sum() - 1.0) < 1e-6);
                }
            }
        }
    }

    TEST_CASE("attention records follow the stream layout") {
        Rng rng(51);
        auto c = fixtures::tiny_config(Architecture::pythia_local, Streams::point_q);
        auto in = fixtures::random_input(rng, c, 5, 3);
        auto p = make_model(c)->predict(in);
        CHECK(p.attention.local.size() == 3);
        CHECK_FALSE(p.attention.global);

        c.streams = Streams::image_q;
        p = make_model(c)->predict(in);
        CHECK(p.attention.local.empty());
        REQUIRE(p.attention.global);
        CHECK(p.attention.global->size() == 5);

        c.streams = Streams::two_stream;
        p = make_model(c)->predict(in);
        CHECK(p.attention.local.size() == 3);
        REQUIRE(p.attention.global);
        CHECK(p.attention.global->size() == 5);

        c.architecture = Architecture::pythia_global;
        c.streams = Streams::three_stream;
        p = make_model(c)->predict(in);
        CHECK(p.attention.local.size() == 3);
        REQUIRE(p.attention.global);
        CHECK(p.attention.global->size() == 5);
    }

    TEST_CASE("point stream over the full image equals the image stream") {
        for (auto arch : {Architecture::pythia_local, Architecture::mcan, Architecture::lxmert}) {
            CAPTURE(to_string(arch));
            auto pc = fixtures::tiny_config(arch, Streams::point_q);
            auto ic = fixtures::tiny_config(arch, Streams::image_q);
            auto point_model = make_model(pc);
            auto image_model = make_model(ic);
            REQUIRE(point_model->parameters().size() == image_model->parameters().size());
            for (std::size_t i = 0; i < point_model->parameters().size(); ++i) {
                image_model->parameters()[i].value = point_model->parameters()[i].value;
            }
            Rng rng(61);
            auto in = fixtures::random_input(rng, pc, 7, 2);
            in.point = in.image;
            require_close(point_model->predict(in).distribution.probs, image_model->predict(in).distribution.probs,
                          1e-12);
        }
    }

    TEST_CASE("question encoding") {
        auto c = fixtures::tiny_config(Architecture::pythia_local, Streams::point_q);
        c.d = 64;
        c.heads = 4;
        auto m = make_model(c);
        const std::vector<int> tokens{3, 4, 5, 6, 7};
        Tape t1(&m->parameters()), t2(&m->parameters());
        const auto a = m->encode_question(t1, tokens);
        const auto b = m->encode_question(t2, tokens);
        CHECK(a.rows() == 1);
        CHECK(a.cols() == 64);
        CHECK(a.value() == b.value());
        Tape t3(&m->parameters());
        CHECK_THROWS_AS(m->encode_question(t3, {}), ContractError);

        auto mc = make_model(fixtures::tiny_config(Architecture::mcan, Streams::point_q));
        Tape t4(&mc->parameters());
        const auto seq = mc->encode_question(t4, tokens);
        CHECK(seq.rows() == 5);
        CHECK(seq.cols() == 8);
    }

    TEST_CASE("region width mismatch is a contract error") {
        auto c = fixtures::tiny_config(Architecture::mcan, Streams::point_q);
        auto m = make_model(c);
        Rng rng(71);
        auto in = fixtures::random_input(rng, c);
        in.point.features = Matrix::Zero(3, c.region_dim() + 1);
        CHECK_THROWS_AS(m->predict(in), ContractError);
    }

    TEST_CASE("attend block") {
        nn::ParameterSet ps;
        Rng rng(81);
        const auto block = AttendBlock::create(ps, "att", 6, 4, 8, std::nullopt, rng);
        Tape t(&ps);
        const auto q = t.constant(Matrix::Random(1, 4));
        Matrix one = Matrix::Random(1, 6);
        auto r = block(t, q, t.constant(one), {true});
        CHECK(r.weights.value()(0, 0) == doctest::Approx(1.0));
        CHECK((r.pooled.value() - one).norm() < 1e-12);

        Matrix twice(2, 6);
        twice.row(0) = one;
        twice.row(1) = one;
        r = block(t, q, t.constant(twice), {true, true});
        CHECK(r.weights.value()(0, 0) == doctest::Approx(0.5));
        CHECK(r.weights.value()(0, 1) == doctest::Approx(0.5));

        Matrix mixed = Matrix::Random(3, 6);
        r = block(t, q, t.constant(mixed), {true, false, true});
        CHECK(r.weights.value()(0, 1) == 0.0);
        CHECK(r.weights.value().sum() == doctest::Approx(1.0));
    }

    TEST_CASE("global attention depends on the pooled point vector") {
        auto c = fixtures::tiny_config(Architecture::pythia_global, Streams::three_stream);
        auto m = make_model(c);
        Rng rng(91);
        auto in = fixtures::random_input(rng, c, 5, 3);
        const auto a = m->predict(in);
        in.point.features.setZero();
        const auto b = m->predict(in);
        double diff = 0;
        for (std::size_t i = 0; i < 5; ++i) diff += std::abs((*a.attention.global)[i] - (*b.attention.global)[i]);
        CHECK(diff > 1e-9);
    }

    TEST_CASE("cross attention spans every context stream") {
        nn::ParameterSet ps;
        Rng rng(101);
        const auto layer = CrossAttendLayer::create(ps, "x", 8, 2, rng);
        Tape t(&ps);
        const StreamState target{t.constant(Matrix::Random(4, 8)), nn::Mask(4, true), Modality::image};
        const StreamState q{t.constant(Matrix::Random(3, 8)), nn::Mask(3, true), Modality::question};
        const StreamState pt{t.constant(Matrix::Random(2, 8)), nn::Mask(2, true), Modality::point};
        std::vector<Matrix> probs;
        const auto out = layer(t, target, {q, pt}, &probs);
        CHECK(out.vectors.rows() == 4);
        REQUIRE(probs.size() == 2);
        for (const auto& p : probs) {
            CHECK(p.rows() == 4);
            CHECK(p.cols() == 5);
            for (Eigen::Index r = 0; r < 4; ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0));
        }

        // A fully masked context stream contributes nothing.
        const StreamState masked{t.constant(Matrix::Random(2, 8)), nn::Mask(2, false), Modality::point};
        const auto alone = layer(t, target, {q});
        const auto with_masked = layer(t, target, {q, masked});
        CHECK((alone.vectors.value() - with_masked.vectors.value()).norm() < 1e-12);
    }

    TEST_CASE("three-stream mcan classifies a 2d fusion") {
        auto c = fixtures::tiny_config(Architecture::mcan, Streams::three_stream);
        auto m = make_model(c);
        const auto& w = m->parameters()[m->parameters().index("cls.w")];
        CHECK(w.value.rows() == 2 * c.d);
        auto c1 = fixtures::tiny_config(Architecture::mcan, Streams::point_q);
        auto m1 = make_model(c1);
        CHECK(m1->parameters()[m1->parameters().index("cls.w")].value.rows() == c.d);
    }

    TEST_CASE("masked softmax") {
        Tape t;
        Matrix a(1, 4);
        a << 1.0, 2.0, 3.0, 4.0;
        const auto s = nn::masked_softmax(t.constant(a), {true, false, true, false}).value();
        CHECK(s(0, 1) == 0.0);
        CHECK(s(0, 3) == 0.0);
        CHECK(s(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
        CHECK(s(0, 2) == doctest::Approx(std::exp(2.0) / (1.0 + std::exp(2.0))));
        CHECK_THROWS_AS(nn::masked_softmax(t.constant(a), {false, false, false, false}), ContractError);
    }

    TEST_CASE("model construction is deterministic in the seed") {
        auto c = fixtures::tiny_config(Architecture::lxmert, Streams::three_stream);
        auto a = make_model(c);
        auto b = make_model(c);
        for (std::size_t i = 0; i < a->parameters().size(); ++i) {
            CHECK(a->parameters()[i].value == b->parameters()[i].value);
        }
        c.seed = 6;
        auto other = make_model(c);
        CHECK(other->parameters()[0].value != a->parameters()[0].value);
    }

    TEST_CASE("question vocabulary") {
        Dataset data(2);
        data[0].question = "What color is this shirt?";
        data[1].question = "What is this?";
        const auto vocab = QuestionVocabulary::build(data);
        CHECK(vocab.id("color") >= 3);
        CHECK(vocab.id("zebra") == QuestionVocabulary::kUnknown);
        const auto ids = vocab.encode("What color is this hat?");
        CHECK(ids.size() >= 5);
        CHECK(std::count(ids.begin(), ids.end(), QuestionVocabulary::kUnknown) == 1);
    }

    TEST_CASE("modal answer baseline") {
        PointQAInstance inst;
        inst.qa_id = "q";
        inst.meta.answer_set = std::vector<std::string>{"red", "blue", "green"};
        CHECK(baseline_modal_answer(inst, {{"red", 5}, {"blue", 9}, {"white", 50}}) == "blue");
        CHECK(baseline_modal_answer(inst, {{"red", 4}, {"blue", 4}}) == "blue");
        CHECK(baseline_modal_answer(inst, {}) == "blue");
        inst.meta.answer_set.reset();
        CHECK_THROWS_AS(baseline_modal_answer(inst, {}), ContractError);
    }
}
