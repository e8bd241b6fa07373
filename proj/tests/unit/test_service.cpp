#include <doctest.h>

#include <cstring>
#include <numeric>
#include <thread>

#include "fixtures.hpp"
#include "pointqa/errors.hpp"
#include "pointqa/raster.hpp"
#include "pointqa/service.hpp"

// After Eigen: these headers define macros that clash with its internals.
#include <httplib.h>
#include <zlib.h>

using namespace pointqa;
using nlohmann::json;

namespace {

// Returns a fixed distribution and echoes the request point as attention.
class StubPredictor : public Predictor {
public:
    ServiceAnswer answer(const AnswerRequest& request, const ImageAnnotation& image) const override {
        if (request.question == "explode?") throw ContractError("stub failure");
        ServiceAnswer a;
        a.distribution.labels = {"blue", "red", "green"};
        a.distribution.probs = {0.2, 0.7, 0.1};
        for (int i = 0; i < 30; ++i) {
            a.local.push_back({BoundingBox{double(i), 0, 1, 1}, 1.0 / 30});
        }
        a.local.front().weight = 0.5;
        (void)image;
        return a;
    }
};

std::shared_ptr<AnnotationStore> store_with(std::size_t n) {
    std::vector<ImageAnnotation> images;
    for (std::size_t i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "img%03zu", i);
        images.push_back(fixtures::image(id, {fixtures::object("o1", "shirt", {10, 10, 30, 20}, {"red"}),
                                              fixtures::object("o2", "car", {50, 40, 20, 20}, {"purple"})},
                                         {}, 100, 80));
    }
    return std::make_shared<AnnotationStore>(std::move(images), 0);
}

InferenceService make_service(std::size_t n = 3) {
    return InferenceService(store_with(n), nullptr, std::make_shared<StubPredictor>());
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t pos) {
    return (std::uint32_t(b[pos]) << 24) | (std::uint32_t(b[pos + 1]) << 16) | (std::uint32_t(b[pos + 2]) << 8) |
           std::uint32_t(b[pos + 3]);
}

// Minimal PNG reader for 8-bit RGB images with filter type 0 on every row.
RgbImage decode_png(const std::vector<std::uint8_t>& png) {
    const std::uint8_t signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    REQUIRE(png.size() > 8);
    REQUIRE(std::memcmp(png.data(), signature, 8) == 0);
    std::size_t pos = 8;
    int w = 0, h = 0;
    std::vector<std::uint8_t> idat;
    bool ended = false;
    while (pos + 12 <= png.size()) {
        const std::uint32_t len = be32(png, pos);
        const std::string type(png.begin() + static_cast<long>(pos + 4), png.begin() + static_cast<long>(pos + 8));
        const std::uint8_t* data = png.data() + pos + 8;
        const std::uint32_t crc = be32(png, pos + 8 + len);
        CHECK(crc == ::crc32(::crc32(0, png.data() + pos + 4, 4), data, len));
        if (type == "IHDR") {
            w = static_cast<int>(be32(png, pos + 8));
            h = static_cast<int>(be32(png, pos + 12));
            CHECK(data[8] == 8);
            CHECK(data[9] == 2);
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            ended = true;
        }
        pos += 12 + len;
    }
    CHECK(ended);
    CHECK(pos == png.size());
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * (1 + 3 * static_cast<std::size_t>(w)));
    uLongf raw_len = raw.size();
    REQUIRE(::uncompress(raw.data(), &raw_len, idat.data(), idat.size()) == Z_OK);
    REQUIRE(raw_len == raw.size());
    RgbImage img(w, h, {0, 0, 0});
    for (int y = 0; y < h; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * (1 + 3 * static_cast<std::size_t>(w));
        CHECK(raw[row] == 0);
        std::copy_n(raw.begin() + static_cast<long>(row + 1), 3 * w,
                    img.pixels.begin() + static_cast<long>(3 * static_cast<std::size_t>(y * w)));
    }
    return img;
}

}  // namespace

TEST_SUITE("service") {
    TEST_CASE("answer returns a sorted normalized distribution") {
        const auto svc = make_service();
        const auto r = svc.answer(R"({"image_id":"img001","point":{"x":12,"y":15},"question":"What color is this shirt?"})",
                                  false);
        REQUIRE(r.status == 200);
        CHECK(r.body["answer"] == "red");
        const auto& scores = r.body["scores"];
        REQUIRE(scores.size() == 3);
        double total = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            total += scores[i]["prob"].get<double>();
            if (i > 0) CHECK(scores[i - 1]["prob"].get<double>() >= scores[i]["prob"].get<double>());
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(r.body["attention"]["local"].size() == kAttentionTopK);
        CHECK(r.body["attention"]["local"][0]["weight"] == 0.5);
        CHECK(r.body.contains("latency_ms"));
        const auto full = svc.answer(R"({"image_id":"img001","point":{"x":12,"y":15},"question":"What?"})", true);
        CHECK(full.body["attention"]["local"].size() == 30);
    }

    TEST_CASE("answer validation statuses") {
        const auto svc = make_service();
        CHECK(svc.answer(R"({"image_id":"img001","point":{"x":-1,"y":5},"question":"What?"})", false).status == 422);
        CHECK(svc.answer(R"({"image_id":"img001","point":{"x":100,"y":5},"question":"What?"})", false).status == 422);
        const auto missing = svc.answer(R"({"image_id":"nope","point":{"x":1,"y":5},"question":"What?"})", false);
        CHECK(missing.status == 404);
        CHECK(missing.body.contains("error"));
        CHECK(svc.answer("{not json", false).status == 400);
        CHECK(svc.answer(R"({"image_id":"img001","question":"What?"})", false).status == 400);
        CHECK(svc.answer(R"({"image_id":"img001","point":{"x":1.5,"y":2},"question":"What?"})", false).status == 400);
        CHECK(svc.answer(R"({"image_id":"img001","point":{"x":1,"y":2},"question":""})", false).status == 400);
        CHECK(svc.answer(R"({"image_id":"img001","point":[1,2],"question":"What?"})", false).status == 400);
        CHECK(svc.answer(R"({"image_id":7,"point":{"x":1,"y":2},"question":"What?"})", false).status == 400);
        CHECK(svc.answer(R"({"image_id":"img001","point":{"x":1,"y":2},"question":"explode?"})", false).status == 500);
    }

    TEST_CASE("image ids missing from the feature store are unknown") {
        ProposalSet s;
        s.image_id = "img000";
        s.boxes = {{0, 0, 10, 10}};
        s.scores = {1.0f};
        s.features = FeatureMatrix::Zero(1, 2);
        std::map<std::string, ProposalSet> sets{{"img000", s}};
        const InferenceService svc(store_with(2), std::make_shared<FeatureStore>(sets),
                                   std::make_shared<StubPredictor>());
        CHECK(svc.answer(R"({"image_id":"img000","point":{"x":1,"y":1},"question":"What?"})", false).status == 200);
        CHECK(svc.answer(R"({"image_id":"img001","point":{"x":1,"y":1},"question":"What?"})", false).status == 404);
        CHECK(svc.list_images(std::nullopt, std::nullopt).body["total"] == 1);
    }

    TEST_CASE("image listing pages") {
        const auto svc = make_service(100);
        const auto r = svc.list_images(std::string("1"), std::string("10"));
        REQUIRE(r.status == 200);
        CHECK(r.body["pages"] == 10);
        CHECK(r.body["total"] == 100);
        CHECK(r.body["images"].size() == 10);
        CHECK(r.body["images"][0]["image_id"] == "img000");
        CHECK(r.body["images"][0]["thumbnail_uri"] == "/v1/images/img000.png");
        const auto last = svc.list_images(std::string("10"), std::string("10"));
        CHECK(last.body["images"][9]["image_id"] == "img099");
        const auto defaults = svc.list_images(std::nullopt, std::nullopt);
        CHECK(defaults.body["size"] == kDefaultPageSize);
        CHECK(defaults.body["pages"] == 5);
        CHECK(svc.list_images(std::string("11"), std::string("10")).status == 400);
        CHECK(svc.list_images(std::string("0"), std::nullopt).status == 400);
        CHECK(svc.list_images(std::nullopt, std::string("1001")).status == 400);
        CHECK(svc.list_images(std::string("x"), std::nullopt).status == 400);
        CHECK(svc.list_images(std::nullopt, std::string("1000")).status == 200);

        const auto empty = make_service(0);
        CHECK(empty.list_images(std::nullopt, std::nullopt).status == 200);
        CHECK(empty.list_images(std::nullopt, std::nullopt).body["pages"] == 0);
    }

    TEST_CASE("image detail and png rendering") {
        const auto svc = make_service();
        const auto r = svc.image("img002");
        REQUIRE(r.status == 200);
        CHECK(r.body["image_id"] == "img002");
        CHECK(r.body["objects"].size() == 2);
        const auto png = svc.image_png("img002");
        REQUIRE(png);
        CHECK(svc.image_png("img002") == png);
        CHECK(r.body["png_base64"] == base64_encode(*png));
        CHECK(svc.image("missing").status == 404);
        CHECK_FALSE(svc.image_png("missing"));

        const auto decoded = decode_png(*png);
        const auto expected = rasterize(store_with(3)->at("img002"));
        CHECK(decoded.width == 100);
        CHECK(decoded.height == 80);
        CHECK(decoded.pixels == expected.pixels);
        const auto at = [&](int x, int y) {
            const auto i = 3 * static_cast<std::size_t>(y * decoded.width + x);
            return std::array<std::uint8_t, 3>{decoded.pixels[i], decoded.pixels[i + 1], decoded.pixels[i + 2]};
        };
        CHECK(at(20, 20) == color_for("red"));
        CHECK(at(60, 50) == color_for("purple"));
        CHECK(at(90, 5) != color_for("red"));
    }

    TEST_CASE("base64") {
        CHECK(base64_encode({}) == "");
        CHECK(base64_encode({'f'}) == "Zg==");
        CHECK(base64_encode({'f', 'o'}) == "Zm8=");
        CHECK(base64_encode({'f', 'o', 'o'}) == "Zm9v");
        CHECK(base64_encode({'f', 'o', 'o', 'b', 'a', 'r'}) == "Zm9vYmFy");
    }

    TEST_CASE("attention ranking is stable") {
        const std::vector<BoundingBox> boxes{{0, 0, 1, 1}, {1, 0, 1, 1}, {2, 0, 1, 1}, {3, 0, 1, 1}};
        const auto ranked = rank_attention(boxes, {0.1, 0.4, 0.1, 0.4});
        CHECK(ranked[0].box.x == 1);
        CHECK(ranked[1].box.x == 3);
        CHECK(ranked[2].box.x == 0);
        CHECK(ranked[3].box.x == 2);
    }

    TEST_CASE("model predictor over synthetic proposals") {
        Rng rng(4);
        auto c = fixtures::tiny_config(Architecture::pythia_global, Streams::three_stream, 5);
        std::shared_ptr<const Model> model = make_model(c);
        std::map<std::string, ProposalSet> sets;
        auto props = fixtures::random_proposals(rng, 12, 5, 100, 80, "img000");
        props.boxes[0] = {10, 10, 30, 20};
        sets.emplace("img000", props);
        auto features = std::make_shared<FeatureStore>(sets);
        const QuestionVocabulary vocab({"what", "color", "is", "this", "shirt"});
        const InferenceService svc(store_with(1), features, std::make_shared<ModelPredictor>(model, vocab, features));
        const auto r = svc.answer(R"({"image_id":"img000","point":{"x":12,"y":15},"question":"What color is this shirt?"})",
                                  true);
        REQUIRE(r.status == 200);
        double total = 0;
        for (const auto& s : r.body["scores"]) total += s["prob"].get<double>();
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
        for (const auto& b : r.body["attention"]["local"]) {
            const auto box = b["box"].get<BoundingBox>();
            CHECK(contains(box, Point{12, 15}));
        }
        CHECK(r.body["attention"]["global"].size() == 12);
    }

    TEST_CASE("http routes and cors") {
        const auto svc = make_service(25);
        httplib::Server server;
        svc.bind(server);
        const int port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        std::thread runner([&] { server.listen_after_bind(); });
        server.wait_until_ready();

        httplib::Client client("127.0.0.1", port);
        auto res = client.Post("/v1/answer", R"({"image_id":"img003","point":{"x":12,"y":15},"question":"What?"})",
                               "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
        CHECK(json::parse(res->body)["answer"] == "red");

        res = client.Post("/v1/answer?full=1", R"({"image_id":"img003","point":{"x":12,"y":15},"question":"What?"})",
                          "application/json");
        REQUIRE(res);
        CHECK(json::parse(res->body)["attention"]["local"].size() == 30);

        res = client.Post("/v1/answer", R"({"image_id":"img003","point":{"x":-1,"y":5},"question":"What?"})",
                          "application/json");
        REQUIRE(res);
        CHECK(res->status == 422);

        res = client.Get("/v1/images?page=2&size=10");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(json::parse(res->body)["images"][0]["image_id"] == "img010");

        res = client.Get("/v1/images/img004.png");
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(res->get_header_value("Content-Type") == "image/png");
        CHECK(std::vector<std::uint8_t>(res->body.begin(), res->body.end()) == *svc.image_png("img004"));

        res = client.Get("/v1/images/img004");
        REQUIRE(res);
        CHECK(json::parse(res->body)["image_id"] == "img004");
        res = client.Get("/v1/images/nothing");
        REQUIRE(res);
        CHECK(res->status == 404);

        res = client.Options("/v1/answer");
        REQUIRE(res);
        CHECK(res->status == 204);
        CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
        CHECK_FALSE(res->get_header_value("Access-Control-Allow-Methods").empty());

        server.stop();
        runner.join();
    }
}
