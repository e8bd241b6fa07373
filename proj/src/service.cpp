#include "pointqa/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "pointqa/errors.hpp"
#include "pointqa/raster.hpp"

namespace pointqa {

using nlohmann::json;

ModelPredictor::ModelPredictor(std::shared_ptr<const Model> model, QuestionVocabulary vocab,
                               std::shared_ptr<const FeatureStore> features)
    : model_(std::move(model)), vocab_(std::move(vocab)), features_(std::move(features)) {
    if (!model_ || !features_) throw ContractError("model predictor needs a model and a feature store");
}

ServiceAnswer ModelPredictor::answer(const AnswerRequest& request, const ImageAnnotation& image) const {
    const ProposalSet& props = features_->at(request.image_id);
    const std::size_t n = model_->config().num_regions;
    ModelInput input;
    input.tokens = vocab_.encode(request.question);
    const SelectedRegions all = select_regions(props, std::nullopt, std::nullopt, SelectionStrategy::full_image, n);
    input.image = make_region_input(all, image.size(), true);
    const SelectedRegions pt =
        select_regions(props, request.point, std::nullopt, SelectionStrategy::all_containing, n);
    input.point = make_region_input(pt, image.size(), true);
    Prediction pred = model_->predict(input);

    ServiceAnswer out;
    out.distribution = std::move(pred.distribution);
    if (!pred.attention.local.empty()) out.local = rank_attention(input.point.boxes, pred.attention.local);
    if (pred.attention.global) out.global = rank_attention(input.image.boxes, *pred.attention.global);
    return out;
}

std::vector<WeightedBox> rank_attention(const std::vector<BoundingBox>& boxes, const std::vector<double>& weights) {
    if (boxes.size() != weights.size()) throw ContractError("attention weights do not match boxes");
    std::vector<WeightedBox> out;
    out.reserve(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) out.push_back({boxes[i], weights[i]});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
    return out;
}

InferenceService::InferenceService(std::shared_ptr<const AnnotationStore> annotations,
                                   std::shared_ptr<const FeatureStore> features,
                                   std::shared_ptr<const Predictor> predictor)
    : annotations_(std::move(annotations)), features_(std::move(features)), predictor_(std::move(predictor)) {
    if (!annotations_ || !predictor_) throw ContractError("service needs annotations and a predictor");
}

const ImageAnnotation* InferenceService::known_image(const std::string& image_id) const {
    const ImageAnnotation* img = annotations_->find(image_id);
    if (!img) return nullptr;
    if (features_ && !features_->find(image_id)) return nullptr;
    return img;
}

namespace {

HttpResult error(int status, const std::string& message) { return {status, json{{"error", message}}}; }

json attention_json(const std::vector<WeightedBox>& ranked, bool full) {
    json out = json::array();
    const std::size_t n = full ? ranked.size() : std::min(ranked.size(), kAttentionTopK);
    for (std::size_t i = 0; i < n; ++i) out.push_back({{"box", ranked[i].box}, {"weight", ranked[i].weight}});
    return out;
}

std::optional<std::size_t> parse_positive(const std::optional<std::string>& text, std::size_t fallback) {
    if (!text) return fallback;
    if (text->empty() || text->size() > 9 ||
        !std::all_of(text->begin(), text->end(), [](unsigned char c) { return std::isdigit(c); })) {
        return std::nullopt;
    }
    const std::size_t v = std::stoul(*text);
    if (v == 0) return std::nullopt;
    return v;
}

}  // namespace

HttpResult InferenceService::answer(const std::string& body, bool full) const {
    const auto start = std::chrono::steady_clock::now();
    AnswerRequest req;
    try {
        const json j = json::parse(body);
        if (!j.is_object()) return error(400, "body must be a JSON object");
        if (!j.contains("image_id") || !j["image_id"].is_string()) return error(400, "image_id must be a string");
        if (!j.contains("question") || !j["question"].is_string()) return error(400, "question must be a string");
        if (!j.contains("point") || !j["point"].is_object()) return error(400, "point must be an object {x, y}");
        const json& p = j["point"];
        if (!p.contains("x") || !p.contains("y") || !p["x"].is_number_integer() || !p["y"].is_number_integer()) {
            return error(400, "point.x and point.y must be integers");
        }
        req.image_id = j["image_id"].get<std::string>();
        req.question = j["question"].get<std::string>();
        req.point = {p["x"].get<int>(), p["y"].get<int>()};
    } catch (const json::exception& e) {
        return error(400, std::string("malformed body: ") + e.what());
    }
    if (std::all_of(req.question.begin(), req.question.end(), [](unsigned char c) { return std::isspace(c); })) {
        return error(400, "question must be non-empty");
    }
    const ImageAnnotation* img = known_image(req.image_id);
    if (!img) return error(404, "unknown image_id '" + req.image_id + "'");
    if (!within_image(req.point, img->size())) {
        return error(422, "point (" + std::to_string(req.point.x) + ", " + std::to_string(req.point.y) +
                              ") outside image " + std::to_string(img->width) + "x" + std::to_string(img->height));
    }

    ServiceAnswer ans;
    try {
        ans = predictor_->answer(req, *img);
    } catch (const Error& e) {
        return error(500, e.what());
    }
    json scores = json::array();
    std::vector<std::size_t> order(ans.distribution.labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ans.distribution.probs[a] > ans.distribution.probs[b]; });
    for (std::size_t i : order) scores.push_back({{"label", ans.distribution.labels[i]}, {"prob", ans.distribution.probs[i]}});
    json attention = {{"local", attention_json(ans.local, full)}};
    if (ans.global) attention["global"] = attention_json(*ans.global, full);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return {200, json{{"answer", ans.distribution.labels.empty() ? "" : ans.distribution.best()},
                      {"scores", scores},
                      {"attention", attention},
                      {"latency_ms", ms}}};
}

HttpResult InferenceService::list_images(const std::optional<std::string>& page,
                                         const std::optional<std::string>& size) const {
    const auto p = parse_positive(page, 1);
    const auto s = parse_positive(size, kDefaultPageSize);
    if (!p) return error(400, "page must be a positive integer");
    if (!s || *s > kMaxPageSize) return error(400, "size must be an integer in [1, " + std::to_string(kMaxPageSize) + "]");
    std::vector<const ImageAnnotation*> images;
    for (const auto& img : *annotations_) {
        if (!features_ || features_->find(img.image_id)) images.push_back(&img);
    }
    const std::size_t pages = (images.size() + *s - 1) / *s;
    if (*p > std::max<std::size_t>(pages, 1)) return error(400, "page " + std::to_string(*p) + " beyond last page");
    json list = json::array();
    for (std::size_t i = (*p - 1) * *s; i < std::min(images.size(), *p * *s); ++i) {
        list.push_back({{"image_id", images[i]->image_id},
                        {"width", images[i]->width},
                        {"height", images[i]->height},
                        {"thumbnail_uri", "/v1/images/" + images[i]->image_id + ".png"}});
    }
    return {200, json{{"images", list}, {"page", *p}, {"size", *s}, {"total", images.size()}, {"pages", pages}}};
}

std::optional<std::vector<std::uint8_t>> InferenceService::image_png(const std::string& image_id) const {
    const ImageAnnotation* img = known_image(image_id);
    if (!img) return std::nullopt;
    return encode_png(rasterize(*img));
}

HttpResult InferenceService::image(const std::string& image_id) const {
    const ImageAnnotation* img = known_image(image_id);
    if (!img) return error(404, "unknown image_id '" + image_id + "'");
    json body = to_json(*img);
    body["png_base64"] = base64_encode(encode_png(rasterize(*img)));
    return {200, body};
}

void InferenceService::bind(httplib::Server& server) const {
    auto reply = [](httplib::Response& res, const HttpResult& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Post("/v1/answer", [this, reply](const httplib::Request& req, httplib::Response& res) {
        const bool full = req.has_param("full") && req.get_param_value("full") == "1";
        reply(res, answer(req.body, full));
    });
    server.Get("/v1/images", [this, reply](const httplib::Request& req, httplib::Response& res) {
        auto param = [&](const char* name) -> std::optional<std::string> {
            if (!req.has_param(name)) return std::nullopt;
            return req.get_param_value(name);
        };
        reply(res, list_images(param("page"), param("size")));
    });
    server.Get(R"(/v1/images/([^/]+)\.png)", [this, reply](const httplib::Request& req, httplib::Response& res) {
        auto png = image_png(req.matches[1]);
        if (!png) return reply(res, error(404, "unknown image_id '" + std::string(req.matches[1]) + "'"));
        res.set_content(std::string(png->begin(), png->end()), "image/png");
    });
    server.Get(R"(/v1/images/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, image(req.matches[1]));
    });
}

void serve(const InferenceService& service, const std::string& host, int port) {
    httplib::Server server;
    service.bind(server);
    spdlog::info("serving on {}:{}", host, port);
    if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace pointqa
