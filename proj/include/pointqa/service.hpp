#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointqa/features.hpp"
#include "pointqa/models.hpp"
#include "pointqa/scene_graph.hpp"

namespace httplib {
class Server;
}

namespace pointqa {

struct AnswerRequest {
    std::string image_id;
    Point point;
    std::string question;
};

struct WeightedBox {
    BoundingBox box;
    double weight = 0;
};

struct ServiceAnswer {
    AnswerDistribution distribution;
    std::vector<WeightedBox> local;
    std::optional<std::vector<WeightedBox>> global;
};

// Answers one validated request. Implementations must be safe to call concurrently.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual ServiceAnswer answer(const AnswerRequest& request, const ImageAnnotation& image) const = 0;
};

// Runs a checkpoint with all_containing selection over the feature store.
class ModelPredictor : public Predictor {
public:
    ModelPredictor(std::shared_ptr<const Model> model, QuestionVocabulary vocab, std::shared_ptr<const FeatureStore> features);
    ServiceAnswer answer(const AnswerRequest& request, const ImageAnnotation& image) const override;

private:
    std::shared_ptr<const Model> model_;
    QuestionVocabulary vocab_;
    std::shared_ptr<const FeatureStore> features_;
};

struct HttpResult {
    int status = 200;
    nlohmann::json body;
};

inline constexpr std::size_t kAttentionTopK = 20;
inline constexpr std::size_t kDefaultPageSize = 20;
inline constexpr std::size_t kMaxPageSize = 1000;

// Stateless request handlers over immutable annotations, features and model.
class InferenceService {
public:
    // features may be null; when given, image ids must also be present there.
    InferenceService(std::shared_ptr<const AnnotationStore> annotations, std::shared_ptr<const FeatureStore> features,
                     std::shared_ptr<const Predictor> predictor);

    HttpResult answer(const std::string& body, bool full) const;
    HttpResult list_images(const std::optional<std::string>& page, const std::optional<std::string>& size) const;
    HttpResult image(const std::string& image_id) const;
    // Deterministic PNG bytes, or nullopt for an unknown id.
    std::optional<std::vector<std::uint8_t>> image_png(const std::string& image_id) const;

    // Registers the routes and CORS handling on server.
    void bind(httplib::Server& server) const;

private:
    const ImageAnnotation* known_image(const std::string& image_id) const;

    std::shared_ptr<const AnnotationStore> annotations_;
    std::shared_ptr<const FeatureStore> features_;
    std::shared_ptr<const Predictor> predictor_;
};

// Attention list sorted by descending weight; ties keep input order.
std::vector<WeightedBox> rank_attention(const std::vector<BoundingBox>& boxes, const std::vector<double>& weights);

// Blocks serving on host:port until the process exits.
void serve(const InferenceService& service, const std::string& host, int port);

}  // namespace pointqa
