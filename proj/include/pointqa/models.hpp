#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointqa/features.hpp"
#include "pointqa/instance.hpp"
#include "pointqa/nn/layers.hpp"

namespace pointqa {

enum class Architecture { pythia_local, pythia_global, mcan, lxmert };
enum class Streams { q_only, image_q, point_q, two_stream, three_stream };

std::string to_string(Architecture a);
std::string to_string(Streams s);
Architecture parse_architecture(const std::string& name);
Streams parse_streams(const std::string& name);

struct ModelConfig {
    Architecture architecture = Architecture::pythia_local;
    Streams streams = Streams::point_q;
    int d = 256;
    int heads = 4;
    int mcan_layers = 2;       // L
    int language_layers = 5;   // N_L
    int image_layers = 3;      // N_Img
    int point_layers = 3;      // N_Pt
    int cross_layers = 3;      // N_X
    int feature_dim = 0;       // D of the proposal features
    int vocab_size = 0;        // question vocabulary, reserved ids included
    std::size_t num_regions = 100;  // N
    std::vector<std::string> answers;
    std::uint64_t seed = 0;

    // Width of a region row: D + 5 geometry values + 1 point indicator.
    int region_dim() const { return feature_dim + 6; }
    // Throws ConfigError.
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Word-level vocabulary with reserved ids for padding, unknown words and [CLS].
class QuestionVocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnknown = 1;
    static constexpr int kCls = 2;

    QuestionVocabulary();
    explicit QuestionVocabulary(const std::vector<std::string>& words);
    static QuestionVocabulary build(const Dataset& data);

    int id(const std::string& word) const;
    std::vector<int> encode(const std::string& question) const;
    const std::vector<std::string>& words() const { return words_; }
    int size() const { return static_cast<int>(words_.size()); }

private:
    std::vector<std::string> words_;
    std::map<std::string, int> index_;
};

// Sorted answer labels observed in the data.
std::vector<std::string> answer_vocabulary(const Dataset& data);

// Model-ready region rows: features, normalized geometry and the point indicator.
struct RegionInput {
    nn::Matrix features;  // rows x region_dim, padding rows exactly zero
    nn::Mask mask;
    std::vector<BoundingBox> boxes;

    std::size_t rows() const { return mask.size(); }
};

// drop_padding keeps only the valid rows (the masked result is identical).
RegionInput make_region_input(const SelectedRegions& regions, ImageSize image, bool drop_padding = false);

struct ModelInput {
    std::vector<int> tokens;
    RegionInput image;  // full-image proposals
    RegionInput point;  // point-selected proposals
};

struct AnswerDistribution {
    std::vector<std::string> labels;
    std::vector<double> probs;

    std::size_t argmax() const;
    const std::string& best() const { return labels[argmax()]; }
};

// local: weights over the point rows; global: over the image rows. Transformer
// variants add head-averaged cross-attention matrices per layer.
struct AttentionRecord {
    std::vector<double> local;
    std::optional<std::vector<double>> global;
    std::vector<nn::Matrix> per_layer;
};

struct Prediction {
    AnswerDistribution distribution;
    AttentionRecord attention;
};

enum class Modality { question, image, point };

struct StreamState {
    nn::Var vectors;
    nn::Mask mask;
    Modality modality = Modality::question;
};

// Cross-attention block whose keys and values come from the row-wise
// concatenation of the context streams, followed by the feed-forward sublayer.
struct CrossAttendLayer {
    nn::AttentionSublayer cross;
    nn::FeedForwardSublayer ffn;

    static CrossAttendLayer create(nn::ParameterSet& ps, const std::string& name, int dim, int heads, Rng& rng);
    StreamState operator()(nn::Tape& t, const StreamState& target, const std::vector<StreamState>& contexts,
                           std::vector<nn::Matrix>* probs = nullptr) const;
};

// Pythia-style attention: relu projections of the stream and the query (and an
// optional extra conditioning vector) multiplied elementwise, scored by two
// fully-connected layers, softmax over valid rows, weighted sum of raw rows.
struct AttendBlock {
    nn::Linear stream_proj, query_proj, hidden, score;
    std::optional<nn::Linear> extra_proj;

    static AttendBlock create(nn::ParameterSet& ps, const std::string& name, int stream_dim, int query_dim, int d,
                              std::optional<int> extra_dim, Rng& rng);
    struct Result {
        nn::Var pooled;   // 1 x stream_dim
        nn::Var weights;  // 1 x rows
    };
    Result operator()(nn::Tape& t, nn::Var query, nn::Var stream, const nn::Mask& mask,
                      std::optional<nn::Var> extra = std::nullopt) const;
};

struct ForwardOutput {
    nn::Var logits;  // 1 x |answers|
    AttentionRecord attention;
};

class Model {
public:
    explicit Model(ModelConfig config);
    virtual ~Model() = default;

    const ModelConfig& config() const { return config_; }
    nn::ParameterSet& parameters() { return params_; }
    const nn::ParameterSet& parameters() const { return params_; }

    // Pythia: 1 x d final GRU state. Transformers: T x d token states.
    // Throws ContractError for an empty sequence.
    virtual nn::Var encode_question(nn::Tape& t, const std::vector<int>& tokens) const = 0;
    virtual ForwardOutput forward(nn::Tape& t, const ModelInput& input) const = 0;

    Prediction predict(const ModelInput& input) const;

protected:
    std::vector<int> clamp_tokens(const std::vector<int>& tokens) const;

    ModelConfig config_;
    nn::ParameterSet params_;
};

std::unique_ptr<Model> make_model(const ModelConfig& config);

// Mode of the training answer frequencies restricted to the instance's answer
// set; ties go to the lexicographically smallest answer.
std::string baseline_modal_answer(const PointQAInstance& instance, const std::map<std::string, std::size_t>& train_freq);
std::map<std::string, std::size_t> answer_frequencies(const Dataset& data);

}  // namespace pointqa
