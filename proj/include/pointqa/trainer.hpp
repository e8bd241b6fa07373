#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointqa/features.hpp"
#include "pointqa/models.hpp"
#include "pointqa/nn/optimizer.hpp"
#include "pointqa/scene_graph.hpp"

namespace pointqa {

struct Example {
    const PointQAInstance* instance = nullptr;
    ModelInput input;
    int label = -1;  // index into the answer vocabulary; -1 when the answer is outside it
};

struct ExampleOptions {
    // Selection for the point stream. Instances without a point (or strategy
    // full_image) fall back to the full image.
    SelectionStrategy strategy = SelectionStrategy::all_containing;
    std::size_t num_regions = 100;
    bool drop_padding = true;
};

struct PreparedExamples {
    std::vector<Example> examples;
    std::size_t fallbacks = 0;  // no proposal contained the point
};

// The returned examples point into dataset, which must outlive them.
PreparedExamples prepare_examples(const Dataset& dataset, const AnnotationStore& annotations,
                                  const FeatureStore& features, const QuestionVocabulary& vocab,
                                  const std::vector<std::string>& answers, const ExampleOptions& options);

struct TrainConfig {
    nn::OptimizerKind optimizer = nn::OptimizerKind::adamax;
    double learning_rate = 0.002;
    bool warmup_decay = false;
    std::size_t patience = 500;
    std::size_t max_iterations = 5000;
    std::size_t batch_size = 64;
    std::size_t eval_interval = 100;
    double clip_norm = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Stops once iteration - best_iteration >= patience. Only strict improvements
// move the best checkpoint.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience);

    // Returns true when value is a new best.
    bool update(std::size_t iteration, double value);
    bool should_stop(std::size_t iteration) const;
    std::size_t best_iteration() const { return best_iteration_; }
    double best_value() const { return best_value_; }
    bool has_best() const { return has_best_; }

private:
    std::size_t patience_;
    std::size_t best_iteration_ = 0;
    double best_value_ = 0;
    bool has_best_ = false;
};

struct TrainLogEntry {
    std::size_t iteration = 0;
    double loss = 0;
    std::optional<double> val_accuracy;
};

struct TrainResult {
    std::vector<TrainLogEntry> log;
    std::size_t iterations = 0;
    std::size_t best_iteration = 0;
    double best_val_accuracy = 0;
    bool stopped_early = false;
    double cpu_seconds = 0;
};

// Minimizes mean cross-entropy over shuffled mini-batches, checks val accuracy
// every eval_interval iterations and at the end, and leaves the model holding
// the best-val parameters. Throws TrainingDiverged on a non-finite loss.
TrainResult train(Model& model, const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                  const TrainConfig& config);

void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogEntry>& log);

struct Cell {
    std::size_t correct = 0;
    std::size_t total = 0;

    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
    void add(bool ok) {
        ++total;
        if (ok) ++correct;
    }
};

struct EvalRecord {
    std::string qa_id;
    std::string question;
    std::string label;
    std::string prediction;
    bool correct = false;
    std::optional<double> max_local;
    std::optional<double> max_global;
    std::optional<double> max_local_area;  // area of the box with the largest local weight
};

struct EvalReport {
    Cell overall;
    // breakdown name (category, answer, question_form, task) -> value -> cell
    std::map<std::string, std::map<std::string, Cell>> breakdowns;
    std::optional<double> mean_max_local;
    std::optional<double> mean_max_global;
    std::optional<double> median_max_local_area;
    std::size_t fallbacks = 0;
    std::vector<EvalRecord> records;

    double accuracy() const { return overall.accuracy(); }
    nlohmann::json to_json(bool include_records = false) const;
};

// Builds the report from (instance, prediction) pairs; attention fields stay empty.
EvalReport score_predictions(const std::vector<const PointQAInstance*>& instances,
                             const std::vector<std::string>& predictions);

// Throws ContractError on an empty example set. jobs > 1 shards the examples;
// the report does not depend on jobs.
EvalReport evaluate(const Model& model, const std::vector<Example>& examples, std::size_t jobs = 1);
double accuracy(const Model& model, const std::vector<Example>& examples);

EvalReport evaluate_modal_baseline(const Dataset& dataset, const std::map<std::string, std::size_t>& train_freq);

}  // namespace pointqa
