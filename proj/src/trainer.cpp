#include "pointqa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "pointqa/errors.hpp"
#include "pointqa/random.hpp"

namespace pointqa {

PreparedExamples prepare_examples(const Dataset& dataset, const AnnotationStore& annotations,
                                  const FeatureStore& features, const QuestionVocabulary& vocab,
                                  const std::vector<std::string>& answers, const ExampleOptions& options) {
    std::map<std::string, int> label_of;
    for (std::size_t i = 0; i < answers.size(); ++i) label_of.emplace(answers[i], static_cast<int>(i));
    PreparedExamples out;
    out.examples.reserve(dataset.size());
    for (const auto& inst : dataset) {
        const ImageAnnotation& img = annotations.at(inst.image_id);
        const ProposalSet& props = features.at(inst.image_id);
        Example ex;
        ex.instance = &inst;
        ex.input.tokens = vocab.encode(inst.question);
        const SelectedRegions all =
            select_regions(props, std::nullopt, std::nullopt, SelectionStrategy::full_image, options.num_regions);
        ex.input.image = make_region_input(all, img.size(), options.drop_padding);
        SelectionStrategy s = options.strategy;
        if ((s != SelectionStrategy::gt_box && !inst.point) || (s == SelectionStrategy::gt_box && !inst.gt_box)) {
            s = SelectionStrategy::full_image;
        }
        if (s == SelectionStrategy::full_image) {
            ex.input.point = ex.input.image;
        } else {
            const SelectedRegions pt = select_regions(props, inst.point, inst.gt_box, s, options.num_regions);
            if (pt.fallback) ++out.fallbacks;
            ex.input.point = make_region_input(pt, img.size(), options.drop_padding);
        }
        auto it = label_of.find(inst.answer);
        ex.label = it == label_of.end() ? -1 : it->second;
        out.examples.push_back(std::move(ex));
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"optimizer", nn::to_string(c.optimizer)},
            {"learning_rate", c.learning_rate},
            {"warmup_decay", c.warmup_decay},
            {"patience", c.patience},
            {"max_iterations", c.max_iterations},
            {"batch_size", c.batch_size},
            {"eval_interval", c.eval_interval},
            {"clip_norm", c.clip_norm},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    try {
        TrainConfig c;
        if (j.contains("optimizer")) c.optimizer = nn::parse_optimizer(j.at("optimizer").get<std::string>());
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.warmup_decay = j.value("warmup_decay", c.warmup_decay);
        c.patience = j.value("patience", c.patience);
        c.max_iterations = j.value("max_iterations", c.max_iterations);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.eval_interval = j.value("eval_interval", c.eval_interval);
        c.clip_norm = j.value("clip_norm", c.clip_norm);
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad train config: ") + e.what());
    }
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be >= 1");
}

bool EarlyStopping::update(std::size_t iteration, double value) {
    if (has_best_ && value <= best_value_) return false;
    has_best_ = true;
    best_value_ = value;
    best_iteration_ = iteration;
    return true;
}

bool EarlyStopping::should_stop(std::size_t iteration) const {
    return has_best_ && iteration - best_iteration_ >= patience_;
}

double accuracy(const Model& model, const std::vector<Example>& examples) {
    if (examples.empty()) throw ContractError("accuracy over an empty example set");
    std::size_t correct = 0;
    for (const auto& ex : examples) {
        if (ex.label >= 0 && static_cast<int>(model.predict(ex.input).distribution.argmax()) == ex.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainResult train(Model& model, const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                  const TrainConfig& config) {
    config.validate();
    const int answers = static_cast<int>(model.config().answers.size());
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        if (train_set[i].label >= answers) throw ContractError("training label outside the model's answer vocabulary");
        if (train_set[i].label >= 0) order.push_back(i);
    }
    if (order.empty()) throw ContractError("no trainable examples");
    for (const auto& ex : val_set) {
        if (ex.label >= answers) throw ContractError("validation label outside the model's answer vocabulary");
    }

    const std::clock_t start = std::clock();
    auto& params = model.parameters();
    nn::Optimizer opt(params, {config.optimizer, config.learning_rate, 0.9, 0.999, 1e-8, config.clip_norm});
    Rng rng(config.seed);
    std::size_t pos = order.size();
    EarlyStopping stopper(config.patience);
    std::vector<nn::Matrix> best;
    auto snapshot = [&] {
        best.clear();
        for (const auto& p : params) best.push_back(p.value);
    };

    TrainResult result;
    const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
    for (std::size_t it = 1; it <= config.max_iterations; ++it) {
        nn::Gradients grads = nn::zero_gradients(params);
        double loss = 0;
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            if (pos == order.size()) {
                shuffle(order, rng);
                pos = 0;
            }
            const Example& ex = train_set[order[pos++]];
            nn::Tape tape(&params);
            const ForwardOutput out = model.forward(tape, ex.input);
            const nn::Var l = nn::softmax_cross_entropy(out.logits, ex.label);
            loss += l.value()(0, 0);
            tape.backward(l);
            tape.accumulate(grads, inv_batch);
        }
        loss *= inv_batch;
        if (!std::isfinite(loss)) {
            throw TrainingDiverged("loss is " + std::to_string(loss) + " at iteration " + std::to_string(it));
        }
        const double lr = config.warmup_decay ? nn::warmup_decay_rate(config.learning_rate, it, config.max_iterations)
                                              : config.learning_rate;
        opt.step(params, grads, lr);

        TrainLogEntry entry{it, loss, std::nullopt};
        result.iterations = it;
        if (!val_set.empty() && (it % config.eval_interval == 0 || it == config.max_iterations)) {
            const double acc = accuracy(model, val_set);
            entry.val_accuracy = acc;
            if (stopper.update(it, acc)) snapshot();
            spdlog::debug("iteration {} loss {:.4f} val {:.4f}", it, loss, acc);
        }
        result.log.push_back(entry);
        if (stopper.should_stop(it)) {
            result.stopped_early = true;
            break;
        }
    }
    if (!best.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i].value = best[i];
        result.best_iteration = stopper.best_iteration();
        result.best_val_accuracy = stopper.best_value();
    }
    result.cpu_seconds = static_cast<double>(std::clock() - start) / CLOCKS_PER_SEC;
    return result;
}

void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogEntry>& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& e : log) {
        nlohmann::json j = {{"iteration", e.iteration}, {"loss", e.loss}, {"val_accuracy", nullptr}};
        if (e.val_accuracy) j["val_accuracy"] = *e.val_accuracy;
        out << j.dump() << '\n';
    }
}

namespace {

nlohmann::json cell_json(const Cell& c) {
    return {{"correct", c.correct}, {"total", c.total}, {"accuracy", c.accuracy()}};
}

void add_breakdowns(EvalReport& report, const PointQAInstance& inst, bool ok) {
    report.breakdowns["task"][inst.meta.task].add(ok);
    report.breakdowns["answer"][inst.answer].add(ok);
    if (inst.meta.category) report.breakdowns["category"][*inst.meta.category].add(ok);
    if (inst.meta.question_form) report.breakdowns["question_form"][*inst.meta.question_form].add(ok);
}

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::optional<double> median_of(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

nlohmann::json EvalReport::to_json(bool include_records) const {
    nlohmann::json j;
    j["overall"] = cell_json(overall);
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [name, cells] : breakdowns) {
        for (const auto& [value, cell] : cells) b[name][value] = cell_json(cell);
    }
    j["breakdowns"] = b;
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    j["attention"] = {{"mean_max_local", opt(mean_max_local)},
                      {"mean_max_global", opt(mean_max_global)},
                      {"median_max_local_area", opt(median_max_local_area)}};
    j["fallbacks"] = fallbacks;
    if (include_records) {
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : records) {
            recs.push_back({{"qa_id", r.qa_id},
                            {"question", r.question},
                            {"label", r.label},
                            {"prediction", r.prediction},
                            {"correct", r.correct}});
        }
        j["records"] = recs;
    }
    return j;
}

EvalReport score_predictions(const std::vector<const PointQAInstance*>& instances,
                             const std::vector<std::string>& predictions) {
    if (instances.empty()) throw ContractError("evaluation over an empty dataset");
    if (instances.size() != predictions.size()) throw ContractError("prediction count mismatch");
    EvalReport report;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = *instances[i];
        const bool ok = predictions[i] == inst.answer;
        report.overall.add(ok);
        add_breakdowns(report, inst, ok);
        report.records.push_back({inst.qa_id, inst.question, inst.answer, predictions[i], ok, {}, {}, {}});
    }
    return report;
}

EvalReport evaluate(const Model& model, const std::vector<Example>& examples, std::size_t jobs) {
    if (examples.empty()) throw ContractError("evaluation over an empty dataset");
    std::vector<EvalRecord> records(examples.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Example& ex = examples[i];
            const Prediction p = model.predict(ex.input);
            EvalRecord& r = records[i];
            r.qa_id = ex.instance->qa_id;
            r.question = ex.instance->question;
            r.label = ex.instance->answer;
            r.prediction = p.distribution.best();
            r.correct = r.prediction == r.label;
            const auto& local = p.attention.local;
            if (!local.empty()) {
                const auto best = static_cast<std::size_t>(std::max_element(local.begin(), local.end()) - local.begin());
                r.max_local = local[best];
                if (best < ex.input.point.boxes.size()) r.max_local_area = ex.input.point.boxes[best].area();
            }
            if (p.attention.global && !p.attention.global->empty()) {
                r.max_global = *std::max_element(p.attention.global->begin(), p.attention.global->end());
            }
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, examples.size()));
    if (jobs == 1) {
        work(0, examples.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (examples.size() + jobs - 1) / jobs;
        for (std::size_t j = 0; j < jobs; ++j) {
            const std::size_t begin = j * chunk, end = std::min(examples.size(), begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    EvalReport report;
    std::vector<double> max_local, max_global, areas;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const EvalRecord& r = records[i];
        report.overall.add(r.correct);
        add_breakdowns(report, *examples[i].instance, r.correct);
        if (r.max_local) max_local.push_back(*r.max_local);
        if (r.max_global) max_global.push_back(*r.max_global);
        if (r.max_local_area) areas.push_back(*r.max_local_area);
    }
    report.mean_max_local = mean_of(max_local);
    report.mean_max_global = mean_of(max_global);
    report.median_max_local_area = median_of(areas);
    report.records = std::move(records);
    return report;
}

EvalReport evaluate_modal_baseline(const Dataset& dataset, const std::map<std::string, std::size_t>& train_freq) {
    std::vector<const PointQAInstance*> instances;
    std::vector<std::string> predictions;
    for (const auto& inst : dataset) {
        instances.push_back(&inst);
        predictions.push_back(baseline_modal_answer(inst, train_freq));
    }
    return score_predictions(instances, predictions);
}

}  // namespace pointqa
