#include "pointqa/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "pointqa/analysis.hpp"
#include "pointqa/checkpoint.hpp"
#include "pointqa/errors.hpp"
#include "pointqa/general_builder.hpp"
#include "pointqa/local_builder.hpp"
#include "pointqa/looktwice_builder.hpp"
#include "pointqa/service.hpp"
#include "pointqa/synth_world.hpp"
#include "pointqa/trainer.hpp"
#include "pointqa/verbal_spatial_builder.hpp"
#include "pointqa/verify.hpp"

namespace pointqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void init_logging() {
    static bool done = false;
    if (done) return;
    done = true;
    auto logger = spdlog::stderr_color_mt("pointqa");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("PQA_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(level));
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void write_string_map(const fs::path& path, const std::map<std::string, std::string>& m) {
    write_json_file(path, json(m));
}

std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// Dataset directory layout shared by synth, train, evaluate and the analyses.
struct DataDir {
    fs::path dir;
    std::string annotations;
    std::string features;
    std::string task;

    fs::path annotations_path() const { return annotations.empty() ? dir / "annotations.jsonl" : fs::path(annotations); }
    fs::path features_path() const { return features.empty() ? dir / "features" : fs::path(features); }

    std::string resolved_task() const {
        if (!task.empty()) return task;
        for (const char* prefix : {"local", "looktwice", "general", "ds"}) {
            if (!std::filesystem::is_directory(dir)) break;
            for (const auto& e : fs::directory_iterator(dir)) {
                const std::string name = e.path().filename().string();
                if (name.rfind(std::string(prefix) + ".", 0) == 0 && e.path().extension() == ".jsonl") return prefix;
            }
        }
        throw IoError("no dataset split files found in " + dir.string());
    }
};

void add_data_options(CLI::App* cmd, DataDir& d) {
    cmd->add_option("--data", d.dir, "Dataset directory")->required();
    cmd->add_option("--annotations", d.annotations, "Annotation JSONL (default: DATA/annotations.jsonl)");
    cmd->add_option("--features", d.features, "Feature directory (default: DATA/features)");
    cmd->add_option("--task", d.task, "Split file prefix (default: detected)");
}

struct LoadedData {
    std::shared_ptr<AnnotationStore> annotations;
    std::shared_ptr<FeatureStore> features;
    Dataset dataset;
};

LoadedData load_data(const DataDir& d) {
    LoadedData out;
    out.dataset = read_split_files(d.dir, d.resolved_task());
    out.annotations = std::make_shared<AnnotationStore>(load_annotations(d.annotations_path()));
    out.features = std::make_shared<FeatureStore>(FeatureStore::load(d.features_path()));
    return out;
}

json build_output(const BuildReport& report, const VerifyReport& checks, const std::vector<fs::path>& files) {
    json written = json::array();
    for (const auto& f : files) written.push_back(f.filename().string());
    json j = report.to_json();
    j["constraints"] = checks.to_json();
    j["files"] = written;
    return j;
}

int finish_build(std::ostream& out, const fs::path& dir, const json& report, bool passed) {
    write_json_file(dir / "report.json", report);
    out << "wrote " << (dir / "report.json").string() << "\n";
    if (!passed) throw ContractError("built dataset failed its constraint checks; see report.json");
    return 0;
}

std::vector<Split> splits_of(const Dataset& data, std::vector<Split> order) {
    std::set<Split> present;
    for (const auto& inst : data) present.insert(inst.split);
    std::vector<Split> out;
    for (Split s : order) {
        if (present.contains(s)) out.push_back(s);
    }
    return out;
}

Streams default_streams(Architecture a) {
    return a == Architecture::pythia_local ? Streams::point_q : Streams::three_stream;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct EvalArgs {
    DataDir data;
    std::string checkpoint;
    std::string split = "val";
    std::string strategy = "all_containing";
    std::size_t jobs = default_jobs();
};

std::vector<Example> eval_examples(const LoadedData& loaded, const LoadedModel& lm, const Dataset& subset,
                                   const std::string& strategy, std::size_t* fallbacks = nullptr) {
    ExampleOptions opts;
    opts.strategy = parse_strategy(strategy);
    opts.num_regions = lm.model->config().num_regions;
    auto prepared =
        prepare_examples(subset, *loaded.annotations, *loaded.features, lm.vocabulary, lm.model->config().answers, opts);
    if (fallbacks) *fallbacks = prepared.fallbacks;
    return std::move(prepared.examples);
}

Dataset require_split(const Dataset& data, const std::string& split) {
    Dataset subset = filter_split(data, parse_split(split));
    if (subset.empty()) throw ContractError("split '" + split + "' is empty");
    return subset;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    init_logging();
    CLI::App app{"Point-conditioned visual question answering toolkit", "pointqa"};
    app.require_subcommand(1);
    std::function<int()> action;

    // build-local
    struct {
        std::string annotations, taxonomy, synonyms, out;
        std::uint64_t seed = 0;
        double iou = 0.2;
        std::size_t top_k = 100;
    } bl;
    auto* cmd = app.add_subcommand("build-local", "Build the Local dataset");
    cmd->add_option("--annotations", bl.annotations)->required();
    cmd->add_option("--taxonomy", bl.taxonomy, "Attribute -> category JSON map")->required();
    cmd->add_option("--synonyms", bl.synonyms, "Attribute synonym JSON map")->required();
    cmd->add_option("--out", bl.out)->required();
    cmd->add_option("--seed", bl.seed);
    cmd->add_option("--iou-threshold", bl.iou);
    cmd->add_option("--top-k", bl.top_k);
    cmd->callback([&] {
        action = [&] {
            const auto store = load_annotations(bl.annotations);
            LocalBuilderConfig c;
            c.iou_threshold = bl.iou;
            c.seed = bl.seed;
            c.taxonomy = build_taxonomy(store, bl.top_k, load_string_map(bl.synonyms), load_string_map(bl.taxonomy));
            auto r = build_local_dataset(store, c);
            const auto files = write_split_files(bl.out, "local", r.dataset,
                                                 {Split::train, Split::val, Split::test_dev, Split::test_final});
            VerifyReport checks;
            checks.append(check_local(r.dataset, bl.iou));
            json report = build_output(r.report, checks, files);
            report["taxonomy"] = {{"uncategorized", c.taxonomy.uncategorized}, {"dropped_size", c.taxonomy.dropped_size}};
            return finish_build(out, bl.out, report, checks.passed());
        };
    });

    // build-looktwice
    struct {
        std::string annotations, supercategories, out;
        std::uint64_t seed = 0;
        LookTwiceConfig config;
    } blt;
    cmd = app.add_subcommand("build-looktwice", "Build the LookTwice dataset");
    cmd->add_option("--annotations", blt.annotations)->required();
    cmd->add_option("--supercategories", blt.supercategories, "Class -> beings|vehicles|objects JSON map")->required();
    cmd->add_option("--out", blt.out)->required();
    cmd->add_option("--seed", blt.seed);
    cmd->add_option("--min-class-frequency", blt.config.min_class_frequency);
    cmd->add_option("--dedup-iou", blt.config.dedup_iou);
    cmd->add_option("--val-fraction", blt.config.val_fraction);
    cmd->add_option("--test-fraction", blt.config.test_fraction);
    cmd->callback([&] {
        action = [&] {
            const auto store = load_annotations(blt.annotations);
            blt.config.seed = blt.seed;
            blt.config.supercategory_of = load_string_map(blt.supercategories);
            auto r = build_looktwice_dataset(store, blt.config);
            const auto files = write_split_files(blt.out, "looktwice", r.dataset, {Split::train, Split::val, Split::test});
            VerifyReport checks;
            checks.append(check_looktwice(r.dataset));
            return finish_build(out, blt.out, build_output(r.report, checks, files), checks.passed());
        };
    });

    // build-general
    struct {
        std::string annotations, out;
        std::uint64_t seed = 0;
    } bg;
    cmd = app.add_subcommand("build-general", "Build the General dataset");
    cmd->add_option("--annotations", bg.annotations)->required();
    cmd->add_option("--out", bg.out)->required();
    cmd->add_option("--seed", bg.seed);
    cmd->callback([&] {
        action = [&] {
            const auto store = load_annotations(bg.annotations);
            GeneralBuilderConfig c;
            c.seed = bg.seed;
            auto r = build_general_dataset(store, c);
            const auto files = write_split_files(bg.out, "general", r.dataset, {Split::train, Split::val, Split::test});
            VerifyReport checks;
            checks.append(check_general(r.dataset));
            return finish_build(out, bg.out, build_output(r.report, checks, files), checks.passed());
        };
    });

    // build-verbal-spatial
    struct {
        std::string annotations, out;
        std::uint64_t seed = 0;
    } bvs;
    cmd = app.add_subcommand("build-verbal-spatial", "Build the paired verbal (dv) and spatial (ds) datasets");
    cmd->add_option("--annotations", bvs.annotations)->required();
    cmd->add_option("--out", bvs.out)->required();
    cmd->add_option("--seed", bvs.seed);
    cmd->callback([&] {
        action = [&] {
            const auto store = load_annotations(bvs.annotations);
            VerbalSpatialConfig c;
            c.seed = bvs.seed;
            auto r = build_dv_ds(store, c);
            const std::vector<Split> splits = {Split::train, Split::val, Split::test};
            auto files = write_split_files(bvs.out, "dv", r.verbal, splits);
            const auto ds_files = write_split_files(bvs.out, "ds", r.spatial, splits);
            files.insert(files.end(), ds_files.begin(), ds_files.end());
            VerifyReport checks;
            checks.append(check_verbal_spatial(r.verbal, r.spatial));
            return finish_build(out, bvs.out, build_output(r.report, checks, files), checks.passed());
        };
    });

    // synth
    struct {
        std::string config, out;
        std::optional<std::uint64_t> seed;
        std::optional<std::string> scenario;
        std::optional<std::size_t> num_images;
        SynthBuildOptions build;
    } sy;
    cmd = app.add_subcommand("synth", "Generate a synthetic world and its task dataset");
    cmd->add_option("--config", sy.config, "World config JSON");
    cmd->add_option("--scenario", sy.scenario, "local|count|compare (overrides the config)");
    cmd->add_option("--images", sy.num_images, "Number of images (overrides the config)");
    cmd->add_option("--out", sy.out)->required();
    cmd->add_option("--seed", sy.seed, "World and build seed (overrides the config)");
    cmd->add_option("--iou-threshold", sy.build.iou_threshold);
    cmd->add_option("--min-class-frequency", sy.build.min_class_frequency);
    cmd->add_option("--val-fraction", sy.build.val_fraction);
    cmd->add_option("--test-fraction", sy.build.test_fraction);
    cmd->callback([&] {
        action = [&] {
            json j = sy.config.empty() ? json::object() : read_json_file(sy.config);
            if (sy.scenario) j["scenario"] = *sy.scenario;
            if (sy.num_images) j["num_images"] = *sy.num_images;
            if (sy.seed) j["seed"] = *sy.seed;
            const SynthWorldConfig config = synth_config_from_json(j);
            const SynthWorld world = synth_world_generate(config);
            const fs::path dir = sy.out;
            fs::create_directories(dir);
            write_annotations(dir / "annotations.jsonl", world.annotations);
            world.features.save(dir / "features");
            write_string_map(dir / "category_map.json", world.category_map());
            write_string_map(dir / "synonym_map.json", {});
            write_string_map(dir / "supercategories.json", world.supercategory_map());
            write_json_file(dir / "world.json", to_json(config));

            sy.build.seed = config.seed;
            SynthDataset built = build_synth_dataset(world, sy.build);
            std::vector<Split> order = {Split::train, Split::val, Split::test_dev, Split::test_final, Split::test};
            const auto files = write_split_files(dir, built.prefix, built.dataset, splits_of(built.dataset, order));
            VerifyReport checks;
            if (built.prefix == "local") checks.append(check_local(built.dataset, sy.build.iou_threshold));
            if (built.prefix == "looktwice") checks.append(check_looktwice(built.dataset));
            if (built.prefix == "general") checks.append(check_general(built.dataset));
            json report = build_output(built.report, checks, files);
            report["world"] = {{"images", world.annotations.size()}, {"scenario", to_string(config.scenario)}};
            return finish_build(out, dir, report, checks.passed());
        };
    });

    // train
    struct {
        DataDir data;
        std::string arch, streams, strategy = "all_containing", out, model_config, train_config;
        std::optional<int> d, heads;
        std::optional<std::size_t> num_regions, iterations, batch, patience, eval_interval;
        std::optional<double> lr;
        std::optional<std::string> optimizer;
        std::uint64_t seed = 0;
        std::size_t jobs = default_jobs();
    } tr;
    cmd = app.add_subcommand("train", "Train a model on a dataset directory");
    add_data_options(cmd, tr.data);
    cmd->add_option("--arch", tr.arch, "pythia_local|pythia_global|mcan|lxmert")->required();
    cmd->add_option("--streams", tr.streams, "q_only|image_q|point_q|two_stream|three_stream");
    cmd->add_option("--strategy", tr.strategy, "Point-stream proposal selection");
    cmd->add_option("--out", tr.out)->required();
    cmd->add_option("--model-config", tr.model_config, "JSON with model hyperparameters");
    cmd->add_option("--train-config", tr.train_config, "JSON with training hyperparameters");
    cmd->add_option("--d", tr.d);
    cmd->add_option("--heads", tr.heads);
    cmd->add_option("--num-regions", tr.num_regions);
    cmd->add_option("--iterations", tr.iterations);
    cmd->add_option("--batch", tr.batch);
    cmd->add_option("--patience", tr.patience);
    cmd->add_option("--eval-interval", tr.eval_interval);
    cmd->add_option("--lr", tr.lr);
    cmd->add_option("--optimizer", tr.optimizer, "adamax|adam");
    cmd->add_option("--seed", tr.seed);
    cmd->add_option("--jobs", tr.jobs);
    cmd->callback([&] {
        action = [&] {
            const LoadedData loaded = load_data(tr.data);
            const Dataset train_set = require_split(loaded.dataset, "train");
            const Dataset val_set = require_split(loaded.dataset, "val");

            json mj = tr.model_config.empty() ? json::object() : read_json_file(tr.model_config);
            const Architecture arch = parse_architecture(tr.arch);
            mj["architecture"] = to_string(arch);
            if (!tr.streams.empty()) mj["streams"] = tr.streams;
            if (!mj.contains("streams")) mj["streams"] = to_string(default_streams(arch));
            if (tr.d) mj["d"] = *tr.d;
            if (tr.heads) mj["heads"] = *tr.heads;
            if (tr.num_regions) mj["num_regions"] = *tr.num_regions;
            const QuestionVocabulary vocab = QuestionVocabulary::build(train_set);
            mj["feature_dim"] = loaded.features->dim();
            mj["vocab_size"] = vocab.size();
            mj["answers"] = answer_vocabulary(train_set);
            mj["seed"] = tr.seed;
            const ModelConfig mc = model_config_from_json(mj);

            json tj = tr.train_config.empty() ? json::object() : read_json_file(tr.train_config);
            if (tr.iterations) tj["max_iterations"] = *tr.iterations;
            if (tr.batch) tj["batch_size"] = *tr.batch;
            if (tr.patience) tj["patience"] = *tr.patience;
            if (tr.eval_interval) tj["eval_interval"] = *tr.eval_interval;
            if (tr.lr) tj["learning_rate"] = *tr.lr;
            if (tr.optimizer) tj["optimizer"] = *tr.optimizer;
            tj["seed"] = tr.seed;
            const TrainConfig tc = train_config_from_json(tj);

            ExampleOptions opts;
            opts.strategy = parse_strategy(tr.strategy);
            opts.num_regions = mc.num_regions;
            const auto train_ex =
                prepare_examples(train_set, *loaded.annotations, *loaded.features, vocab, mc.answers, opts);
            const auto val_ex = prepare_examples(val_set, *loaded.annotations, *loaded.features, vocab, mc.answers, opts);
            auto model = make_model(mc);
            const TrainResult result = train(*model, train_ex.examples, val_ex.examples, tc);
            const EvalReport val_report = evaluate(*model, val_ex.examples, tr.jobs);

            const fs::path dir = tr.out;
            fs::create_directories(dir);
            save_checkpoint(dir / "model.pqck", *model, vocab);
            write_train_log(dir / "train_log.jsonl", result.log);
            write_json_file(dir / "train_result.json",
                            {{"model", to_json(mc)},
                             {"train", to_json(tc)},
                             {"strategy", tr.strategy},
                             {"iterations", result.iterations},
                             {"best_iteration", result.best_iteration},
                             {"best_val_accuracy", result.best_val_accuracy},
                             {"stopped_early", result.stopped_early},
                             {"fallbacks", train_ex.fallbacks + val_ex.fallbacks},
                             {"val", val_report.to_json()}});
            // CPU time stays out of the result file so that fixed-seed runs are byte-identical.
            out << "val accuracy " << val_report.accuracy() << " after " << result.iterations << " iterations ("
                << result.cpu_seconds << " CPU s)\n";
            return 0;
        };
    });

    // evaluate
    EvalArgs ev;
    std::string ev_out, ev_baseline;
    bool ev_records = false;
    cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint or baseline on one split");
    add_data_options(cmd, ev.data);
    cmd->add_option("--checkpoint", ev.checkpoint);
    cmd->add_option("--baseline", ev_baseline, "modal: most frequent train answer within the answer set");
    cmd->add_option("--split", ev.split);
    cmd->add_option("--strategy", ev.strategy);
    cmd->add_option("--jobs", ev.jobs);
    cmd->add_option("--out", ev_out)->required();
    cmd->add_flag("--records", ev_records, "Include per-instance records");
    cmd->callback([&] {
        action = [&] {
            EvalReport report;
            if (!ev_baseline.empty()) {
                if (ev_baseline != "modal") throw ConfigError("unknown baseline '" + ev_baseline + "'");
                const Dataset data = read_split_files(ev.data.dir, ev.data.resolved_task());
                report = evaluate_modal_baseline(require_split(data, ev.split),
                                                 answer_frequencies(filter_split(data, Split::train)));
            } else {
                if (ev.checkpoint.empty()) throw ConfigError("evaluate needs --checkpoint or --baseline");
                const LoadedData loaded = load_data(ev.data);
                const LoadedModel lm = load_checkpoint(ev.checkpoint);
                const Dataset subset = require_split(loaded.dataset, ev.split);
                std::size_t fallbacks = 0;
                const auto examples = eval_examples(loaded, lm, subset, ev.strategy, &fallbacks);
                report = evaluate(*lm.model, examples, ev.jobs);
                report.fallbacks = fallbacks;
            }
            write_json_file(ev_out, report.to_json(ev_records));
            out << "accuracy " << report.accuracy() << " on " << report.overall.total << " instances\n";
            return 0;
        };
    });

    // analyze-attention
    EvalArgs aa;
    std::string aa_out, swap_from, swap_to;
    cmd = app.add_subcommand("analyze-attention", "Attention statistics, optionally under a question swap");
    add_data_options(cmd, aa.data);
    cmd->add_option("--checkpoint", aa.checkpoint)->required();
    cmd->add_option("--split", aa.split);
    cmd->add_option("--strategy", aa.strategy);
    cmd->add_option("--swap-from", swap_from, "Template with an {object} slot");
    cmd->add_option("--swap-to", swap_to, "Replacement template with an {object} slot");
    cmd->add_option("--out", aa_out)->required();
    cmd->callback([&] {
        action = [&] {
            if (swap_from.empty() != swap_to.empty()) throw ConfigError("--swap-from and --swap-to go together");
            const LoadedData loaded = load_data(aa.data);
            const LoadedModel lm = load_checkpoint(aa.checkpoint);
            const Dataset subset = require_split(loaded.dataset, aa.split);
            const auto examples = eval_examples(loaded, lm, subset, aa.strategy);
            std::optional<QuestionSwap> swap;
            if (!swap_from.empty()) swap = QuestionSwap{swap_from, swap_to};
            const AttentionStats stats = attention_analysis(*lm.model, lm.vocabulary, examples, swap);
            write_json_file(aa_out, stats.to_json());
            out << stats.to_json().dump() << "\n";
            return 0;
        };
    });

    // analyze-context-words
    EvalArgs cw;
    std::string cw_other, cw_words = "largest,smallest,biggest,tallest", cw_out;
    cmd = app.add_subcommand("analyze-context-words", "Per-word accuracy deltas between two checkpoints");
    add_data_options(cmd, cw.data);
    cmd->add_option("--checkpoint", cw.checkpoint, "Model A")->required();
    cmd->add_option("--baseline-checkpoint", cw_other, "Model B")->required();
    cmd->add_option("--split", cw.split);
    cmd->add_option("--strategy", cw.strategy);
    cmd->add_option("--words", cw_words, "Comma-separated context words");
    cmd->add_option("--jobs", cw.jobs);
    cmd->add_option("--out", cw_out)->required();
    cmd->callback([&] {
        action = [&] {
            const LoadedData loaded = load_data(cw.data);
            const Dataset subset = require_split(loaded.dataset, cw.split);
            const LoadedModel a = load_checkpoint(cw.checkpoint);
            const LoadedModel b = load_checkpoint(cw_other);
            const EvalReport ra = evaluate(*a.model, eval_examples(loaded, a, subset, cw.strategy), cw.jobs);
            const EvalReport rb = evaluate(*b.model, eval_examples(loaded, b, subset, cw.strategy), cw.jobs);
            const auto analysis = context_word_analysis(ra, rb, split_list(cw_words));
            write_json_file(cw_out, analysis.to_json());
            out << analysis.to_json().dump() << "\n";
            return 0;
        };
    });

    // verify
    std::string vf_data, vf_out;
    double vf_iou = 0.2;
    cmd = app.add_subcommand("verify", "Run every dataset constraint checker over a directory");
    cmd->add_option("--data", vf_data)->required();
    cmd->add_option("--iou-threshold", vf_iou);
    cmd->add_option("--out", vf_out, "Also write the report here");
    cmd->callback([&] {
        action = [&] {
            if (!fs::is_directory(vf_data)) throw IoError("not a directory: " + vf_data);
            const VerifyReport report = verify_directory(vf_data, vf_iou);
            if (report.results.empty()) throw IoError("no dataset split files found in " + vf_data);
            if (!vf_out.empty()) write_json_file(vf_out, report.to_json());
            for (const auto& r : report.results) {
                out << (r.passed() ? "PASS " : "FAIL ") << r.name << " (" << r.checked << " checked, "
                    << r.violations.size() << " violations)\n";
            }
            if (!report.passed()) {
                err << "dataset constraints violated\n";
                return 1;
            }
            return 0;
        };
    });

    // review-sample
    struct {
        std::string data, out;
        std::size_t n = 100;
        std::uint64_t seed = 0;
    } rs;
    cmd = app.add_subcommand("review-sample", "Random review sheet (CSV) from one split file");
    cmd->add_option("--data", rs.data, "Split JSONL file")->required();
    cmd->add_option("--n", rs.n);
    cmd->add_option("--seed", rs.seed);
    cmd->add_option("--out", rs.out)->required();
    cmd->callback([&] {
        action = [&] {
            Dataset data = read_instances(rs.data);
            std::vector<std::size_t> order(data.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            Rng rng(rs.seed);
            shuffle(order, rng);
            order.resize(std::min(rs.n, order.size()));
            if (fs::path(rs.out).has_parent_path()) fs::create_directories(fs::path(rs.out).parent_path());
            std::ofstream csv(rs.out);
            if (!csv) throw IoError("cannot write " + rs.out);
            csv << "qa_id,image_id,question,point_x,point_y,answer\n";
            for (std::size_t i : order) {
                const auto& inst = data[i];
                csv << csv_field(inst.qa_id) << ',' << csv_field(inst.image_id) << ',' << csv_field(inst.question) << ','
                    << (inst.point ? std::to_string(inst.point->x) : "") << ','
                    << (inst.point ? std::to_string(inst.point->y) : "") << ',' << csv_field(inst.answer) << "\n";
            }
            out << "wrote " << order.size() << " rows to " << rs.out << "\n";
            return 0;
        };
    });

    // serve
    struct {
        std::string checkpoint, features, annotations, host = "0.0.0.0";
        int port = 8080;
    } sv;
    cmd = app.add_subcommand("serve", "HTTP inference service");
    cmd->add_option("--checkpoint", sv.checkpoint)->required();
    cmd->add_option("--features", sv.features)->required();
    cmd->add_option("--annotations", sv.annotations)->required();
    cmd->add_option("--port", sv.port);
    cmd->add_option("--host", sv.host);
    cmd->callback([&] {
        action = [&] {
            auto annotations = std::make_shared<const AnnotationStore>(load_annotations(sv.annotations));
            auto features = std::make_shared<const FeatureStore>(FeatureStore::load(sv.features));
            LoadedModel lm = load_checkpoint(sv.checkpoint);
            auto predictor = std::make_shared<const ModelPredictor>(std::shared_ptr<const Model>(std::move(lm.model)),
                                                                    lm.vocabulary, features);
            const InferenceService service(annotations, features, predictor);
            serve(service, sv.host, sv.port);
            return 0;
        };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return 2;
    }
    try {
        return action ? action() : 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace pointqa
