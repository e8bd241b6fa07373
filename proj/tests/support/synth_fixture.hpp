#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pointqa/synth_world.hpp"
#include "pointqa/trainer.hpp"

namespace fixtures {

using namespace pointqa;

struct Prepared {
    SynthWorld world;
    SynthDataset data;
    Dataset train, val;
    QuestionVocabulary vocab;
    std::vector<std::string> answers;
    std::vector<Example> train_examples, val_examples;
};

// Heap-allocated so the examples' instance pointers stay valid.
inline std::unique_ptr<Prepared> prepare(SynthScenario scenario, std::size_t images, SelectionStrategy strategy) {
    auto p = std::make_unique<Prepared>();
    SynthWorldConfig wc;
    wc.scenario = scenario;
    wc.num_images = images;
    wc.seed = 3;
    if (scenario == SynthScenario::compare) {
        wc.min_objects = 4;
        wc.max_objects = 4;
    }
    p->world = synth_world_generate(wc);
    p->data = build_synth_dataset(p->world, SynthBuildOptions{});
    p->train = filter_split(p->data.dataset, Split::train);
    p->val = filter_split(p->data.dataset, Split::val);
    p->vocab = QuestionVocabulary::build(p->train);
    p->answers = answer_vocabulary(p->train);
    ExampleOptions opts;
    opts.strategy = strategy;
    opts.num_regions = 32;
    p->train_examples =
        prepare_examples(p->train, p->world.annotations, p->world.features, p->vocab, p->answers, opts).examples;
    p->val_examples =
        prepare_examples(p->val, p->world.annotations, p->world.features, p->vocab, p->answers, opts).examples;
    return p;
}

inline ModelConfig config_for(const Prepared& p, Architecture arch, Streams streams) {
    ModelConfig c;
    c.architecture = arch;
    c.streams = streams;
    c.d = 16;
    c.heads = 2;
    c.mcan_layers = 1;
    c.language_layers = 1;
    c.image_layers = 1;
    c.point_layers = 1;
    c.cross_layers = 1;
    c.feature_dim = p.world.features.dim();
    c.vocab_size = p.vocab.size();
    c.num_regions = 32;
    c.answers = p.answers;
    c.seed = 9;
    return c;
}

}  // namespace fixtures
