#include "pointqa/synth_world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "pointqa/errors.hpp"
#include "pointqa/general_builder.hpp"
#include "pointqa/local_builder.hpp"
#include "pointqa/random.hpp"
#include "pointqa/text.hpp"

namespace pointqa {

std::string to_string(SynthScenario s) {
    switch (s) {
        case SynthScenario::local: return "local";
        case SynthScenario::count: return "count";
        case SynthScenario::compare: return "compare";
    }
    return "local";
}

SynthScenario parse_scenario(const std::string& name) {
    if (name == "local") return SynthScenario::local;
    if (name == "count") return SynthScenario::count;
    if (name == "compare") return SynthScenario::compare;
    throw ConfigError("unknown synthetic scenario '" + name + "'");
}

int SynthWorldConfig::required_dim() const {
    return static_cast<int>(classes.size() + colors.size() + actions.size()) + 1 + 4;
}

void SynthWorldConfig::validate() const {
    if (classes.empty() || colors.empty() || actions.empty()) throw ConfigError("synth vocabularies must be non-empty");
    if (feature_dim < 8) throw ConfigError("synth feature_dim must be >= 8");
    if (feature_dim < required_dim()) {
        throw ConfigError("synth feature_dim must be >= " + std::to_string(required_dim()) + " for these vocabularies");
    }
    if (num_images == 0) throw ConfigError("synth num_images must be >= 1");
    if (min_objects < 1 || min_objects > max_objects) throw ConfigError("synth objects_per_image range is invalid");
    if (canvas_width < 32 || canvas_height < 32) throw ConfigError("synth canvas must be at least 32x32");
    if (noise < 0) throw ConfigError("synth noise must be >= 0");
    switch (scenario) {
        case SynthScenario::local:
            if (min_objects < 2) throw ConfigError("local scenario needs at least 2 objects per image");
            if (colors.size() < 2 || actions.size() < 2) throw ConfigError("local scenario needs 2+ colors and actions");
            break;
        case SynthScenario::count:
            if (classes.size() < 2) throw ConfigError("count scenario needs at least 2 classes");
            break;
        case SynthScenario::compare:
            if (colors.size() < 4) throw ConfigError("compare scenario needs at least 4 colors");
            break;
    }
}

nlohmann::json to_json(const SynthWorldConfig& c) {
    return {{"scenario", to_string(c.scenario)},
            {"num_images", c.num_images},
            {"objects_per_image", {c.min_objects, c.max_objects}},
            {"classes", c.classes},
            {"colors", c.colors},
            {"actions", c.actions},
            {"supercategories", c.supercategories},
            {"canvas", {c.canvas_width, c.canvas_height}},
            {"feature_dim", c.feature_dim},
            {"noise", c.noise},
            {"jitter_per_object", c.jitter_per_object},
            {"spurious_per_image", c.spurious_per_image},
            {"total_proposals", c.total_proposals},
            {"seed", c.seed}};
}

SynthWorldConfig synth_config_from_json(const nlohmann::json& j) {
    try {
        SynthWorldConfig c;
        if (j.contains("scenario")) c.scenario = parse_scenario(j.at("scenario").get<std::string>());
        if (c.scenario == SynthScenario::count) {
            c.classes = {"person", "dog", "car", "bus", "umbrella", "laptop"};
            c.min_objects = 3;
            c.max_objects = 12;
            c.jitter_per_object = 1;
            c.total_proposals = 32;
            c.supercategories = {{"person", "beings"}, {"dog", "beings"},      {"car", "vehicles"},
                                 {"bus", "vehicles"},  {"umbrella", "objects"}, {"laptop", "objects"}};
        } else if (c.scenario == SynthScenario::compare) {
            c.min_objects = 4;
            c.max_objects = 6;
            c.jitter_per_object = 1;
        }
        if (j.contains("num_images")) c.num_images = j.at("num_images").get<std::size_t>();
        if (j.contains("objects_per_image")) {
            c.min_objects = j.at("objects_per_image").at(0).get<std::size_t>();
            c.max_objects = j.at("objects_per_image").at(1).get<std::size_t>();
        }
        if (j.contains("classes")) c.classes = j.at("classes").get<std::vector<std::string>>();
        if (j.contains("colors")) c.colors = j.at("colors").get<std::vector<std::string>>();
        if (j.contains("actions")) c.actions = j.at("actions").get<std::vector<std::string>>();
        if (j.contains("supercategories")) c.supercategories = j.at("supercategories").get<SupercategoryMap>();
        if (j.contains("canvas")) {
            c.canvas_width = j.at("canvas").at(0).get<int>();
            c.canvas_height = j.at("canvas").at(1).get<int>();
        }
        if (j.contains("feature_dim")) c.feature_dim = j.at("feature_dim").get<int>();
        if (j.contains("noise")) c.noise = j.at("noise").get<double>();
        if (j.contains("jitter_per_object")) c.jitter_per_object = j.at("jitter_per_object").get<std::size_t>();
        if (j.contains("spurious_per_image")) c.spurious_per_image = j.at("spurious_per_image").get<std::size_t>();
        if (j.contains("total_proposals")) c.total_proposals = j.at("total_proposals").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        for (auto& s : c.classes) s = text::normalize(s);
        for (auto& s : c.colors) s = text::normalize(s);
        for (auto& s : c.actions) s = text::normalize(s);
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad synth config: ") + e.what());
    }
}

namespace {

std::size_t index_of(const std::vector<std::string>& vocab, const std::string& v) {
    return static_cast<std::size_t>(std::find(vocab.begin(), vocab.end(), v) - vocab.begin());
}

class Generator {
public:
    explicit Generator(const SynthWorldConfig& c) : c_(c), rng_(c.seed) {
        class_off_ = 0;
        color_off_ = class_off_ + static_cast<int>(c.classes.size());
        action_off_ = color_off_ + static_cast<int>(c.colors.size());
        bg_off_ = action_off_ + static_cast<int>(c.actions.size());
        geom_off_ = bg_off_ + 1;
    }

    SynthWorld run() {
        std::vector<ImageAnnotation> images;
        std::map<std::string, ProposalSet> sets;
        std::map<std::string, std::vector<SynthObject>> objects;
        SynthWorld world;
        world.config = c_;
        for (std::size_t i = 0; i < c_.num_images; ++i) {
            char id[32];
            std::snprintf(id, sizeof id, "img%05zu", i);
            Image img = make_image(id);
            images.push_back(img.annotation);
            sets.emplace(id, std::move(img.proposals));
            objects.emplace(id, std::move(img.objects));
            world.proposal_kinds.emplace(id, std::move(img.kinds));
        }
        world.annotations = AnnotationStore(std::move(images));
        world.features = FeatureStore(std::move(sets));
        world.oracle = SynthOracle(std::move(objects));
        return world;
    }

private:
    struct Feature {
        BoundingBox box;
        float score;
        ProposalKind kind;
        int cls = -1, color = -1, action = -1;
        bool background = false;
    };
    struct Image {
        ImageAnnotation annotation;
        ProposalSet proposals;
        std::vector<SynthObject> objects;
        std::vector<ProposalKind> kinds;
    };
    struct Grid {
        int cols, rows;
        double cw, ch;
    };

    Grid grid_for(std::size_t cells) const {
        Grid g;
        g.cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cells))));
        g.rows = static_cast<int>((cells + g.cols - 1) / g.cols);
        g.cw = static_cast<double>(c_.canvas_width) / g.cols;
        g.ch = static_cast<double>(c_.canvas_height) / g.rows;
        return g;
    }

    BoundingBox cell_box(const Grid& g, std::size_t cell) const {
        const double x0 = std::floor((cell % g.cols) * g.cw);
        const double y0 = std::floor((cell / g.cols) * g.ch);
        const double x1 = std::floor((cell % g.cols + 1) * g.cw);
        const double y1 = std::floor((cell / g.cols + 1) * g.ch);
        return {x0 + 1, y0 + 1, x1 - x0 - 2, y1 - y0 - 2};
    }

    // Integer box of size (w, h) placed uniformly inside the cell with a 2px margin.
    BoundingBox place(const BoundingBox& cell, double w, double h) {
        w = std::max(4.0, std::min(std::round(w), cell.w - 4));
        h = std::max(4.0, std::min(std::round(h), cell.h - 4));
        const double x = cell.x + 2 + std::floor(uniform_real(rng_, 0, std::max(0.0, cell.w - 4 - w)));
        const double y = cell.y + 2 + std::floor(uniform_real(rng_, 0, std::max(0.0, cell.h - 4 - h)));
        return {x, y, w, h};
    }

    BoundingBox clip(double x, double y, double w, double h) const {
        const double W = c_.canvas_width, H = c_.canvas_height;
        double x0 = std::clamp(std::round(x), 0.0, W - 2);
        double y0 = std::clamp(std::round(y), 0.0, H - 2);
        double x1 = std::clamp(std::round(x + w), x0 + 2, W);
        double y1 = std::clamp(std::round(y + h), y0 + 2, H);
        return {x0, y0, x1 - x0, y1 - y0};
    }

    BoundingBox jitter(const BoundingBox& b) {
        const double dx = uniform_real(rng_, -0.15, 0.15) * b.w;
        const double dy = uniform_real(rng_, -0.15, 0.15) * b.h;
        const double sw = uniform_real(rng_, 0.85, 1.15);
        const double sh = uniform_real(rng_, 0.85, 1.15);
        return clip(b.x + dx, b.y + dy, b.w * sw, b.h * sh);
    }

    Feature spurious() {
        const double W = c_.canvas_width, H = c_.canvas_height;
        const double w = uniform_real(rng_, 0.15, 0.5) * W;
        const double h = uniform_real(rng_, 0.15, 0.5) * H;
        Feature f;
        f.box = clip(uniform_real(rng_, 0, W - w), uniform_real(rng_, 0, H - h), w, h);
        f.score = static_cast<float>(uniform_real(rng_, 0.05, 0.5));
        f.kind = ProposalKind::spurious;
        f.color = static_cast<int>(uniform_index(rng_, c_.colors.size()));
        f.action = static_cast<int>(uniform_index(rng_, c_.actions.size()));
        f.background = true;
        return f;
    }

    void add_object_proposals(std::vector<Feature>& out, const SynthObject& o, const BoundingBox& cell, bool context) {
        const int cls = static_cast<int>(index_of(c_.classes, o.object_class));
        const int color = static_cast<int>(index_of(c_.colors, o.color));
        const int action = static_cast<int>(index_of(c_.actions, o.action));
        out.push_back({o.box, static_cast<float>(uniform_real(rng_, 0.85, 1.0)), ProposalKind::object, cls, color, -1});
        for (std::size_t k = 0; k < c_.jitter_per_object; ++k) {
            out.push_back(
                {jitter(o.box), static_cast<float>(uniform_real(rng_, 0.5, 0.85)), ProposalKind::jitter, cls, color, -1});
        }
        if (context) {
            out.push_back({cell, static_cast<float>(uniform_real(rng_, 0.3, 0.6)), ProposalKind::context, cls, -1, action});
        }
    }

    Image finish(const std::string& id, std::vector<SynthObject> objs, std::vector<Feature> feats,
                 std::vector<SourceQA> qas) {
        shuffle(feats, rng_);
        Image img;
        img.annotation.image_id = id;
        img.annotation.width = c_.canvas_width;
        img.annotation.height = c_.canvas_height;
        for (const auto& o : objs) {
            img.annotation.objects.push_back({o.object_id, {o.object_class}, o.box, {o.color, o.action}});
        }
        img.annotation.source_qas = std::move(qas);
        img.proposals.image_id = id;
        img.proposals.features = FeatureMatrix::Zero(static_cast<Eigen::Index>(feats.size()), c_.feature_dim);
        const double W = c_.canvas_width, H = c_.canvas_height;
        for (std::size_t r = 0; r < feats.size(); ++r) {
            const auto& f = feats[r];
            auto row = img.proposals.features.row(static_cast<Eigen::Index>(r));
            if (f.cls >= 0) row(class_off_ + f.cls) = 1;
            if (f.color >= 0) row(color_off_ + f.color) = 1;
            if (f.action >= 0) row(action_off_ + f.action) = 1;
            if (f.background) row(bg_off_) = 1;
            row(geom_off_) = static_cast<float>(f.box.x / W);
            row(geom_off_ + 1) = static_cast<float>(f.box.y / H);
            row(geom_off_ + 2) = static_cast<float>(f.box.w / W);
            row(geom_off_ + 3) = static_cast<float>(f.box.h / H);
            if (c_.noise > 0) {
                for (int d = 0; d < c_.feature_dim; ++d) row(d) += static_cast<float>(c_.noise * standard_normal(rng_));
            }
            img.proposals.boxes.push_back(f.box);
            img.proposals.scores.push_back(f.score);
            img.kinds.push_back(f.kind);
        }
        img.objects = std::move(objs);
        return img;
    }

    std::vector<std::size_t> pick_cells(std::size_t total, std::size_t k) {
        std::vector<std::size_t> cells(total);
        std::iota(cells.begin(), cells.end(), 0);
        shuffle(cells, rng_);
        cells.resize(k);
        return cells;
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), 0);
        shuffle(p, rng_);
        return p;
    }

    Image make_image(const std::string& id) {
        switch (c_.scenario) {
            case SynthScenario::local: return make_local(id);
            case SynthScenario::count: return make_count(id);
            case SynthScenario::compare: return make_compare(id);
        }
        return make_local(id);
    }

    Image make_local(const std::string& id) {
        const std::size_t k = c_.min_objects + uniform_index(rng_, c_.max_objects - c_.min_objects + 1);
        const Grid g = grid_for(c_.max_objects);
        const auto cells = pick_cells(static_cast<std::size_t>(g.cols * g.rows), k);
        const std::size_t group_cap = std::min({std::size_t{3}, c_.colors.size(), c_.actions.size()});
        auto class_order = permutation(c_.classes.size());

        std::vector<SynthObject> objs;
        std::vector<Feature> feats;
        std::size_t next_class = 0;
        while (objs.size() < k && next_class < class_order.size()) {
            const std::size_t remaining = k - objs.size();
            std::size_t n = remaining == 1 ? 1 : std::min(remaining, 2 + uniform_index(rng_, group_cap - 1));
            const std::string& cls = c_.classes[class_order[next_class++]];
            const auto colors = permutation(c_.colors.size());
            const auto actions = permutation(c_.actions.size());
            for (std::size_t m = 0; m < n; ++m) {
                const BoundingBox cell = cell_box(g, cells[objs.size()]);
                SynthObject o;
                o.object_id = id + "-o" + std::to_string(objs.size());
                o.object_class = cls;
                o.color = c_.colors[colors[m]];
                o.action = c_.actions[actions[m]];
                o.box = place(cell, cell.w * uniform_real(rng_, 0.3, 0.6), cell.h * uniform_real(rng_, 0.3, 0.6));
                add_object_proposals(feats, o, cell, true);
                objs.push_back(std::move(o));
            }
        }
        for (std::size_t s = 0; s < c_.spurious_per_image; ++s) feats.push_back(spurious());
        return finish(id, std::move(objs), std::move(feats), {});
    }

    // Per-class counts drawn so that the bins 1, 2 and >2 are equally likely.
    std::size_t draw_count() {
        const std::size_t r = uniform_index(rng_, 6);
        if (r < 2) return 1;
        if (r < 4) return 2;
        return r == 4 ? 3 : 4;
    }

    Image make_count(const std::string& id) {
        const Grid g = grid_for(c_.max_objects);
        const std::size_t capacity = static_cast<std::size_t>(g.cols * g.rows);
        const std::size_t num_classes = std::min(c_.classes.size(), 2 + uniform_index(rng_, 2));
        const auto class_order = permutation(c_.classes.size());
        std::vector<std::pair<std::string, std::size_t>> groups;
        std::size_t total = 0;
        for (std::size_t i = 0; i < num_classes; ++i) {
            std::size_t n = draw_count();
            n = std::min(n, std::min(c_.max_objects, capacity) - total);
            if (n == 0) break;
            groups.emplace_back(c_.classes[class_order[i]], n);
            total += n;
        }
        const auto cells = pick_cells(capacity, total);
        std::vector<SynthObject> objs;
        std::vector<Feature> feats;
        std::vector<SourceQA> qas;
        for (const auto& [cls, n] : groups) {
            for (std::size_t m = 0; m < n; ++m) {
                const BoundingBox cell = cell_box(g, cells[objs.size()]);
                SynthObject o;
                o.object_id = id + "-o" + std::to_string(objs.size());
                o.object_class = cls;
                o.color = c_.colors[uniform_index(rng_, c_.colors.size())];
                o.action = c_.actions[uniform_index(rng_, c_.actions.size())];
                o.box = place(cell, cell.w * uniform_real(rng_, 0.4, 0.8), cell.h * uniform_real(rng_, 0.4, 0.8));
                add_object_proposals(feats, o, cell, false);
                objs.push_back(std::move(o));
            }
            qas.push_back({id + "-count-" + cls, "How many " + text::pluralize(cls) + " are there?", std::to_string(n),
                           std::nullopt});
        }
        const std::size_t spurious_count =
            c_.total_proposals > feats.size() ? c_.total_proposals - feats.size() : c_.spurious_per_image;
        for (std::size_t s = 0; s < spurious_count; ++s) feats.push_back(spurious());
        return finish(id, std::move(objs), std::move(feats), std::move(qas));
    }

    Image make_compare(const std::string& id) {
        const std::size_t k = std::max<std::size_t>(4, c_.min_objects + uniform_index(rng_, c_.max_objects - c_.min_objects + 1));
        const Grid g = grid_for(std::max<std::size_t>(4, c_.max_objects));
        const auto cells = pick_cells(static_cast<std::size_t>(g.cols * g.rows), k);
        const auto class_order = permutation(c_.classes.size());
        const std::string& target = c_.classes[class_order[0]];
        const double scale = uniform_real(rng_, 0.45, 1.0);
        const auto size_rank = permutation(4);
        const auto colors = permutation(c_.colors.size());

        std::vector<SynthObject> objs;
        std::vector<Feature> feats;
        for (std::size_t m = 0; m < k; ++m) {
            const BoundingBox cell = cell_box(g, cells[m]);
            SynthObject o;
            o.object_id = id + "-o" + std::to_string(m);
            const double side = std::min(cell.w, cell.h) - 4;
            double frac;
            if (m < 4) {
                o.object_class = target;
                o.color = c_.colors[colors[m]];
                frac = scale * (0.5 + 0.125 * static_cast<double>(size_rank[m]) + uniform_real(rng_, -0.02, 0.02));
            } else {
                o.object_class = c_.classes.size() > 1 ? c_.classes[class_order[1 + uniform_index(rng_, c_.classes.size() - 1)]]
                                                       : target;
                o.color = c_.colors[uniform_index(rng_, c_.colors.size())];
                frac = uniform_real(rng_, 0.3, 0.95);
            }
            o.action = c_.actions[uniform_index(rng_, c_.actions.size())];
            o.box = place(cell, side * frac, side * frac);
            add_object_proposals(feats, o, cell, false);
            objs.push_back(std::move(o));
        }
        for (std::size_t s = 0; s < c_.spurious_per_image; ++s) feats.push_back(spurious());

        std::size_t largest = 0;
        for (std::size_t m = 1; m < 4; ++m) {
            if (objs[m].box.area() > objs[largest].box.area()) largest = m;
        }
        const std::size_t colored = uniform_index(rng_, 4);
        auto boxes_with = [&](std::size_t correct) {
            std::vector<AnswerBox> boxes;
            for (std::size_t m = 0; m < 4; ++m) boxes.push_back({objs[m].box, m == correct});
            return boxes;
        };
        std::vector<SourceQA> qas;
        qas.push_back({id + "-largest", "Which " + target + " is the largest?", objs[largest].object_id, boxes_with(largest)});
        qas.push_back({id + "-color", "Which " + target + " is " + objs[colored].color + "?", objs[colored].object_id,
                       boxes_with(colored)});
        return finish(id, std::move(objs), std::move(feats), std::move(qas));
    }

    const SynthWorldConfig& c_;
    Rng rng_;
    int class_off_, color_off_, action_off_, bg_off_, geom_off_;
};

std::string bin_count(std::size_t n) { return n == 1 ? "1" : n == 2 ? "2" : ">2"; }

}  // namespace

SynthWorld synth_world_generate(const SynthWorldConfig& config) {
    config.validate();
    return Generator(config).run();
}

std::map<std::string, std::string> SynthWorld::category_map() const {
    std::map<std::string, std::string> out;
    for (const auto& c : config.colors) out[c] = "color";
    for (const auto& a : config.actions) out[a] = "action";
    return out;
}

SupercategoryMap SynthWorld::supercategory_map() const {
    SupercategoryMap out;
    for (const auto& cls : config.classes) {
        auto it = config.supercategories.find(cls);
        out[cls] = it == config.supercategories.end() ? "objects" : it->second;
    }
    return out;
}

SynthOracle::SynthOracle(std::map<std::string, std::vector<SynthObject>> objects) : objects_(std::move(objects)) {}

const std::vector<SynthObject>& SynthOracle::objects(const std::string& image_id) const {
    auto it = objects_.find(image_id);
    if (it == objects_.end()) throw ContractError("oracle: unknown image " + image_id);
    return it->second;
}

const SynthObject* SynthOracle::object_at(const std::string& image_id, const Point& p) const {
    for (const auto& o : objects(image_id)) {
        if (contains(o.box, p)) return &o;
    }
    return nullptr;
}

std::optional<std::string> SynthOracle::answer(const std::string& image_id, const std::string& question,
                                               const std::optional<Point>& point) const {
    const auto w = text::word_tokens(question);
    const auto& objs = objects(image_id);
    auto count_class = [&](const std::string& cls) {
        return static_cast<std::size_t>(
            std::count_if(objs.begin(), objs.end(), [&](const SynthObject& o) { return o.object_class == cls; }));
    };
    auto pointed = [&](const std::string& cls) -> const SynthObject* {
        if (!point) return nullptr;
        const SynthObject* o = object_at(image_id, *point);
        if (!o || (!cls.empty() && o->object_class != cls)) return nullptr;
        return o;
    };
    auto phrase = [&](std::size_t begin, std::size_t end) {
        return text::join(std::vector<std::string>(w.begin() + static_cast<long>(begin), w.begin() + static_cast<long>(end)));
    };
    const std::size_t n = w.size();

    if (n >= 5 && w[0] == "what" && w[1] == "color" && w[2] == "is" && w[3] == "this") {
        const auto* o = pointed(phrase(4, n));
        return o ? std::optional<std::string>(o->color) : std::nullopt;
    }
    if (n >= 6 && w[0] == "what" && w[1] == "action" && w[2] == "is" && w[3] == "this" && w[n - 1] == "doing") {
        const auto* o = pointed(phrase(4, n - 1));
        return o ? std::optional<std::string>(o->action) : std::nullopt;
    }
    if (n >= 5 && w[0] == "how" && w[1] == "many" && w[n - 2] == "are" && w[n - 1] == "there") {
        if (w[2] == "of" && w[3] == "these") {
            const auto* o = pointed("");
            return o ? std::optional<std::string>(bin_count(count_class(o->object_class))) : std::nullopt;
        }
        const std::size_t c = count_class(text::singularize(phrase(2, n - 2)));
        return c == 0 ? std::nullopt : std::optional<std::string>(bin_count(c));
    }
    if (n >= 5 && w[0] == "is" && w[1] == "this" && w[n - 2] == "the" && w[n - 1] == "largest") {
        const std::string cls = phrase(2, n - 2);
        const auto* o = pointed(cls);
        if (!o) return std::nullopt;
        for (const auto& other : objs) {
            if (other.object_class == cls && other.box.area() > o->box.area()) return "no";
        }
        return "yes";
    }
    if (n >= 4 && w[0] == "is" && w[1] == "this") {
        const auto* o = pointed(phrase(2, n - 1));
        return o ? std::optional<std::string>(o->color == w[n - 1] ? "yes" : "no") : std::nullopt;
    }
    return std::nullopt;
}

double linear_probe_accuracy(const SynthWorld& world, const std::string& target) {
    const auto& c = world.config;
    std::size_t classes;
    if (target == "color") {
        classes = c.colors.size();
    } else if (target == "class") {
        classes = c.classes.size();
    } else {
        throw ContractError("linear probe target must be color or class");
    }
    std::vector<Eigen::VectorXd> train_x, test_x;
    std::vector<std::size_t> train_y, test_y;
    std::size_t image_index = 0;
    for (const auto& [id, set] : world.features.sets()) {
        const auto& kinds = world.proposal_kinds.at(id);
        const auto& objs = world.oracle.objects(id);
        for (std::size_t r = 0; r < set.size(); ++r) {
            if (kinds[r] != ProposalKind::object) continue;
            const auto obj = std::find_if(objs.begin(), objs.end(), [&](const SynthObject& o) { return o.box == set.boxes[r]; });
            if (obj == objs.end()) continue;
            const std::size_t label = target == "color" ? index_of(c.colors, obj->color) : index_of(c.classes, obj->object_class);
            Eigen::VectorXd x(set.dim() + 1);
            x.head(set.dim()) = set.features.row(static_cast<Eigen::Index>(r)).cast<double>().transpose();
            x(set.dim()) = 1.0;
            (image_index % 2 == 0 ? train_x : test_x).push_back(std::move(x));
            (image_index % 2 == 0 ? train_y : test_y).push_back(label);
        }
        ++image_index;
    }
    if (train_x.empty() || test_x.empty()) throw ContractError("linear probe needs at least two images");
    const Eigen::Index d = train_x.front().size();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(train_x.size()), d);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(train_x.size()), static_cast<Eigen::Index>(classes));
    for (std::size_t i = 0; i < train_x.size(); ++i) {
        X.row(static_cast<Eigen::Index>(i)) = train_x[i].transpose();
        Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(train_y[i])) = 1.0;
    }
    const Eigen::MatrixXd gram = X.transpose() * X + 1e-6 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd weights = gram.ldlt().solve(X.transpose() * Y);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_x.size(); ++i) {
        Eigen::Index best;
        (test_x[i].transpose() * weights).maxCoeff(&best);
        if (static_cast<std::size_t>(best) == test_y[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_x.size());
}

SynthDataset build_synth_dataset(const SynthWorld& world, const SynthBuildOptions& options) {
    SynthDataset out;
    switch (world.config.scenario) {
        case SynthScenario::local: {
            LocalBuilderConfig c;
            c.iou_threshold = options.iou_threshold;
            c.seed = options.seed;
            const auto categories = world.category_map();
            c.taxonomy = build_taxonomy(world.annotations, std::max<std::size_t>(1, categories.size()), {}, categories);
            auto r = build_local_dataset(world.annotations, c);
            out = {"local", std::move(r.dataset), std::move(r.report)};
            break;
        }
        case SynthScenario::count: {
            LookTwiceConfig c;
            c.supercategory_of = world.supercategory_map();
            c.min_class_frequency = options.min_class_frequency;
            c.val_fraction = options.val_fraction;
            c.test_fraction = options.test_fraction;
            c.seed = options.seed;
            auto r = build_looktwice_dataset(world.annotations, c);
            out = {"looktwice", std::move(r.dataset), std::move(r.report)};
            break;
        }
        case SynthScenario::compare: {
            GeneralBuilderConfig c;
            c.seed = options.seed;
            auto r = build_general_dataset(world.annotations, c);
            out = {"general", std::move(r.dataset), std::move(r.report)};
            break;
        }
    }
    return out;
}

}  // namespace pointqa
