#include "pointqa/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pointqa/errors.hpp"
#include "pointqa/text.hpp"

namespace pointqa {

using nn::Mask;
using nn::Matrix;
using nn::Tape;
using nn::Var;

std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::pythia_local: return "pythia_local";
        case Architecture::pythia_global: return "pythia_global";
        case Architecture::mcan: return "mcan";
        case Architecture::lxmert: return "lxmert";
    }
    return "pythia_local";
}

std::string to_string(Streams s) {
    switch (s) {
        case Streams::q_only: return "q_only";
        case Streams::image_q: return "image_q";
        case Streams::point_q: return "point_q";
        case Streams::two_stream: return "two_stream";
        case Streams::three_stream: return "three_stream";
    }
    return "point_q";
}

Architecture parse_architecture(const std::string& name) {
    for (auto a : {Architecture::pythia_local, Architecture::pythia_global, Architecture::mcan, Architecture::lxmert}) {
        if (to_string(a) == name) return a;
    }
    throw ConfigError("unknown architecture '" + name + "'");
}

Streams parse_streams(const std::string& name) {
    for (auto s : {Streams::q_only, Streams::image_q, Streams::point_q, Streams::two_stream, Streams::three_stream}) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown stream layout '" + name + "'");
}

void ModelConfig::validate() const {
    if (d < 1 || heads < 1 || d % heads != 0) throw ConfigError("heads must divide d");
    if (mcan_layers < 1 || language_layers < 1 || image_layers < 1 || point_layers < 1 || cross_layers < 1) {
        throw ConfigError("layer counts must be >= 1");
    }
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
    if (vocab_size < 3) throw ConfigError("question vocabulary must include the reserved ids");
    if (answers.empty()) throw ConfigError("answer vocabulary is empty");
    if (num_regions < 1) throw ConfigError("num_regions must be >= 1");
    if (architecture == Architecture::pythia_global && streams != Streams::three_stream) {
        throw ConfigError("pythia_global is the three-stream Pythia model");
    }
    if (architecture == Architecture::pythia_local && streams == Streams::three_stream) {
        throw ConfigError("three-stream Pythia is pythia_global");
    }
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"architecture", to_string(c.architecture)},
            {"streams", to_string(c.streams)},
            {"d", c.d},
            {"heads", c.heads},
            {"L", c.mcan_layers},
            {"N_L", c.language_layers},
            {"N_Img", c.image_layers},
            {"N_Pt", c.point_layers},
            {"N_X", c.cross_layers},
            {"feature_dim", c.feature_dim},
            {"vocab_size", c.vocab_size},
            {"num_regions", c.num_regions},
            {"answers", c.answers},
            {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    try {
        ModelConfig c;
        c.architecture = parse_architecture(j.at("architecture").get<std::string>());
        c.streams = parse_streams(j.at("streams").get<std::string>());
        c.d = j.value("d", c.d);
        c.heads = j.value("heads", c.heads);
        c.mcan_layers = j.value("L", c.mcan_layers);
        c.language_layers = j.value("N_L", c.language_layers);
        c.image_layers = j.value("N_Img", c.image_layers);
        c.point_layers = j.value("N_Pt", c.point_layers);
        c.cross_layers = j.value("N_X", c.cross_layers);
        c.feature_dim = j.at("feature_dim").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.num_regions = j.value("num_regions", c.num_regions);
        c.answers = j.at("answers").get<std::vector<std::string>>();
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model config: ") + e.what());
    }
}

QuestionVocabulary::QuestionVocabulary() : QuestionVocabulary(std::vector<std::string>{}) {}

QuestionVocabulary::QuestionVocabulary(const std::vector<std::string>& words) {
    words_ = {"<pad>", "<unk>", "<cls>"};
    for (const auto& w : words) {
        if (w == "<pad>" || w == "<unk>" || w == "<cls>") continue;
        if (index_.count(w)) continue;
        words_.push_back(w);
        index_.emplace(w, 0);
    }
    index_.clear();
    for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], static_cast<int>(i));
}

QuestionVocabulary QuestionVocabulary::build(const Dataset& data) {
    std::set<std::string> words;
    for (const auto& inst : data) {
        for (auto& w : text::word_tokens(inst.question)) words.insert(std::move(w));
    }
    return QuestionVocabulary(std::vector<std::string>(words.begin(), words.end()));
}

int QuestionVocabulary::id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnknown : it->second;
}

std::vector<int> QuestionVocabulary::encode(const std::string& question) const {
    std::vector<int> ids;
    for (const auto& w : text::word_tokens(question)) ids.push_back(id(w));
    return ids;
}

std::vector<std::string> answer_vocabulary(const Dataset& data) {
    std::set<std::string> answers;
    for (const auto& inst : data) answers.insert(inst.answer);
    return {answers.begin(), answers.end()};
}

RegionInput make_region_input(const SelectedRegions& regions, ImageSize image, bool drop_padding) {
    if (image.width <= 0 || image.height <= 0) throw ContractError("region input needs the image size");
    const auto d = static_cast<Eigen::Index>(regions.features.cols());
    const std::size_t n = drop_padding ? regions.num_valid() : regions.mask.size();
    RegionInput out;
    out.features = Matrix::Zero(static_cast<Eigen::Index>(n), d + 6);
    out.mask.assign(n, false);
    out.boxes.assign(n, BoundingBox{});
    const double W = image.width, H = image.height;
    std::size_t r = 0;
    for (std::size_t i = 0; i < regions.mask.size(); ++i) {
        if (!regions.mask[i]) {
            if (!drop_padding) ++r;
            continue;
        }
        const auto row = static_cast<Eigen::Index>(r);
        const auto& b = regions.boxes[i];
        out.features.row(row).head(d) = regions.features.row(static_cast<Eigen::Index>(i)).cast<double>();
        out.features(row, d) = b.x / W;
        out.features(row, d + 1) = b.y / H;
        out.features(row, d + 2) = b.w / W;
        out.features(row, d + 3) = b.h / H;
        out.features(row, d + 4) = b.area() / (W * H);
        out.mask[r] = true;
        out.boxes[r] = b;
        ++r;
    }
    return out;
}

std::size_t AnswerDistribution::argmax() const {
    return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

CrossAttendLayer CrossAttendLayer::create(nn::ParameterSet& ps, const std::string& name, int dim, int heads, Rng& rng) {
    return {nn::AttentionSublayer::create(ps, name + ".ga", dim, heads, rng),
            nn::FeedForwardSublayer::create(ps, name + ".ffn", dim, 2 * dim, rng)};
}

StreamState CrossAttendLayer::operator()(Tape& t, const StreamState& target, const std::vector<StreamState>& contexts,
                                         std::vector<Matrix>* probs) const {
    if (contexts.empty()) throw ContractError("cross attention needs at least one context stream");
    std::vector<Var> parts;
    std::vector<const Mask*> masks;
    for (const auto& c : contexts) {
        if (c.vectors.cols() != target.vectors.cols()) throw ContractError("stream width mismatch in cross attention");
        parts.push_back(c.vectors);
        masks.push_back(&c.mask);
    }
    const Var context = parts.size() == 1 ? parts.front() : nn::concat_rows(parts);
    const Var attended = cross(t, target.vectors, context, nn::concat_masks(masks), probs);
    return {ffn(t, attended), target.mask, target.modality};
}

AttendBlock AttendBlock::create(nn::ParameterSet& ps, const std::string& name, int stream_dim, int query_dim, int d,
                                std::optional<int> extra_dim, Rng& rng) {
    AttendBlock b;
    b.stream_proj = nn::Linear::create(ps, name + ".proj_v", stream_dim, d, rng);
    b.query_proj = nn::Linear::create(ps, name + ".proj_q", query_dim, d, rng);
    if (extra_dim) b.extra_proj = nn::Linear::create(ps, name + ".proj_pt", *extra_dim, d, rng);
    b.hidden = nn::Linear::create(ps, name + ".fc", d, d, rng);
    b.score = nn::Linear::create(ps, name + ".score", d, 1, rng);
    return b;
}

AttendBlock::Result AttendBlock::operator()(Tape& t, Var query, Var stream, const Mask& mask,
                                            std::optional<Var> extra) const {
    if (query.rows() != 1) throw ContractError("attend expects a single query vector");
    Var joint = nn::mul_row(nn::relu(stream_proj(t, stream)), nn::relu(query_proj(t, query)));
    if (extra_proj) {
        if (!extra) throw ContractError("attend block requires its conditioning vector");
        joint = nn::mul_row(joint, nn::relu((*extra_proj)(t, *extra)));
    }
    const Var weights = nn::masked_softmax(nn::transpose(score(t, nn::relu(hidden(t, joint)))), mask);
    return {nn::matmul(weights, stream), weights};
}

Model::Model(ModelConfig config) : config_(std::move(config)) { config_.validate(); }

std::vector<int> Model::clamp_tokens(const std::vector<int>& tokens) const {
    if (tokens.empty()) throw ContractError("empty question token sequence");
    std::vector<int> out(tokens);
    for (auto& id : out) {
        if (id < 0 || id >= config_.vocab_size) id = QuestionVocabulary::kUnknown;
    }
    return out;
}

Prediction Model::predict(const ModelInput& input) const {
    Tape t(&params_);
    ForwardOutput out = forward(t, input);
    const Matrix& z = out.logits.value();
    const double m = z.maxCoeff();
    Eigen::RowVectorXd p = (z.row(0).array() - m).exp();
    p /= p.sum();
    Prediction pred;
    pred.distribution.labels = config_.answers;
    pred.distribution.probs.assign(p.data(), p.data() + p.size());
    pred.attention = std::move(out.attention);
    return pred;
}

namespace {

std::vector<double> row_vector(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

std::vector<double> renormalized(std::vector<double> w) {
    double s = 0;
    for (double v : w) s += v;
    if (s > 0) {
        for (double& v : w) v /= s;
    }
    return w;
}

Matrix head_average(const std::vector<Matrix>& probs) {
    Matrix avg = probs.front();
    for (std::size_t h = 1; h < probs.size(); ++h) avg += probs[h];
    return avg / static_cast<double>(probs.size());
}

// The single visual stream of the one- and two-visual-stream layouts.
struct VisualRows {
    Var rows;
    Mask mask;
    std::size_t image_rows = 0;  // leading rows that came from the image input
};

VisualRows visual_rows(Tape& t, const ModelInput& in, Streams streams) {
    switch (streams) {
        case Streams::point_q: return {t.constant(in.point.features), in.point.mask, 0};
        case Streams::image_q: return {t.constant(in.image.features), in.image.mask, in.image.rows()};
        case Streams::two_stream: {
            const Eigen::Index ni = static_cast<Eigen::Index>(in.image.rows());
            const Eigen::Index np = static_cast<Eigen::Index>(in.point.rows());
            if (in.image.features.cols() != in.point.features.cols()) throw ContractError("region width mismatch");
            Matrix rows(ni + np, in.image.features.cols());
            rows.topRows(ni) = in.image.features;
            rows.bottomRows(np) = in.point.features;
            for (Eigen::Index r = 0; r < np; ++r) {
                if (in.point.mask[static_cast<std::size_t>(r)]) rows(ni + r, rows.cols() - 1) = 1.0;
            }
            return {t.constant(std::move(rows)), nn::concat_masks({&in.image.mask, &in.point.mask}),
                    static_cast<std::size_t>(ni)};
        }
        default: throw ContractError("layout has no single visual stream");
    }
}

void record_visual(AttentionRecord& rec, const std::vector<double>& w, Streams streams, std::size_t image_rows) {
    switch (streams) {
        case Streams::point_q: rec.local = w; break;
        case Streams::image_q: rec.global = w; break;
        case Streams::two_stream:
            rec.global = renormalized({w.begin(), w.begin() + static_cast<long>(image_rows)});
            rec.local = renormalized({w.begin() + static_cast<long>(image_rows), w.end()});
            break;
        default: break;
    }
}

void check_region_width(const RegionInput& r, const ModelConfig& c, const char* which) {
    if (r.features.cols() != c.region_dim() || static_cast<std::size_t>(r.features.rows()) != r.mask.size()) {
        throw ContractError(std::string(which) + " regions do not match the model's region width");
    }
}

bool uses_point(Streams s) { return s == Streams::point_q || s == Streams::two_stream || s == Streams::three_stream; }
bool uses_image(Streams s) { return s == Streams::image_q || s == Streams::two_stream || s == Streams::three_stream; }

void check_inputs(const ModelInput& in, const ModelConfig& c) {
    if (uses_point(c.streams)) check_region_width(in.point, c, "point");
    if (uses_image(c.streams)) check_region_width(in.image, c, "image");
}

Rng model_rng(const ModelConfig& c) { return Rng(c.seed ^ 0x9e3779b97f4a7c15ULL); }

class PythiaModel : public Model {
public:
    explicit PythiaModel(ModelConfig config) : Model(std::move(config)) {
        Rng rng = model_rng(config_);
        const int d = config_.d, f = config_.region_dim();
        const int answers = static_cast<int>(config_.answers.size());
        embed_ = nn::Embedding::create(params_, "q.embed", config_.vocab_size, d, rng);
        gru_ = nn::Gru::create(params_, "q.gru", d, d, rng);
        if (config_.architecture == Architecture::pythia_global) {
            point_ = AttendBlock::create(params_, "point", f, d, d, std::nullopt, rng);
            global_ = AttendBlock::create(params_, "global", f, d, d, f, rng);
            fuse_q_ = nn::Linear::create(params_, "fuse.q_pt", d, d, rng);
            fuse_v_ = nn::Linear::create(params_, "fuse.v_pt", f, d, rng);
            fuse_q2_ = nn::Linear::create(params_, "fuse.q_all", d, d, rng);
            fuse_v2_ = nn::Linear::create(params_, "fuse.v_all", f, d, rng);
            hidden_ = nn::Linear::create(params_, "cls.fc", 2 * d, d, rng);
        } else {
            if (config_.streams != Streams::q_only) {
                point_ = AttendBlock::create(params_, "visual", f, d, d, std::nullopt, rng);
                fuse_v_ = nn::Linear::create(params_, "fuse.v", f, d, rng);
            }
            fuse_q_ = nn::Linear::create(params_, "fuse.q", d, d, rng);
            hidden_ = nn::Linear::create(params_, "cls.fc", d, d, rng);
        }
        out_ = nn::Linear::create(params_, "cls.out", d, answers, rng);
    }

    Var encode_question(Tape& t, const std::vector<int>& tokens) const override {
        return gru_(t, embed_(t, clamp_tokens(tokens)));
    }

    ForwardOutput forward(Tape& t, const ModelInput& in) const override {
        check_inputs(in, config_);
        ForwardOutput out;
        const Var q = encode_question(t, in.tokens);
        Var fused;
        if (config_.architecture == Architecture::pythia_global) {
            const Var pt_rows = t.constant(in.point.features);
            const Var all_rows = t.constant(in.image.features);
            const auto local = (*point_)(t, q, pt_rows, in.point.mask);
            const auto global = (*global_)(t, q, all_rows, in.image.mask, local.pooled);
            const Var f1 = nn::mul(nn::relu(fuse_q_(t, q)), nn::relu(fuse_v_(t, local.pooled)));
            const Var f2 = nn::mul(nn::relu(fuse_q2_(t, q)), nn::relu(fuse_v2_(t, global.pooled)));
            fused = nn::concat_cols({f1, f2});
            out.attention.local = row_vector(local.weights.value());
            out.attention.global = row_vector(global.weights.value());
        } else if (config_.streams == Streams::q_only) {
            fused = nn::relu(fuse_q_(t, q));
        } else {
            const VisualRows v = visual_rows(t, in, config_.streams);
            const auto att = (*point_)(t, q, v.rows, v.mask);
            fused = nn::mul(nn::relu(fuse_q_(t, q)), nn::relu(fuse_v_(t, att.pooled)));
            record_visual(out.attention, row_vector(att.weights.value()), config_.streams, v.image_rows);
        }
        out.logits = out_(t, nn::relu(hidden_(t, fused)));
        return out;
    }

private:
    nn::Embedding embed_;
    nn::Gru gru_;
    std::optional<AttendBlock> point_, global_;
    nn::Linear fuse_q_, fuse_v_, fuse_q2_, fuse_v2_, hidden_, out_;
};

Var question_embedding(Tape& t, const nn::Embedding& embed, const std::vector<int>& ids, int d) {
    const Var e = embed(t, ids);
    return nn::add(e, t.constant(nn::sinusoidal_positions(static_cast<Eigen::Index>(ids.size()), d)));
}

class McanModel : public Model {
public:
    explicit McanModel(ModelConfig config) : Model(std::move(config)) {
        Rng rng = model_rng(config_);
        const int d = config_.d, h = config_.heads, L = config_.mcan_layers;
        const int answers = static_cast<int>(config_.answers.size());
        embed_ = nn::Embedding::create(params_, "q.embed", config_.vocab_size, d, rng);
        for (int l = 0; l < L; ++l) {
            q_layers_.push_back(nn::SelfAttentionLayer::create(params_, "q.l" + std::to_string(l), d, h, rng));
        }
        q_pool_ = nn::AttentionPool::create(params_, "q.pool", d, rng);
        fuse_q_ = nn::Linear::create(params_, "fuse.q", d, d, rng);
        switch (config_.streams) {
            case Streams::q_only: q_norm_ = nn::LayerNorm::create(params_, "fuse.ln_q", d); break;
            case Streams::three_stream:
                point_ = make_stack("point", rng);
                image_ = make_stack("image", rng);
                break;
            default: visual_ = make_stack("visual", rng); break;
        }
        const int z = config_.streams == Streams::three_stream ? 2 * d : d;
        classifier_ = nn::Linear::create(params_, "cls", z, answers, rng);
    }

    Var encode_question(Tape& t, const std::vector<int>& tokens) const override {
        const auto ids = clamp_tokens(tokens);
        Var x = question_embedding(t, embed_, ids, config_.d);
        const Mask mask(ids.size(), true);
        for (const auto& layer : q_layers_) x = layer(t, x, mask);
        return x;
    }

    ForwardOutput forward(Tape& t, const ModelInput& in) const override {
        check_inputs(in, config_);
        ForwardOutput out;
        const Var q = encode_question(t, in.tokens);
        const StreamState question{q, Mask(static_cast<std::size_t>(q.rows()), true), Modality::question};
        const Var q_bar = q_pool_(t, q, question.mask);
        const Var wq = fuse_q_(t, q_bar);
        Var z;
        if (config_.streams == Streams::q_only) {
            z = (*q_norm_)(t, wq);
        } else if (config_.streams == Streams::three_stream) {
            StreamState pt{point_->in(t, t.constant(in.point.features)), in.point.mask, Modality::point};
            StreamState img{image_->in(t, t.constant(in.image.features)), in.image.mask, Modality::image};
            std::vector<Matrix> img_layers;
            for (int l = 0; l < config_.mcan_layers; ++l) {
                std::vector<Matrix> probs;
                pt = run_layer(t, *point_, l, pt, {question}, nullptr);
                img = run_layer(t, *image_, l, img, {question, pt}, &probs);
                out.attention.per_layer.push_back(head_average(probs));
            }
            Var w_pt, w_img;
            const Var v_pt = point_->pool(t, pt.vectors, pt.mask, &w_pt);
            const Var v_img = image_->pool(t, img.vectors, img.mask, &w_img);
            const Var z1 = point_->norm(t, nn::add(wq, point_->fuse(t, v_pt)));
            const Var z2 = image_->norm(t, nn::add(wq, image_->fuse(t, v_img)));
            z = nn::concat_cols({z1, z2});
            out.attention.local = row_vector(w_pt.value());
            out.attention.global = row_vector(w_img.value());
        } else {
            const VisualRows rows = visual_rows(t, in, config_.streams);
            StreamState v{visual_->in(t, rows.rows), rows.mask,
                          config_.streams == Streams::image_q ? Modality::image : Modality::point};
            for (int l = 0; l < config_.mcan_layers; ++l) {
                std::vector<Matrix> probs;
                v = run_layer(t, *visual_, l, v, {question}, &probs);
                out.attention.per_layer.push_back(head_average(probs));
            }
            Var w;
            const Var v_bar = visual_->pool(t, v.vectors, v.mask, &w);
            z = visual_->norm(t, nn::add(wq, visual_->fuse(t, v_bar)));
            record_visual(out.attention, row_vector(w.value()), config_.streams, rows.image_rows);
        }
        out.logits = classifier_(t, z);
        return out;
    }

private:
    struct Stack {
        nn::Linear in;
        std::vector<nn::AttentionSublayer> self;
        std::vector<CrossAttendLayer> cross;
        nn::AttentionPool pool;
        nn::Linear fuse;
        nn::LayerNorm norm;
    };

    Stack make_stack(const std::string& name, Rng& rng) {
        const int d = config_.d, h = config_.heads;
        Stack s;
        s.in = nn::Linear::create(params_, name + ".in", config_.region_dim(), d, rng);
        for (int l = 0; l < config_.mcan_layers; ++l) {
            const std::string p = name + ".l" + std::to_string(l);
            s.self.push_back(nn::AttentionSublayer::create(params_, p + ".sa", d, h, rng));
            s.cross.push_back(CrossAttendLayer::create(params_, p, d, h, rng));
        }
        s.pool = nn::AttentionPool::create(params_, name + ".pool", d, rng);
        s.fuse = nn::Linear::create(params_, "fuse." + name, d, d, rng);
        s.norm = nn::LayerNorm::create(params_, "fuse.ln_" + name, d);
        return s;
    }

    static StreamState run_layer(Tape& t, const Stack& s, int l, const StreamState& x,
                                 const std::vector<StreamState>& contexts, std::vector<Matrix>* probs) {
        const auto li = static_cast<std::size_t>(l);
        const StreamState self{s.self[li](t, x.vectors, x.vectors, x.mask), x.mask, x.modality};
        return s.cross[li](t, self, contexts, probs);
    }

    nn::Embedding embed_;
    std::vector<nn::SelfAttentionLayer> q_layers_;
    nn::AttentionPool q_pool_;
    nn::Linear fuse_q_, classifier_;
    std::optional<nn::LayerNorm> q_norm_;
    std::optional<Stack> point_, image_, visual_;
};

class LxmertModel : public Model {
public:
    explicit LxmertModel(ModelConfig config) : Model(std::move(config)) {
        Rng rng = model_rng(config_);
        const int d = config_.d, h = config_.heads;
        const int answers = static_cast<int>(config_.answers.size());
        embed_ = nn::Embedding::create(params_, "lang.embed", config_.vocab_size, d, rng);
        for (int l = 0; l < config_.language_layers; ++l) {
            lang_.push_back(nn::SelfAttentionLayer::create(params_, "lang.l" + std::to_string(l), d, h, rng));
        }
        switch (config_.streams) {
            case Streams::q_only: break;
            case Streams::three_stream:
                stacks_.push_back(make_stack("image", config_.image_layers, rng));
                stacks_.push_back(make_stack("point", config_.point_layers, rng));
                break;
            default: stacks_.push_back(make_stack("visual", config_.image_layers, rng)); break;
        }
        if (!stacks_.empty()) {
            const std::vector<std::string> names = stream_names();
            for (int l = 0; l < config_.cross_layers; ++l) {
                std::vector<CrossBlock> layer;
                for (const auto& s : names) {
                    const std::string p = "x" + std::to_string(l) + "." + s;
                    layer.push_back({nn::AttentionSublayer::create(params_, p + ".cross", d, h, rng),
                                     nn::AttentionSublayer::create(params_, p + ".self", d, h, rng),
                                     nn::FeedForwardSublayer::create(params_, p + ".ffn", d, 2 * d, rng)});
                }
                cross_.push_back(std::move(layer));
            }
        }
        pool_ = nn::Linear::create(params_, "pool", d, d, rng);
        head_fc_ = nn::Linear::create(params_, "head.fc", d, d, rng);
        head_out_ = nn::Linear::create(params_, "head.out", d, answers, rng);
    }

    Var encode_question(Tape& t, const std::vector<int>& tokens) const override {
        std::vector<int> ids{QuestionVocabulary::kCls};
        const auto body = clamp_tokens(tokens);
        ids.insert(ids.end(), body.begin(), body.end());
        Var x = question_embedding(t, embed_, ids, config_.d);
        const Mask mask(ids.size(), true);
        for (const auto& layer : lang_) x = layer(t, x, mask);
        return x;
    }

    ForwardOutput forward(Tape& t, const ModelInput& in) const override {
        check_inputs(in, config_);
        ForwardOutput out;
        std::vector<StreamState> streams;
        const Var q = encode_question(t, in.tokens);
        streams.push_back({q, Mask(static_cast<std::size_t>(q.rows()), true), Modality::question});
        std::size_t image_rows = 0;
        if (config_.streams == Streams::three_stream) {
            streams.push_back(encode_stack(t, stacks_[0], t.constant(in.image.features), in.image.mask, Modality::image));
            streams.push_back(encode_stack(t, stacks_[1], t.constant(in.point.features), in.point.mask, Modality::point));
            image_rows = in.image.rows();
        } else if (config_.streams != Streams::q_only) {
            const VisualRows rows = visual_rows(t, in, config_.streams);
            streams.push_back(encode_stack(t, stacks_[0], rows.rows, rows.mask, Modality::image));
            image_rows = rows.image_rows;
        }

        Matrix cls_attention;
        for (const auto& layer : cross_) {
            std::vector<StreamState> next;
            for (std::size_t s = 0; s < streams.size(); ++s) {
                std::vector<Var> parts;
                std::vector<const Mask*> masks;
                for (std::size_t o = 0; o < streams.size(); ++o) {
                    if (o == s) continue;
                    parts.push_back(streams[o].vectors);
                    masks.push_back(&streams[o].mask);
                }
                const Var context = parts.size() == 1 ? parts.front() : nn::concat_rows(parts);
                std::vector<Matrix> probs;
                const auto& block = layer[s];
                Var x = block.cross(t, streams[s].vectors, context, nn::concat_masks(masks), s == 0 ? &probs : nullptr);
                x = block.self(t, x, x, streams[s].mask);
                next.push_back({block.ffn(t, x), streams[s].mask, streams[s].modality});
                if (s == 0) {
                    out.attention.per_layer.push_back(head_average(probs));
                    cls_attention = out.attention.per_layer.back().row(0);
                }
            }
            streams = std::move(next);
        }

        if (cls_attention.size() > 0) {
            const std::vector<double> w = row_vector(cls_attention);
            if (config_.streams == Streams::three_stream) {
                out.attention.global = renormalized({w.begin(), w.begin() + static_cast<long>(image_rows)});
                out.attention.local = renormalized({w.begin() + static_cast<long>(image_rows), w.end()});
            } else {
                record_visual(out.attention, w, config_.streams, image_rows);
            }
        }

        const Var pooled = nn::tanh(pool_(t, nn::slice_rows(streams[0].vectors, 0, 1)));
        out.logits = head_out_(t, nn::relu(head_fc_(t, pooled)));
        return out;
    }

private:
    struct Stack {
        nn::Linear in;
        std::vector<nn::SelfAttentionLayer> layers;
    };
    struct CrossBlock {
        nn::AttentionSublayer cross;
        nn::AttentionSublayer self;
        nn::FeedForwardSublayer ffn;
    };

    std::vector<std::string> stream_names() const {
        if (config_.streams == Streams::three_stream) return {"lang", "image", "point"};
        return {"lang", "visual"};
    }

    Stack make_stack(const std::string& name, int layers, Rng& rng) {
        Stack s;
        s.in = nn::Linear::create(params_, name + ".in", config_.region_dim(), config_.d, rng);
        for (int l = 0; l < layers; ++l) {
            s.layers.push_back(
                nn::SelfAttentionLayer::create(params_, name + ".l" + std::to_string(l), config_.d, config_.heads, rng));
        }
        return s;
    }

    static StreamState encode_stack(Tape& t, const Stack& s, Var rows, const Mask& mask, Modality m) {
        Var x = s.in(t, rows);
        for (const auto& layer : s.layers) x = layer(t, x, mask);
        return {x, mask, m};
    }

    nn::Embedding embed_;
    std::vector<nn::SelfAttentionLayer> lang_;
    std::vector<Stack> stacks_;
    std::vector<std::vector<CrossBlock>> cross_;
    nn::Linear pool_, head_fc_, head_out_;
};

}  // namespace

std::unique_ptr<Model> make_model(const ModelConfig& config) {
    config.validate();
    switch (config.architecture) {
        case Architecture::pythia_local:
        case Architecture::pythia_global: return std::make_unique<PythiaModel>(config);
        case Architecture::mcan: return std::make_unique<McanModel>(config);
        case Architecture::lxmert: return std::make_unique<LxmertModel>(config);
    }
    throw ConfigError("unknown architecture");
}

std::map<std::string, std::size_t> answer_frequencies(const Dataset& data) {
    std::map<std::string, std::size_t> freq;
    for (const auto& inst : data) ++freq[inst.answer];
    return freq;
}

std::string baseline_modal_answer(const PointQAInstance& instance, const std::map<std::string, std::size_t>& train_freq) {
    if (!instance.meta.answer_set || instance.meta.answer_set->empty()) {
        throw ContractError("Modal-A needs a non-empty answer set for " + instance.qa_id);
    }
    std::vector<std::string> candidates = *instance.meta.answer_set;
    std::sort(candidates.begin(), candidates.end());
    std::string best = candidates.front();
    std::size_t best_freq = 0;
    bool first = true;
    for (const auto& a : candidates) {
        auto it = train_freq.find(a);
        const std::size_t f = it == train_freq.end() ? 0 : it->second;
        if (first || f > best_freq) {
            best = a;
            best_freq = f;
            first = false;
        }
    }
    return best;
}

}  // namespace pointqa
