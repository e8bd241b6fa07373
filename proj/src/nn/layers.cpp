#include "pointqa/nn/layers.hpp"

#include <cmath>

#include "pointqa/errors.hpp"

namespace pointqa::nn {

Matrix fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform_real(rng, -bound, bound);
    }
    return m;
}

Linear Linear::create(ParameterSet& ps, const std::string& name, int in, int out, Rng& rng) {
    Linear l;
    l.weight = ps.add(name + ".w", fan_in_uniform(in, out, in, rng));
    l.bias = ps.add(name + ".b", Matrix::Zero(1, out));
    return l;
}

Var Linear::operator()(Tape& t, Var x) const { return linear(x, t.param(weight), t.param(bias)); }

LayerNorm LayerNorm::create(ParameterSet& ps, const std::string& name, int dim) {
    LayerNorm n;
    n.gain = ps.add(name + ".g", Matrix::Ones(1, dim));
    n.bias = ps.add(name + ".b", Matrix::Zero(1, dim));
    return n;
}

Var LayerNorm::operator()(Tape& t, Var x) const { return layer_norm(x, t.param(gain), t.param(bias)); }

Embedding Embedding::create(ParameterSet& ps, const std::string& name, int vocab, int dim, Rng& rng) {
    Embedding e;
    e.table = ps.add(name, fan_in_uniform(vocab, dim, dim, rng));
    return e;
}

Var Embedding::operator()(Tape& t, const std::vector<int>& ids) const { return gather_rows(t.param(table), ids); }

Gru Gru::create(ParameterSet& ps, const std::string& name, int in, int hidden, Rng& rng) {
    Gru g;
    g.input = Linear::create(ps, name + ".in", in, 3 * hidden, rng);
    g.hidden = Linear::create(ps, name + ".hid", hidden, 3 * hidden, rng);
    g.size = hidden;
    return g;
}

Var Gru::operator()(Tape& t, Var sequence) const {
    const Eigen::Index steps = sequence.rows();
    if (steps == 0) throw ContractError("GRU over an empty sequence");
    const Var gates_in = input(t, sequence);
    Var h = t.constant(Matrix::Zero(1, size));
    for (Eigen::Index s = 0; s < steps; ++s) {
        const Var xi = slice_rows(gates_in, s, 1);
        const Var hh = hidden(t, h);
        const Var r = sigmoid(add(slice_cols(xi, 0, size), slice_cols(hh, 0, size)));
        const Var z = sigmoid(add(slice_cols(xi, size, size), slice_cols(hh, size, size)));
        const Var n = tanh(add(slice_cols(xi, 2 * size, size), mul(r, slice_cols(hh, 2 * size, size))));
        // h' = n + z * (h - n)
        h = add(n, mul(z, sub(h, n)));
    }
    return h;
}

MultiHeadAttention MultiHeadAttention::create(ParameterSet& ps, const std::string& name, int dim, int heads, Rng& rng) {
    if (heads < 1 || dim % heads != 0) throw ConfigError("heads must divide the hidden width");
    MultiHeadAttention m;
    m.query = Linear::create(ps, name + ".q", dim, dim, rng);
    m.key = Linear::create(ps, name + ".k", dim, dim, rng);
    m.value = Linear::create(ps, name + ".v", dim, dim, rng);
    m.output = Linear::create(ps, name + ".o", dim, dim, rng);
    m.heads = heads;
    return m;
}

Var MultiHeadAttention::operator()(Tape& t, Var x, Var context, const Mask& context_mask,
                                   std::vector<Matrix>* probs) const {
    if (x.cols() != context.cols()) throw ContractError("attention width mismatch");
    const Var attended = multihead_attention(query(t, x), key(t, context), value(t, context), context_mask, heads, probs);
    return output(t, attended);
}

AttentionSublayer AttentionSublayer::create(ParameterSet& ps, const std::string& name, int dim, int heads, Rng& rng) {
    return {MultiHeadAttention::create(ps, name + ".att", dim, heads, rng), LayerNorm::create(ps, name + ".ln", dim)};
}

Var AttentionSublayer::operator()(Tape& t, Var x, Var context, const Mask& context_mask,
                                  std::vector<Matrix>* probs) const {
    return norm(t, add(x, attention(t, x, context, context_mask, probs)));
}

FeedForwardSublayer FeedForwardSublayer::create(ParameterSet& ps, const std::string& name, int dim, int hidden,
                                                Rng& rng) {
    return {Linear::create(ps, name + ".fc1", dim, hidden, rng), Linear::create(ps, name + ".fc2", hidden, dim, rng),
            LayerNorm::create(ps, name + ".ln", dim)};
}

Var FeedForwardSublayer::operator()(Tape& t, Var x) const {
    return norm(t, add(x, contract(t, relu(expand(t, x)))));
}

SelfAttentionLayer SelfAttentionLayer::create(ParameterSet& ps, const std::string& name, int dim, int heads, Rng& rng) {
    return {AttentionSublayer::create(ps, name + ".sa", dim, heads, rng),
            FeedForwardSublayer::create(ps, name + ".ffn", dim, 2 * dim, rng)};
}

Var SelfAttentionLayer::operator()(Tape& t, Var x, const Mask& mask, std::vector<Matrix>* probs) const {
    return ffn(t, self(t, x, x, mask, probs));
}

AttentionPool AttentionPool::create(ParameterSet& ps, const std::string& name, int dim, Rng& rng) {
    return {Linear::create(ps, name + ".fc", dim, dim, rng), Linear::create(ps, name + ".score", dim, 1, rng)};
}

Var AttentionPool::operator()(Tape& t, Var x, const Mask& mask, Var* weights) const {
    const Var a = masked_softmax(transpose(score(t, relu(hidden(t, x)))), mask);
    if (weights) *weights = a;
    return matmul(a, x);
}

Matrix sinusoidal_positions(Eigen::Index length, Eigen::Index dim) {
    Matrix pe(length, dim);
    for (Eigen::Index p = 0; p < length; ++p) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
            pe(p, i) = (i % 2 == 0) ? std::sin(static_cast<double>(p) * freq) : std::cos(static_cast<double>(p) * freq);
        }
    }
    return pe;
}

Mask concat_masks(const std::vector<const Mask*>& masks) {
    Mask out;
    for (const auto* m : masks) out.insert(out.end(), m->begin(), m->end());
    return out;
}

}  // namespace pointqa::nn
