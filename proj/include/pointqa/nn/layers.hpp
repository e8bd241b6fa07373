#pragma once

#include <string>
#include <vector>

#include "pointqa/nn/tape.hpp"
#include "pointqa/random.hpp"

namespace pointqa::nn {

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

struct Linear {
    std::size_t weight = 0;  // in x out
    std::size_t bias = 0;    // 1 x out

    static Linear create(ParameterSet& ps, const std::string& name, int in, int out, Rng& rng);
    Var operator()(Tape& t, Var x) const;
};

struct LayerNorm {
    std::size_t gain = 0;
    std::size_t bias = 0;

    static LayerNorm create(ParameterSet& ps, const std::string& name, int dim);
    Var operator()(Tape& t, Var x) const;
};

struct Embedding {
    std::size_t table = 0;

    static Embedding create(ParameterSet& ps, const std::string& name, int vocab, int dim, Rng& rng);
    Var operator()(Tape& t, const std::vector<int>& ids) const;
};

// Single-layer GRU; returns the final hidden state (1 x hidden).
struct Gru {
    Linear input;   // in -> 3 hidden (reset, update, candidate)
    Linear hidden;  // hidden -> 3 hidden
    int size = 0;

    static Gru create(ParameterSet& ps, const std::string& name, int in, int hidden, Rng& rng);
    Var operator()(Tape& t, Var sequence) const;
};

// Projections around the fused multi-head attention op.
struct MultiHeadAttention {
    Linear query, key, value, output;
    int heads = 1;

    static MultiHeadAttention create(ParameterSet& ps, const std::string& name, int dim, int heads, Rng& rng);
    // probs receives one T x S matrix per head when non-null.
    Var operator()(Tape& t, Var x, Var context, const Mask& context_mask, std::vector<Matrix>* probs = nullptr) const;
};

// LayerNorm(x + MHA(x, context)).
struct AttentionSublayer {
    MultiHeadAttention attention;
    LayerNorm norm;

    static AttentionSublayer create(ParameterSet& ps, const std::string& name, int dim, int heads, Rng& rng);
    Var operator()(Tape& t, Var x, Var context, const Mask& context_mask, std::vector<Matrix>* probs = nullptr) const;
};

// LayerNorm(x + W2 relu(W1 x)).
struct FeedForwardSublayer {
    Linear expand, contract;
    LayerNorm norm;

    static FeedForwardSublayer create(ParameterSet& ps, const std::string& name, int dim, int hidden, Rng& rng);
    Var operator()(Tape& t, Var x) const;
};

// Self-attention encoder block.
struct SelfAttentionLayer {
    AttentionSublayer self;
    FeedForwardSublayer ffn;

    static SelfAttentionLayer create(ParameterSet& ps, const std::string& name, int dim, int heads, Rng& rng);
    Var operator()(Tape& t, Var x, const Mask& mask, std::vector<Matrix>* probs = nullptr) const;
};

// Learned single-query attention pooling: softmax over rows of w2 relu(w1 x).
struct AttentionPool {
    Linear hidden, score;

    static AttentionPool create(ParameterSet& ps, const std::string& name, int dim, Rng& rng);
    // Returns the 1 x dim pooled vector; weights receives the 1 x T distribution.
    Var operator()(Tape& t, Var x, const Mask& mask, Var* weights = nullptr) const;
};

// Sinusoidal position encodings, rows = positions.
Matrix sinusoidal_positions(Eigen::Index length, Eigen::Index dim);

Mask concat_masks(const std::vector<const Mask*>& masks);

}  // namespace pointqa::nn
