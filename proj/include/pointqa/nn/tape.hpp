#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace pointqa::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = std::vector<bool>;

struct Parameter {
    std::string name;
    Matrix value;
};

// Ordered, name-indexed parameter list. Order is creation order, which fixes
// checkpoint layout and optimizer state layout.
class ParameterSet {
public:
    std::size_t add(const std::string& name, Matrix init);
    std::size_t index(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

using Gradients = std::vector<Matrix>;
Gradients zero_gradients(const ParameterSet& params);

class Tape;

// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode autodiff over row-major double matrices. One tape per example
// graph; parameters enter as leaves that read the ParameterSet in place.
class Tape {
public:
    using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

    explicit Tape(const ParameterSet* params = nullptr) : params_(params) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    // Leaf that accumulates a gradient; used for input-gradient checks.
    Var input(Matrix value);
    Var param(std::size_t index);

    // Seeds d(out)/d(out) = 1 for a 1x1 output and runs every backward closure.
    void backward(Var out);
    const Matrix& grad(Var v) const;
    // Adds every parameter leaf's gradient into grads (indexed like the ParameterSet).
    void accumulate(Gradients& grads, double scale = 1.0) const;

    std::size_t size() const { return nodes_.size(); }

    // For op implementations.
    Var push(Matrix value, bool requires_grad, Backward backward);
    const Matrix& value(int id) const;
    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    void add_grad(int id, const Matrix& g);
    template <typename Expr>
    void add_grad_expr(int id, const Expr& g) {
        auto& node = nodes_[static_cast<std::size_t>(id)];
        if (!node.requires_grad) return;
        ensure_grad(node);
        node.grad += g;
    }
    Matrix& grad_block(int id);

private:
    struct Node {
        Matrix value;
        const Matrix* ref = nullptr;  // parameter leaves alias the parameter value
        Matrix grad;
        bool has_grad = false;
        bool requires_grad = false;
        long param = -1;
        Backward backward;
    };
    void ensure_grad(Node& node);

    const ParameterSet* params_;
    std::deque<Node> nodes_;
    std::unordered_map<std::size_t, int> param_nodes_;
};

// ---- ops ----------------------------------------------------------------

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var linear(Var x, Var w, Var b);  // x * w + b (b is a 1 x out row broadcast)
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);      // elementwise
Var add_row(Var a, Var row);  // broadcast 1 x c row over a
Var mul_row(Var a, Var row);
Var scale(Var a, double s);
Var transpose(Var a);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var sum(Var a);  // 1 x 1
// Row-wise softmax over columns with mask[c] true. Masked entries are exactly 0.
// Throws ContractError when a row has no valid column.
Var masked_softmax(Var a, const Mask& mask);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-6);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
Var gather_rows(Var table, const std::vector<int>& indices);
// -log softmax(logits)[label] for a 1 x K logits row.
Var softmax_cross_entropy(Var logits, int label);

// Multi-head scaled dot-product attention over already-projected q (T x d),
// k and v (S x d). Keys with mask false are excluded. When probs is non-null it
// receives one T x S probability matrix per head.
Var multihead_attention(Var q, Var k, Var v, const Mask& key_mask, int heads, std::vector<Matrix>* probs = nullptr);

// Plain helpers shared by ops and inference code.
Matrix softmax_rows(const Matrix& a, const Mask& mask);

}  // namespace pointqa::nn
