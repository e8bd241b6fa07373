#include "pointqa/nn/tape.hpp"

#include <cmath>

#include "pointqa/errors.hpp"

namespace pointqa::nn {

std::size_t ParameterSet::add(const std::string& name, Matrix init) {
    if (index_.count(name)) throw ContractError("duplicate parameter " + name);
    index_.emplace(name, params_.size());
    params_.push_back({name, std::move(init)});
    return params_.size() - 1;
}

std::size_t ParameterSet::index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter " + name);
    return it->second;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

Gradients zero_gradients(const ParameterSet& params) {
    Gradients g;
    g.reserve(params.size());
    for (const auto& p : params) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    return g;
}

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::push(Matrix value, bool requires_grad, Backward backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    if (requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::input(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::param(std::size_t index) {
    if (!params_ || index >= params_->size()) throw ContractError("tape has no parameter " + std::to_string(index));
    auto it = param_nodes_.find(index);
    if (it != param_nodes_.end()) return {this, it->second};
    Node node;
    node.ref = &(*params_)[index].value;
    node.requires_grad = true;
    node.param = static_cast<long>(index);
    nodes_.push_back(std::move(node));
    const int id = static_cast<int>(nodes_.size() - 1);
    param_nodes_.emplace(index, id);
    return {this, id};
}

const Matrix& Tape::value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ref ? *n.ref : n.value;
}

void Tape::ensure_grad(Node& node) {
    if (node.has_grad) return;
    const Matrix& v = node.ref ? *node.ref : node.value;
    node.grad = Matrix::Zero(v.rows(), v.cols());
    node.has_grad = true;
}

void Tape::add_grad(int id, const Matrix& g) { add_grad_expr(id, g); }

Matrix& Tape::grad_block(int id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    ensure_grad(node);
    return node.grad;
}

void Tape::backward(Var out) {
    if (out.tape != this) throw ContractError("backward on a foreign variable");
    const Matrix& v = value(out.id);
    if (v.rows() != 1 || v.cols() != 1) throw ContractError("backward needs a scalar output");
    Node& root = nodes_[static_cast<std::size_t>(out.id)];
    if (!root.requires_grad) return;
    ensure_grad(root);
    root.grad(0, 0) += 1.0;
    for (int i = out.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.has_grad || !n.backward) continue;
        n.backward(*this, n.grad);
    }
}

const Matrix& Tape::grad(Var v) const {
    static const Matrix empty;
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    return n.has_grad ? n.grad : empty;
}

void Tape::accumulate(Gradients& grads, double scale) const {
    for (const auto& [index, id] : param_nodes_) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.has_grad) grads[index] += scale * n.grad;
    }
}

namespace {

bool any_grad(std::initializer_list<Var> vars) {
    for (const auto& v : vars) {
        if (v.tape->requires_grad(v.id)) return true;
    }
    return false;
}

void check_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw ContractError("variables live on different tapes");
}

void check_shape(bool ok, const char* op) {
    if (!ok) throw ContractError(std::string("shape mismatch in ") + op);
}

}  // namespace

Var matmul(Var a, Var b) {
    check_same_tape(a, b);
    check_shape(a.cols() == b.rows(), "matmul");
    Matrix out = a.value() * b.value();
    return a.tape->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
        if (t.requires_grad(a.id)) t.add_grad_expr(a.id, g * t.value(b.id).transpose());
        if (t.requires_grad(b.id)) t.add_grad_expr(b.id, t.value(a.id).transpose() * g);
    });
}

Var matmul_nt(Var a, Var b) {
    check_same_tape(a, b);
    check_shape(a.cols() == b.cols(), "matmul_nt");
    Matrix out = a.value() * b.value().transpose();
    return a.tape->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
        if (t.requires_grad(a.id)) t.add_grad_expr(a.id, g * t.value(b.id));
        if (t.requires_grad(b.id)) t.add_grad_expr(b.id, g.transpose() * t.value(a.id));
    });
}

Var linear(Var x, Var w, Var b) {
    check_same_tape(x, w);
    check_shape(x.cols() == w.rows() && b.rows() == 1 && b.cols() == w.cols(), "linear");
    Matrix out = x.value() * w.value();
    out.rowwise() += b.value().row(0);
    return x.tape->push(std::move(out), any_grad({x, w, b}), [x, w, b](Tape& t, const Matrix& g) {
        if (t.requires_grad(x.id)) t.add_grad_expr(x.id, g * t.value(w.id).transpose());
        if (t.requires_grad(w.id)) t.add_grad_expr(w.id, t.value(x.id).transpose() * g);
        if (t.requires_grad(b.id)) t.add_grad_expr(b.id, g.colwise().sum());
    });
}

Var add(Var a, Var b) {
    check_same_tape(a, b);
    check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
    Matrix out = a.value() + b.value();
    return a.tape->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
        t.add_grad(a.id, g);
        t.add_grad(b.id, g);
    });
}

Var sub(Var a, Var b) {
    check_same_tape(a, b);
    check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
    Matrix out = a.value() - b.value();
    return a.tape->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
        t.add_grad(a.id, g);
        t.add_grad_expr(b.id, -g);
    });
}

Var mul(Var a, Var b) {
    check_same_tape(a, b);
    check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
    Matrix out = a.value().cwiseProduct(b.value());
    return a.tape->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
        if (t.requires_grad(a.id)) t.add_grad_expr(a.id, g.cwiseProduct(t.value(b.id)));
        if (t.requires_grad(b.id)) t.add_grad_expr(b.id, g.cwiseProduct(t.value(a.id)));
    });
}

Var add_row(Var a, Var row) {
    check_same_tape(a, row);
    check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row");
    Matrix out = a.value();
    out.rowwise() += row.value().row(0);
    return a.tape->push(std::move(out), any_grad({a, row}), [a, row](Tape& t, const Matrix& g) {
        t.add_grad(a.id, g);
        if (t.requires_grad(row.id)) t.add_grad_expr(row.id, g.colwise().sum());
    });
}

Var mul_row(Var a, Var row) {
    check_same_tape(a, row);
    check_shape(row.rows() == 1 && row.cols() == a.cols(), "mul_row");
    Matrix out = a.value().array().rowwise() * row.value().row(0).array();
    return a.tape->push(std::move(out), any_grad({a, row}), [a, row](Tape& t, const Matrix& g) {
        if (t.requires_grad(a.id)) t.add_grad_expr(a.id, (g.array().rowwise() * t.value(row.id).row(0).array()).matrix());
        if (t.requires_grad(row.id)) t.add_grad_expr(row.id, g.cwiseProduct(t.value(a.id)).colwise().sum());
    });
}

Var scale(Var a, double s) {
    Matrix out = a.value() * s;
    return a.tape->push(std::move(out), any_grad({a}), [a, s](Tape& t, const Matrix& g) { t.add_grad_expr(a.id, g * s); });
}

Var transpose(Var a) {
    Matrix out = a.value().transpose();
    return a.tape->push(std::move(out), any_grad({a}),
                        [a](Tape& t, const Matrix& g) { t.add_grad_expr(a.id, g.transpose()); });
}

Var relu(Var a) {
    Matrix out = a.value().cwiseMax(0.0);
    const int out_id = static_cast<int>(a.tape->size());
    return a.tape->push(std::move(out), any_grad({a}), [a, out_id](Tape& t, const Matrix& g) {
        t.add_grad_expr(a.id, (t.value(out_id).array() > 0.0).select(g, 0.0));
    });
}

Var tanh(Var a) {
    Matrix out = a.value().array().tanh().matrix();
    const int out_id = static_cast<int>(a.tape->size());
    return a.tape->push(std::move(out), any_grad({a}), [a, out_id](Tape& t, const Matrix& g) {
        const auto& y = t.value(out_id).array();
        t.add_grad_expr(a.id, (g.array() * (1.0 - y * y)).matrix());
    });
}

Var sigmoid(Var a) {
    Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    const int out_id = static_cast<int>(a.tape->size());
    return a.tape->push(std::move(out), any_grad({a}), [a, out_id](Tape& t, const Matrix& g) {
        const auto& y = t.value(out_id).array();
        t.add_grad_expr(a.id, (g.array() * y * (1.0 - y)).matrix());
    });
}

Var sum(Var a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return a.tape->push(std::move(out), any_grad({a}), [a](Tape& t, const Matrix& g) {
        const Matrix& v = t.value(a.id);
        t.add_grad_expr(a.id, Matrix::Constant(v.rows(), v.cols(), g(0, 0)));
    });
}

Matrix softmax_rows(const Matrix& a, const Mask& mask) {
    if (static_cast<Eigen::Index>(mask.size()) != a.cols()) throw ContractError("softmax mask length mismatch");
    Matrix out = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        double m = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            if (!mask[static_cast<std::size_t>(c)]) continue;
            any = true;
            // NaN scores propagate so that divergence surfaces as a non-finite loss.
            m = std::isnan(a(r, c)) || std::isnan(m) ? std::numeric_limits<double>::quiet_NaN() : std::max(m, a(r, c));
        }
        if (!any) throw ContractError("attention over an all-masked row");
        double z = 0;
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            if (!mask[static_cast<std::size_t>(c)]) continue;
            out(r, c) = std::exp(a(r, c) - m);
            z += out(r, c);
        }
        out.row(r) /= z;
    }
    return out;
}

namespace {

// d(softmax)^T g, row-wise: p * (g - rowsum(g * p)).
Matrix softmax_backward(const Matrix& p, const Matrix& g) {
    Eigen::VectorXd dot = (g.cwiseProduct(p)).rowwise().sum();
    Matrix out = g;
    out.colwise() -= dot;
    return out.cwiseProduct(p);
}

}  // namespace

Var masked_softmax(Var a, const Mask& mask) {
    Matrix out = softmax_rows(a.value(), mask);
    const int out_id = static_cast<int>(a.tape->size());
    return a.tape->push(std::move(out), any_grad({a}), [a, out_id](Tape& t, const Matrix& g) {
        t.add_grad(a.id, softmax_backward(t.value(out_id), g));
    });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    check_shape(gain.rows() == 1 && gain.cols() == x.cols() && bias.cols() == x.cols(), "layer_norm");
    const Matrix& v = x.value();
    const auto n = static_cast<double>(v.cols());
    Matrix xhat(v.rows(), v.cols());
    Eigen::VectorXd inv_std(v.rows());
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double mean = v.row(r).mean();
        const double var = (v.row(r).array() - mean).square().sum() / n;
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (v.row(r).array() - mean) * inv_std(r);
    }
    Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
    out.rowwise() += bias.value().row(0);
    return x.tape->push(std::move(out), any_grad({x, gain, bias}),
                        [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Matrix& g) {
                            if (t.requires_grad(gain.id)) t.add_grad_expr(gain.id, g.cwiseProduct(xhat).colwise().sum());
                            if (t.requires_grad(bias.id)) t.add_grad_expr(bias.id, g.colwise().sum());
                            if (!t.requires_grad(x.id)) return;
                            const auto n = static_cast<double>(xhat.cols());
                            Matrix dxhat = g.array().rowwise() * t.value(gain.id).row(0).array();
                            Matrix dx(xhat.rows(), xhat.cols());
                            for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                                const double m1 = dxhat.row(r).sum() / n;
                                const double m2 = dxhat.row(r).dot(xhat.row(r)) / n;
                                dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                            }
                            t.add_grad(x.id, dx);
                        });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_rows of nothing");
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts.front().cols();
    bool grad = false;
    for (const auto& p : parts) {
        check_same_tape(p, parts.front());
        check_shape(p.cols() == cols, "concat_rows");
        rows += p.rows();
        grad = grad || p.tape->requires_grad(p.id);
    }
    Matrix out(rows, cols);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        out.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    return parts.front().tape->push(std::move(out), grad, [parts](Tape& t, const Matrix& g) {
        Eigen::Index r = 0;
        for (const auto& p : parts) {
            const Eigen::Index n = t.value(p.id).rows();
            t.add_grad_expr(p.id, g.middleRows(r, n));
            r += n;
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_cols of nothing");
    Eigen::Index cols = 0;
    const Eigen::Index rows = parts.front().rows();
    bool grad = false;
    for (const auto& p : parts) {
        check_same_tape(p, parts.front());
        check_shape(p.rows() == rows, "concat_cols");
        cols += p.cols();
        grad = grad || p.tape->requires_grad(p.id);
    }
    Matrix out(rows, cols);
    Eigen::Index c = 0;
    for (const auto& p : parts) {
        out.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    return parts.front().tape->push(std::move(out), grad, [parts](Tape& t, const Matrix& g) {
        Eigen::Index c = 0;
        for (const auto& p : parts) {
            const Eigen::Index n = t.value(p.id).cols();
            t.add_grad_expr(p.id, g.middleCols(c, n));
            c += n;
        }
    });
}

Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count) {
    check_shape(begin >= 0 && count >= 0 && begin + count <= a.rows(), "slice_rows");
    Matrix out = a.value().middleRows(begin, count);
    return a.tape->push(std::move(out), any_grad({a}), [a, begin, count](Tape& t, const Matrix& g) {
        t.grad_block(a.id).middleRows(begin, count) += g;
    });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
    check_shape(begin >= 0 && count >= 0 && begin + count <= a.cols(), "slice_cols");
    Matrix out = a.value().middleCols(begin, count);
    return a.tape->push(std::move(out), any_grad({a}), [a, begin, count](Tape& t, const Matrix& g) {
        t.grad_block(a.id).middleCols(begin, count) += g;
    });
}

Var gather_rows(Var table, const std::vector<int>& indices) {
    const Matrix& v = table.value();
    Matrix out(static_cast<Eigen::Index>(indices.size()), v.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        check_shape(indices[i] >= 0 && indices[i] < v.rows(), "gather_rows");
        out.row(static_cast<Eigen::Index>(i)) = v.row(indices[i]);
    }
    return table.tape->push(std::move(out), any_grad({table}), [table, indices](Tape& t, const Matrix& g) {
        Matrix& dst = t.grad_block(table.id);
        for (std::size_t i = 0; i < indices.size(); ++i) dst.row(indices[i]) += g.row(static_cast<Eigen::Index>(i));
    });
}

Var softmax_cross_entropy(Var logits, int label) {
    const Matrix& z = logits.value();
    check_shape(z.rows() == 1 && label >= 0 && label < z.cols(), "softmax_cross_entropy");
    const double m = z.maxCoeff();
    Matrix p = (z.array() - m).exp().matrix();
    const double total = p.sum();
    p /= total;
    Matrix out(1, 1);
    out(0, 0) = std::log(total) + m - z(0, label);
    return logits.tape->push(std::move(out), any_grad({logits}), [logits, label, p = std::move(p)](Tape& t, const Matrix& g) {
        Matrix d = p;
        d(0, label) -= 1.0;
        t.add_grad_expr(logits.id, d * g(0, 0));
    });
}

Var multihead_attention(Var q, Var k, Var v, const Mask& key_mask, int heads, std::vector<Matrix>* probs) {
    check_same_tape(q, k);
    check_same_tape(q, v);
    const Eigen::Index d = q.cols();
    check_shape(heads >= 1 && d % heads == 0 && k.cols() == d && v.cols() == d && k.rows() == v.rows(),
                "multihead_attention");
    if (static_cast<Eigen::Index>(key_mask.size()) != k.rows()) throw ContractError("attention key mask length mismatch");
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Matrix& Q = q.value();
    const Matrix& K = k.value();
    const Matrix& V = v.value();
    std::vector<Matrix> p(static_cast<std::size_t>(heads));
    Matrix out(Q.rows(), d);
    for (int h = 0; h < heads; ++h) {
        const Eigen::Index c = h * dh;
        Matrix scores = (Q.middleCols(c, dh) * K.middleCols(c, dh).transpose()) * scale;
        p[static_cast<std::size_t>(h)] = softmax_rows(scores, key_mask);
        out.middleCols(c, dh) = p[static_cast<std::size_t>(h)] * V.middleCols(c, dh);
    }
    if (probs) *probs = p;
    return q.tape->push(std::move(out), any_grad({q, k, v}), [q, k, v, heads, dh, scale, p = std::move(p)](Tape& t, const Matrix& g) {
        const Matrix& Q = t.value(q.id);
        const Matrix& K = t.value(k.id);
        const Matrix& V = t.value(v.id);
        Matrix dq = Matrix::Zero(Q.rows(), Q.cols());
        Matrix dk = Matrix::Zero(K.rows(), K.cols());
        Matrix dv = Matrix::Zero(V.rows(), V.cols());
        for (int h = 0; h < heads; ++h) {
            const Eigen::Index c = h * dh;
            const Matrix& P = p[static_cast<std::size_t>(h)];
            const auto go = g.middleCols(c, dh);
            dv.middleCols(c, dh) = P.transpose() * go;
            const Matrix ds = softmax_backward(P, go * V.middleCols(c, dh).transpose()) * scale;
            dq.middleCols(c, dh) = ds * K.middleCols(c, dh);
            dk.middleCols(c, dh) = ds.transpose() * Q.middleCols(c, dh);
        }
        t.add_grad(q.id, dq);
        t.add_grad(k.id, dk);
        t.add_grad(v.id, dv);
    });
}

}  // namespace pointqa::nn
