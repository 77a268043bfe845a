#include "samlab/tape.hpp"

#include <Eigen/Core>
#include <cmath>
#include <utility>

#include "samlab/errors.hpp"

namespace samlab::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

CMap map2d(const Array& a, std::size_t rows, std::size_t cols) {
    return CMap(a.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MMap map2d(Array& a, std::size_t rows, std::size_t cols) {
    return MMap(a.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

[[noreturn]] void shape_error(const char* op, std::size_t node_id, const std::string& detail) {
    throw StateError(std::string("shape mismatch in ") + op + " (node " + std::to_string(node_id) +
                     "): " + detail);
}

}  // namespace

const char* op_name(OpKind op) {
    switch (op) {
        case OpKind::Constant: return "constant";
        case OpKind::Param: return "param";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::MatMul: return "matmul";
        case OpKind::MatMulNT: return "matmul_nt";
        case OpKind::BiasAdd: return "bias_add";
        case OpKind::Relu: return "relu";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Tanh: return "tanh";
        case OpKind::SoftmaxXent: return "softmax_xent";
        case OpKind::MeanAll: return "mean_all";
        case OpKind::Embed: return "embed";
        case OpKind::Concat: return "concat";
    }
    return "?";
}

void Tape::check_var(Var v, const char* where) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw StateError(std::string(where) + ": variable does not reference a recorded node");
    }
}

const Node& Tape::node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Array& Tape::value(Var v) const {
    check_var(v, "value");
    return node(v).value;
}

double Tape::scalar(Var v) const {
    check_var(v, "scalar");
    const Array& a = node(v).value;
    if (a.numel() != 1) throw StateError("scalar: node value has " + std::to_string(a.numel()) + " elements");
    return a[0];
}

Var Tape::constant(Array value) {
    Node n;
    n.op = OpKind::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::param(Array value, int slot) {
    Node n;
    n.op = OpKind::Param;
    n.value = std::move(value);
    n.param_slot = slot;
    return push(std::move(n));
}

namespace {

Array eval_elementwise_binary(OpKind op, const Array& a, const Array& b) {
    Array out = Array::zeros_like(a);
    const std::size_t n = a.numel();
    switch (op) {
        case OpKind::Add:
            for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
            break;
        case OpKind::Sub:
            for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
            break;
        case OpKind::Mul:
            for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
            break;
        default: break;
    }
    return out;
}

struct MatDims {
    std::size_t rows, cols;
};

// 1-D operands act as a row vector on the left and a column vector on the right.
MatDims matmul_dims(const Array& a, bool left) {
    if (a.rank() == 2) return {a.shape()[0], a.shape()[1]};
    if (a.rank() == 1) return left ? MatDims{1, a.shape()[0]} : MatDims{a.shape()[0], 1};
    return {1, 1};
}

Array eval_matmul(const Array& a, const Array& b) {
    MatDims da = matmul_dims(a, true);
    MatDims db = matmul_dims(b, false);
    std::vector<std::size_t> out_shape;
    if (a.rank() == 2 && b.rank() == 2) out_shape = {da.rows, db.cols};
    else if (a.rank() == 1 && b.rank() == 2) out_shape = {db.cols};
    else out_shape = {da.rows};
    Array out(out_shape);
    map2d(out, da.rows, db.cols).noalias() = map2d(a, da.rows, da.cols) * map2d(b, db.rows, db.cols);
    return out;
}

Array eval_matmul_nt(const Array& a, const Array& b) {
    Array out({a.shape()[0], b.shape()[0]});
    map2d(out, a.shape()[0], b.shape()[0]).noalias() =
        map2d(a, a.shape()[0], a.shape()[1]) * map2d(b, b.shape()[0], b.shape()[1]).transpose();
    return out;
}

Array eval_bias_add(const Array& m, const Array& bias) {
    Array out = Array::zeros_like(m);
    const std::size_t rows = m.shape()[0], cols = m.shape()[1];
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = m[r * cols + c] + bias[c];
    return out;
}

Array eval_unary(OpKind op, const Array& a) {
    Array out = Array::zeros_like(a);
    const std::size_t n = a.numel();
    switch (op) {
        case OpKind::Relu:
            for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
            break;
        case OpKind::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
            break;
        case OpKind::Tanh:
            for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(a[i]);
            break;
        default: break;
    }
    return out;
}

Array eval_softmax_xent(const Array& logits, const std::vector<std::int32_t>& labels) {
    const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
    Array out({rows});
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = logits.data() + r * cols;
        double mx = row[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) sum += std::exp(row[c] - mx);
        out[r] = std::log(sum) - (row[static_cast<std::size_t>(labels[r])] - mx);
    }
    return out;
}

Array eval_mean_all(const Array& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i];
    return Array::scalar(s / static_cast<double>(a.numel()));
}

Array eval_embed(const Array& table, const std::vector<std::int32_t>& ids) {
    const std::size_t dim = table.shape()[1];
    Array out({ids.size(), dim});
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const double* src = table.data() + static_cast<std::size_t>(ids[r]) * dim;
        double* dst = out.data() + r * dim;
        for (std::size_t c = 0; c < dim; ++c) dst[c] = src[c];
    }
    return out;
}

Array eval_concat(const std::vector<const Array*>& parts, int axis) {
    if (parts[0]->rank() == 1) {
        std::size_t total = 0;
        for (const Array* p : parts) total += p->numel();
        Array out({total});
        std::size_t pos = 0;
        for (const Array* p : parts)
            for (std::size_t i = 0; i < p->numel(); ++i) out[pos++] = (*p)[i];
        return out;
    }
    if (axis == 0) {
        std::size_t rows = 0;
        const std::size_t cols = parts[0]->shape()[1];
        for (const Array* p : parts) rows += p->shape()[0];
        Array out({rows, cols});
        std::size_t pos = 0;
        for (const Array* p : parts)
            for (std::size_t i = 0; i < p->numel(); ++i) out[pos++] = (*p)[i];
        return out;
    }
    const std::size_t rows = parts[0]->shape()[0];
    std::size_t cols = 0;
    for (const Array* p : parts) cols += p->shape()[1];
    Array out({rows, cols});
    std::size_t col0 = 0;
    for (const Array* p : parts) {
        const std::size_t pc = p->shape()[1];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c) out[r * cols + col0 + c] = (*p)[r * pc + c];
        col0 += pc;
    }
    return out;
}

Array eval_op(const Node& n, const std::vector<const Array*>& in) {
    switch (n.op) {
        case OpKind::Constant:
        case OpKind::Param: return n.value;
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul: return eval_elementwise_binary(n.op, *in[0], *in[1]);
        case OpKind::MatMul: return eval_matmul(*in[0], *in[1]);
        case OpKind::MatMulNT: return eval_matmul_nt(*in[0], *in[1]);
        case OpKind::BiasAdd: return eval_bias_add(*in[0], *in[1]);
        case OpKind::Relu:
        case OpKind::Sigmoid:
        case OpKind::Tanh: return eval_unary(n.op, *in[0]);
        case OpKind::SoftmaxXent: return eval_softmax_xent(*in[0], n.indices);
        case OpKind::MeanAll: return eval_mean_all(*in[0]);
        case OpKind::Embed: return eval_embed(*in[0], n.indices);
        case OpKind::Concat: return eval_concat(in, n.axis);
    }
    throw StateError("eval_op: unknown op");
}

}  // namespace

Var Tape::add(Var a, Var b) {
    check_var(a, "add");
    check_var(b, "add");
    if (!node(a).value.same_shape(node(b).value))
        shape_error("add", nodes_.size(), node(a).value.shape_string() + " vs " + node(b).value.shape_string());
    Node n;
    n.op = OpKind::Add;
    n.inputs = {a.id, b.id};
    n.value = eval_elementwise_binary(OpKind::Add, node(a).value, node(b).value);
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    check_var(a, "sub");
    check_var(b, "sub");
    if (!node(a).value.same_shape(node(b).value))
        shape_error("sub", nodes_.size(), node(a).value.shape_string() + " vs " + node(b).value.shape_string());
    Node n;
    n.op = OpKind::Sub;
    n.inputs = {a.id, b.id};
    n.value = eval_elementwise_binary(OpKind::Sub, node(a).value, node(b).value);
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    check_var(a, "mul");
    check_var(b, "mul");
    if (!node(a).value.same_shape(node(b).value))
        shape_error("mul", nodes_.size(), node(a).value.shape_string() + " vs " + node(b).value.shape_string());
    Node n;
    n.op = OpKind::Mul;
    n.inputs = {a.id, b.id};
    n.value = eval_elementwise_binary(OpKind::Mul, node(a).value, node(b).value);
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    check_var(a, "matmul");
    check_var(b, "matmul");
    const Array& av = node(a).value;
    const Array& bv = node(b).value;
    if (av.rank() == 0 || bv.rank() == 0 || av.rank() > 2 || bv.rank() > 2 ||
        (av.rank() == 1 && bv.rank() == 1))
        shape_error("matmul", nodes_.size(),
                    "unsupported ranks " + av.shape_string() + " vs " + bv.shape_string());
    MatDims da = matmul_dims(av, true);
    MatDims db = matmul_dims(bv, false);
    if (da.cols != db.rows)
        shape_error("matmul", nodes_.size(),
                    "inner dimensions " + av.shape_string() + " vs " + bv.shape_string());
    Node n;
    n.op = OpKind::MatMul;
    n.inputs = {a.id, b.id};
    n.value = eval_matmul(av, bv);
    return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
    check_var(a, "matmul_nt");
    check_var(b, "matmul_nt");
    const Array& av = node(a).value;
    const Array& bv = node(b).value;
    if (av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[1])
        shape_error("matmul_nt", nodes_.size(), av.shape_string() + " vs " + bv.shape_string());
    Node n;
    n.op = OpKind::MatMulNT;
    n.inputs = {a.id, b.id};
    n.value = eval_matmul_nt(av, bv);
    return push(std::move(n));
}

Var Tape::bias_add(Var m, Var bias) {
    check_var(m, "bias_add");
    check_var(bias, "bias_add");
    const Array& mv = node(m).value;
    const Array& bv = node(bias).value;
    if (mv.rank() != 2 || bv.rank() != 1 || mv.shape()[1] != bv.shape()[0])
        shape_error("bias_add", nodes_.size(), mv.shape_string() + " vs " + bv.shape_string());
    Node n;
    n.op = OpKind::BiasAdd;
    n.inputs = {m.id, bias.id};
    n.value = eval_bias_add(mv, bv);
    return push(std::move(n));
}

Var Tape::relu(Var a) {
    check_var(a, "relu");
    Node n;
    n.op = OpKind::Relu;
    n.inputs = {a.id};
    n.value = eval_unary(OpKind::Relu, node(a).value);
    return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
    check_var(a, "sigmoid");
    Node n;
    n.op = OpKind::Sigmoid;
    n.inputs = {a.id};
    n.value = eval_unary(OpKind::Sigmoid, node(a).value);
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    check_var(a, "tanh");
    Node n;
    n.op = OpKind::Tanh;
    n.inputs = {a.id};
    n.value = eval_unary(OpKind::Tanh, node(a).value);
    return push(std::move(n));
}

Var Tape::softmax_xent(Var logits, std::vector<std::int32_t> labels) {
    check_var(logits, "softmax_xent");
    const Array& lv = node(logits).value;
    if (lv.rank() != 2 || labels.size() != lv.shape()[0])
        shape_error("softmax_xent", nodes_.size(),
                    lv.shape_string() + " with " + std::to_string(labels.size()) + " labels");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= lv.shape()[1])
            throw DataError("softmax_xent: label " + std::to_string(labels[i]) + " at row " +
                            std::to_string(i) + " outside class range [0, " +
                            std::to_string(lv.shape()[1]) + ")");
    }
    Node n;
    n.op = OpKind::SoftmaxXent;
    n.inputs = {logits.id};
    n.indices = std::move(labels);
    n.value = eval_softmax_xent(lv, n.indices);
    return push(std::move(n));
}

Var Tape::mean_all(Var a) {
    check_var(a, "mean_all");
    if (node(a).value.numel() == 0) shape_error("mean_all", nodes_.size(), "empty input");
    Node n;
    n.op = OpKind::MeanAll;
    n.inputs = {a.id};
    n.value = eval_mean_all(node(a).value);
    return push(std::move(n));
}

Var Tape::embed(Var table, std::vector<std::int32_t> ids) {
    check_var(table, "embed");
    const Array& tv = node(table).value;
    if (tv.rank() != 2) shape_error("embed", nodes_.size(), "table must be 2-D, got " + tv.shape_string());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.shape()[0])
            throw DataError("embed: index " + std::to_string(ids[i]) + " at position " +
                            std::to_string(i) + " outside table range [0, " +
                            std::to_string(tv.shape()[0]) + ")");
    }
    Node n;
    n.op = OpKind::Embed;
    n.inputs = {table.id};
    n.indices = std::move(ids);
    n.value = eval_embed(tv, n.indices);
    return push(std::move(n));
}

Var Tape::concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw StateError("concat: no inputs");
    std::vector<const Array*> vals;
    Node n;
    n.op = OpKind::Concat;
    n.axis = axis;
    for (Var p : parts) {
        check_var(p, "concat");
        vals.push_back(&node(p).value);
        n.inputs.push_back(p.id);
    }
    const std::size_t rank = vals[0]->rank();
    if (rank != 1 && rank != 2) shape_error("concat", nodes_.size(), "rank must be 1 or 2");
    if (rank == 1 && axis != 0) shape_error("concat", nodes_.size(), "1-D arrays concat on axis 0 only");
    if (axis != 0 && axis != 1) shape_error("concat", nodes_.size(), "axis must be 0 or 1");
    for (const Array* v : vals) {
        if (v->rank() != rank) shape_error("concat", nodes_.size(), "mixed ranks");
        if (rank == 2 && axis == 0 && v->shape()[1] != vals[0]->shape()[1])
            shape_error("concat", nodes_.size(), "column counts differ");
        if (rank == 2 && axis == 1 && v->shape()[0] != vals[0]->shape()[0])
            shape_error("concat", nodes_.size(), "row counts differ");
    }
    n.value = eval_concat(vals, axis);
    return push(std::move(n));
}

GradientResult Tape::backward(Var output, const LayoutPtr& layout) const {
    if (nodes_.empty()) throw StateError("backward: no forward pass has been recorded");
    check_var(output, "backward");
    const Array& out_val = node(output).value;
    if (out_val.numel() != 1)
        throw StateError("backward: output must be scalar, got " + out_val.shape_string());

    std::vector<Array> adj(nodes_.size());
    std::vector<bool> has_adj(nodes_.size(), false);
    auto accum = [&](std::int32_t id, std::size_t flat_index, double v) {
        auto uid = static_cast<std::size_t>(id);
        if (!has_adj[uid]) {
            adj[uid] = Array::zeros_like(nodes_[uid].value);
            has_adj[uid] = true;
        }
        adj[uid][flat_index] += v;
    };

    auto out_id = static_cast<std::size_t>(output.id);
    adj[out_id] = Array::scalar(1.0);
    has_adj[out_id] = true;

    GradientResult result(layout);

    for (std::size_t idx = out_id + 1; idx-- > 0;) {
        if (!has_adj[idx]) continue;
        const Node& n = nodes_[idx];
        const Array& g = adj[idx];
        switch (n.op) {
            case OpKind::Constant: break;
            case OpKind::Param: {
                if (n.param_slot < 0) break;
                const auto& seg = layout->segment(static_cast<std::size_t>(n.param_slot));
                if (seg.size != g.numel())
                    throw StateError("backward: param slot " + std::to_string(n.param_slot) +
                                     " size mismatch with layout segment " + seg.name);
                for (std::size_t i = 0; i < seg.size; ++i) result[seg.offset + i] += g[i];
                break;
            }
            case OpKind::Add:
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    accum(n.inputs[0], i, g[i]);
                    accum(n.inputs[1], i, g[i]);
                }
                break;
            case OpKind::Sub:
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    accum(n.inputs[0], i, g[i]);
                    accum(n.inputs[1], i, -g[i]);
                }
                break;
            case OpKind::Mul: {
                const Array& a = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
                const Array& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    accum(n.inputs[0], i, g[i] * b[i]);
                    accum(n.inputs[1], i, g[i] * a[i]);
                }
                break;
            }
            case OpKind::MatMul: {
                const Array& a = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
                const Array& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
                MatDims da = matmul_dims(a, true);
                MatDims db = matmul_dims(b, false);
                if (!has_adj[static_cast<std::size_t>(n.inputs[0])]) {
                    adj[static_cast<std::size_t>(n.inputs[0])] = Array::zeros_like(a);
                    has_adj[static_cast<std::size_t>(n.inputs[0])] = true;
                }
                if (!has_adj[static_cast<std::size_t>(n.inputs[1])]) {
                    adj[static_cast<std::size_t>(n.inputs[1])] = Array::zeros_like(b);
                    has_adj[static_cast<std::size_t>(n.inputs[1])] = true;
                }
                map2d(adj[static_cast<std::size_t>(n.inputs[0])], da.rows, da.cols).noalias() +=
                    map2d(g, da.rows, db.cols) * map2d(b, db.rows, db.cols).transpose();
                map2d(adj[static_cast<std::size_t>(n.inputs[1])], db.rows, db.cols).noalias() +=
                    map2d(a, da.rows, da.cols).transpose() * map2d(g, da.rows, db.cols);
                break;
            }
            case OpKind::MatMulNT: {
                const Array& a = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
                const Array& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
                const std::size_t m = a.shape()[0], k = a.shape()[1], r = b.shape()[0];
                if (!has_adj[static_cast<std::size_t>(n.inputs[0])]) {
                    adj[static_cast<std::size_t>(n.inputs[0])] = Array::zeros_like(a);
                    has_adj[static_cast<std::size_t>(n.inputs[0])] = true;
                }
                if (!has_adj[static_cast<std::size_t>(n.inputs[1])]) {
                    adj[static_cast<std::size_t>(n.inputs[1])] = Array::zeros_like(b);
                    has_adj[static_cast<std::size_t>(n.inputs[1])] = true;
                }
                map2d(adj[static_cast<std::size_t>(n.inputs[0])], m, k).noalias() +=
                    map2d(g, m, r) * map2d(b, r, k);
                map2d(adj[static_cast<std::size_t>(n.inputs[1])], r, k).noalias() +=
                    map2d(g, m, r).transpose() * map2d(a, m, k);
                break;
            }
            case OpKind::BiasAdd: {
                const Array& m = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
                const std::size_t rows = m.shape()[0], cols = m.shape()[1];
                for (std::size_t i = 0; i < g.numel(); ++i) accum(n.inputs[0], i, g[i]);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) accum(n.inputs[1], c, g[r * cols + c]);
                break;
            }
            case OpKind::Relu: {
                const Array& x = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
                // subgradient 0 at exactly 0
                for (std::size_t i = 0; i < g.numel(); ++i)
                    accum(n.inputs[0], i, x[i] > 0.0 ? g[i] : 0.0);
                break;
            }
            case OpKind::Sigmoid: {
                const Array& s = n.value;
                for (std::size_t i = 0; i < g.numel(); ++i)
                    accum(n.inputs[0], i, g[i] * s[i] * (1.0 - s[i]));
                break;
            }
            case OpKind::Tanh: {
                const Array& t = n.value;
                for (std::size_t i = 0; i < g.numel(); ++i)
                    accum(n.inputs[0], i, g[i] * (1.0 - t[i] * t[i]));
                break;
            }
            case OpKind::SoftmaxXent: {
                const Array& logits = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
                const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* row = logits.data() + r * cols;
                    double mx = row[0];
                    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
                    double sum = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(row[c] - mx);
                    for (std::size_t c = 0; c < cols; ++c) {
                        double p = std::exp(row[c] - mx) / sum;
                        double ind = (static_cast<std::int32_t>(c) == n.indices[r]) ? 1.0 : 0.0;
                        accum(n.inputs[0], r * cols + c, g[r] * (p - ind));
                    }
                }
                break;
            }
            case OpKind::MeanAll: {
                const Array& x = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
                const double w = g[0] / static_cast<double>(x.numel());
                for (std::size_t i = 0; i < x.numel(); ++i) accum(n.inputs[0], i, w);
                break;
            }
            case OpKind::Embed: {
                const Array& table = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
                const std::size_t dim = table.shape()[1];
                for (std::size_t r = 0; r < n.indices.size(); ++r) {
                    const std::size_t base = static_cast<std::size_t>(n.indices[r]) * dim;
                    for (std::size_t c = 0; c < dim; ++c) accum(n.inputs[0], base + c, g[r * dim + c]);
                }
                break;
            }
            case OpKind::Concat: {
                const std::size_t rank = n.value.rank();
                if (rank == 1 || n.axis == 0) {
                    std::size_t pos = 0;
                    for (std::int32_t in_id : n.inputs) {
                        const Array& part = nodes_[static_cast<std::size_t>(in_id)].value;
                        for (std::size_t i = 0; i < part.numel(); ++i) accum(in_id, i, g[pos++]);
                    }
                } else {
                    const std::size_t rows = n.value.shape()[0], cols = n.value.shape()[1];
                    std::size_t col0 = 0;
                    for (std::int32_t in_id : n.inputs) {
                        const Array& part = nodes_[static_cast<std::size_t>(in_id)].value;
                        const std::size_t pc = part.shape()[1];
                        for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < pc; ++c)
                                accum(in_id, r * pc + c, g[r * cols + col0 + c]);
                        col0 += pc;
                    }
                }
                break;
            }
        }
    }
    return result;
}

Array Tape::replay(Var output) const {
    if (nodes_.empty()) throw StateError("replay: no forward pass has been recorded");
    check_var(output, "replay");
    std::vector<Array> vals(static_cast<std::size_t>(output.id) + 1);
    for (std::size_t i = 0; i <= static_cast<std::size_t>(output.id); ++i) {
        const Node& n = nodes_[i];
        std::vector<const Array*> in;
        in.reserve(n.inputs.size());
        for (std::int32_t id : n.inputs) in.push_back(&vals[static_cast<std::size_t>(id)]);
        vals[i] = eval_op(n, in);
    }
    return vals[static_cast<std::size_t>(output.id)];
}

}  // namespace samlab::ad
