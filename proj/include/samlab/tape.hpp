#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "samlab/array.hpp"
#include "samlab/param_vector.hpp"

namespace samlab::ad {

enum class OpKind : std::uint8_t {
    Constant,
    Param,
    Add,
    Sub,
    Mul,
    MatMul,
    MatMulNT,  // a * b^T, used for tied output projections
    BiasAdd,   // matrix + row-broadcast vector
    Relu,
    Sigmoid,
    Tanh,
    SoftmaxXent,  // row-wise softmax cross-entropy against integer labels
    MeanAll,      // mean over every element
    Embed,        // table lookup: rows of a (V x E) matrix by integer index
    Concat,
};

const char* op_name(OpKind op);

struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

struct Node {
    OpKind op;
    std::vector<std::int32_t> inputs;
    Array value;
    std::vector<std::int32_t> indices;  // SoftmaxXent labels or Embed lookups
    int axis = 0;                       // Concat
    int param_slot = -1;                // Param: segment index in the model layout
};

// Reverse-mode computation graph. Built define-by-run: creating a node
// evaluates it immediately, so the forward pass is the act of recording.
// Node inputs always reference earlier nodes.
class Tape {
public:
    Var constant(Array value);
    Var param(Array value, int slot);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);
    Var bias_add(Var m, Var bias);
    Var relu(Var a);
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var softmax_xent(Var logits, std::vector<std::int32_t> labels);
    Var mean_all(Var a);
    Var embed(Var table, std::vector<std::int32_t> ids);
    Var concat(const std::vector<Var>& parts, int axis);

    std::size_t size() const { return nodes_.size(); }
    const Array& value(Var v) const;
    double scalar(Var v) const;

    // Gradient of a scalar output with respect to every Param node, scattered
    // into the given layout. Deterministic for fixed inputs.
    GradientResult backward(Var output, const LayoutPtr& layout) const;

    // Recompute every node from the recorded leaves, in order, and return the
    // value of `output`. Matches the recorded values bit-exactly.
    Array replay(Var output) const;

private:
    Var push(Node node);
    const Node& node(Var v) const;
    void check_var(Var v, const char* where) const;

    std::vector<Node> nodes_;
};

}  // namespace samlab::ad
