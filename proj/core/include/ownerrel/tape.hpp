#pragma once

#include <cstddef>
#include <vector>

#include "ownerrel/matrix.hpp"

namespace ownerrel {

// Reverse-mode gradient tape over a fixed op vocabulary.
//
// Every op appends one node holding its forward value. backward() walks the
// nodes in reverse and accumulates gradients into every node that depends on
// a differentiable leaf. Borrowed leaves (parameters, large inputs) are held
// by pointer and must outlive the tape.
class Tape {
 public:
  struct Var {
    std::size_t index = 0;
  };

  enum class Op {
    kLeaf,
    kMatmul,
    kMatmulNT,
    kAddBias,
    kAdd,
    kSub,
    kHadamard,
    kScale,
    kRelu,
    kRowSoftmax,
    kGroupSoftmax,
    kL2NormalizeRows,
    kRowNormalize,
    kConcatCols,
    kGatherRows,
    kScatter,
    kSum,
    kMean,
    kOpaque,
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Matrix value);
  Var constant_ref(const Matrix& value);
  // Differentiable leaf borrowed from the caller.
  Var parameter(const Matrix& value);
  Var variable(Matrix value);

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a · bᵀ
  Var add_bias(Var x, Var bias);  // bias is 1×cols, broadcast over rows
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double s);
  Var relu(Var x);
  Var row_softmax(Var x);
  // Softmax of a column vector within groups; group[i] labels row i.
  Var group_softmax(Var x, std::vector<std::size_t> group);
  // Rows with zero norm map to zero rows.
  Var l2_normalize_rows(Var x);
  // Divides each row by its sum; every row sum must be positive.
  Var row_normalize(Var x);
  Var concat_cols(Var a, Var b);
  Var gather_rows(Var x, std::vector<std::size_t> rows);
  // Copy of `base` with flat positions overwritten by the entries of a
  // column vector.
  Var scatter(Matrix base, Var values, std::vector<std::size_t> positions);
  Var sum(Var x);
  Var mean(Var x);
  // Value computed outside the vocabulary from `input`; backward through it
  // raises kUnsupportedOp when `input` is differentiable.
  Var opaque(Matrix value, Var input);

  // Linear layer y = x · Wᵀ + b.
  Var dense(Var x, Var weight, Var bias) { return add_bias(matmul_nt(x, weight), bias); }

  const Matrix& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(output) and propagates. Can be called once per tape.
  void backward(Var output, const Matrix& seed);
  void backward(Var scalar_output);

  // Gradient accumulated into a node; zeros when nothing flowed into it.
  Matrix grad(Var v) const;
  // Same, moving the stored gradient out of the tape.
  Matrix take_grad(Var v);

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::size_t a = 0;
    std::size_t b = 0;
    Matrix owned;
    const Matrix* borrowed = nullptr;
    bool requires_grad = false;
    double scalar = 0.0;
    std::vector<std::size_t> indices;
    Matrix grad;
  };

  Var push(Node node);
  Node& node(Var v) { return nodes_.at(v.index); }
  const Node& node(Var v) const { return nodes_.at(v.index); }
  const Matrix& val(std::size_t i) const;
  Matrix& grad_slot(std::size_t i);
  void add_grad(std::size_t i, Matrix delta);
  void backprop_node(std::size_t i);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Op identifier as written in diagnostics.
const char* to_string(Tape::Op op);

}  // namespace ownerrel
