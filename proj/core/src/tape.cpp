#include "ownerrel/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ownerrel/error.hpp"

namespace ownerrel {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

const char* to_string(Tape::Op op) {
  switch (op) {
    case Tape::Op::kLeaf: return "leaf";
    case Tape::Op::kMatmul: return "matmul";
    case Tape::Op::kMatmulNT: return "matmul_nt";
    case Tape::Op::kAddBias: return "add_bias";
    case Tape::Op::kAdd: return "add";
    case Tape::Op::kSub: return "sub";
    case Tape::Op::kHadamard: return "hadamard";
    case Tape::Op::kScale: return "scale";
    case Tape::Op::kRelu: return "relu";
    case Tape::Op::kRowSoftmax: return "row_softmax";
    case Tape::Op::kGroupSoftmax: return "group_softmax";
    case Tape::Op::kL2NormalizeRows: return "l2_normalize_rows";
    case Tape::Op::kRowNormalize: return "row_normalize";
    case Tape::Op::kConcatCols: return "concat_cols";
    case Tape::Op::kGatherRows: return "gather_rows";
    case Tape::Op::kScatter: return "scatter";
    case Tape::Op::kSum: return "sum";
    case Tape::Op::kMean: return "mean";
    case Tape::Op::kOpaque: return "opaque";
  }
  return "unknown";
}

Tape::Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Matrix& Tape::val(std::size_t i) const {
  const Node& n = nodes_[i];
  return n.borrowed ? *n.borrowed : n.owned;
}

const Matrix& Tape::value(Var v) const { return val(v.index); }

void Tape::add_grad(std::size_t i, Matrix delta) {
  Node& n = nodes_[i];
  if (n.grad.empty()) {
    n.grad = std::move(delta);
  } else {
    n.grad += delta;
  }
}

Matrix& Tape::grad_slot(std::size_t i) {
  Node& n = nodes_[i];
  if (n.grad.empty() && !val(i).empty()) n.grad = Matrix(val(i).rows(), val(i).cols());
  return n.grad;
}

Tape::Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Tape::Var Tape::constant_ref(const Matrix& value) {
  Node n;
  n.borrowed = &value;
  return push(std::move(n));
}

Tape::Var Tape::parameter(const Matrix& value) {
  Node n;
  n.borrowed = &value;
  n.requires_grad = true;
  return push(std::move(n));
}

Tape::Var Tape::variable(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Tape::Var Tape::matmul(Var a, Var b) {
  Node n;
  n.op = Op::kMatmul;
  n.a = a.index;
  n.b = b.index;
  n.owned = ownerrel::matmul(value(a), value(b));
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
  Node n;
  n.op = Op::kMatmulNT;
  n.a = a.index;
  n.b = b.index;
  n.owned = ownerrel::matmul_nt(value(a), value(b));
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Tape::Var Tape::add_bias(Var x, Var bias) {
  const Matrix& xv = value(x);
  const Matrix& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    fail(ErrorCode::kShape, "add_bias: bias " + shape_str(bv) + " for input " + shape_str(xv));
  }
  Node n;
  n.op = Op::kAddBias;
  n.a = x.index;
  n.b = bias.index;
  n.owned = xv;
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto row = n.owned.row(r);
    for (std::size_t c = 0; c < xv.cols(); ++c) row[c] += bv(0, c);
  }
  n.requires_grad = requires_grad(x) || requires_grad(bias);
  return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::kAdd;
  n.a = a.index;
  n.b = b.index;
  n.owned = value(a) + value(b);
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Tape::Var Tape::sub(Var a, Var b) {
  Node n;
  n.op = Op::kSub;
  n.a = a.index;
  n.b = b.index;
  n.owned = value(a) - value(b);
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Tape::Var Tape::hadamard(Var a, Var b) {
  Node n;
  n.op = Op::kHadamard;
  n.a = a.index;
  n.b = b.index;
  n.owned = ownerrel::hadamard(value(a), value(b));
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Tape::Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a.index;
  n.scalar = s;
  n.owned = value(a) * s;
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

Tape::Var Tape::relu(Var x) {
  Node n;
  n.op = Op::kRelu;
  n.a = x.index;
  n.owned = ownerrel::relu(value(x));
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Tape::Var Tape::row_softmax(Var x) {
  const Matrix& xv = value(x);
  Node n;
  n.op = Op::kRowSoftmax;
  n.a = x.index;
  n.owned = Matrix(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto s = ownerrel::softmax(xv.row(r));
    std::copy(s.begin(), s.end(), n.owned.row(r).begin());
  }
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Tape::Var Tape::group_softmax(Var x, std::vector<std::size_t> group) {
  const Matrix& xv = value(x);
  if (xv.cols() != 1 || group.size() != xv.rows()) {
    fail(ErrorCode::kShape, "group_softmax: expects a column vector with one group label per row");
  }
  std::size_t groups = 0;
  for (std::size_t g : group) groups = std::max(groups, g + 1);
  std::vector<double> peak(groups, -INFINITY);
  for (std::size_t i = 0; i < group.size(); ++i) peak[group[i]] = std::max(peak[group[i]], xv(i, 0));
  Node n;
  n.op = Op::kGroupSoftmax;
  n.a = x.index;
  n.owned = Matrix(xv.rows(), 1);
  std::vector<double> total(groups, 0.0);
  for (std::size_t i = 0; i < group.size(); ++i) {
    n.owned(i, 0) = std::exp(xv(i, 0) - peak[group[i]]);
    total[group[i]] += n.owned(i, 0);
  }
  for (std::size_t i = 0; i < group.size(); ++i) n.owned(i, 0) /= total[group[i]];
  n.indices = std::move(group);
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Tape::Var Tape::l2_normalize_rows(Var x) {
  const Matrix& xv = value(x);
  Node n;
  n.op = Op::kL2NormalizeRows;
  n.a = x.index;
  n.owned = Matrix(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double sq = 0.0;
    for (double v : xv.row(r)) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > 0.0) {
      for (std::size_t c = 0; c < xv.cols(); ++c) n.owned(r, c) = xv(r, c) / norm;
    }
  }
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Tape::Var Tape::row_normalize(Var x) {
  const Matrix& xv = value(x);
  Node n;
  n.op = Op::kRowNormalize;
  n.a = x.index;
  n.owned = xv;
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double s = 0.0;
    for (double v : xv.row(r)) s += v;
    if (!(s > 0.0)) fail(ErrorCode::kNormalization, "row_normalize: row " + std::to_string(r) + " has non-positive sum");
    for (double& v : n.owned.row(r)) v /= s;
  }
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Tape::Var Tape::concat_cols(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows() != bv.rows()) fail(ErrorCode::kShape, "concat_cols: " + shape_str(av) + " with " + shape_str(bv));
  Node n;
  n.op = Op::kConcatCols;
  n.a = a.index;
  n.b = b.index;
  n.owned = Matrix(av.rows(), av.cols() + bv.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto dst = n.owned.row(r);
    std::copy(av.row(r).begin(), av.row(r).end(), dst.begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(av.cols()));
  }
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Tape::Var Tape::gather_rows(Var x, std::vector<std::size_t> rows) {
  const Matrix& xv = value(x);
  Node n;
  n.op = Op::kGatherRows;
  n.a = x.index;
  n.owned = Matrix(rows.size(), xv.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= xv.rows()) fail(ErrorCode::kShape, "gather_rows: row index out of range");
    std::copy(xv.row(rows[r]).begin(), xv.row(rows[r]).end(), n.owned.row(r).begin());
  }
  n.indices = std::move(rows);
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Tape::Var Tape::scatter(Matrix base, Var values, std::vector<std::size_t> positions) {
  const Matrix& vv = value(values);
  if (vv.cols() != 1 || vv.rows() != positions.size()) {
    fail(ErrorCode::kShape, "scatter: expects one column-vector entry per position");
  }
  Node n;
  n.op = Op::kScatter;
  n.a = values.index;
  n.owned = std::move(base);
  for (std::size_t e = 0; e < positions.size(); ++e) {
    if (positions[e] >= n.owned.size()) fail(ErrorCode::kShape, "scatter: position out of range");
    n.owned.data()[positions[e]] = vv(e, 0);
  }
  n.indices = std::move(positions);
  n.requires_grad = requires_grad(values);
  return push(std::move(n));
}

Tape::Var Tape::sum(Var x) {
  Node n;
  n.op = Op::kSum;
  n.a = x.index;
  double s = 0.0;
  for (double v : value(x).data()) s += v;
  n.owned = Matrix(1, 1, s);
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Tape::Var Tape::mean(Var x) {
  const Matrix& xv = value(x);
  if (xv.empty()) fail(ErrorCode::kShape, "mean: empty input");
  Node n;
  n.op = Op::kMean;
  n.a = x.index;
  double s = 0.0;
  for (double v : xv.data()) s += v;
  n.owned = Matrix(1, 1, s / static_cast<double>(xv.size()));
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Tape::Var Tape::opaque(Matrix value, Var input) {
  Node n;
  n.op = Op::kOpaque;
  n.a = input.index;
  n.owned = std::move(value);
  n.requires_grad = requires_grad(input);
  return push(std::move(n));
}

void Tape::backward(Var scalar_output) {
  const Matrix& out = value(scalar_output);
  if (out.rows() != 1 || out.cols() != 1) fail(ErrorCode::kShape, "backward: output is not a scalar; pass a seed");
  backward(scalar_output, Matrix(1, 1, 1.0));
}

void Tape::backward(Var output, const Matrix& seed) {
  if (backward_done_) fail(ErrorCode::kUnsupportedOp, "backward: tape already consumed");
  if (!seed.same_shape(value(output))) {
    fail(ErrorCode::kShape, "backward: seed " + shape_str(seed) + " for output " + shape_str(value(output)));
  }
  backward_done_ = true;
  if (!requires_grad(output)) return;
  grad_slot(output.index) += seed;
  for (std::size_t i = output.index + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || n.op == Op::kLeaf || n.grad.empty()) continue;
    backprop_node(i);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return Matrix(val(v.index).rows(), val(v.index).cols());
  return n.grad;
}

Matrix Tape::take_grad(Var v) {
  Node& n = nodes_.at(v.index);
  if (n.grad.empty()) return Matrix(val(v.index).rows(), val(v.index).cols());
  return std::move(n.grad);
}

void Tape::backprop_node(std::size_t i) {
  const Node& n = nodes_[i];
  const Matrix& g = n.grad;
  const Matrix& y = val(i);
  auto wants = [&](std::size_t k) { return nodes_[k].requires_grad; };

  switch (n.op) {
    case Op::kMatmul: {
      if (wants(n.a)) add_grad(n.a, ownerrel::matmul_nt(g, val(n.b)));
      if (wants(n.b)) add_grad(n.b, ownerrel::matmul_tn(val(n.a), g));
      break;
    }
    case Op::kMatmulNT: {
      // y = a·bᵀ: da = g·b, db = gᵀ·a
      if (n.a == n.b) {
        Matrix d = ownerrel::matmul(g, val(n.b)) + ownerrel::matmul_tn(g, val(n.a));
        add_grad(n.a, std::move(d));
        break;
      }
      if (wants(n.a)) add_grad(n.a, ownerrel::matmul(g, val(n.b)));
      if (wants(n.b)) add_grad(n.b, ownerrel::matmul_tn(g, val(n.a)));
      break;
    }
    case Op::kAddBias: {
      if (wants(n.a)) grad_slot(n.a) += g;
      if (wants(n.b)) {
        Matrix& gb = grad_slot(n.b);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
        }
      }
      break;
    }
    case Op::kAdd: {
      if (wants(n.a)) grad_slot(n.a) += g;
      if (wants(n.b)) grad_slot(n.b) += g;
      break;
    }
    case Op::kSub: {
      if (wants(n.a)) grad_slot(n.a) += g;
      if (wants(n.b)) grad_slot(n.b) -= g;
      break;
    }
    case Op::kHadamard: {
      if (n.a == n.b) {
        add_grad(n.a, ownerrel::hadamard(g, val(n.a)) * 2.0);
        break;
      }
      if (wants(n.a)) add_grad(n.a, ownerrel::hadamard(g, val(n.b)));
      if (wants(n.b)) add_grad(n.b, ownerrel::hadamard(g, val(n.a)));
      break;
    }
    case Op::kScale: {
      add_grad(n.a, g * n.scalar);
      break;
    }
    case Op::kRelu: {
      Matrix& gx = grad_slot(n.a);
      const Matrix& x = val(n.a);
      for (std::size_t k = 0; k < x.size(); ++k) {
        if (x.data()[k] > 0.0) gx.data()[k] += g.data()[k];
      }
      break;
    }
    case Op::kRowSoftmax: {
      Matrix& gx = grad_slot(n.a);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < y.cols(); ++c) dot += y(r, c) * g(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += y(r, c) * (g(r, c) - dot);
      }
      break;
    }
    case Op::kGroupSoftmax: {
      Matrix& gx = grad_slot(n.a);
      std::size_t groups = 0;
      for (std::size_t grp : n.indices) groups = std::max(groups, grp + 1);
      std::vector<double> dot(groups, 0.0);
      for (std::size_t k = 0; k < n.indices.size(); ++k) dot[n.indices[k]] += y(k, 0) * g(k, 0);
      for (std::size_t k = 0; k < n.indices.size(); ++k) {
        gx(k, 0) += y(k, 0) * (g(k, 0) - dot[n.indices[k]]);
      }
      break;
    }
    case Op::kL2NormalizeRows: {
      Matrix& gx = grad_slot(n.a);
      const Matrix& x = val(n.a);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        double sq = 0.0;
        for (double v : x.row(r)) sq += v * v;
        const double norm = std::sqrt(sq);
        if (!(norm > 0.0)) continue;
        double dot = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) dot += y(r, c) * g(r, c);
        for (std::size_t c = 0; c < x.cols(); ++c) gx(r, c) += (g(r, c) - y(r, c) * dot) / norm;
      }
      break;
    }
    case Op::kRowNormalize: {
      Matrix& gx = grad_slot(n.a);
      const Matrix& x = val(n.a);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        double s = 0.0;
        for (double v : x.row(r)) s += v;
        double dot = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) dot += g(r, c) * y(r, c);
        for (std::size_t c = 0; c < x.cols(); ++c) gx(r, c) += (g(r, c) - dot) / s;
      }
      break;
    }
    case Op::kConcatCols: {
      const std::size_t left = val(n.a).cols();
      if (wants(n.a)) {
        Matrix& ga = grad_slot(n.a);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < left; ++c) ga(r, c) += g(r, c);
        }
      }
      if (wants(n.b)) {
        Matrix& gb = grad_slot(n.b);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = left; c < g.cols(); ++c) gb(r, c - left) += g(r, c);
        }
      }
      break;
    }
    case Op::kGatherRows: {
      Matrix& gx = grad_slot(n.a);
      for (std::size_t r = 0; r < n.indices.size(); ++r) {
        auto dst = gx.row(n.indices[r]);
        auto src = g.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
      break;
    }
    case Op::kScatter: {
      Matrix& gv = grad_slot(n.a);
      for (std::size_t e = 0; e < n.indices.size(); ++e) gv(e, 0) += g.data()[n.indices[e]];
      break;
    }
    case Op::kSum: {
      Matrix& gx = grad_slot(n.a);
      for (double& v : gx.data()) v += g(0, 0);
      break;
    }
    case Op::kMean: {
      Matrix& gx = grad_slot(n.a);
      const double share = g(0, 0) / static_cast<double>(gx.size());
      for (double& v : gx.data()) v += share;
      break;
    }
    case Op::kLeaf:
      break;
    default:
      fail(ErrorCode::kUnsupportedOp, std::string("backward: no gradient rule for op '") + to_string(n.op) + "'");
  }
}

}  // namespace ownerrel
