#include "ownerrel/nn.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "ownerrel/error.hpp"

namespace ownerrel {

void DenseLayer::init_glorot(Rng& rng) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(in_features() + out_features()));
  for (double& w : weight.data()) w = rng.uniform(-bound, bound);
  bias.fill(0.0);
}

Matrix DenseLayer::apply(const Matrix& x) const {
  Matrix y = matmul_nt(x, weight);
  if (bias.cols() != y.cols()) fail(ErrorCode::kShape, "DenseLayer: bias width mismatch");
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += bias(0, c);
  }
  return y;
}

Tape::Var DenseLayer::apply(Tape& tape, Tape::Var x) const {
  return tape.dense(x, tape.parameter(weight), tape.parameter(bias));
}

void sgd_step(Matrix& param, const Matrix& grad, Matrix& velocity, double lr, double momentum) {
  if (!param.same_shape(grad)) fail(ErrorCode::kShape, "sgd_step: gradient shape mismatch");
  if (velocity.empty()) velocity = Matrix(param.rows(), param.cols());
  if (!param.same_shape(velocity)) fail(ErrorCode::kShape, "sgd_step: velocity shape mismatch");
  auto& p = param.data();
  auto& v = velocity.data();
  const auto& g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = momentum * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

SgdMomentum::SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr >= 0.0)) fail(ErrorCode::kInvalidParameter, "SgdMomentum: learning rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorCode::kInvalidParameter, "SgdMomentum: momentum must be in [0, 1)");
}

void SgdMomentum::step(const std::vector<ParamRef>& params, const std::vector<Matrix>& grads) {
  if (params.size() != grads.size()) fail(ErrorCode::kShape, "SgdMomentum: parameter/gradient count mismatch");
  if (velocity_.size() != params.size()) velocity_.assign(params.size(), Matrix());
  for (std::size_t i = 0; i < params.size(); ++i) {
    sgd_step(*params[i].value, grads[i], velocity_[i], lr_, momentum_);
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(ErrorCode::kFormat, "not a decimal number: '" + s + "'");
  }
  return v;
}

namespace {

constexpr const char* kCheckpointMagic = "ownerrel-checkpoint";

}  // namespace

void Checkpoint::write(std::ostream& out) const {
  out << kCheckpointMagic << ' ' << kVersion << '\n';
  for (const auto& [key, value] : meta) out << "meta " << key << ' ' << value << '\n';
  for (const auto& [name, m] : params) {
    out << "param " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (c) out << ' ';
        out << format_double(m(r, c));
      }
      out << '\n';
    }
  }
  out << "end\n";
}

Checkpoint Checkpoint::read(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) {
    fail(ErrorCode::kFormat, "checkpoint: missing header");
  }
  if (version != kVersion) fail(ErrorCode::kFormat, "checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  std::string tag;
  while (in >> tag) {
    if (tag == "end") return ck;
    if (tag == "meta") {
      std::string key, value;
      if (!(in >> key >> value)) fail(ErrorCode::kFormat, "checkpoint: truncated meta line");
      ck.meta[key] = value;
    } else if (tag == "param") {
      std::string name;
      std::size_t rows = 0, cols = 0;
      if (!(in >> name >> rows >> cols)) fail(ErrorCode::kFormat, "checkpoint: truncated param header");
      Matrix m(rows, cols);
      std::string tok;
      for (double& v : m.data()) {
        if (!(in >> tok)) fail(ErrorCode::kFormat, "checkpoint: truncated values for " + name);
        v = parse_double(tok);
      }
      ck.params.emplace_back(std::move(name), std::move(m));
    } else {
      fail(ErrorCode::kFormat, "checkpoint: unexpected token '" + tag + "'");
    }
  }
  fail(ErrorCode::kFormat, "checkpoint: missing end marker");
}

}  // namespace ownerrel
