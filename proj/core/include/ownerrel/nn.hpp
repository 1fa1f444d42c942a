#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ownerrel/matrix.hpp"
#include "ownerrel/random.hpp"
#include "ownerrel/tape.hpp"

namespace ownerrel {

// Fully connected layer y = x · Wᵀ + b, W stored out×in.
struct DenseLayer {
  Matrix weight;
  Matrix bias;  // 1×out

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : weight(out, in), bias(1, out) {}

  std::size_t in_features() const { return weight.cols(); }
  std::size_t out_features() const { return weight.rows(); }

  // Glorot-uniform weights in ±sqrt(6 / (in + out)); zero bias.
  void init_glorot(Rng& rng);

  Matrix apply(const Matrix& x) const;
  Tape::Var apply(Tape& tape, Tape::Var x) const;
};

// A named view of one learnable matrix.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
};

// v ← momentum·v + g; p ← p − lr·v
void sgd_step(Matrix& param, const Matrix& grad, Matrix& velocity, double lr, double momentum);

// Momentum SGD with one velocity buffer per parameter, created on first use.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum);

  void step(const std::vector<ParamRef>& params, const std::vector<Matrix>& grads);

  double lr() const { return lr_; }
  double momentum() const { return momentum_; }

 private:
  double lr_;
  double momentum_;
  std::vector<Matrix> velocity_;
};

// Text checkpoint: a version header, free-form key/value metadata, then one
// block per parameter (name, rows, cols, row-major values).
struct Checkpoint {
  static constexpr int kVersion = 1;

  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Matrix>> params;

  void write(std::ostream& out) const;
  static Checkpoint read(std::istream& in);
};

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace ownerrel
