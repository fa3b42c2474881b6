#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lsti/matrix.hpp"

namespace lsti {

class Tape;

/// Trainable matrix with an accumulating gradient buffer.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}
  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

/// Records operations in creation order (a valid topological order) and
/// replays their backward rules in reverse.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Matrix value);
  /// Leaf whose gradient is kept and readable via grad().
  Var input(Matrix value);
  /// Leaf bound to a parameter; backward accumulates into p.grad.
  Var param(Parameter& p);

  /// Seeds d(scalar)/d(scalar) = 1 and runs every recorded backward rule.
  void backward(Var scalar);

  const Matrix& value(std::size_t id) const;
  /// Gradient of a node after backward; zeros if nothing flowed into it.
  Matrix grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Used by op implementations.
  Var push(Matrix value, std::span<const Var> parents, Backward backward);
  Var push(Matrix value, std::initializer_list<Var> parents, Backward backward) {
    return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Zero-initialized on first access.
  Matrix& grad_mut(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    const Matrix* ext_value = nullptr;
    Matrix* ext_grad = nullptr;
    Backward backward;
    bool needs_grad = false;
    bool has_grad = false;
  };
  std::deque<Node> nodes_;
};

// Dense kernels. C (+)= A·B, A·Bᵀ, Aᵀ·B.
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate);

// Differentiable ops. Shape mismatches throw DimensionError naming both shapes.
Var matmul(Var a, Var b);
/// a·bᵀ
Var matmul_nt(Var a, Var b);
/// Elementwise; b may also be a 1×n row broadcast over the rows of a.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
Var softmax_rows(Var a);
/// Per-row normalization; gamma and beta are 1×n.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
/// Gathers rows of `table`.
Var embedding_lookup(Var table, std::span<const std::size_t> indices);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t width);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var sum_all(Var a);

// Losses; each returns a 1×1 node.
/// Mean over rows of -log softmax(logits)[target].
Var cross_entropy(Var logits, std::span<const std::size_t> targets);
Var mse(Var pred, const Matrix& target);
/// Mean over rows of 1 - cos(pred, target); norms floored at eps.
Var cosine_embedding_loss(Var pred, const Matrix& target, double eps = 1e-8);

/// Softmax of a single row, as used at inference.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace lsti
