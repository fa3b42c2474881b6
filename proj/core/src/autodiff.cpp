#include "lsti/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lsti/error.hpp"

namespace lsti {

namespace {

std::string shape(const Matrix& m) {
  return "(" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")";
}

[[noreturn]] void mismatch(const char* op, const Matrix& a, const Matrix& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ext_value ? *n.ext_value : n.value;
}

Var Tape::constant(Matrix value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return {this, nodes_.size() - 1};
}

Var Tape::input(Matrix value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.needs_grad = true;
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  Node& n = nodes_.emplace_back();
  n.ext_value = &p.value;
  n.ext_grad = &p.grad;
  n.needs_grad = true;
  return {this, nodes_.size() - 1};
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || nodes_[p.id].needs_grad;
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(backward);
  return {this, nodes_.size() - 1};
}

Matrix& Tape::grad_mut(std::size_t id) {
  Node& n = nodes_[id];
  if (n.ext_grad) {
    n.has_grad = true;
    return *n.ext_grad;
  }
  if (!n.has_grad) {
    const Matrix& v = value(id);
    n.grad = Matrix(v.rows, v.cols);
    n.has_grad = true;
  }
  return n.grad;
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.ext_grad) return *n.ext_grad;
  if (n.has_grad) return n.grad;
  const Matrix& val = value(v.id);
  return Matrix(val.rows, val.cols);
}

void Tape::backward(Var scalar) {
  const Matrix& v = value(scalar.id);
  if (v.rows != 1 || v.cols != 1) throw DimensionError("backward: expected a 1x1 loss, got " + shape(v));
  if (!nodes_[scalar.id].needs_grad) return;
  grad_mut(scalar.id).data[0] += 1.0;
  for (std::size_t i = scalar.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.has_grad) n.backward(*this, i);
  }
}

// ---------------------------------------------------------------- kernels

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (!accumulate) std::fill(c.data.begin(), c.data.end(), 0.0);
  const std::size_t n = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* crow = c.data.data() + i * n;
    const double* arow = a.data.data() + i * a.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  const std::size_t k = a.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + i * k;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.data.data() + j * k;
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += arow[t] * brow[t];
      double& out = c.data[i * c.cols + j];
      out = accumulate ? out + s : s;
    }
  }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (!accumulate) std::fill(c.data.begin(), c.data.end(), 0.0);
  const std::size_t n = b.cols;
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.data.data() + k * a.cols;
    const double* brow = b.data.data() + k * n;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.data.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
    }
  }
}

// -------------------------------------------------------------------- ops

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.rows) mismatch("matmul", av, bv);
  Matrix out(av.rows, bv.cols);
  gemm_nn(av, bv, out, false);
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    if (t.needs_grad(a.id)) gemm_nt(g, b.value(), t.grad_mut(a.id), true);
    if (t.needs_grad(b.id)) gemm_tn(a.value(), g, t.grad_mut(b.id), true);
  });
}

Var matmul_nt(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.cols) mismatch("matmul_nt", av, bv);
  Matrix out(av.rows, bv.rows);
  gemm_nt(av, bv, out, false);
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    if (t.needs_grad(a.id)) gemm_nn(g, b.value(), t.grad_mut(a.id), true);
    if (t.needs_grad(b.id)) gemm_tn(g, a.value(), t.grad_mut(b.id), true);
  });
}

namespace {

enum class Broadcast { none, row };

Broadcast check_elementwise(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows == b.rows && a.cols == b.cols) return Broadcast::none;
  if (b.rows == 1 && b.cols == a.cols) return Broadcast::row;
  mismatch(op, a, b);
}

Var add_impl(Var a, Var b, double sign) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Broadcast bc = check_elementwise(sign > 0 ? "add" : "sub", av, bv);
  Matrix out = av;
  for (std::size_t r = 0; r < av.rows; ++r) {
    const double* brow = bc == Broadcast::row ? bv.data.data() : bv.data.data() + r * bv.cols;
    double* orow = out.data.data() + r * av.cols;
    for (std::size_t c = 0; c < av.cols; ++c) orow[c] += sign * brow[c];
  }
  return a.tape->push(std::move(out), {a, b}, [a, b, bc, sign](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    if (t.needs_grad(a.id)) add_into(t.grad_mut(a.id), g);
    if (t.needs_grad(b.id)) {
      Matrix& gb = t.grad_mut(b.id);
      if (bc == Broadcast::none) {
        for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += sign * g.data[i];
      } else {
        for (std::size_t r = 0; r < g.rows; ++r) {
          for (std::size_t c = 0; c < g.cols; ++c) gb.data[c] += sign * g(r, c);
        }
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return add_impl(a, b, 1.0); }
Var sub(Var a, Var b) { return add_impl(a, b, -1.0); }

Var mul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows != bv.rows || av.cols != bv.cols) mismatch("mul", av, bv);
  Matrix out = av;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    if (t.needs_grad(a.id)) {
      Matrix& ga = t.grad_mut(a.id);
      const Matrix& bv2 = b.value();
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * bv2.data[i];
    }
    if (t.needs_grad(b.id)) {
      Matrix& gb = t.grad_mut(b.id);
      const Matrix& av2 = a.value();
      for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * av2.data[i];
    }
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value();
  for (double& x : out.data) x *= s;
  return a.tape->push(std::move(out), {a}, [a, s](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    Matrix& ga = t.grad_mut(a.id);
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += s * g.data[i];
  });
}

Var relu(Var a) {
  Matrix out = a.value();
  for (double& x : out.data) x = x > 0.0 ? x : 0.0;
  return a.tape->push(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    const Matrix& av = a.value();
    Matrix& ga = t.grad_mut(a.id);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      if (av.data[i] > 0.0) ga.data[i] += g.data[i];
    }
  });
}

Var softmax_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows, av.cols);
  for (std::size_t r = 0; r < av.rows; ++r) {
    const auto in = av.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) sum += (o[c] = std::exp(in[c] - mx));
    for (double& x : o) x /= sum;
  }
  return a.tape->push(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad_mut(a.id);
    for (std::size_t r = 0; r < y.rows; ++r) {
      double dotp = 0.0;
      for (std::size_t c = 0; c < y.cols; ++c) dotp += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols; ++c) ga(r, c) += y(r, c) * (g(r, c) - dotp);
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& xv = x.value();
  const Matrix& gv = gamma.value();
  const Matrix& bv = beta.value();
  if (gv.rows != 1 || gv.cols != xv.cols) mismatch("layer_norm gamma", xv, gv);
  if (bv.rows != 1 || bv.cols != xv.cols) mismatch("layer_norm beta", xv, bv);
  const std::size_t n = xv.cols;
  Matrix xhat(xv.rows, n);
  std::vector<double> inv_sigma(xv.rows);
  Matrix out(xv.rows, n);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    const auto in = xv.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (in[c] - mean) * is;
      out(r, c) = xhat(r, c) * gv.data[c] + bv.data[c];
    }
  }
  return x.tape->push(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Tape& t,
                                                                                 std::size_t self) {
        const Matrix& g = t.grad_mut(self);
        const Matrix& gv2 = gamma.value();
        const std::size_t n = g.cols;
        if (t.needs_grad(gamma.id)) {
          Matrix& gg = t.grad_mut(gamma.id);
          for (std::size_t r = 0; r < g.rows; ++r) {
            for (std::size_t c = 0; c < n; ++c) gg.data[c] += g(r, c) * xhat(r, c);
          }
        }
        if (t.needs_grad(beta.id)) {
          Matrix& gb = t.grad_mut(beta.id);
          for (std::size_t r = 0; r < g.rows; ++r) {
            for (std::size_t c = 0; c < n; ++c) gb.data[c] += g(r, c);
          }
        }
        if (t.needs_grad(x.id)) {
          Matrix& gx = t.grad_mut(x.id);
          std::vector<double> dxhat(n);
          for (std::size_t r = 0; r < g.rows; ++r) {
            double m1 = 0.0;
            double m2 = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              dxhat[c] = g(r, c) * gv2.data[c];
              m1 += dxhat[c];
              m2 += dxhat[c] * xhat(r, c);
            }
            m1 /= static_cast<double>(n);
            m2 /= static_cast<double>(n);
            for (std::size_t c = 0; c < n; ++c) {
              gx(r, c) += inv_sigma[r] * (dxhat[c] - m1 - xhat(r, c) * m2);
            }
          }
        }
      });
}

Var embedding_lookup(Var table, std::span<const std::size_t> indices) {
  const Matrix& tv = table.value();
  Matrix out(indices.size(), tv.cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= tv.rows) {
      throw DimensionError("embedding_lookup: index " + std::to_string(indices[i]) +
                           " outside table " + shape(tv));
    }
    std::copy_n(tv.row(indices[i]).begin(), tv.cols, out.row(i).begin());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return table.tape->push(std::move(out), {table}, [table, idx](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    Matrix& gt = t.grad_mut(table.id);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < g.cols; ++c) gt(idx[i], c) += g(i, c);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) mismatch("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.row(r).begin(), v.cols, out.row(r).begin() + static_cast<std::ptrdiff_t>(off));
    }
    off += v.cols;
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts.front().tape->push(std::move(out), parts, [ps](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    std::size_t off2 = 0;
    for (const Var& p : ps) {
      const std::size_t w = p.cols();
      if (t.needs_grad(p.id)) {
        Matrix& gp = t.grad_mut(p.id);
        for (std::size_t r = 0; r < g.rows; ++r) {
          for (std::size_t c = 0; c < w; ++c) gp(r, c) += g(r, off2 + c);
        }
      }
      off2 += w;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) mismatch("concat_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  auto it = out.data.begin();
  for (const Var& p : parts) it = std::copy(p.value().data.begin(), p.value().data.end(), it);
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts.front().tape->push(std::move(out), parts, [ps](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    std::size_t off = 0;
    for (const Var& p : ps) {
      const std::size_t n = p.value().data.size();
      if (t.needs_grad(p.id)) {
        Matrix& gp = t.grad_mut(p.id);
        for (std::size_t i = 0; i < n; ++i) gp.data[i] += g.data[off + i];
      }
      off += n;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t width) {
  const Matrix& av = a.value();
  if (begin + width > av.cols) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + width) + ") outside " + shape(av));
  }
  Matrix out(av.rows, width);
  for (std::size_t r = 0; r < av.rows; ++r) {
    std::copy_n(av.row(r).begin() + static_cast<std::ptrdiff_t>(begin), width, out.row(r).begin());
  }
  return a.tape->push(std::move(out), {a}, [a, begin](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    Matrix& ga = t.grad_mut(a.id);
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) ga(r, begin + c) += g(r, c);
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.rows) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape(av));
  }
  Matrix out(count, av.cols);
  std::copy_n(av.data.begin() + static_cast<std::ptrdiff_t>(begin * av.cols), count * av.cols,
              out.data.begin());
  return a.tape->push(std::move(out), {a}, [a, begin](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_mut(self);
    Matrix& ga = t.grad_mut(a.id);
    const std::size_t off = begin * g.cols;
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[off + i] += g.data[i];
  });
}

Var sum_all(Var a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  return a.tape->push(Matrix(1, 1, s), {a}, [a](Tape& t, std::size_t self) {
    const double g = t.grad_mut(self).data[0];
    for (double& x : t.grad_mut(a.id).data) x += g;
  });
}

// ----------------------------------------------------------------- losses

Var cross_entropy(Var logits, std::span<const std::size_t> targets) {
  const Matrix& lv = logits.value();
  if (targets.size() != lv.rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         shape(lv));
  }
  Matrix probs(lv.rows, lv.cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < lv.rows; ++r) {
    if (targets[r] >= lv.cols) throw DimensionError("cross_entropy: target outside " + shape(lv));
    const auto in = lv.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < lv.cols; ++c) sum += (probs(r, c) = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < lv.cols; ++c) probs(r, c) /= sum;
    loss += -(in[targets[r]] - mx - std::log(sum));
  }
  const double n = static_cast<double>(lv.rows);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return logits.tape->push(
      Matrix(1, 1, loss / n), {logits},
      [logits, probs = std::move(probs), tg, n](Tape& t, std::size_t self) {
        const double g = t.grad_mut(self).data[0] / n;
        Matrix& gl = t.grad_mut(logits.id);
        for (std::size_t r = 0; r < probs.rows; ++r) {
          for (std::size_t c = 0; c < probs.cols; ++c) {
            gl(r, c) += g * (probs(r, c) - (c == tg[r] ? 1.0 : 0.0));
          }
        }
      });
}

Var mse(Var pred, const Matrix& target) {
  const Matrix& pv = pred.value();
  if (pv.rows != target.rows || pv.cols != target.cols) mismatch("mse", pv, target);
  double s = 0.0;
  for (std::size_t i = 0; i < pv.data.size(); ++i) {
    const double d = pv.data[i] - target.data[i];
    s += d * d;
  }
  const double n = static_cast<double>(pv.data.size());
  return pred.tape->push(Matrix(1, 1, s / n), {pred}, [pred, target, n](Tape& t, std::size_t self) {
    const double g = t.grad_mut(self).data[0];
    const Matrix& pv2 = pred.value();
    Matrix& gp = t.grad_mut(pred.id);
    for (std::size_t i = 0; i < pv2.data.size(); ++i) {
      gp.data[i] += g * 2.0 * (pv2.data[i] - target.data[i]) / n;
    }
  });
}

Var cosine_embedding_loss(Var pred, const Matrix& target, double eps) {
  const Matrix& pv = pred.value();
  if (pv.rows != target.rows || pv.cols != target.cols) mismatch("cosine_embedding_loss", pv, target);
  const std::size_t rows = pv.rows;
  std::vector<double> na(rows), nb(rows), cosv(rows);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double d = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t c = 0; c < pv.cols; ++c) {
      d += pv(r, c) * target(r, c);
      aa += pv(r, c) * pv(r, c);
      bb += target(r, c) * target(r, c);
    }
    na[r] = std::max(std::sqrt(aa), eps);
    nb[r] = std::max(std::sqrt(bb), eps);
    cosv[r] = d / (na[r] * nb[r]);
    loss += 1.0 - cosv[r];
  }
  const double n = static_cast<double>(rows);
  return pred.tape->push(
      Matrix(1, 1, loss / n), {pred},
      [pred, target, na, nb, cosv, n, eps](Tape& t, std::size_t self) {
        const double g = t.grad_mut(self).data[0] / n;
        const Matrix& pv2 = pred.value();
        Matrix& gp = t.grad_mut(pred.id);
        for (std::size_t r = 0; r < pv2.rows; ++r) {
          const bool floored = na[r] <= eps;
          for (std::size_t c = 0; c < pv2.cols; ++c) {
            double dcos = target(r, c) / (na[r] * nb[r]);
            if (!floored) dcos -= cosv[r] * pv2(r, c) / (na[r] * na[r]);
            gp(r, c) -= g * dcos;
          }
        }
      });
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (out[i] = std::exp(logits[i] - mx));
  for (double& x : out) x /= sum;
  return out;
}

}  // namespace lsti
