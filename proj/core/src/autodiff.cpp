#include "condafr/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "condafr/errors.hpp"

namespace condafr::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap as_matrix(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + " needs a rank-2 tensor, got " + to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
  }
}

void require_labels(std::span<const int> labels, std::size_t rows, std::size_t classes, const char* op) {
  if (labels.size() != rows) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError(std::string(op) + ": label " + std::to_string(y) + " outside [0, " +
                      std::to_string(classes) + ")");
    }
  }
}

double log_sum_exp(std::span<const double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  double s = 0.0;
  for (double v : row) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }

// Tape -----------------------------------------------------------------------

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, false, nullptr, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, true, nullptr, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Parameter& param) {
  nodes_.push_back(Node{param.value, Tensor{}, param.trainable, nullptr, &param});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (const Var& in : inputs) {
    if (in.tape != this) throw std::logic_error("operation mixes variables from different tapes");
    needs_grad = needs_grad || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs_grad, needs_grad ? std::move(backward) : nullptr,
                        nullptr});
  return Var{this, nodes_.size() - 1};
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty() && !n.value.empty()) return Tensor(n.value.shape());
  return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = Tensor(n.value.shape());
  }
  n.grad += g;
}

void Tape::backward(Var root) {
  if (nodes_[root.id].value.size() != 1) {
    throw ShapeError("backward(root) needs a single-element root, got " +
                     to_string(nodes_[root.id].value.shape()));
  }
  backward(root, Tensor(nodes_[root.id].value.shape(), 1.0));
}

void Tape::backward(Var root, const Tensor& seed) {
  if (consumed_) throw std::logic_error("backward() called twice on the same tape");
  consumed_ = true;
  require_same_shape(nodes_[root.id].value, seed, "backward seed");
  accumulate(root.id, seed);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, n.grad);
  }
  for (Node& n : nodes_) {
    if (n.bound && !n.grad.empty()) n.bound->grad += n.grad;
  }
}

bool Tape::all_finite() const {
  return std::all_of(nodes_.begin(), nodes_.end(), [](const Node& n) {
    return n.value.all_finite() && (n.grad.empty() || n.grad.all_finite());
  });
}

// Linear algebra --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner extents differ for " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  if (a.cols() == 0) return out;
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
  return out;
}

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  Tensor out = matmul(a.value(), b.value());
  const Var inputs[] = {a, b};
  return t.record(std::move(out), inputs, [a, b](Tape& tape, const Tensor& g) {
    const Tensor& av = tape.value(a);
    const Tensor& bv = tape.value(b);
    if (tape.requires_grad(a)) {
      Tensor da(av.shape());
      if (!da.empty()) as_matrix(da).noalias() = as_matrix(g) * as_matrix(bv).transpose();
      tape.accumulate(a, da);
    }
    if (tape.requires_grad(b)) {
      Tensor db(bv.shape());
      if (!db.empty()) as_matrix(db).noalias() = as_matrix(av).transpose() * as_matrix(g);
      tape.accumulate(b, db);
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  const Var inputs[] = {a, b};
  return a.tape->record(std::move(out), inputs, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  Tensor neg_b = b.value();
  neg_b *= -1.0;
  out += neg_b;
  const Var inputs[] = {a, b};
  return a.tape->record(std::move(out), inputs, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    Tensor ng = g;
    ng *= -1.0;
    tape.accumulate(b, ng);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  auto ov = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
  const Var inputs[] = {a, b};
  return a.tape->record(std::move(out), inputs, [a, b](Tape& tape, const Tensor& g) {
    const Tensor& av = tape.value(a);
    const Tensor& bvv = tape.value(b);
    if (tape.requires_grad(a)) {
      Tensor da = g;
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= bvv[i];
      tape.accumulate(a, da);
    }
    if (tape.requires_grad(b)) {
      Tensor db = g;
      for (std::size_t i = 0; i < db.size(); ++i) db[i] *= av[i];
      tape.accumulate(b, db);
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  out *= factor;
  const Var inputs[] = {a};
  return a.tape->record(std::move(out), inputs, [a, factor](Tape& tape, const Tensor& g) {
    Tensor da = g;
    da *= factor;
    tape.accumulate(a, da);
  });
}

Var add_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require_rank2(xv, "add_bias");
  if (bv.size() != xv.cols()) {
    throw ShapeError("add_bias: bias " + to_string(bv.shape()) + " does not match " + to_string(xv.shape()));
  }
  Tensor out = xv;
  const std::size_t d = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) out(r, c) += bv[c];
  }
  const Var inputs[] = {x, bias};
  return x.tape->record(std::move(out), inputs, [x, bias](Tape& tape, const Tensor& g) {
    tape.accumulate(x, g);
    if (tape.requires_grad(bias)) {
      Tensor db(tape.value(bias).shape());
      const std::size_t d = g.cols();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < d; ++c) db[c] += g(r, c);
      }
      tape.accumulate(bias, db);
    }
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  const Var inputs[] = {x};
  return x.tape->record(std::move(out), inputs, [x](Tape& tape, const Tensor& g) {
    const Tensor& xv = tape.value(x);
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(xv[i] > 0.0)) dx[i] = 0.0;
    }
    tape.accumulate(x, dx);
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const Var inputs[] = {x};
  return x.tape->record(Tensor::scalar(s), inputs, [x](Tape& tape, const Tensor& g) {
    tape.accumulate(x, Tensor(tape.value(x).shape(), g[0]));
  });
}

Var concat_cols(Var left, Var right) {
  const Tensor& l = left.value();
  const Tensor& r = right.value();
  require_rank2(l, "concat_cols");
  require_rank2(r, "concat_cols");
  if (l.rows() != r.rows()) {
    throw ShapeError("concat_cols: row counts differ for " + to_string(l.shape()) + " and " + to_string(r.shape()));
  }
  const std::size_t n = l.rows();
  const std::size_t dl = l.cols();
  const std::size_t dr = r.cols();
  Tensor out = Tensor::matrix(n, dl + dr);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(l.data() + i * dl, dl, out.data() + i * (dl + dr));
    std::copy_n(r.data() + i * dr, dr, out.data() + i * (dl + dr) + dl);
  }
  const Var inputs[] = {left, right};
  return left.tape->record(std::move(out), inputs, [left, right, n, dl, dr](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(left)) {
      Tensor dlt = Tensor::matrix(n, dl);
      for (std::size_t i = 0; i < n; ++i) std::copy_n(g.data() + i * (dl + dr), dl, dlt.data() + i * dl);
      tape.accumulate(left, dlt);
    }
    if (tape.requires_grad(right)) {
      Tensor drt = Tensor::matrix(n, dr);
      for (std::size_t i = 0; i < n; ++i) std::copy_n(g.data() + i * (dl + dr) + dl, dr, drt.data() + i * dr);
      tape.accumulate(right, drt);
    }
  });
}

Var concat_rows(Var top, Var bottom) {
  const std::size_t split = top.value().rows() * top.value().cols();
  Tensor out = vstack(top.value(), bottom.value());
  const Var inputs[] = {top, bottom};
  return top.tape->record(std::move(out), inputs, [top, bottom, split](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(top)) {
      Tensor dt(tape.value(top).shape());
      std::copy_n(g.data(), split, dt.data());
      tape.accumulate(top, dt);
    }
    if (tape.requires_grad(bottom)) {
      Tensor db(tape.value(bottom).shape());
      std::copy_n(g.data() + split, db.size(), db.data());
      tape.accumulate(bottom, db);
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  require_rank2(xv, "slice_rows");
  if (begin > end || end > xv.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                     to_string(xv.shape()));
  }
  const std::size_t d = xv.cols();
  Tensor out = Tensor::matrix(end - begin, d);
  std::copy_n(xv.data() + begin * d, (end - begin) * d, out.data());
  const Var inputs[] = {x};
  return x.tape->record(std::move(out), inputs, [x, begin, d](Tape& tape, const Tensor& g) {
    Tensor dx(tape.value(x).shape());
    std::copy_n(g.data(), g.size(), dx.data() + begin * d);
    tape.accumulate(x, dx);
  });
}

// Normalization ---------------------------------------------------------------

Var batch_norm(Var x, Var gamma, Var beta, double eps, BatchStats* stats) {
  const Tensor& xv = x.value();
  require_rank2(xv, "batch_norm");
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  if (n < 2) throw ShapeError("batch_norm in training mode needs at least two rows, got " + std::to_string(n));
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw ShapeError("batch_norm: scale/shift do not match width " + std::to_string(d));
  }
  std::vector<double> mean(d, 0.0);
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += xv(r, c);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = xv(r, c) - mean[c];
      var[c] += dv * dv;
    }
  }
  for (double& v : var) v /= static_cast<double>(n);
  std::vector<double> inv_std(d);
  for (std::size_t c = 0; c < d; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);

  Tensor x_hat = Tensor::matrix(n, d);
  Tensor out = Tensor::matrix(n, d);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      x_hat(r, c) = (xv(r, c) - mean[c]) * inv_std[c];
      out(r, c) = gv[c] * x_hat(r, c) + bv[c];
    }
  }
  if (stats) *stats = BatchStats{mean, var};

  const Var inputs[] = {x, gamma, beta};
  return x.tape->record(
      std::move(out), inputs,
      [x, gamma, beta, x_hat = std::move(x_hat), inv_std = std::move(inv_std), n, d](Tape& tape, const Tensor& g) {
        const Tensor& gv = tape.value(gamma);
        if (tape.requires_grad(gamma) || tape.requires_grad(beta)) {
          Tensor dgamma(gv.shape());
          Tensor dbeta(tape.value(beta).shape());
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
              dgamma[c] += g(r, c) * x_hat(r, c);
              dbeta[c] += g(r, c);
            }
          }
          tape.accumulate(gamma, dgamma);
          tape.accumulate(beta, dbeta);
        }
        if (tape.requires_grad(x)) {
          std::vector<double> sum_dxh(d, 0.0);
          std::vector<double> sum_dxh_xh(d, 0.0);
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
              const double dxh = g(r, c) * gv[c];
              sum_dxh[c] += dxh;
              sum_dxh_xh[c] += dxh * x_hat(r, c);
            }
          }
          const double nn = static_cast<double>(n);
          Tensor dx = Tensor::matrix(n, d);
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
              const double dxh = g(r, c) * gv[c];
              dx(r, c) = inv_std[c] / nn * (nn * dxh - sum_dxh[c] - x_hat(r, c) * sum_dxh_xh[c]);
            }
          }
          tape.accumulate(x, dx);
        }
      });
}

Var batch_norm_fixed(Var x, Var gamma, Var beta, std::span<const double> mean, std::span<const double> var,
                     double eps) {
  const Tensor& xv = x.value();
  require_rank2(xv, "batch_norm_fixed");
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  if (mean.size() != d || var.size() != d || gamma.value().size() != d || beta.value().size() != d) {
    throw ShapeError("batch_norm_fixed: statistics do not match width " + std::to_string(d));
  }
  std::vector<double> inv_std(d);
  for (std::size_t c = 0; c < d; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  Tensor x_hat = Tensor::matrix(n, d);
  Tensor out = Tensor::matrix(n, d);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      x_hat(r, c) = (xv(r, c) - mean[c]) * inv_std[c];
      out(r, c) = gv[c] * x_hat(r, c) + bv[c];
    }
  }
  const Var inputs[] = {x, gamma, beta};
  return x.tape->record(
      std::move(out), inputs,
      [x, gamma, beta, x_hat = std::move(x_hat), inv_std = std::move(inv_std), n, d](Tape& tape, const Tensor& g) {
        const Tensor& gv = tape.value(gamma);
        Tensor dgamma(gv.shape());
        Tensor dbeta(tape.value(beta).shape());
        Tensor dx = Tensor::matrix(n, d);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < d; ++c) {
            dgamma[c] += g(r, c) * x_hat(r, c);
            dbeta[c] += g(r, c);
            dx(r, c) = g(r, c) * gv[c] * inv_std[c];
          }
        }
        tape.accumulate(gamma, dgamma);
        tape.accumulate(beta, dbeta);
        tape.accumulate(x, dx);
      });
}

// Losses ----------------------------------------------------------------------

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  require_rank2(z, "softmax_cross_entropy");
  const std::size_t n = z.rows();
  const std::size_t k = z.cols();
  require_labels(labels, n, k, "softmax_cross_entropy");
  std::vector<int> y(labels.begin(), labels.end());
  if (n == 0) {
    const Var inputs[] = {logits};
    return logits.tape->record(Tensor::scalar(0.0), inputs, [](Tape&, const Tensor&) {});
  }
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    total += log_sum_exp(z.row(r)) - z(r, static_cast<std::size_t>(y[r]));
  }
  const Var inputs[] = {logits};
  return logits.tape->record(
      Tensor::scalar(total / static_cast<double>(n)), inputs, [logits, y = std::move(y)](Tape& tape, const Tensor& g) {
        Tensor p = softmax_rows(tape.value(logits));
        const std::size_t n = p.rows();
        for (std::size_t r = 0; r < n; ++r) p(r, static_cast<std::size_t>(y[r])) -= 1.0;
        p *= g[0] / static_cast<double>(n);
        tape.accumulate(logits, p);
      });
}

Var log_one_minus_softmax(Var logits, std::span<const int> labels, double clamp) {
  const Tensor& z = logits.value();
  require_rank2(z, "log_one_minus_softmax");
  const std::size_t n = z.rows();
  const std::size_t k = z.cols();
  require_labels(labels, n, k, "log_one_minus_softmax");
  std::vector<int> y(labels.begin(), labels.end());
  if (n == 0) {
    const Var inputs[] = {logits};
    return logits.tape->record(Tensor::scalar(0.0), inputs, [](Tape&, const Tensor&) {});
  }
  const Tensor p = softmax_rows(z);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t l = static_cast<std::size_t>(y[r]);
    // 1 - p_l summed from the other classes keeps precision when p_l -> 1.
    double rest = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (c != l) rest += p(r, c);
    }
    total += -std::log(std::max(rest, clamp));
  }
  const Var inputs[] = {logits};
  return logits.tape->record(
      Tensor::scalar(total / static_cast<double>(n)), inputs,
      [logits, y = std::move(y), p, clamp](Tape& tape, const Tensor& g) {
        const std::size_t n = p.rows();
        const std::size_t k = p.cols();
        Tensor dz = Tensor::matrix(n, k);
        const double w = g[0] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
          const std::size_t l = static_cast<std::size_t>(y[r]);
          double rest = 0.0;
          for (std::size_t c = 0; c < k; ++c) {
            if (c != l) rest += p(r, c);
          }
          if (rest < clamp) continue;  // clamped region is flat
          const double pl = p(r, l);
          for (std::size_t c = 0; c < k; ++c) {
            const double dp = pl * ((c == l ? 1.0 : 0.0) - p(r, c));
            dz(r, c) = w * dp / rest;
          }
        }
        tape.accumulate(logits, dz);
      });
}

Var gaussian_kl(Var mu, Var logvar) {
  const Tensor& m = mu.value();
  const Tensor& lv = logvar.value();
  require_same_shape(m, lv, "gaussian_kl");
  const std::size_t n = m.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) total += 0.5 * (m[i] * m[i] + std::exp(lv[i]) - 1.0 - lv[i]);
  const double value = n ? total / static_cast<double>(n) : 0.0;
  const Var inputs[] = {mu, logvar};
  return mu.tape->record(Tensor::scalar(value), inputs, [mu, logvar, n](Tape& tape, const Tensor& g) {
    if (n == 0) return;
    const double w = g[0] / static_cast<double>(n);
    if (tape.requires_grad(mu)) {
      Tensor dm = tape.value(mu);
      dm *= w;
      tape.accumulate(mu, dm);
    }
    if (tape.requires_grad(logvar)) {
      Tensor dl = tape.value(logvar);
      for (double& v : dl.values()) v = w * 0.5 * (std::exp(v) - 1.0);
      tape.accumulate(logvar, dl);
    }
  });
}

Var reparameterize(Var mu, Var logvar, const Tensor& noise) {
  const Tensor& m = mu.value();
  const Tensor& lv = logvar.value();
  require_same_shape(m, lv, "reparameterize");
  require_same_shape(m, noise, "reparameterize");
  Tensor out = m;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += std::exp(0.5 * lv[i]) * noise[i];
  const Var inputs[] = {mu, logvar};
  return mu.tape->record(std::move(out), inputs, [mu, logvar, noise](Tape& tape, const Tensor& g) {
    tape.accumulate(mu, g);
    if (tape.requires_grad(logvar)) {
      const Tensor& lv = tape.value(logvar);
      Tensor dl = g;
      for (std::size_t i = 0; i < dl.size(); ++i) dl[i] *= 0.5 * std::exp(0.5 * lv[i]) * noise[i];
      tape.accumulate(logvar, dl);
    }
  });
}

Var gradient_reverse(Var x, double coeff) {
  if (coeff < 0.0) throw std::invalid_argument("gradient_reverse: coeff must be nonnegative");
  const Var inputs[] = {x};
  return x.tape->record(x.value(), inputs, [x, coeff](Tape& tape, const Tensor& g) {
    Tensor dx = g;
    dx *= -coeff;
    tape.accumulate(x, dx);
  });
}

// Plain helpers -----------------------------------------------------------------

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p = logits;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    auto row = p.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double& v : row) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : row) v /= s;
  }
  return p;
}

}  // namespace condafr::ad
