#include "condafr/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "condafr/autodiff.hpp"
#include "condafr/errors.hpp"
#include "condafr/nn.hpp"

namespace condafr::estimators {

namespace {

struct Split {
  Tensor train;
  Tensor test;
};

Split halve(const Tensor& x, Rng& rng) {
  const auto perm = rng.permutation(x.rows());
  const std::size_t n_train = x.rows() / 2;
  std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> b(perm.begin() + static_cast<long>(n_train), perm.end());
  return {gather_rows(x, a), gather_rows(x, b)};
}

// Column-wise standardization fitted on `reference`.
struct Standardizer {
  std::vector<double> mean, inv_std;

  explicit Standardizer(const Tensor& reference) : mean(reference.cols(), 0.0), inv_std(reference.cols(), 1.0) {
    const std::size_t n = reference.rows();
    const std::size_t d = reference.cols();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) mean[c] += reference(r, c);
    for (double& m : mean) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) var[c] += (reference(r, c) - mean[c]) * (reference(r, c) - mean[c]);
    for (std::size_t c = 0; c < d; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] / static_cast<double>(n) + 1e-12);
  }

  Tensor apply(const Tensor& x) const {
    Tensor out = x;
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean[c]) * inv_std[c];
    return out;
  }
};

struct Row {
  std::vector<double> h;
  int y;
  auto operator<=>(const Row&) const = default;
};

}  // namespace

double error_rate(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw ShapeError("error_rate: prediction and label counts differ");
  std::size_t wrong = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    ++total;
    wrong += predicted[i] != labels[i] ? 1 : 0;
  }
  return total == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(total);
}

double estimate_lambda(const Tensor& h_support, const Tensor& h_query, Rng& rng, const LambdaOptions& options) {
  if (h_support.rows() < 4 || h_query.rows() < 4) {
    throw DataError("estimate_lambda needs at least 4 rows per side, got " + std::to_string(h_support.rows()) +
                    " and " + std::to_string(h_query.rows()));
  }
  if (h_support.cols() != h_query.cols()) throw ShapeError("estimate_lambda: feature widths differ");
  const Split s = halve(h_support, rng);
  const Split q = halve(h_query, rng);

  const Standardizer norm(vstack(s.train, q.train));
  const Tensor x_train = norm.apply(vstack(s.train, q.train));
  std::vector<int> y_train(s.train.rows(), 0);
  y_train.resize(x_train.rows(), 1);

  const nn::Mlp2 clf = nn::Mlp2::make("domain", h_support.cols(), options.hidden_dim, 2);
  ParamStore params;
  clf.init(params, rng);
  const AdamOptions adam{options.lr};
  for (std::size_t step = 0; step < options.steps; ++step) {
    ad::Tape tape;
    nn::Binder b(tape, params);
    ad::Var loss = ad::softmax_cross_entropy(clf.forward(b, tape.constant(x_train)), y_train);
    tape.backward(loss);
    adam_step(params, adam);
    params.zero_grad();
  }

  auto side_error = [&](const Tensor& x, int label) {
    ad::Tape tape;
    nn::Binder b(tape, std::as_const(params));
    const auto pred = ad::argmax_rows(clf.forward(b, tape.constant(norm.apply(x))).value());
    return error_rate(pred, std::vector<int>(pred.size(), label));
  };
  // Balanced error, so unequal side sizes do not bias the estimate.
  const double err = 0.5 * (side_error(s.test, 0) + side_error(q.test, 1));
  return std::clamp(2.0 * (1.0 - 2.0 * err), 0.0, 2.0);
}

KlEstimate estimate_kl_term(const replay::Snapshot& snap, const solver::SolverState& solver, const FeatureBatch& real,
                            std::size_t n_generated, Rng& rng) {
  KlEstimate out;
  out.generated_nll = solver::mean_nll(solver, replay::generate_features(snap, n_generated, rng));
  out.real_nll = solver::mean_nll(solver, real);
  out.raw = out.generated_nll - out.real_nll;
  out.clamped = std::max(out.raw, 0.0);
  return out;
}

double estimate_c_star(std::span<const FeatureBatch> supports, std::span<const FeatureBatch> queries,
                       std::size_t class_count, const CStarOptions& options) {
  if (supports.size() != queries.size()) throw DataError("estimate_c_star: support and query counts differ");
  std::vector<Row> pool;
  std::size_t width = 0;
  auto collect = [&](const FeatureBatch& b) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b.y[i] < 0) continue;
      const auto r = b.h.row(i);
      pool.push_back({{r.begin(), r.end()}, b.y[i]});
      width = r.size();
    }
  };
  for (const auto& b : supports) collect(b);
  for (const auto& b : queries) collect(b);
  if (pool.empty()) return 0.0;
  std::sort(pool.begin(), pool.end());

  FeatureBatch all{Tensor::matrix(pool.size(), width), {}};
  for (std::size_t i = 0; i < pool.size(); ++i) {
    std::copy(pool[i].h.begin(), pool[i].h.end(), all.h.row(i).begin());
    all.y.push_back(pool[i].y);
  }

  Rng rng(options.seed);
  auto state = solver::SolverState::create({width, options.hidden_dim, class_count}, rng);
  solver::fit(state, all, options.steps, options.batch_size, options.optimizer, rng);

  double total = 0.0;
  for (std::size_t i = 0; i < supports.size(); ++i) {
    if (!supports[i].empty()) total += error_rate(solver::predict(state, supports[i].h), supports[i].y);
    if (!queries[i].empty()) total += error_rate(solver::predict(state, queries[i].h), queries[i].y);
  }
  return total;
}

double BoundEstimate::kl_total() const {
  return std::accumulate(envs.begin(), envs.end(), 0.0,
                         [](double acc, const EnvEstimate& e) { return acc + (e.kl_raw ? e.kl_hat : 0.0); });
}

BoundEstimate compute_bound(std::size_t env_step, std::vector<EnvEstimate> envs, double c_star) {
  BoundEstimate b{env_step, std::move(envs), c_star, 0.0, 0.0};
  double support = 0.0;
  for (const auto& e : b.envs) {
    support += e.eps_support + e.lambda_hat;
    b.lhs += e.query_error;
  }
  b.rhs = support + b.kl_total() + c_star;
  return b;
}

}  // namespace condafr::estimators
