#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "condafr/batch.hpp"
#include "condafr/replay.hpp"
#include "condafr/rng.hpp"
#include "condafr/solver.hpp"
#include "condafr/tensor.hpp"

namespace condafr::estimators {

struct LambdaOptions {
  std::size_t hidden_dim = 16;
  std::size_t steps = 300;
  double lr = 1e-2;
};

/// Proxy A-distance 2(1 - 2 err) between two feature sets, where err is the
/// held-out error of a small domain classifier. Each side is split in half
/// for training and testing. Clamped to [0, 2].
double estimate_lambda(const Tensor& h_support, const Tensor& h_query, Rng& rng, const LambdaOptions& options = {});

struct KlEstimate {
  double generated_nll = 0.0;  // solver NLL on snapshot-generated features
  double real_nll = 0.0;       // solver NLL on real inferred support features
  double raw = 0.0;            // generated_nll - real_nll, may be negative
  double clamped = 0.0;        // max(raw, 0)
};

/// Compares the solver's NLL on `n_generated` features drawn from `snap`
/// against its NLL on `real`, the env's inferred support features.
KlEstimate estimate_kl_term(const replay::Snapshot& snap, const solver::SolverState& solver, const FeatureBatch& real,
                            std::size_t n_generated, Rng& rng);

struct CStarOptions {
  std::size_t hidden_dim = 64;
  std::size_t steps = 500;
  std::size_t batch_size = 128;
  SgdOptions optimizer{5e-2, 0.9, 5e-4, true};
  std::uint64_t seed = 0x5eed;
};

/// Error of a fresh solver trained jointly on every support and labeled
/// query row (-1 labels skipped). The pool is sorted canonically before
/// training so the result does not depend on environment order. Returns
/// the sum over environments of support error plus query error.
double estimate_c_star(std::span<const FeatureBatch> supports, std::span<const FeatureBatch> queries,
                       std::size_t class_count, const CStarOptions& options = {});

struct EnvEstimate {
  std::size_t env = 0;
  double eps_support = 0.0;
  double lambda_hat = 0.0;
  std::optional<double> kl_raw;  // absent for the current environment
  double kl_hat = 0.0;
  double query_error = 0.0;
};

struct BoundEstimate {
  std::size_t env_step = 0;
  std::vector<EnvEstimate> envs;
  double c_star = 0.0;
  double rhs = 0.0;
  double lhs = 0.0;

  double kl_total() const;
};

/// rhs = sum(eps_S + lambda) + sum(KL) + C*, lhs = sum of query errors.
BoundEstimate compute_bound(std::size_t env_step, std::vector<EnvEstimate> envs, double c_star);

/// Fraction of rows whose prediction differs from the label (-1 skipped).
double error_rate(std::span<const int> predicted, std::span<const int> labels);

}  // namespace condafr::estimators
