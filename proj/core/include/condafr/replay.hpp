#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "condafr/batch.hpp"
#include "condafr/inference.hpp"
#include "condafr/optim.hpp"
#include "condafr/rng.hpp"

namespace condafr::streams {
class Environment;
}

namespace condafr::replay {

/// Frozen knowledge of one environment: decoder (and optionally encoder)
/// copies, the hypothesis f used to label generated features, and the label
/// prior of the environment's support set.
struct Snapshot {
  std::size_t env_index = 0;
  std::size_t condition = 0;
  inference::Dims dims;
  ParamStore representation;  // decoder.* always, encoder.* when has_encoder
  ParamStore hypothesis;      // f.*
  bool has_encoder = false;
  std::vector<double> label_prior;  // one entry per global class

  std::uint64_t hash() const;
  /// Classes with nonzero prior mass.
  std::vector<int> classes() const;
  /// Eval-path features through the frozen encoder and decoder.
  Tensor infer_features(const Tensor& x) const;
  Tensor sample_features(const Tensor& x, Rng& rng) const;
};

Snapshot take_snapshot(const inference::InferenceState& state, const streams::Environment& env, std::size_t condition,
                       bool with_encoder);

/// Draws z ~ N(0, I), decodes with the frozen decoder under the snapshot's
/// condition, and labels each feature with the frozen hypothesis restricted
/// to the snapshot's classes. Labels follow the label prior: a label is drawn
/// first and candidates are accepted when the hypothesis agrees, falling back
/// to the hypothesis label once the attempt budget runs out.
FeatureBatch generate_features(const Snapshot& snap, std::size_t n, Rng& rng);

/// Stored real features per environment, at most `capacity_per_class` per class.
class MemoryBank {
 public:
  explicit MemoryBank(std::size_t capacity_per_class = 64) : capacity_(capacity_per_class) {}

  /// Keeps a uniformly chosen subset of each class, up to capacity.
  void store(std::size_t env, const FeatureBatch& features, Rng& rng);
  bool contains(std::size_t env) const { return banks_.contains(env); }
  const FeatureBatch& stored(std::size_t env) const;
  std::size_t capacity_per_class() const noexcept { return capacity_; }
  const std::map<std::size_t, FeatureBatch>& banks() const noexcept { return banks_; }
  void restore(std::size_t env, FeatureBatch features) { banks_[env] = std::move(features); }

 private:
  std::size_t capacity_;
  std::map<std::size_t, FeatureBatch> banks_;
};

/// Uniform sample with replacement from the bank of `env`; throws DataError
/// when nothing is stored.
FeatureBatch memory_sample(const MemoryBank& bank, std::size_t env, std::size_t n, Rng& rng);

/// N(0, I) features with labels uniform over [first, last).
FeatureBatch noise_sample(std::size_t feature_dim, std::size_t n, std::pair<int, int> label_range, Rng& rng);

/// Splits `total` into `parts` counts differing by at most one, larger first.
std::vector<std::size_t> even_split(std::size_t total, std::size_t parts);

/// Number of generated rows in a batch of `batch_size` at replay `ratio`.
std::size_t generated_count(std::size_t batch_size, double ratio);

/// Replaces a `ratio` fraction of `current` with features generated by the
/// selected snapshots (split evenly between them). The real part keeps the
/// leading rows of `current`.
FeatureBatch augment_batch(std::span<const Snapshot* const> snaps, const FeatureBatch& current, double ratio, Rng& rng);

}  // namespace condafr::replay
