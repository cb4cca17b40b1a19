#include "condafr/replay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "condafr/errors.hpp"
#include "condafr/streams.hpp"

namespace condafr::replay {

namespace {

constexpr int kAttemptRounds = 32;

ParamStore frozen_copy(const ParamStore& source, bool (*keep)(const std::string&)) {
  ParamStore out;
  for (const auto& [name, p] : source) {
    if (keep(name)) out.add(name, p.value, p.trainable);
  }
  return out;
}

bool is_decoder(const std::string& n) { return n.starts_with("decoder."); }
bool is_representation(const std::string& n) { return n.starts_with("decoder.") || n.starts_with("encoder."); }
bool is_hypothesis(const std::string& n) { return n.starts_with("f."); }

int masked_argmax(std::span<const double> logits, const std::vector<int>& classes) {
  int best = classes.front();
  double best_v = -std::numeric_limits<double>::infinity();
  for (int c : classes) {
    if (logits[static_cast<std::size_t>(c)] > best_v) {
      best_v = logits[static_cast<std::size_t>(c)];
      best = c;
    }
  }
  return best;
}

int draw_label(const std::vector<double>& prior, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = 0;
  for (std::size_t c = 0; c < prior.size(); ++c) {
    if (prior[c] <= 0.0) continue;
    acc += prior[c];
    last = static_cast<int>(c);
    if (u < acc) return last;
  }
  return last;
}

}  // namespace

std::uint64_t Snapshot::hash() const {
  std::uint64_t h = representation.value_hash();
  h ^= hypothesis.value_hash() + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::vector<int> Snapshot::classes() const {
  std::vector<int> out;
  for (std::size_t c = 0; c < label_prior.size(); ++c) {
    if (label_prior[c] > 0.0) out.push_back(static_cast<int>(c));
  }
  return out;
}

Tensor Snapshot::infer_features(const Tensor& x) const {
  if (!has_encoder) throw std::logic_error("snapshot was taken without its encoder");
  return inference::infer_features(representation, dims, x, condition);
}

Tensor Snapshot::sample_features(const Tensor& x, Rng& rng) const {
  if (!has_encoder) throw std::logic_error("snapshot was taken without its encoder");
  return inference::sample_features(representation, dims, x, condition, rng);
}

Snapshot take_snapshot(const inference::InferenceState& state, const streams::Environment& env, std::size_t condition,
                       bool with_encoder) {
  Snapshot s;
  s.env_index = env.index();
  s.condition = condition;
  s.dims = state.dims;
  s.representation = frozen_copy(state.representation, with_encoder ? is_representation : is_decoder);
  s.hypothesis = frozen_copy(state.heads, is_hypothesis);
  s.has_encoder = with_encoder;
  s.label_prior.assign(state.dims.class_count, 0.0);
  const auto& y = env.support_y();
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= state.dims.class_count) {
      throw DataError("support label " + std::to_string(label) + " outside the global class set");
    }
    s.label_prior[static_cast<std::size_t>(label)] += 1.0;
  }
  for (double& p : s.label_prior) p /= static_cast<double>(y.size());
  return s;
}

FeatureBatch generate_features(const Snapshot& snap, std::size_t n, Rng& rng) {
  const std::size_t width = snap.dims.feature_dim;
  FeatureBatch out{Tensor::matrix(n, width), std::vector<int>(n)};
  if (n == 0) return out;
  const std::vector<int> classes = snap.classes();
  if (classes.empty()) throw DataError("snapshot has an empty label prior");

  std::vector<int> wanted(n);
  for (auto& y : wanted) y = draw_label(snap.label_prior, rng);
  std::vector<bool> filled(n, false);
  std::size_t remaining = n;

  for (int round = 0; round <= kAttemptRounds && remaining > 0; ++round) {
    const Tensor z = rng.normal_matrix(remaining, snap.dims.latent_dim);
    const Tensor h = inference::decode(snap.representation, snap.dims, z, snap.condition);
    const Tensor logits = inference::hypothesis_logits(snap.hypothesis, snap.dims, h);
    const bool last_round = round == kAttemptRounds;
    std::size_t cand = 0;
    for (std::size_t i = 0; i < n && cand < h.rows(); ++i) {
      if (filled[i]) continue;
      const int label = masked_argmax(logits.row(cand), classes);
      // Each unfilled slot gets one candidate per round.
      if (label == wanted[i] || last_round) {
        std::copy_n(h.row(cand).data(), width, out.h.row(i).data());
        out.y[i] = label;
        filled[i] = true;
        --remaining;
      }
      ++cand;
    }
  }
  return out;
}

void MemoryBank::store(std::size_t env, const FeatureBatch& features, Rng& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < features.size(); ++i) by_class[features.y[i]].push_back(i);
  std::vector<std::size_t> keep;
  for (auto& [_, rows] : by_class) {
    if (rows.size() > capacity_) {
      const auto perm = rng.permutation(rows.size());
      std::vector<std::size_t> chosen;
      for (std::size_t k = 0; k < capacity_; ++k) chosen.push_back(rows[perm[k]]);
      std::sort(chosen.begin(), chosen.end());
      rows = std::move(chosen);
    }
    keep.insert(keep.end(), rows.begin(), rows.end());
  }
  std::sort(keep.begin(), keep.end());
  FeatureBatch kept{gather_rows(features.h, keep), {}};
  for (std::size_t i : keep) kept.y.push_back(features.y[i]);
  banks_[env] = std::move(kept);
}

const FeatureBatch& MemoryBank::stored(std::size_t env) const {
  auto it = banks_.find(env);
  if (it == banks_.end()) throw DataError("memory bank holds nothing for env " + std::to_string(env));
  return it->second;
}

FeatureBatch memory_sample(const MemoryBank& bank, std::size_t env, std::size_t n, Rng& rng) {
  const FeatureBatch& b = bank.stored(env);
  if (b.empty()) throw DataError("memory bank for env " + std::to_string(env) + " is empty");
  return sample_rows(b.h, b.y, n, rng);
}

FeatureBatch noise_sample(std::size_t feature_dim, std::size_t n, std::pair<int, int> label_range, Rng& rng) {
  const auto [first, last] = label_range;
  if (last <= first) throw DataError("noise_sample needs a nonempty label range");
  FeatureBatch out{rng.normal_matrix(n, feature_dim), std::vector<int>(n)};
  for (auto& y : out.y) y = first + static_cast<int>(rng.index(static_cast<std::size_t>(last - first)));
  return out;
}

std::vector<std::size_t> even_split(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> out(parts, parts ? total / parts : 0);
  for (std::size_t i = 0; parts && i < total % parts; ++i) ++out[i];
  return out;
}

std::size_t generated_count(std::size_t batch_size, double ratio) {
  if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("replay ratio must lie in [0, 1]");
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(batch_size)));
}

FeatureBatch augment_batch(std::span<const Snapshot* const> snaps, const FeatureBatch& current, double ratio, Rng& rng) {
  const std::size_t n_gen = snaps.empty() ? 0 : generated_count(current.size(), ratio);
  if (n_gen == 0) return current;
  const std::size_t n_real = current.size() - n_gen;
  const std::size_t width = current.h.cols();
  std::vector<FeatureBatch> parts;
  std::vector<std::size_t> lead(n_real);
  for (std::size_t i = 0; i < n_real; ++i) lead[i] = i;
  FeatureBatch real{gather_rows(current.h, lead), {current.y.begin(), current.y.begin() + static_cast<long>(n_real)}};
  parts.push_back(std::move(real));
  const auto counts = even_split(n_gen, snaps.size());
  for (std::size_t s = 0; s < snaps.size(); ++s) parts.push_back(generate_features(*snaps[s], counts[s], rng));
  return concat(parts, width);
}

}  // namespace condafr::replay
