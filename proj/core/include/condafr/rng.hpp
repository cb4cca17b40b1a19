#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "condafr/tensor.hpp"

namespace condafr {

/// Seeded generator used by every stochastic step of a run.
///
/// Wraps mt19937_64 and derives uniforms and normals from raw draws directly
/// (no distribution objects), so a sequence is reproducible across standard
/// library implementations and the whole state is a single engine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; consumes two draws per call.
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  Tensor normal_matrix(std::size_t rows, std::size_t cols);
  std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n);
  std::vector<std::size_t> permutation(std::size_t n);
  /// Independent child generator; advances this one by one draw.
  Rng split();

  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace condafr
