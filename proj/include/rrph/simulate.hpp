#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rrph/iem.hpp"
#include "rrph/rrdph.hpp"

namespace rrph {

// Reproducible random stream. Stream (seed, tag, index) is a std::mt19937_64
// seeded with a SplitMix64 mix of the three words; uniforms take the top 53
// bits. Both algorithms are fixed by their definitions, so draws are identical
// across platforms, and each index gets its own stream regardless of the
// order in which indices are processed.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index);

  // Uniform on (0, 1].
  double uniform();
  // Index drawn with probability weights[i] / sum(weights).
  int categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Stream tags keep independent uses of one seed apart.
inline constexpr std::uint64_t kObservationStream = 1;
inline constexpr std::uint64_t kCovariateStream = 2;
inline constexpr std::uint64_t kReplicateStream = 3;

struct SimConfig {
  std::uint64_t seed = 0;
  int n = 1;
  std::int64_t max_steps = 10'000'000;
};

enum class SimMethod {
  // Walk the original chain and draw each visit's reward directly
  // (geometric rewards by inversion).
  Direct,
  // Walk the 2d-state expanded chain one transition at a time.
  ExpandedWalk,
};

std::vector<JointObservation> simulate_expanded(const ExpandedModel& expanded,
                                                const SimConfig& cfg,
                                                SimMethod method = SimMethod::Direct);

// One draw, using stream (cfg.seed, kObservationStream, index).
JointObservation simulate_one(const ExpandedModel& expanded, const SimConfig& cfg,
                              std::uint64_t index, SimMethod method = SimMethod::Direct);

struct Dataset {
  std::vector<JointObservation> observations;
  Eigen::MatrixXd X;  // design with intercept column; empty for models without covariates
};

Dataset simulate_iem_dataset(const IemSpec& spec, const SimConfig& cfg);
Dataset simulate_iem_dataset(const RegressionIemSpec& spec, const SimConfig& cfg);

// n x (1 + pools.size()) design: intercept, then each covariate drawn
// uniformly with replacement from its pool.
Eigen::MatrixXd sample_design(std::span<const std::vector<double>> pools, int n,
                              std::uint64_t seed);

}  // namespace rrph
