#include "rrph/simulate.hpp"

#include <cmath>
#include <sstream>

#include "rrph/error.hpp"

namespace rrph {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index)
    : engine_(splitmix64(seed ^ splitmix64(tag ^ splitmix64(index)))) {}

double RandomStream::uniform() {
  // (k + 1) / 2^53 for k uniform on [0, 2^53)
  return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
}

int RandomStream::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = (1.0 - uniform()) * total;  // [0, total)
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = static_cast<int>(i);
    if (target < acc) return last_positive;
  }
  return last_positive;  // rounding at the top end
}

namespace {

[[noreturn]] void step_cap(std::int64_t cap) {
  std::ostringstream msg;
  msg << "trajectory exceeded " << cap << " steps";
  throw Error(ErrorCode::StepCapExceeded, msg.str());
}

JointObservation walk_direct(const ExpandedModel& expanded, RandomStream& rng,
                             std::int64_t max_steps) {
  const DphModel& base = expanded.base();
  const int d = base.dim();
  const Eigen::VectorXd& r = expanded.rewards().values();
  std::vector<double> row(d + 1);
  JointObservation y;
  std::int64_t steps = 0;
  int state = rng.categorical({base.pi().data(), static_cast<std::size_t>(d)});
  while (true) {
    if (expanded.kind() == RewardKind::Bernoulli) {
      if (rng.uniform() <= r(state)) ++y.y1; else ++y.y2;
      ++steps;
    } else {
      ++y.y2;
      if (r(state) < 1.0) {
        // Failures before the first success: floor(log U / log(1 - q)).
        const double g = std::floor(std::log(rng.uniform()) / std::log1p(-r(state)));
        if (g > static_cast<double>(max_steps)) step_cap(max_steps);
        y.y1 += static_cast<int>(g);
        steps += static_cast<std::int64_t>(g);
      }
      ++steps;
    }
    if (steps > max_steps) step_cap(max_steps);
    for (int j = 0; j < d; ++j) row[j] = base.T()(state, j);
    row[d] = base.exit()(state);
    const int next = rng.categorical(row);
    if (next == d) return y;
    state = next;
  }
}

JointObservation walk_expanded(const ExpandedModel& expanded, RandomStream& rng,
                               std::int64_t max_steps) {
  const int n = expanded.dim();
  std::vector<double> row(n + 1);
  JointObservation y;
  std::int64_t steps = 0;
  int state = rng.categorical({expanded.beta().data(), static_cast<std::size_t>(n)});
  while (true) {
    if (expanded.channel(state) == kRewardChannel) ++y.y1; else ++y.y2;
    if (++steps > max_steps) step_cap(max_steps);
    for (int j = 0; j < n; ++j) row[j] = expanded.B()(state, j);
    row[n] = expanded.b0()(state);
    const int next = rng.categorical(row);
    if (next == n) return y;
    state = next;
  }
}

void check_config(const SimConfig& cfg) {
  if (cfg.n < 1) throw Error(ErrorCode::InvalidParameter, "n must be at least 1");
  if (cfg.max_steps < 1) throw Error(ErrorCode::InvalidParameter, "max_steps must be at least 1");
}

}  // namespace

JointObservation simulate_one(const ExpandedModel& expanded, const SimConfig& cfg,
                              std::uint64_t index, SimMethod method) {
  RandomStream rng(cfg.seed, kObservationStream, index);
  return method == SimMethod::Direct ? walk_direct(expanded, rng, cfg.max_steps)
                                     : walk_expanded(expanded, rng, cfg.max_steps);
}

std::vector<JointObservation> simulate_expanded(const ExpandedModel& expanded,
                                                const SimConfig& cfg, SimMethod method) {
  check_config(cfg);
  std::vector<JointObservation> out;
  out.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    out.push_back(simulate_one(expanded, cfg, static_cast<std::uint64_t>(i), method));
  return out;
}

Dataset simulate_iem_dataset(const IemSpec& spec, const SimConfig& cfg) {
  check_config(cfg);
  return {simulate_expanded(iem_model(spec), cfg), Eigen::MatrixXd()};
}

Dataset simulate_iem_dataset(const RegressionIemSpec& spec, const SimConfig& cfg) {
  check_config(cfg);
  if (spec.X.rows() != cfg.n) {
    std::ostringstream msg;
    msg << "design has " << spec.X.rows() << " rows but n = " << cfg.n;
    throw Error(ErrorCode::DimensionMismatch, msg.str());
  }
  const SubjectModels models = subject_models(spec);
  Dataset out;
  out.X = spec.X;
  out.observations.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    const auto& model = models.models[models.model_of_subject[i]];
    out.observations.push_back(simulate_one(model, cfg, static_cast<std::uint64_t>(i)));
  }
  return out;
}

Eigen::MatrixXd sample_design(std::span<const std::vector<double>> pools, int n,
                              std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidParameter, "n must be at least 1");
  const auto r = static_cast<Eigen::Index>(pools.size());
  Eigen::MatrixXd X(n, r + 1);
  X.col(0).setOnes();
  for (Eigen::Index c = 0; c < r; ++c)
    if (pools[c].empty()) throw Error(ErrorCode::InvalidInput, "empty covariate pool");
  for (int i = 0; i < n; ++i) {
    RandomStream rng(seed, kCovariateStream, static_cast<std::uint64_t>(i));
    for (Eigen::Index c = 0; c < r; ++c) {
      const auto& pool = pools[c];
      auto k = static_cast<std::size_t>((1.0 - rng.uniform()) * static_cast<double>(pool.size()));
      if (k >= pool.size()) k = pool.size() - 1;
      X(i, c + 1) = pool[k];
    }
  }
  return X;
}

}  // namespace rrph
