#include <algorithm>

#include "rrph/cli.hpp"
#include "rrph/error.hpp"

namespace rrph::cli {

namespace {

constexpr double kToyB = 0.5;
constexpr double kToyP = 0.6;
constexpr double kToyQ = 0.3;
constexpr double kGeoQ = 0.6;

const Eigen::Vector2d kBetaNu(-0.1, 0.2);
const Eigen::Vector2d kBetaEta(0.1, -0.25);
constexpr double kRewardB0 = -3.064788;
constexpr double kRewardB1 = 0.8675632;
constexpr int kIemLevels = 4;
const std::vector<double> kPool{-10.0, 0.0, 5.0, 20.0};

// A -> B with b, A -> C with 1-b, B -> D; C and D absorb.
Eigen::MatrixXd bernoulli_toy_T(double b) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(4, 4);
  T(0, 1) = b;
  T(0, 2) = 1.0 - b;
  T(1, 3) = 1.0;
  return T;
}

// A -> B with b, A -> C with 1-b; B and C absorb.
Eigen::MatrixXd geometric_toy_T(double b) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(3, 3);
  T(0, 1) = b;
  T(0, 2) = 1.0 - b;
  return T;
}

Eigen::VectorXd first_unit(int d) {
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(d);
  pi(0) = 1.0;
  return pi;
}

std::uint64_t replicate_seed(std::uint64_t seed, int replicate) {
  return splitmix64(seed ^ splitmix64(kReplicateStream ^ splitmix64(static_cast<std::uint64_t>(replicate))));
}

double value_of(const NamedValues& values, const std::string& name) {
  for (const auto& [n, v] : values)
    if (n == name) return v;
  throw Error(ErrorCode::InvalidInput, "no parameter named " + name);
}

StudyRow toy_replicate(bool bernoulli, int replicate, int n, std::uint64_t seed, EmConfig config) {
  const int d = bernoulli ? 4 : 3;
  RrdphParams truth;
  truth.pi = first_unit(d);
  truth.kind = bernoulli ? RewardKind::Bernoulli : RewardKind::Geometric;
  truth.T = bernoulli ? bernoulli_toy_T(kToyB) : geometric_toy_T(kToyB);
  if (bernoulli)
    truth.rewards = Eigen::Vector4d(1.0, 1.0, kToyP, kToyQ);
  else
    truth.rewards = Eigen::Vector3d(1.0, 1.0, kGeoQ);
  const auto data = simulate_expanded(truth.model(), {replicate_seed(seed, replicate), n});

  // Same structure, parameters moved off the truth; A and B rewards are known.
  RrdphParams init = truth;
  init.T = bernoulli ? bernoulli_toy_T(0.3) : geometric_toy_T(0.3);
  const std::string r = bernoulli ? "p" : "q";
  for (int k = 2; k < d; ++k) init.rewards(k) = 0.5;
  config.fixed.insert(r + "[0]");
  config.fixed.insert(r + "[1]");

  const auto fit = fit_rrdph(data, init, config);
  const auto all = flatten(fit.params);
  StudyRow row;
  row.replicate = replicate;
  row.estimates.emplace_back("b", value_of(all, "T[0][1]"));
  if (bernoulli) {
    row.estimates.emplace_back("p", value_of(all, "p[2]"));
    row.estimates.emplace_back("q", value_of(all, "p[3]"));
  } else {
    row.estimates.emplace_back("q", value_of(all, "q[2]"));
  }
  row.loglik_trace = fit.loglik_trace;
  row.iterations = fit.iterations;
  row.converged = fit.converged;
  row.warnings = fit.warnings;
  return row;
}

StudyRow iem_replicate(bool linear, int replicate, int n, std::uint64_t seed,
                       const EmConfig& config) {
  const std::uint64_t s = replicate_seed(seed, replicate);
  RegressionIemSpec truth;
  truth.d = kIemLevels;
  truth.beta_nu = kBetaNu;
  truth.beta_eta = kBetaEta;
  truth.reward = LinearRewards{kRewardB0, kRewardB1};
  const std::vector<std::vector<double>> pools{kPool};
  truth.X = sample_design(pools, n, s);
  const auto data = simulate_iem_dataset(truth, {s, n});

  const auto starts = iem_start_candidates(data.observations, kIemLevels, 2, linear);
  const auto fit = fit_iem_multistart(data.observations, data.X, starts, config);
  StudyRow row;
  row.replicate = replicate;
  row.estimates = flatten(fit.params);
  if (linear) {
    const auto q = reward_probs(fit.params.reward, kIemLevels).values();
    for (int j = 0; j < kIemLevels; ++j) row.estimates.emplace_back("q[" + std::to_string(j) + "]", q(j));
  }
  row.loglik_trace = fit.loglik_trace;
  row.iterations = fit.iterations;
  row.converged = fit.converged;
  row.warnings = fit.warnings;
  return row;
}

}  // namespace

std::vector<std::string> study_names() {
  return {"bernoulli-toy", "geometric-toy", "iem-reward-regression", "iem-free-rewards"};
}

NamedValues study_truth(const std::string& study) {
  if (study == "bernoulli-toy") return {{"b", kToyB}, {"p", kToyP}, {"q", kToyQ}};
  if (study == "geometric-toy") return {{"b", kToyB}, {"q", kGeoQ}};
  if (study == "iem-reward-regression" || study == "iem-free-rewards") {
    NamedValues t{{"beta_nu[0]", kBetaNu(0)},   {"beta_nu[1]", kBetaNu(1)},
                  {"beta_eta[0]", kBetaEta(0)}, {"beta_eta[1]", kBetaEta(1)}};
    if (study == "iem-reward-regression") {
      t.emplace_back("reward_b0", kRewardB0);
      t.emplace_back("reward_b1", kRewardB1);
    }
    const auto q = linear_reward_probs(kRewardB0, kRewardB1, kIemLevels).values();
    for (int j = 0; j < kIemLevels; ++j) t.emplace_back("q[" + std::to_string(j) + "]", q(j));
    return t;
  }
  throw InputError("unknown study '" + study + "'");
}

StudyRow run_replicate(const std::string& study, int replicate, int n, std::uint64_t seed,
                       const EmConfig& config) {
  if (n < 1) throw InputError("n must be at least 1");
  if (study == "bernoulli-toy") return toy_replicate(true, replicate, n, seed, config);
  if (study == "geometric-toy") return toy_replicate(false, replicate, n, seed, config);
  if (study == "iem-reward-regression") return iem_replicate(true, replicate, n, seed, config);
  if (study == "iem-free-rewards") return iem_replicate(false, replicate, n, seed, config);
  throw InputError("unknown study '" + study + "'");
}

}  // namespace rrph::cli
