#pragma once

#include <compare>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rrph/dph.hpp"

namespace rrph {

enum class RewardKind { Bernoulli, Geometric };

std::string to_string(RewardKind kind);

// Per-state reward parameters: p in [0,1] for Bernoulli rewards, q in (0,1]
// for geometric rewards (q = 1 is a reward that is always zero).
class RewardProbs {
 public:
  RewardProbs(Eigen::VectorXd values, RewardKind kind);

  const Eigen::VectorXd& values() const { return values_; }
  RewardKind kind() const { return kind_; }
  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_(i); }

 private:
  Eigen::VectorXd values_;
  RewardKind kind_;
};

// Observed pair. Bernoulli: (rewarded visits, unrewarded visits).
// Geometric: (accumulated reward, absorption time).
struct JointObservation {
  int y1 = 0;
  int y2 = 0;

  auto operator<=>(const JointObservation&) const = default;
};

// Reward channel of an expanded state: states d..2d-1 feed y1, states 0..d-1 feed y2.
inline constexpr int kRewardChannel = 0;
inline constexpr int kComplementChannel = 1;

// 2d-state chain whose visits emit a unit reward on exactly one of the two
// channels. The first block holds the unrewarded (or time-counting) copies,
// the second block the rewarded copies.
class ExpandedModel {
 public:
  int base_dim() const { return base_.dim(); }
  int dim() const { return 2 * base_.dim(); }
  RewardKind kind() const { return rewards_.kind(); }

  const Eigen::VectorXd& beta() const { return beta_; }
  const Eigen::MatrixXd& B() const { return B_; }
  const Eigen::VectorXd& b0() const { return b0_; }

  // Columns r1 = (0_d, 1_d) and r2 = (1_d, 0_d).
  Eigen::MatrixX2d R() const;
  int channel(int state) const { return state >= base_dim() ? kRewardChannel : kComplementChannel; }

  const DphModel& base() const { return base_; }
  const RewardProbs& rewards() const { return rewards_; }

  friend ExpandedModel expand_bernoulli(const DphModel& model, const RewardProbs& p);
  friend ExpandedModel expand_geometric(const DphModel& model, const RewardProbs& q);

 private:
  ExpandedModel(DphModel base, RewardProbs rewards, Eigen::VectorXd beta, Eigen::MatrixXd B,
                Eigen::VectorXd b0);

  DphModel base_;
  RewardProbs rewards_;
  Eigen::VectorXd beta_;
  Eigen::MatrixXd B_;
  Eigen::VectorXd b0_;
};

// B = [[T(I-P), TP], [T(I-P), TP]], beta = ((I-P)pi, P pi), b0 = (t, t).
ExpandedModel expand_bernoulli(const DphModel& model, const RewardProbs& p);

// B = [[QT, I-Q], [QT, I-Q]], beta = (pi, 0), b0 = (Qt, Qt).
ExpandedModel expand_geometric(const DphModel& model, const RewardProbs& q);

ExpandedModel expand(const DphModel& model, const RewardProbs& rewards);

// Exact P(Y1 = y1, Y2 = y2). When `underflow` is non-null it is set if the
// value fell below 1e-300.
double joint_pmf(const ExpandedModel& expanded, JointObservation y, bool* underflow = nullptr);

// E[theta1^Y1 theta2^Y2] from the d-dimensional closed form pi D (I - T D)^-1 t.
double pgf_compact(const DphModel& model, const RewardProbs& rewards, double theta1,
                   double theta2);

// Same quantity from the expanded chain: beta Delta (I - B Delta)^-1 b0.
double pgf_expanded(const ExpandedModel& expanded, double theta1, double theta2);

// (E[Y1], E[Y2])
std::pair<double, double> expected_rewards(const ExpandedModel& expanded);

// Per-visit reward of a state for marginal reward computations where states
// may mix fixed and random rewards.
struct StateReward {
  enum class Kind { Fixed, Bernoulli, Geometric };
  Kind kind = Kind::Fixed;
  double value = 0.0;  // fixed reward, Bernoulli p or geometric q

  double mean() const;
  // P(reward of one visit = k)
  double prob(int k) const;
};

// P(psi = k) for k = 0..max_reward, psi being the total reward until absorption.
std::vector<double> reward_pmf(const DphModel& model, std::span<const StateReward> rewards,
                               int max_reward);

double reward_mean(const DphModel& model, std::span<const StateReward> rewards);

// Replaces every reward by a fixed reward equal to its mean; the means must be integers.
std::vector<StateReward> mean_fixed_rewards(std::span<const StateReward> rewards);

}  // namespace rrph
