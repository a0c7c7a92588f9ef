#include "rrph/rrdph.hpp"

#include <cmath>
#include <sstream>

#include "rrph/error.hpp"
#include "rrph/lattice.hpp"

namespace rrph {

namespace {

constexpr double kUnderflowThreshold = 1e-300;

void check_theta(double theta, const char* name) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    std::ostringstream msg;
    msg << name << " = " << theta << " outside [0,1]";
    throw Error(ErrorCode::InvalidParameter, msg.str());
  }
}

void check_dims(const DphModel& model, const RewardProbs& rewards) {
  if (rewards.size() != model.dim()) {
    std::ostringstream msg;
    msg << "model has " << model.dim() << " states but " << rewards.size()
        << " reward parameters were given";
    throw Error(ErrorCode::DimensionMismatch, msg.str());
  }
}

}  // namespace

std::string to_string(RewardKind kind) {
  return kind == RewardKind::Bernoulli ? "bernoulli" : "geometric";
}

RewardProbs::RewardProbs(Eigen::VectorXd values, RewardKind kind)
    : values_(std::move(values)), kind_(kind) {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    const double v = values_(i);
    std::ostringstream where;
    where << (kind == RewardKind::Bernoulli ? "p[" : "q[") << i << "] = " << v;
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw Error(ErrorCode::InvalidParameter, where.str() + " outside [0,1]");
    if (kind == RewardKind::Geometric && v == 0.0)
      throw Error(ErrorCode::ZeroRewardProbability, where.str() + " gives an infinite reward");
  }
}

ExpandedModel::ExpandedModel(DphModel base, RewardProbs rewards, Eigen::VectorXd beta,
                             Eigen::MatrixXd B, Eigen::VectorXd b0)
    : base_(std::move(base)),
      rewards_(std::move(rewards)),
      beta_(std::move(beta)),
      B_(std::move(B)),
      b0_(std::move(b0)) {}

Eigen::MatrixX2d ExpandedModel::R() const {
  const int d = base_dim();
  Eigen::MatrixX2d r = Eigen::MatrixX2d::Zero(2 * d, 2);
  r.col(0).tail(d).setOnes();
  r.col(1).head(d).setOnes();
  return r;
}

ExpandedModel expand_bernoulli(const DphModel& model, const RewardProbs& p) {
  if (p.kind() != RewardKind::Bernoulli)
    throw Error(ErrorCode::InvalidParameter, "expand_bernoulli needs Bernoulli rewards");
  check_dims(model, p);
  const int d = model.dim();
  const Eigen::VectorXd& pv = p.values();
  const Eigen::VectorXd not_p = Eigen::VectorXd::Ones(d) - pv;

  const Eigen::MatrixXd unrewarded = model.T() * not_p.asDiagonal();
  const Eigen::MatrixXd rewarded = model.T() * pv.asDiagonal();
  Eigen::MatrixXd B(2 * d, 2 * d);
  B << unrewarded, rewarded, unrewarded, rewarded;

  Eigen::VectorXd beta(2 * d);
  beta << not_p.cwiseProduct(model.pi()), pv.cwiseProduct(model.pi());
  Eigen::VectorXd b0(2 * d);
  b0 << model.exit(), model.exit();
  return ExpandedModel(model, p, std::move(beta), std::move(B), std::move(b0));
}

ExpandedModel expand_geometric(const DphModel& model, const RewardProbs& q) {
  if (q.kind() != RewardKind::Geometric)
    throw Error(ErrorCode::InvalidParameter, "expand_geometric needs geometric rewards");
  check_dims(model, q);
  const int d = model.dim();
  const Eigen::VectorXd& qv = q.values();

  const Eigen::MatrixXd move = qv.asDiagonal() * model.T();
  const Eigen::MatrixXd accumulate = (Eigen::VectorXd::Ones(d) - qv).asDiagonal();
  Eigen::MatrixXd B(2 * d, 2 * d);
  B << move, accumulate, move, accumulate;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(2 * d);
  beta.head(d) = model.pi();
  const Eigen::VectorXd qt = qv.cwiseProduct(model.exit());
  Eigen::VectorXd b0(2 * d);
  b0 << qt, qt;
  return ExpandedModel(model, q, std::move(beta), std::move(B), std::move(b0));
}

ExpandedModel expand(const DphModel& model, const RewardProbs& rewards) {
  return rewards.kind() == RewardKind::Bernoulli ? expand_bernoulli(model, rewards)
                                                 : expand_geometric(model, rewards);
}

double joint_pmf(const ExpandedModel& expanded, JointObservation y, bool* underflow) {
  if (y.y1 < 0 || y.y2 < 0) return 0.0;
  const auto tables = lattice_forward(expanded, {y.y1, y.y2});
  const double value = tables.likelihood(y);
  if (underflow != nullptr) *underflow = value > 0.0 && value < kUnderflowThreshold;
  return value;
}

double pgf_compact(const DphModel& model, const RewardProbs& rewards, double theta1,
                   double theta2) {
  check_dims(model, rewards);
  check_theta(theta1, "theta1");
  check_theta(theta2, "theta2");
  const int d = model.dim();
  const Eigen::VectorXd& r = rewards.values();
  Eigen::VectorXd D(d);
  if (rewards.kind() == RewardKind::Bernoulli) {
    // D = (I - P) theta2 + P theta1
    D = (Eigen::VectorXd::Ones(d) - r) * theta2 + r * theta1;
  } else {
    // D = Q theta2 (I - (I - Q) theta1)^-1
    for (int i = 0; i < d; ++i) {
      const double denom = 1.0 - (1.0 - r(i)) * theta1;
      if (!(denom > 0.0)) {
        std::ostringstream msg;
        msg << "(1 - q[" << i << "]) theta1 >= 1";
        throw Error(ErrorCode::DivergentSeries, msg.str());
      }
      D(i) = r(i) * theta2 / denom;
    }
  }
  const Eigen::MatrixXd resolvent = Eigen::MatrixXd::Identity(d, d) - model.T() * D.asDiagonal();
  const Eigen::VectorXd u = resolvent.partialPivLu().solve(model.exit());
  return model.pi().cwiseProduct(D).dot(u);
}

double pgf_expanded(const ExpandedModel& expanded, double theta1, double theta2) {
  check_theta(theta1, "theta1");
  check_theta(theta2, "theta2");
  const int n = expanded.dim();
  const int d = expanded.base_dim();
  Eigen::VectorXd delta(n);
  delta.head(d).setConstant(theta2);
  delta.tail(d).setConstant(theta1);
  const Eigen::MatrixXd resolvent =
      Eigen::MatrixXd::Identity(n, n) - expanded.B() * delta.asDiagonal();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(resolvent);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularResolvent, "I - B Delta is singular");
  const Eigen::VectorXd u = lu.solve(expanded.b0());
  return expanded.beta().cwiseProduct(delta).dot(u);
}

std::pair<double, double> expected_rewards(const ExpandedModel& expanded) {
  const int n = expanded.dim();
  const Eigen::MatrixXd fundamental = Eigen::MatrixXd::Identity(n, n) - expanded.B();
  // visits = beta (I - B)^-1, solved as (I - B)^T visits^T = beta^T
  const Eigen::VectorXd visits = fundamental.transpose().partialPivLu().solve(expanded.beta());
  const Eigen::MatrixX2d R = expanded.R();
  return {visits.dot(R.col(0)), visits.dot(R.col(1))};
}

double StateReward::mean() const {
  switch (kind) {
    case Kind::Fixed: return value;
    case Kind::Bernoulli: return value;
    case Kind::Geometric: return (1.0 - value) / value;
  }
  return 0.0;
}

double StateReward::prob(int k) const {
  if (k < 0) return 0.0;
  switch (kind) {
    case Kind::Fixed: return k == static_cast<int>(value) ? 1.0 : 0.0;
    case Kind::Bernoulli: return k == 0 ? 1.0 - value : (k == 1 ? value : 0.0);
    case Kind::Geometric: return std::pow(1.0 - value, k) * value;
  }
  return 0.0;
}

namespace {

void check_state_rewards(const DphModel& model, std::span<const StateReward> rewards) {
  if (static_cast<int>(rewards.size()) != model.dim())
    throw Error(ErrorCode::DimensionMismatch, "one reward per state required");
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const auto& r = rewards[i];
    std::ostringstream where;
    where << "rewards[" << i << "]";
    switch (r.kind) {
      case StateReward::Kind::Fixed:
        if (r.value < 0.0 || r.value != std::floor(r.value))
          throw Error(ErrorCode::InvalidParameter, where.str() + ": fixed reward must be a nonnegative integer");
        break;
      case StateReward::Kind::Bernoulli:
        if (!(r.value >= 0.0 && r.value <= 1.0))
          throw Error(ErrorCode::InvalidParameter, where.str() + ": p outside [0,1]");
        break;
      case StateReward::Kind::Geometric:
        if (r.value == 0.0) throw Error(ErrorCode::ZeroRewardProbability, where.str());
        if (!(r.value > 0.0 && r.value <= 1.0))
          throw Error(ErrorCode::InvalidParameter, where.str() + ": q outside (0,1]");
        break;
    }
  }
}

}  // namespace

std::vector<double> reward_pmf(const DphModel& model, std::span<const StateReward> rewards,
                               int max_reward) {
  check_state_rewards(model, rewards);
  if (max_reward < 0) throw Error(ErrorCode::InvalidParameter, "negative reward bound");
  const int d = model.dim();

  // f(k)_i = P(reward from this visit to i onward totals k). Conditioning on the
  // reward m of the visit:
  //   f(k) = sum_m R_m [ t 1(k = m) + T f(k - m) ],  R_m = diag(P(r_i = m)),
  // and the m = 0 term is moved to the left-hand side.
  Eigen::MatrixXd prob(d, max_reward + 1);
  for (int i = 0; i < d; ++i)
    for (int m = 0; m <= max_reward; ++m) prob(i, m) = rewards[i].prob(m);

  const Eigen::MatrixXd lhs =
      Eigen::MatrixXd::Identity(d, d) - prob.col(0).asDiagonal() * model.T();
  const auto lu = lhs.partialPivLu();

  std::vector<Eigen::VectorXd> f;
  f.reserve(max_reward + 1);
  std::vector<Eigen::VectorXd> Tf;
  Tf.reserve(max_reward + 1);
  std::vector<double> out(max_reward + 1);
  for (int k = 0; k <= max_reward; ++k) {
    Eigen::VectorXd rhs = prob.col(k).cwiseProduct(model.exit());
    for (int m = 1; m <= k; ++m) rhs += prob.col(m).cwiseProduct(Tf[k - m]);
    f.push_back(lu.solve(rhs));
    Tf.push_back(model.T() * f.back());
    out[k] = model.pi().dot(f.back());
  }
  return out;
}

double reward_mean(const DphModel& model, std::span<const StateReward> rewards) {
  check_state_rewards(model, rewards);
  const int d = model.dim();
  Eigen::VectorXd means(d);
  for (int i = 0; i < d; ++i) means(i) = rewards[i].mean();
  const Eigen::MatrixXd fundamental = Eigen::MatrixXd::Identity(d, d) - model.T();
  return model.pi().dot(fundamental.partialPivLu().solve(means));
}

std::vector<StateReward> mean_fixed_rewards(std::span<const StateReward> rewards) {
  std::vector<StateReward> out;
  out.reserve(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const double m = rewards[i].mean();
    const double rounded = std::round(m);
    if (std::abs(m - rounded) > 1e-9) {
      std::ostringstream msg;
      msg << "rewards[" << i << "] has non-integer mean " << m;
      throw Error(ErrorCode::InvalidParameter, msg.str());
    }
    out.push_back({StateReward::Kind::Fixed, rounded});
  }
  return out;
}

}  // namespace rrph
