#include "rrph/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "rrph/error.hpp"
#include "rrph/glm.hpp"

namespace rrph {

namespace {

std::string indexed(const std::string& base, Eigen::Index i) {
  return base + "[" + std::to_string(i) + "]";
}

std::string indexed(const std::string& base, Eigen::Index i, Eigen::Index j) {
  return base + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
}

void check_likelihood(double L, std::size_t index, JointObservation y) {
  if (!(L > 0.0) || !std::isfinite(L)) {
    std::ostringstream msg;
    msg << "observation " << index << " (y1=" << y.y1 << ", y2=" << y.y2
        << ") has zero likelihood under the current model";
    throw Error(ErrorCode::ZeroLikelihoodObservation, msg.str());
  }
}

ExpectedCounts empty_counts(const ExpandedModel& expanded) {
  ExpectedCounts c;
  c.base_dim = expanded.base_dim();
  c.N = Eigen::MatrixXd::Zero(expanded.dim(), expanded.dim() + 1);
  c.initial = Eigen::VectorXd::Zero(expanded.dim());
  return c;
}

}  // namespace

ExpectedCounts expected_counts(const ExpandedModel& expanded,
                               std::span<const JointObservation> observations,
                               std::size_t cell_cap) {
  ExpectedCounts total = empty_counts(expanded);
  if (observations.empty()) return total;
  const auto tables = lattice_forward(expanded, bounds_of(observations), cell_cap);
  const SparseTransitions sparse(expanded.B());
  const int n = expanded.dim();
  const auto& beta = expanded.beta();
  const auto& b0 = expanded.b0();

  for (std::size_t o = 0; o < observations.size(); ++o) {
    const JointObservation y = observations[o];
    const double L = tables.likelihood(y);
    check_likelihood(L, o, y);
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(n, n + 1);
    for (int u1 = 0; u1 <= y.y1; ++u1) {
      for (int u2 = 0; u2 <= y.y2; ++u2) {
        const auto alpha = tables.alpha({u1, u2});
        const auto rest = tables.p({y.y1 - u1, y.y2 - u2});
        for (const auto& e : sparse.entries) N(e.from, e.to) += alpha(e.from) * e.value * rest(e.to);
      }
    }
    N.col(n) = tables.alpha(y).cwiseProduct(b0);
    N /= L;
    total.N += N;
    total.initial += beta.cwiseProduct(tables.p(y)) / L;
    total.loglik += std::log(L);
    total.per_observation.push_back(std::move(N));
  }
  return total;
}

ExpectedCounts aggregate_counts(const ExpandedModel& expanded,
                                std::span<const JointObservation> observations,
                                std::size_t cell_cap) {
  ExpectedCounts total = empty_counts(expanded);
  if (observations.empty()) return total;
  const LatticeBounds bounds = bounds_of(observations);
  const auto tables = lattice_forward(expanded, bounds, cell_cap, LatticeParts::ForwardOnly);
  const SparseTransitions sparse(expanded.B());
  const int n = expanded.dim();
  const int d = expanded.base_dim();
  const auto& beta = expanded.beta();
  const auto& b0 = expanded.b0();
  const int rows = bounds.y1_max + 1;
  const int cols = bounds.y2_max + 1;

  // Likelihood weights W(z) = sum over observations at z of 1 / P(z).
  std::vector<double> W(static_cast<std::size_t>(rows) * cols, 0.0);
  for (std::size_t o = 0; o < observations.size(); ++o) {
    const JointObservation y = observations[o];
    const double L = tables.likelihood_forward(y);
    check_likelihood(L, o, y);
    W[static_cast<std::size_t>(y.y1) * cols + y.y2] += 1.0 / L;
    total.loglik += std::log(L);
  }
  auto weight = [&](int y1, int y2) {
    return (y1 < rows && y2 < cols) ? W[static_cast<std::size_t>(y1) * cols + y2] : 0.0;
  };

  // g(v)_j = b0_j W(v + e_c(j)) + sum_k B_jk g(v + e_c(j))_k, swept from the
  // far corner down; only rows y1 and y1 + 1 are kept. Transition counts
  // accumulate per nonzero of B and are scaled by B_ij at the end.
  std::vector<double> next_row(static_cast<std::size_t>(cols) * n, 0.0);
  std::vector<double> row(static_cast<std::size_t>(cols) * n, 0.0);
  std::vector<double> flow(sparse.entries.size(), 0.0);
  Eigen::VectorXd absorbed = Eigen::VectorXd::Zero(n);
  const double* alpha_all = tables.alpha_data();
  for (int y1 = bounds.y1_max; y1 >= 0; --y1) {
    const double* alpha_row = alpha_all + static_cast<std::size_t>(y1) * cols * n;
    for (int y2 = bounds.y2_max; y2 >= 0; --y2) {
      double* g = row.data() + static_cast<std::size_t>(y2) * n;
      const double* g_up1 = y1 < bounds.y1_max ? next_row.data() + static_cast<std::size_t>(y2) * n
                                               : nullptr;
      const double* g_up2 = y2 < bounds.y2_max ? g + n : nullptr;
      const double w1 = weight(y1 + 1, y2);
      const double w2 = weight(y1, y2 + 1);
      for (int j = 0; j < n; ++j) {
        const bool rewarded = j >= d;
        const double* ahead = rewarded ? g_up1 : g_up2;
        double v = b0(j) * (rewarded ? w1 : w2);
        if (ahead != nullptr)
          for (int k = sparse.row_start[j]; k < sparse.row_start[j + 1]; ++k)
            v += sparse.row_value[k] * ahead[sparse.row_to[k]];
        g[j] = v;
      }
      const double* alpha = alpha_row + static_cast<std::size_t>(y2) * n;
      for (std::size_t k = 0; k < flow.size(); ++k) {
        const auto& e = sparse.entries[k];
        flow[k] += alpha[e.from] * g[e.to];
      }
      const double wz = weight(y1, y2);
      if (wz != 0.0)
        for (int i = 0; i < n; ++i) absorbed(i) += wz * alpha[i];
    }
    std::swap(row, next_row);
  }
  Eigen::MatrixXd& N = total.N;
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const auto& e = sparse.entries[k];
    N(e.from, e.to) = flow[k] * e.value;
  }
  N.col(n) = absorbed.cwiseProduct(b0);
  // After the final swap next_row holds the y1 = 0 row.
  total.initial = beta.cwiseProduct(Eigen::Map<const Eigen::VectorXd>(next_row.data(), n));
  return total;
}

IemCounts& IemCounts::operator+=(const IemCounts& other) {
  stay += other.stay;
  up += other.up;
  down += other.down;
  if (F.size() == 0) {
    F = other.F;
    U = other.U;
  } else {
    F += other.F;
    U += other.U;
  }
  return *this;
}

IemCounts group_iem(const ExpectedCounts& counts) {
  const int d = counts.base_dim;
  const auto& N = counts.N;
  const int abs = counts.absorbing_column();
  IemCounts g;
  g.F = Eigen::VectorXd::Zero(d);
  g.U = Eigen::VectorXd::Zero(d);
  auto moved = [&](int j, int k) { return N(j, k) + N(j + d, k); };
  for (int j = 0; j < d; ++j) {
    g.stay += moved(j, j);
    if (j + 1 < d) g.up += moved(j, j + 1);
    if (j > 0) g.down += moved(j, j - 1);
    g.F(j) = N(j, j + d) + N(j + d, j + d);
    g.U(j) = N.row(j).sum() + N.row(j + d).sum();
  }
  g.up += moved(d - 1, abs);
  g.down += moved(0, abs);
  return g;
}

std::pair<double, double> m_step_iem(const IemCounts& counts) {
  const double moves = counts.up + counts.down;
  const double all = counts.stay + moves;
  if (!(all > 0.0) || !(moves > 0.0)) {
    std::ostringstream msg;
    msg << "grouped counts (stay, up, down) = (" << counts.stay << ", " << counts.up << ", "
        << counts.down << ") leave a ratio undefined";
    throw Error(ErrorCode::DegenerateCounts, msg.str());
  }
  return {counts.stay / all, counts.up / moves};
}

RewardUpdate m_step_rewards(const IemCounts& counts, const Eigen::VectorXd& previous) {
  if (previous.size() != counts.U.size())
    throw Error(ErrorCode::DimensionMismatch, "reward vector and counts differ in length");
  RewardUpdate out{previous, {}};
  for (Eigen::Index j = 0; j < counts.U.size(); ++j) {
    if (counts.U(j) > 0.0) {
      // A visited level always completes at least one visit, so the ratio is positive;
      // the floor only absorbs rounding.
      out.q(j) = std::clamp((counts.U(j) - counts.F(j)) / counts.U(j), 1e-300, 1.0);
    } else {
      out.retained.push_back(static_cast<int>(j));
    }
  }
  return out;
}

namespace {

// Columns of X that are linear combinations of earlier columns.
std::vector<bool> aliased_columns(const Eigen::MatrixXd& X) {
  std::vector<bool> aliased(X.cols(), false);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    Eigen::MatrixXd trial(X.rows(), static_cast<Eigen::Index>(kept.size()) + 1);
    for (std::size_t k = 0; k < kept.size(); ++k) trial.col(k) = X.col(kept[k]);
    trial.col(trial.cols() - 1) = X.col(c);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(1e-10);
    if (qr.rank() == trial.cols())
      kept.push_back(c);
    else
      aliased[c] = true;
  }
  return aliased;
}

Eigen::VectorXd fit_coefficients(const WeightedBinomialData& data, const Eigen::VectorXd& previous,
                                 std::vector<bool> fixed, const std::string& name,
                                 std::vector<std::string>& warnings) {
  fixed.resize(previous.size(), false);
  Eigen::VectorXd start = previous;
  const auto aliased = aliased_columns(data.design);
  for (Eigen::Index c = 0; c < previous.size(); ++c) {
    if (aliased[c] && !fixed[c]) {
      fixed[c] = true;
      start(c) = 0.0;
      warnings.push_back(indexed(name, c) + " is aliased with earlier columns and held at 0");
    }
  }
  if (std::all_of(fixed.begin(), fixed.end(), [](bool f) { return f; })) return start;
  IrlsOptions options;
  options.fixed = fixed;
  const auto fit = irls_fit(data, start, options);
  if (fit.capped) warnings.push_back(name + " hit the coefficient cap of 30");
  return fit.coef;
}

}  // namespace

RegressionUpdate m_step_regression(std::span<const IemCounts> per_row, const Eigen::MatrixXd& X,
                                   const RegressionCoefficients& previous,
                                   const RegressionMask& mask) {
  const auto n = X.rows();
  if (static_cast<Eigen::Index>(per_row.size()) != n)
    throw Error(ErrorCode::DimensionMismatch, "one set of counts per design row is required");
  if (previous.beta_nu.size() != X.cols() || previous.beta_eta.size() != X.cols())
    throw Error(ErrorCode::DimensionMismatch, "coefficient length differs from design columns");

  RegressionUpdate out;
  out.coef = previous;

  WeightedBinomialData nu_data{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), X};
  WeightedBinomialData eta_data{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), X};
  IemCounts pooled;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = per_row[i];
    const double all = c.stay + c.up + c.down;
    const double moves = c.up + c.down;
    nu_data.weights(i) = all;
    nu_data.responses(i) = all > 0.0 ? c.stay / all : 0.0;
    eta_data.weights(i) = moves;
    eta_data.responses(i) = moves > 0.0 ? c.up / moves : 0.0;
    pooled += c;
  }
  out.coef.beta_nu =
      fit_coefficients(nu_data, previous.beta_nu, mask.beta_nu, "beta_nu", out.warnings);
  out.coef.beta_eta =
      fit_coefficients(eta_data, previous.beta_eta, mask.beta_eta, "beta_eta", out.warnings);

  if (const auto* q = std::get_if<Eigen::VectorXd>(&previous.reward)) {
    auto update = m_step_rewards(pooled, *q);
    for (Eigen::Index j = 0; j < q->size(); ++j)
      if (j < static_cast<Eigen::Index>(mask.q.size()) && mask.q[j]) update.q(j) = (*q)(j);
    for (int j : update.retained)
      out.warnings.push_back(indexed("q", j) + " has no expected visits and was retained");
    out.coef.reward = update.q;
  } else {
    const auto& lin = std::get<LinearRewards>(previous.reward);
    const auto d = pooled.U.size();
    WeightedBinomialData reward_data{Eigen::VectorXd::Zero(d), pooled.U,
                                     Eigen::MatrixXd::Ones(d, 2)};
    for (Eigen::Index j = 0; j < d; ++j) {
      reward_data.design(j, 1) = static_cast<double>(j + 1);
      reward_data.responses(j) =
          pooled.U(j) > 0.0 ? (pooled.U(j) - pooled.F(j)) / pooled.U(j) : 0.0;
    }
    Eigen::Vector2d start(lin.b0, lin.b1);
    const Eigen::VectorXd b =
        fit_coefficients(reward_data, start, {mask.reward_b0, mask.reward_b1}, "reward",
                         out.warnings);
    out.coef.reward = LinearRewards{b(0), b(1)};
  }
  return out;
}

ExpandedModel RrdphParams::model() const {
  return expand(validate_dph(pi, T), RewardProbs(rewards, kind));
}

NamedValues flatten(const RrdphParams& params) {
  NamedValues out;
  for (Eigen::Index i = 0; i < params.T.rows(); ++i)
    for (Eigen::Index j = 0; j < params.T.cols(); ++j)
      out.emplace_back(indexed("T", i, j), params.T(i, j));
  const std::string r = params.kind == RewardKind::Bernoulli ? "p" : "q";
  for (Eigen::Index i = 0; i < params.rewards.size(); ++i)
    out.emplace_back(indexed(r, i), params.rewards(i));
  return out;
}

NamedValues flatten(const IemParams& params) {
  NamedValues out;
  if (params.has_covariates()) {
    for (Eigen::Index k = 0; k < params.beta_nu.size(); ++k)
      out.emplace_back(indexed("beta_nu", k), params.beta_nu(k));
    for (Eigen::Index k = 0; k < params.beta_eta.size(); ++k)
      out.emplace_back(indexed("beta_eta", k), params.beta_eta(k));
  } else {
    out.emplace_back("nu", params.nu);
    out.emplace_back("eta", params.eta);
  }
  if (const auto* q = std::get_if<Eigen::VectorXd>(&params.reward)) {
    for (Eigen::Index j = 0; j < q->size(); ++j) out.emplace_back(indexed("q", j), (*q)(j));
  } else {
    const auto& lin = std::get<LinearRewards>(params.reward);
    out.emplace_back("reward_b0", lin.b0);
    out.emplace_back("reward_b1", lin.b1);
  }
  return out;
}

namespace {

void check_fixed_names(const NamedValues& values, const std::set<std::string>& fixed) {
  for (const auto& name : fixed) {
    const bool known = std::any_of(values.begin(), values.end(),
                                   [&](const auto& nv) { return nv.first == name; });
    if (!known) throw Error(ErrorCode::InvalidInput, "unknown parameter to fix: " + name);
  }
}

Eigen::VectorXd free_vector(const NamedValues& values, const std::set<std::string>& fixed) {
  std::vector<double> v;
  for (const auto& [name, value] : values)
    if (!fixed.contains(name)) v.push_back(value);
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Shared outer loop: the E-step at the current parameters returns the
// log-likelihood and whatever the M-step needs.
template <class Params, class EStep, class MStep>
FitResult<Params> run_em(const Params& init, const EmConfig& config, EStep e_step, MStep m_step) {
  if (config.max_iter < 1) throw Error(ErrorCode::InvalidInput, "max_iter must be at least 1");
  if (!(config.min_var > 0.0)) throw Error(ErrorCode::InvalidInput, "min_var must be positive");
  check_fixed_names(flatten(init), config.fixed);

  FitResult<Params> result;
  result.params = init;
  auto state = e_step(result.params);
  result.loglik_trace.push_back(state.loglik);
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    Params next = m_step(result.params, state, result.warnings);
    const double change = (free_vector(flatten(next), config.fixed) -
                           free_vector(flatten(result.params), config.fixed))
                              .norm();
    auto next_state = e_step(next);
    const double previous_ll = result.loglik_trace.back();
    if (next_state.loglik < previous_ll - config.monotone_tolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "log-likelihood fell from " << previous_ll << " to " << next_state.loglik
          << " at iteration " << iter;
      throw Error(ErrorCode::NonMonotoneLikelihood, msg.str());
    }
    result.params = std::move(next);
    state = std::move(next_state);
    result.loglik_trace.push_back(state.loglik);
    result.iterations = iter;
    const bool small_step = change < config.min_var;
    const bool flat = config.loglik_criterion &&
                      std::abs(state.loglik - previous_ll) < config.loglik_tol;
    if (small_step || flat) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged)
    result.warnings.push_back("stopped at max_iter = " + std::to_string(config.max_iter));
  return result;
}

void add_unique(std::vector<std::string>& warnings, const std::string& w) {
  if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
}

}  // namespace

FitResult<RrdphParams> fit_rrdph(std::span<const JointObservation> observations,
                                 const RrdphParams& init, const EmConfig& config) {
  if (observations.empty()) throw Error(ErrorCode::InvalidInput, "no observations");
  init.model();  // validates
  const int d = static_cast<int>(init.T.rows());
  const auto& fixed = config.fixed;
  const std::string reward_name = init.kind == RewardKind::Bernoulli ? "p" : "q";

  auto e_step = [&](const RrdphParams& p) {
    return aggregate_counts(p.model(), observations, config.cell_cap);
  };
  auto m_step = [&](const RrdphParams& current, const ExpectedCounts& c,
                    std::vector<std::string>& warnings) {
    const auto& N = c.N;
    const int abs = c.absorbing_column();
    RrdphParams next = current;
    const bool bernoulli = current.kind == RewardKind::Bernoulli;
    for (int i = 0; i < d; ++i) {
      // Base-chain moves out of i, whichever copy it was in and whichever copy it enters.
      Eigen::VectorXd moves = Eigen::VectorXd::Zero(d);
      for (int k = 0; k < d; ++k) {
        moves(k) = N(i, k) + N(i + d, k);
        if (bernoulli) moves(k) += N(i, k + d) + N(i + d, k + d);
      }
      const double exits = N(i, abs) + N(i + d, abs);
      double fixed_mass = 0.0;
      double free_moves = 0.0;
      for (int k = 0; k < d; ++k) {
        if (fixed.contains(indexed("T", i, k)))
          fixed_mass += current.T(i, k);
        else
          free_moves += moves(k);
      }
      const double denom = free_moves + exits;
      if (!(denom > 0.0)) {
        add_unique(warnings, "row " + std::to_string(i) + " of T has no expected visits and was retained");
        continue;
      }
      const double mass = std::max(0.0, 1.0 - fixed_mass);
      for (int k = 0; k < d; ++k)
        if (!fixed.contains(indexed("T", i, k))) next.T(i, k) = mass * moves(k) / denom;
    }
    for (int k = 0; k < d; ++k) {
      if (fixed.contains(indexed(reward_name, k))) continue;
      double hit = 0.0;
      double miss = 0.0;
      if (bernoulli) {
        hit = N.col(k + d).sum() + c.initial(k + d);
        miss = N.col(k).sum() + c.initial(k);
      } else {
        const double opportunities = N.row(k).sum() + N.row(k + d).sum();
        miss = N(k, k + d) + N(k + d, k + d);
        hit = opportunities - miss;
      }
      const double total = hit + miss;
      if (!(total > 0.0)) {
        add_unique(warnings, indexed(reward_name, k) + " has no expected visits and was retained");
        continue;
      }
      const double value = hit / total;
      next.rewards(k) = bernoulli ? value : std::clamp(value, 1e-300, 1.0);
    }
    return next;
  };
  return run_em(init, config, e_step, m_step);
}

IemParams default_iem_init(std::span<const JointObservation> observations, int d,
                           Eigen::Index coefficients, bool linear_rewards) {
  if (d < 2) throw Error(ErrorCode::DimensionTooSmall, "IEM needs d >= 2");
  IemParams p;
  p.d = d;
  if (coefficients > 0) {
    p.beta_nu = Eigen::VectorXd::Zero(coefficients);
    p.beta_eta = Eigen::VectorXd::Zero(coefficients);
  }
  double psi = 0.0;
  double tau = 0.0;
  for (const auto& y : observations) {
    psi += y.y1;
    tau += y.y2;
  }
  // Mean reward per visit is (1-q)/q, so psi-bar / tau-bar estimates it.
  const double q0 = tau + psi > 0.0 ? std::clamp(tau / (tau + psi), 1e-3, 1.0) : 0.5;
  if (linear_rewards)
    p.reward = LinearRewards{logit(std::clamp(q0, 1e-6, 1.0 - 1e-6)), 0.0};
  else
    p.reward = Eigen::VectorXd::Constant(d, q0);
  return p;
}

namespace {

struct IemGroups {
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<std::vector<JointObservation>> observations;
};

IemGroups group_observations(std::span<const JointObservation> observations,
                             const Eigen::MatrixXd& X, bool covariates) {
  IemGroups g;
  if (!covariates) {
    g.rows.emplace_back();
    g.observations.emplace_back(observations.begin(), observations.end());
    return g;
  }
  if (X.rows() != static_cast<Eigen::Index>(observations.size()))
    throw Error(ErrorCode::DimensionMismatch, "design rows differ from the number of observations");
  const auto distinct = distinct_rows(X);
  g.rows = distinct.rows;
  g.observations.resize(distinct.rows.size());
  for (std::size_t i = 0; i < observations.size(); ++i)
    g.observations[distinct.index_of_subject[i]].push_back(observations[i]);
  return g;
}

ExpandedModel group_model(const IemParams& p, const Eigen::RowVectorXd& row) {
  IemSpec spec;
  spec.d = p.d;
  spec.nu = p.has_covariates() ? invlogit(row.dot(p.beta_nu)) : p.nu;
  spec.eta = p.has_covariates() ? invlogit(row.dot(p.beta_eta)) : p.eta;
  spec.q = reward_probs(p.reward, p.d).values();
  return iem_model(spec);
}

struct IemState {
  std::vector<IemCounts> per_group;
  double loglik = 0.0;
};

void check_iem_params(const IemParams& p, Eigen::Index design_cols) {
  if (p.d < 2) throw Error(ErrorCode::DimensionTooSmall, "IEM needs d >= 2");
  if (p.has_covariates()) {
    if (p.beta_nu.size() != design_cols || p.beta_eta.size() != design_cols)
      throw Error(ErrorCode::DimensionMismatch, "coefficient length differs from design columns");
  } else if (design_cols != 0) {
    throw Error(ErrorCode::DimensionMismatch, "design given but no regression coefficients");
  }
  if (const auto* q = std::get_if<Eigen::VectorXd>(&p.reward); q && q->size() != p.d)
    throw Error(ErrorCode::DimensionMismatch, "q must have one entry per level");
}

}  // namespace

FitResult<IemParams> fit_iem(std::span<const JointObservation> observations,
                             const Eigen::MatrixXd& X, const IemParams& init,
                             const EmConfig& config) {
  if (observations.empty()) throw Error(ErrorCode::InvalidInput, "no observations");
  check_iem_params(init, X.cols());
  if (init.has_covariates()) validate_regression_design(X, init.beta_nu.size());
  const auto groups = group_observations(observations, X, init.has_covariates());
  const auto& fixed = config.fixed;

  auto e_step = [&](const IemParams& p) {
    IemState s;
    for (std::size_t g = 0; g < groups.rows.size(); ++g) {
      const auto counts =
          aggregate_counts(group_model(p, groups.rows[g]), groups.observations[g], config.cell_cap);
      s.per_group.push_back(group_iem(counts));
      s.loglik += counts.loglik;
    }
    return s;
  };

  RegressionMask mask;
  for (Eigen::Index k = 0; k < init.beta_nu.size(); ++k) {
    mask.beta_nu.push_back(fixed.contains(indexed("beta_nu", k)));
    mask.beta_eta.push_back(fixed.contains(indexed("beta_eta", k)));
  }
  for (int j = 0; j < init.d; ++j) mask.q.push_back(fixed.contains(indexed("q", j)));
  mask.reward_b0 = fixed.contains("reward_b0");
  mask.reward_b1 = fixed.contains("reward_b1");

  auto m_step = [&](const IemParams& current, const IemState& s,
                    std::vector<std::string>& warnings) {
    IemParams next = current;
    if (current.has_covariates()) {
      Eigen::MatrixXd design(static_cast<Eigen::Index>(groups.rows.size()), X.cols());
      for (std::size_t g = 0; g < groups.rows.size(); ++g) design.row(g) = groups.rows[g];
      const auto update = m_step_regression(
          s.per_group, design, {current.beta_nu, current.beta_eta, current.reward}, mask);
      next.beta_nu = update.coef.beta_nu;
      next.beta_eta = update.coef.beta_eta;
      next.reward = update.coef.reward;
      for (const auto& w : update.warnings) add_unique(warnings, w);
      return next;
    }
    IemCounts pooled;
    for (const auto& c : s.per_group) pooled += c;
    // nu and eta separate in the complete-data likelihood, so each keeps its
    // own closed form when the other is held fixed.
    const auto [nu, eta] = m_step_iem(pooled);
    if (!fixed.contains("nu")) next.nu = nu;
    if (!fixed.contains("eta")) next.eta = eta;
    if (const auto* q = std::get_if<Eigen::VectorXd>(&current.reward)) {
      auto update = m_step_rewards(pooled, *q);
      for (int j = 0; j < current.d; ++j)
        if (mask.q[j]) update.q(j) = (*q)(j);
      for (int j : update.retained)
        add_unique(warnings, indexed("q", j) + " has no expected visits and was retained");
      next.reward = update.q;
    } else {
      // Linear rewards without covariates still need the logistic fit.
      Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
      const IemCounts single[] = {pooled};
      RegressionMask reward_mask;
      reward_mask.beta_nu = {true};
      reward_mask.beta_eta = {true};
      reward_mask.reward_b0 = mask.reward_b0;
      reward_mask.reward_b1 = mask.reward_b1;
      const auto update = m_step_regression(
          single, one,
          {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), current.reward}, reward_mask);
      next.reward = update.coef.reward;
      for (const auto& w : update.warnings) add_unique(warnings, w);
    }
    return next;
  };
  return run_em(init, config, e_step, m_step);
}

std::vector<IemParams> iem_start_candidates(std::span<const JointObservation> observations, int d,
                                            Eigen::Index coefficients, bool linear_rewards) {
  const IemParams base = default_iem_init(observations, d, coefficients, linear_rewards);
  std::vector<IemParams> starts{base};
  const double centre = (d + 1) / 2.0;
  for (double slope : {-1.0, 1.0}) {
    IemParams p = base;
    if (auto* lin = std::get_if<LinearRewards>(&p.reward)) {
      lin->b1 = slope;
      lin->b0 -= slope * centre;
    } else {
      auto& q = std::get<Eigen::VectorXd>(p.reward);
      const double mid = logit(std::clamp(q(0), 1e-6, 1.0 - 1e-6));
      for (int j = 0; j < d; ++j) q(j) = invlogit(mid + slope * (j + 1 - centre));
    }
    starts.push_back(std::move(p));
  }
  return starts;
}

FitResult<IemParams> fit_iem_multistart(std::span<const JointObservation> observations,
                                        const Eigen::MatrixXd& X,
                                        std::span<const IemParams> starts,
                                        const EmConfig& config, int burn_in) {
  if (starts.empty()) throw Error(ErrorCode::InvalidInput, "no starting points");
  if (burn_in < 1) throw Error(ErrorCode::InvalidInput, "burn_in must be at least 1");
  EmConfig short_run = config;
  short_run.max_iter = std::min(burn_in, config.max_iter);
  std::optional<FitResult<IemParams>> best;
  std::size_t chosen = 0;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    auto fit = fit_iem(observations, X, starts[s], short_run);
    if (!best || fit.loglik_trace.back() > best->loglik_trace.back()) {
      best = std::move(fit);
      chosen = s;
    }
  }
  FitResult<IemParams> result = std::move(*best);
  std::erase_if(result.warnings,
                [](const std::string& w) { return w.rfind("stopped at max_iter", 0) == 0; });
  result.warnings.push_back("started from candidate " + std::to_string(chosen) + " of " +
                            std::to_string(starts.size()));
  if (result.converged || result.iterations >= config.max_iter) {
    if (!result.converged)
      result.warnings.push_back("stopped at max_iter = " + std::to_string(config.max_iter));
    return result;
  }
  EmConfig rest = config;
  rest.max_iter = config.max_iter - result.iterations;
  auto more = fit_iem(observations, X, result.params, rest);
  result.params = std::move(more.params);
  result.loglik_trace.insert(result.loglik_trace.end(), more.loglik_trace.begin() + 1,
                             more.loglik_trace.end());
  result.iterations += more.iterations;
  result.converged = more.converged;
  for (auto& w : more.warnings) add_unique(result.warnings, w);
  return result;
}

double iem_loglik(std::span<const JointObservation> observations, const Eigen::MatrixXd& X,
                  const IemParams& params, std::size_t cell_cap) {
  check_iem_params(params, X.cols());
  const auto groups = group_observations(observations, X, params.has_covariates());
  double ll = 0.0;
  for (std::size_t g = 0; g < groups.rows.size(); ++g) {
    const auto& obs = groups.observations[g];
    const auto tables = lattice_forward(group_model(params, groups.rows[g]), bounds_of(obs),
                                        cell_cap, LatticeParts::ForwardOnly);
    for (std::size_t o = 0; o < obs.size(); ++o) {
      const double L = tables.likelihood_forward(obs[o]);
      check_likelihood(L, o, obs[o]);
      ll += std::log(L);
    }
  }
  return ll;
}

}  // namespace rrph
