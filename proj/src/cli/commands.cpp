#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <regex>
#include <thread>

#include "rrph/cli.hpp"
#include "rrph/error.hpp"
#include "rrph/lattice.hpp"

namespace rrph::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

// Output goes to the --out file when one is named, else to the given stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw InputError("cannot write '" + path + "'");
      stream_ = &file_;
    }
    stream_->precision(17);
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

// Common error policy: input problems exit 2, broken invariants exit 3.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    body();
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::NonMonotoneLikelihood ? kExitInternal : kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

std::optional<std::vector<int>> indices_of(const std::string& name, const std::string& prefix,
                                           int count) {
  static const std::regex index_re(R"(\[(\d+)\])");
  if (name.rfind(prefix + "[", 0) != 0) return std::nullopt;
  std::vector<int> idx;
  std::string rest = name.substr(prefix.size());
  std::smatch m;
  while (std::regex_search(rest, m, index_re) && m.position(0) == 0) {
    idx.push_back(std::stoi(m[1]));
    rest = m.suffix();
  }
  if (!rest.empty() || static_cast<int>(idx.size()) != count) return std::nullopt;
  return idx;
}

void assign(IemParams& p, const std::string& name, double value) {
  auto check = [&](Eigen::Index i, Eigen::Index size) {
    if (i < 0 || i >= size) throw InputError("parameter index out of range: " + name);
  };
  if (name == "nu" && !p.has_covariates()) {
    p.nu = value;
  } else if (name == "eta" && !p.has_covariates()) {
    p.eta = value;
  } else if (auto k = indices_of(name, "beta_nu", 1)) {
    check((*k)[0], p.beta_nu.size());
    p.beta_nu((*k)[0]) = value;
  } else if (auto k2 = indices_of(name, "beta_eta", 1)) {
    check((*k2)[0], p.beta_eta.size());
    p.beta_eta((*k2)[0]) = value;
  } else if (auto* lin = std::get_if<LinearRewards>(&p.reward);
             lin && (name == "reward_b0" || name == "reward_b1")) {
    (name == "reward_b0" ? lin->b0 : lin->b1) = value;
  } else if (auto* q = std::get_if<Eigen::VectorXd>(&p.reward)) {
    const auto j = indices_of(name, "q", 1);
    if (!j) throw InputError("unknown parameter: " + name);
    check((*j)[0], q->size());
    (*q)((*j)[0]) = value;
  } else {
    throw InputError("unknown parameter: " + name);
  }
}

void assign(RrdphParams& p, const std::string& name, double value) {
  const auto d = p.T.rows();
  if (auto ij = indices_of(name, "T", 2)) {
    if ((*ij)[0] >= d || (*ij)[1] >= d) throw InputError("parameter index out of range: " + name);
    p.T((*ij)[0], (*ij)[1]) = value;
    return;
  }
  const std::string r = p.kind == RewardKind::Bernoulli ? "p" : "q";
  if (auto i = indices_of(name, r, 1)) {
    if ((*i)[0] >= d) throw InputError("parameter index out of range: " + name);
    p.rewards((*i)[0]) = value;
    return;
  }
  throw InputError("unknown parameter: " + name);
}

template <class Params>
ordered_json report(const std::string& model, const FitResult<Params>& fit) {
  ordered_json j;
  j["model"] = model;
  ordered_json est = ordered_json::object();
  for (const auto& [name, value] : flatten(fit.params)) est[name] = value;
  j["estimates"] = est;
  j["loglik"] = fit.loglik_trace.back();
  j["loglik_trace"] = fit.loglik_trace;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["warnings"] = fit.warnings;
  return j;
}

EmConfig em_config(int max_iter, double min_var) {
  if (max_iter < 1) throw InputError("--max-iter must be at least 1");
  if (!(min_var > 0.0)) throw InputError("--min-var must be positive");
  EmConfig c;
  c.max_iter = max_iter;
  c.min_var = min_var;
  return c;
}

const ExpandedModel& expanded_of(const ModelSpec& spec) {
  if (spec.expanded) return *spec.expanded;
  throw InputError("model type '" + spec.type + "' has no single joint distribution here");
}

}  // namespace

std::vector<std::pair<std::string, double>> parse_assignments(const std::vector<std::string>& fix) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& f : fix) {
    const auto eq = f.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("--fix expects name=value, got '" + f + "'");
    std::size_t used = 0;
    double v = 0.0;
    const std::string rhs = f.substr(eq + 1);
    try {
      v = std::stod(rhs, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != rhs.size()) throw InputError("--fix value is not a number: '" + f + "'");
    out.emplace_back(f.substr(0, eq), v);
  }
  return out;
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.n < 1) throw InputError("--n must be at least 1");
    const auto spec = load_model(o.model_file);
    SimConfig cfg;
    cfg.seed = o.seed;
    cfg.n = o.n;
    Dataset data;
    if (spec.regression) {
      RegressionIemSpec s = *spec.regression;
      if (s.X.rows() == 0) s.X = sample_design(spec.covariate_pool, o.n, o.seed);
      data = simulate_iem_dataset(s, cfg);
    } else if (spec.expanded) {
      data.observations = simulate_expanded(*spec.expanded, cfg);
    } else {
      // Plain DPH: no rewards, y2 is the absorption time.
      const auto e = expand_geometric(*spec.dph, RewardProbs(Eigen::VectorXd::Ones(spec.dph->dim()),
                                                             RewardKind::Geometric));
      data.observations = simulate_expanded(e, cfg);
    }
    Sink sink(o.out, out);
    write_observations(*sink, data);
  });
}

int cmd_fit(const FitOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto table = load_observations(o.data_file);
    EmConfig config = em_config(o.max_iter, o.min_var);
    const auto fixes = parse_assignments(o.fix);
    for (const auto& [name, v] : fixes) config.fixed.insert(name);
    std::optional<ModelSpec> init_spec;
    if (!o.init_file.empty()) init_spec = load_model(o.init_file);

    if (o.model == "iem") {
      if (o.rewards != "free" && o.rewards != "linear")
        throw InputError("--rewards must be free or linear");
      Eigen::MatrixXd X;
      if (!o.covariates.empty()) {
        X.resize(table.covariates.rows(), static_cast<Eigen::Index>(o.covariates.size()) + 1);
        X.col(0).setOnes();
        for (std::size_t c = 0; c < o.covariates.size(); ++c) {
          const auto it = std::find(table.covariate_names.begin(), table.covariate_names.end(),
                                    o.covariates[c]);
          if (it == table.covariate_names.end())
            throw InputError("no covariate column named '" + o.covariates[c] + "'");
          X.col(static_cast<Eigen::Index>(c) + 1) =
              table.covariates.col(it - table.covariate_names.begin());
        }
      }
      IemParams init;
      if (init_spec) {
        if (init_spec->iem && X.cols() == 0) {
          init.d = init_spec->iem->d;
          init.nu = init_spec->iem->nu;
          init.eta = init_spec->iem->eta;
          init.reward = init_spec->iem->q;
          if (o.rewards == "linear")
            init.reward = default_iem_init(table.observations, init.d, 0, true).reward;
        } else if (init_spec->regression && X.cols() > 0) {
          const auto& r = *init_spec->regression;
          init.d = r.d;
          init.beta_nu = r.beta_nu;
          init.beta_eta = r.beta_eta;
          init.reward = r.reward;
        } else {
          throw InputError("--init must be an iem model without covariates or iem_regression with them");
        }
        if (o.d != 0 && o.d != init.d) throw InputError("--d disagrees with the --init model");
      }
      std::vector<IemParams> starts;
      if (init_spec) {
        starts.push_back(init);
      } else {
        if (o.d < 2) throw InputError("--d must be at least 2 for the IEM");
        starts = iem_start_candidates(table.observations, o.d, X.cols(), o.rewards == "linear");
      }
      for (auto& s : starts)
        for (const auto& [name, v] : fixes) assign(s, name, v);
      const auto fit = starts.size() == 1
                           ? fit_iem(table.observations, X, starts[0], config)
                           : fit_iem_multistart(table.observations, X, starts, config);
      Sink sink(o.out, out);
      *sink << std::setw(2) << report(X.cols() > 0 ? "iem_regression" : "iem", fit) << '\n';
      return;
    }

    if (o.model != "bernoulli" && o.model != "geometric")
      throw InputError("--model must be iem, bernoulli or geometric");
    const auto kind = o.model == "bernoulli" ? RewardKind::Bernoulli : RewardKind::Geometric;
    RrdphParams init;
    init.kind = kind;
    if (init_spec) {
      if (!init_spec->expanded || init_spec->type.rfind("rrdph_", 0) != 0 ||
          init_spec->expanded->kind() != kind)
        throw InputError("--init must be an rrdph_" + o.model + " model");
      init.pi = init_spec->dph->pi();
      init.T = init_spec->dph->T();
      init.rewards = init_spec->expanded->rewards().values();
    } else {
      if (o.d < 1) throw InputError("--d is required without --init");
      // Start in the first state, spread each row evenly over all moves and the exit.
      init.pi = Eigen::VectorXd::Zero(o.d);
      init.pi(0) = 1.0;
      init.T = Eigen::MatrixXd::Constant(o.d, o.d, 1.0 / (o.d + 1));
      init.rewards = Eigen::VectorXd::Constant(o.d, 0.5);
    }
    for (const auto& [name, v] : fixes) assign(init, name, v);
    const auto fit = fit_rrdph(table.observations, init, config);
    Sink sink(o.out, out);
    *sink << std::setw(2) << report("rrdph_" + o.model, fit) << '\n';
  });
}

RewardComparison compare_rewards(const ModelSpec& spec, int max_reward) {
  if (spec.type != "dph" || spec.state_rewards.empty())
    throw InputError("comparison needs a dph model with a 'rewards' list");
  if (max_reward < 0) throw InputError("reward bound must be nonnegative");
  RewardComparison c;
  const auto fixed = mean_fixed_rewards(spec.state_rewards);
  c.random = reward_pmf(*spec.dph, spec.state_rewards, max_reward);
  c.fixed = reward_pmf(*spec.dph, fixed, max_reward);
  c.mean_random = reward_mean(*spec.dph, spec.state_rewards);
  c.mean_fixed = reward_mean(*spec.dph, fixed);
  return c;
}

int cmd_pmf(const PmfOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.y1_max < 0 || o.y2_max < 0) throw InputError("bounds must be nonnegative");
    const auto spec = load_model(o.model_file);
    if (o.compare_fixed) {
      const auto c = compare_rewards(spec, o.y1_max);
      Sink sink(o.out, out);
      *sink << "psi,random,fixed\n";
      for (int k = 0; k <= o.y1_max; ++k) *sink << k << ',' << c.random[k] << ',' << c.fixed[k] << '\n';
      err << "mean_random=" << std::setprecision(17) << c.mean_random
          << " mean_fixed=" << c.mean_fixed << '\n';
      return;
    }
    const auto tables = lattice_forward(expanded_of(spec), {o.y1_max, o.y2_max});
    Sink sink(o.out, out);
    *sink << "y1,y2,probability\n";
    for (int y1 = 0; y1 <= o.y1_max; ++y1)
      for (int y2 = 0; y2 <= o.y2_max; ++y2)
        *sink << y1 << ',' << y2 << ',' << tables.likelihood({y1, y2}) << '\n';
  });
}

int cmd_compare(const PmfOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto spec = load_model(o.model_file);
    const auto c = compare_rewards(spec, o.y1_max);
    ordered_json j;
    j["mean_random"] = c.mean_random;
    j["mean_fixed"] = c.mean_fixed;
    j["psi"] = ordered_json::array();
    for (int k = 0; k <= o.y1_max; ++k) j["psi"].push_back(k);
    j["random"] = c.random;
    j["fixed"] = c.fixed;
    Sink sink(o.out, out);
    *sink << std::setw(2) << j << '\n';
  });
}

int cmd_pgf(const PgfOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto spec = load_model(o.model_file);
    const auto& e = expanded_of(spec);
    std::vector<double> grid = o.grid;
    if (grid.empty())
      for (int k = 1; k <= 10; ++k) grid.push_back(k / 10.0);
    for (double g : grid)
      if (!(g >= 0.0 && g <= 1.0)) throw InputError("grid values must lie in [0, 1]");
    Sink sink(o.out, out);
    *sink << "theta1,theta2,compact,expanded\n";
    for (double t1 : grid)
      for (double t2 : grid)
        *sink << t1 << ',' << t2 << ',' << pgf_compact(e.base(), e.rewards(), t1, t2) << ','
              << pgf_expanded(e, t1, t2) << '\n';
  });
}

int cmd_replicate(const ReplicateOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto names = study_names();
    if (std::find(names.begin(), names.end(), o.study) == names.end())
      throw InputError("unknown study '" + o.study + "'");
    if (o.replicates < 1) throw InputError("--replicates must be at least 1");
    if (o.n < 1) throw InputError("--n must be at least 1");
    const EmConfig config = em_config(o.max_iter, o.min_var);

    std::vector<StudyRow> rows(o.replicates);
    std::vector<std::exception_ptr> failures(o.replicates);
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int r = next++; r < o.replicates; r = next++) {
        try {
          rows[r] = run_replicate(o.study, r, o.n, o.seed, config);
        } catch (...) {
          failures[r] = std::current_exception();
        }
      }
    };
    const unsigned threads =
        std::clamp<unsigned>(std::thread::hardware_concurrency(), 1, static_cast<unsigned>(o.replicates));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);

    Sink sink(o.out, out);
    *sink << "replicate";
    for (const auto& [name, v] : rows[0].estimates) *sink << ',' << name;
    *sink << ",loglik,iterations,converged\n";
    for (const auto& row : rows) {
      *sink << row.replicate;
      for (const auto& [name, v] : row.estimates) *sink << ',' << v;
      *sink << ',' << row.loglik_trace.back() << ',' << row.iterations << ','
            << (row.converged ? 1 : 0) << '\n';
    }
  });
}

}  // namespace rrph::cli
