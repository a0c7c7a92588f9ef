#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "rrph/em.hpp"
#include "rrph/iem.hpp"
#include "rrph/rrdph.hpp"
#include "rrph/simulate.hpp"

namespace rrph::cli {

// User-facing input problem; maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInternal = 3;

// A parsed model file. `type` is one of dph, rrdph_bernoulli,
// rrdph_geometric, iem, iem_regression; exactly the members that type needs
// are set.
struct ModelSpec {
  std::string type;
  std::optional<DphModel> dph;
  std::vector<StateReward> state_rewards;  // dph only, optional
  std::optional<ExpandedModel> expanded;   // rrdph_* and iem
  std::optional<IemSpec> iem;
  std::optional<RegressionIemSpec> regression;  // X may be empty when a pool is given
  std::vector<std::vector<double>> covariate_pool;
};

ModelSpec parse_model(const nlohmann::json& j);
ModelSpec load_model(const std::string& path);

// Observation table `id,y1,y2[,x...]`. y1 is the accumulated reward; y2 is
// the absorption time for geometric and IEM models and the number of
// unrewarded visits for Bernoulli models.
struct ObservationTable {
  std::vector<JointObservation> observations;
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates;  // n x (number of covariate columns), no intercept
};

ObservationTable read_observations(std::istream& in);
ObservationTable load_observations(const std::string& path);
void write_observations(std::ostream& out, const Dataset& data);

struct SimulateOptions {
  std::string model_file;
  int n = 1000;
  std::uint64_t seed = 1;
  std::string out;  // empty means stdout
};

struct FitOptions {
  std::string data_file;
  std::string model = "iem";  // iem | bernoulli | geometric
  int d = 0;                  // required for iem unless --init is given
  std::string rewards = "free";
  std::vector<std::string> covariates;
  int max_iter = 500;
  double min_var = 1e-6;
  std::vector<std::string> fix;  // name=value
  std::string init_file;         // model file with starting values
  std::string out;
};

struct PmfOptions {
  std::string model_file;
  int y1_max = 10;
  int y2_max = 10;
  bool compare_fixed = false;  // dph models with per-state rewards
  std::string out;
};

struct PgfOptions {
  std::string model_file;
  std::vector<double> grid;  // defaults to 0.1, ..., 0.9, 1
  std::string out;
};

struct ReplicateOptions {
  std::string study;
  int replicates = 50;
  int n = 1000;
  std::uint64_t seed = 1;
  int max_iter = 500;
  double min_var = 1e-6;
  std::string out;
};

// Each command writes its result to `out` and diagnostics to `err` and
// returns the process exit code.
int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err);
int cmd_fit(const FitOptions& o, std::ostream& out, std::ostream& err);
int cmd_pmf(const PmfOptions& o, std::ostream& out, std::ostream& err);
int cmd_compare(const PmfOptions& o, std::ostream& out, std::ostream& err);
int cmd_pgf(const PgfOptions& o, std::ostream& out, std::ostream& err);
int cmd_replicate(const ReplicateOptions& o, std::ostream& out, std::ostream& err);

// Random-reward against fixed-reward distribution of the accumulated reward.
struct RewardComparison {
  std::vector<double> random;
  std::vector<double> fixed;
  double mean_random = 0.0;
  double mean_fixed = 0.0;
};

RewardComparison compare_rewards(const ModelSpec& spec, int max_reward);

// Simulation studies

struct StudyRow {
  int replicate = 0;
  NamedValues estimates;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

std::vector<std::string> study_names();
// Truth in the same naming as the estimates of the study.
NamedValues study_truth(const std::string& study);
// Simulates and fits one replicate; seeds derive from (seed, replicate).
StudyRow run_replicate(const std::string& study, int replicate, int n, std::uint64_t seed,
                       const EmConfig& config = {});

// Applies "name=value" pairs.
std::vector<std::pair<std::string, double>> parse_assignments(const std::vector<std::string>& fix);

}  // namespace rrph::cli
