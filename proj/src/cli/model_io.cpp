#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rrph/cli.hpp"
#include "rrph/error.hpp"

namespace rrph::cli {

namespace {

using nlohmann::json;

const json& field(const json& j, const std::string& name) {
  if (!j.contains(name)) throw InputError("missing field '" + name + "'");
  return j.at(name);
}

double number(const json& j, const std::string& name) {
  if (!j.is_number()) throw InputError("field '" + name + "' must be a number");
  return j.get<double>();
}

Eigen::VectorXd vector_field(const json& j, const std::string& name) {
  if (!j.is_array()) throw InputError("field '" + name + "' must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = number(j[i], name + "[" + std::to_string(i) + "]");
  return v;
}

Eigen::MatrixXd matrix_field(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) throw InputError("field '" + name + "' must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string row_name = name + "[" + std::to_string(r) + "]";
    const auto v = vector_field(j[r], row_name);
    if (v.size() != cols) throw InputError("field '" + row_name + "' has the wrong length");
    m.row(r) = v.transpose();
  }
  return m;
}

int int_field(const json& j, const std::string& name) {
  if (!j.is_number_integer()) throw InputError("field '" + name + "' must be an integer");
  return j.get<int>();
}

// Runs a library constructor and reports its validation failure against `name`.
template <class F>
auto validated(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw InputError("field '" + name + "': " + e.what());
  }
}

RewardMode reward_field(const json& j, int d) {
  if (j.contains("q") && !j.contains("reward")) return vector_field(j.at("q"), "q");
  const json& r = field(j, "reward");
  const std::string mode = field(r, "mode").get<std::string>();
  if (mode == "linear") return LinearRewards{number(field(r, "b0"), "reward.b0"),
                                             number(field(r, "b1"), "reward.b1")};
  if (mode == "free") {
    auto q = vector_field(field(r, "q"), "reward.q");
    if (q.size() != d) throw InputError("field 'reward.q' must have d entries");
    return q;
  }
  throw InputError("field 'reward.mode' must be 'linear' or 'free'");
}

std::optional<Eigen::VectorXd> optional_pi(const json& j) {
  if (!j.contains("pi")) return std::nullopt;
  return vector_field(j.at("pi"), "pi");
}

}  // namespace

ModelSpec parse_model(const json& j) {
  if (!j.is_object()) throw InputError("model file must hold a JSON object");
  ModelSpec spec;
  spec.type = field(j, "type").get<std::string>();

  if (spec.type == "dph" || spec.type == "rrdph_bernoulli" || spec.type == "rrdph_geometric") {
    const auto pi = vector_field(field(j, "pi"), "pi");
    const auto T = matrix_field(field(j, "T"), "T");
    spec.dph = validated("T", [&] { return validate_dph(pi, T); });
    if (spec.type == "dph") {
      if (j.contains("rewards")) {
        const json& rs = j.at("rewards");
        if (!rs.is_array()) throw InputError("field 'rewards' must be an array");
        for (std::size_t i = 0; i < rs.size(); ++i) {
          const std::string name = "rewards[" + std::to_string(i) + "]";
          const json& r = rs[i];
          StateReward sr;
          if (r.is_number()) {
            sr = {StateReward::Kind::Fixed, r.get<double>()};
          } else if (r.contains("fixed")) {
            sr = {StateReward::Kind::Fixed, number(r.at("fixed"), name + ".fixed")};
          } else if (r.contains("bernoulli")) {
            sr = {StateReward::Kind::Bernoulli, number(r.at("bernoulli"), name + ".bernoulli")};
          } else if (r.contains("geometric")) {
            sr = {StateReward::Kind::Geometric, number(r.at("geometric"), name + ".geometric")};
          } else {
            throw InputError("field '" + name + "' needs one of fixed, bernoulli, geometric");
          }
          spec.state_rewards.push_back(sr);
        }
        // Validates kinds, ranges and length.
        validated("rewards", [&] { return reward_mean(*spec.dph, spec.state_rewards); });
      }
      return spec;
    }
    const bool bern = spec.type == "rrdph_bernoulli";
    const std::string rname = bern ? "p" : "q";
    const auto values = vector_field(field(j, rname), rname);
    const auto kind = bern ? RewardKind::Bernoulli : RewardKind::Geometric;
    spec.expanded = validated(rname, [&] { return expand(*spec.dph, RewardProbs(values, kind)); });
    return spec;
  }

  if (spec.type == "iem") {
    IemSpec s;
    s.d = int_field(field(j, "d"), "d");
    s.nu = number(field(j, "nu"), "nu");
    s.eta = number(field(j, "eta"), "eta");
    const auto mode = reward_field(j, s.d);
    s.q = validated("q", [&] { return reward_probs(mode, s.d).values(); });
    s.pi = optional_pi(j);
    spec.expanded = validated("iem", [&] { return iem_model(s); });
    spec.iem = s;
    return spec;
  }

  if (spec.type == "iem_regression") {
    RegressionIemSpec s;
    s.d = int_field(field(j, "d"), "d");
    s.beta_nu = vector_field(field(j, "beta_nu"), "beta_nu");
    s.beta_eta = vector_field(field(j, "beta_eta"), "beta_eta");
    if (s.beta_nu.size() < 1 || s.beta_eta.size() != s.beta_nu.size())
      throw InputError("fields 'beta_nu' and 'beta_eta' must be non-empty and of equal length");
    s.reward = reward_field(j, s.d);
    validated("reward", [&] { return reward_probs(s.reward, s.d); });
    s.pi = optional_pi(j);
    const auto r = s.beta_nu.size() - 1;
    if (j.contains("covariate_pool")) {
      const json& pool = j.at("covariate_pool");
      if (!pool.is_array() || pool.empty())
        throw InputError("field 'covariate_pool' must be a non-empty array");
      if (pool[0].is_array()) {
        for (std::size_t c = 0; c < pool.size(); ++c) {
          const auto v = vector_field(pool[c], "covariate_pool[" + std::to_string(c) + "]");
          spec.covariate_pool.emplace_back(v.data(), v.data() + v.size());
        }
      } else {
        const auto v = vector_field(pool, "covariate_pool");
        spec.covariate_pool.emplace_back(v.data(), v.data() + v.size());
      }
      if (static_cast<Eigen::Index>(spec.covariate_pool.size()) != r)
        throw InputError("field 'covariate_pool' needs one pool per covariate");
    } else if (j.contains("covariates")) {
      const auto C = matrix_field(j.at("covariates"), "covariates");
      if (C.cols() != r) throw InputError("field 'covariates' needs one column per covariate");
      s.X.resize(C.rows(), r + 1);
      s.X.col(0).setOnes();
      s.X.rightCols(r) = C;
    } else {
      throw InputError("iem_regression needs 'covariate_pool' or 'covariates'");
    }
    spec.regression = s;
    return spec;
  }

  throw InputError("unknown model type '" + spec.type + "'");
}

ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = text.substr(0, std::min<std::size_t>(e.byte, text.size()));
    const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
    throw InputError(path + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
  }
  try {
    return parse_model(j);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_count(const std::string& s, int line, const std::string& column) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || v < 0 || v > 1'000'000'000)
    throw InputError("line " + std::to_string(line) + ": column '" + column +
                     "' must be a nonnegative integer, got '" + s + "'");
  return static_cast<int>(v);
}

double parse_real(const std::string& s, int line, const std::string& column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(v))
    throw InputError("line " + std::to_string(line) + ": column '" + column +
                     "' must be a finite number, got '" + s + "'");
  return v;
}

}  // namespace

ObservationTable read_observations(std::istream& in) {
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv(line);
    break;
  }
  if (header.size() < 3 || header[0] != "id" || header[1] != "y1" || header[2] != "y2")
    throw InputError("line " + std::to_string(lineno) + ": header must start with id,y1,y2");

  ObservationTable table;
  table.covariate_names.assign(header.begin() + 3, header.end());
  std::vector<std::vector<double>> cov;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw InputError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " columns, found " +
                       std::to_string(cells.size()));
    table.observations.push_back(
        {parse_count(cells[1], lineno, "y1"), parse_count(cells[2], lineno, "y2")});
    std::vector<double> row;
    for (std::size_t c = 3; c < cells.size(); ++c) row.push_back(parse_real(cells[c], lineno, header[c]));
    cov.push_back(std::move(row));
  }
  if (table.observations.empty()) throw InputError("no observation rows");
  table.covariates.resize(static_cast<Eigen::Index>(cov.size()),
                          static_cast<Eigen::Index>(table.covariate_names.size()));
  for (std::size_t i = 0; i < cov.size(); ++i)
    for (std::size_t c = 0; c < cov[i].size(); ++c)
      table.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = cov[i][c];
  return table;
}

ObservationTable load_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file '" + path + "'");
  try {
    return read_observations(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_observations(std::ostream& out, const Dataset& data) {
  const auto r = data.X.cols() > 0 ? data.X.cols() - 1 : 0;
  out << "id,y1,y2";
  for (Eigen::Index c = 1; c <= r; ++c) out << ",x" << c;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    out << i + 1 << ',' << data.observations[i].y1 << ',' << data.observations[i].y2;
    for (Eigen::Index c = 1; c <= r; ++c) out << ',' << data.X(static_cast<Eigen::Index>(i), c);
    out << '\n';
  }
}

}  // namespace rrph::cli
