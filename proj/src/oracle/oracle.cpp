#include "rrph/oracle.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "rrph/error.hpp"
#include "rrph/simulate.hpp"

namespace rrph::oracle {

double EnumeratedPmf::at(JointObservation y) const {
  const auto it = cells.find(y);
  return it == cells.end() ? 0.0 : it->second;
}

double EnumeratedPmf::total() const {
  double s = 0.0;
  for (const auto& [y, p] : cells) s += p;
  return s;
}

EnumeratedPmf enumerate_joint_pmf(const ExpandedModel& expanded, LatticeBounds bounds,
                                  std::size_t budget) {
  const DphModel& base = expanded.base();
  const int d = base.dim();
  const auto& T = base.T();
  const auto& t = base.exit();
  const auto& r = expanded.rewards().values();
  const bool bernoulli = expanded.kind() == RewardKind::Bernoulli;
  const int W = bounds.y2_max + 1;
  const std::size_t cells = bounds.cells();
  if (cells * static_cast<std::size_t>(d) > budget) {
    std::ostringstream msg;
    msg << d << " states x " << cells << " cells exceed the enumeration budget " << budget;
    throw Error(ErrorCode::BudgetExceeded, msg.str());
  }
  auto at = [&](std::vector<double>& v, int i, int y1, int y2) -> double& {
    return v[(static_cast<std::size_t>(i) * (bounds.y1_max + 1) + y1) * W + y2];
  };

  EnumeratedPmf out;
  out.bounds = bounds;
  std::vector<double> table(cells, 0.0);
  // Mass of "about to make a visit to state i with totals (y1, y2) so far".
  std::vector<double> entering(cells * d, 0.0);
  for (int i = 0; i < d; ++i) at(entering, i, 0, 0) = base.pi()(i);

  // Every visit adds at least one unit to y1 + y2, so no prefix inside the
  // bounds can have more visits than this.
  const int max_visits = bounds.y1_max + bounds.y2_max + 1;
  for (int visit = 0; visit < max_visits; ++visit) {
    std::vector<double> after(cells * d, 0.0);  // totals including this visit's reward
    bool any = false;
    for (int i = 0; i < d; ++i) {
      for (int y1 = 0; y1 <= bounds.y1_max; ++y1) {
        for (int y2 = 0; y2 <= bounds.y2_max; ++y2) {
          const double m = at(entering, i, y1, y2);
          if (m == 0.0) continue;
          any = true;
          if (bernoulli) {
            if (y1 + 1 <= bounds.y1_max) at(after, i, y1 + 1, y2) += m * r(i);
            if (y2 + 1 <= bounds.y2_max) at(after, i, y1, y2 + 1) += m * (1.0 - r(i));
          } else {
            if (y2 + 1 > bounds.y2_max) continue;
            double pk = r(i);  // P(reward = k) = (1-q)^k q
            for (int k = 0; y1 + k <= bounds.y1_max; ++k) {
              at(after, i, y1 + k, y2 + 1) += m * pk;
              pk *= 1.0 - r(i);
              if (pk == 0.0) break;
            }
          }
        }
      }
    }
    if (!any) break;
    std::vector<double> next(cells * d, 0.0);
    for (int i = 0; i < d; ++i) {
      for (int y1 = 0; y1 <= bounds.y1_max; ++y1) {
        for (int y2 = 0; y2 <= bounds.y2_max; ++y2) {
          const double m = at(after, i, y1, y2);
          if (m == 0.0) continue;
          table[static_cast<std::size_t>(y1) * W + y2] += m * t(i);
          for (int k = 0; k < d; ++k)
            if (T(i, k) != 0.0) at(next, k, y1, y2) += m * T(i, k);
        }
      }
    }
    entering.swap(next);
  }

  double inside = 0.0;
  for (int y1 = 0; y1 <= bounds.y1_max; ++y1) {
    for (int y2 = 0; y2 <= bounds.y2_max; ++y2) {
      const double p = table[static_cast<std::size_t>(y1) * W + y2];
      if (p != 0.0) out.cells[{y1, y2}] = p;
      inside += p;
    }
  }
  out.residual = std::max(0.0, 1.0 - inside);
  return out;
}

EmpiricalCell EmpiricalPmf::at(JointObservation y) const {
  const auto it = cells.find(y);
  return it == cells.end() ? EmpiricalCell{} : it->second;
}

EmpiricalPmf monte_carlo_pmf(const ExpandedModel& expanded, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidInput, "monte_carlo_pmf needs n >= 1");
  SimConfig cfg;
  cfg.seed = seed;
  cfg.n = n;
  const auto draws = simulate_expanded(expanded, cfg);
  EmpiricalPmf out;
  out.n = n;
  std::map<JointObservation, int> counts;
  for (const auto& y : draws) {
    ++counts[y];
    out.mean_y1 += y.y1;
    out.mean_y2 += y.y2;
  }
  out.mean_y1 /= n;
  out.mean_y2 /= n;
  for (const auto& [y, c] : counts) {
    const double p = static_cast<double>(c) / n;
    out.cells[y] = {p, std::sqrt(p * (1.0 - p) / n)};
  }
  return out;
}

}  // namespace rrph::oracle
