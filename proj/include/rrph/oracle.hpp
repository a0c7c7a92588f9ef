#pragma once

#include <cstddef>
#include <cstdint>
#include <map>

#include "rrph/lattice.hpp"
#include "rrph/rrdph.hpp"

namespace rrph::oracle {

struct EnumeratedPmf {
  LatticeBounds bounds;
  std::map<JointObservation, double> cells;  // nonzero cells only
  double residual = 0.0;                     // mass outside the bounds

  double at(JointObservation y) const;
  double total() const;
};

// Walks the ORIGINAL chain one visit at a time, carrying the probability of
// every (state, y1, y2) prefix and drawing each visit's reward explicitly:
// a Bernoulli visit adds one to y1 or y2; a geometric visit adds one to y2
// and k to y1 with probability (1-q)^k q. Shares no code with the lattice
// recursion. Throws BudgetExceeded when d * cells exceeds `budget`.
EnumeratedPmf enumerate_joint_pmf(const ExpandedModel& expanded, LatticeBounds bounds,
                                  std::size_t budget = 50'000'000);

struct EmpiricalCell {
  double probability = 0.0;
  double standard_error = 0.0;  // sqrt(p (1-p) / n)
};

struct EmpiricalPmf {
  int n = 0;
  std::map<JointObservation, EmpiricalCell> cells;
  double mean_y1 = 0.0;
  double mean_y2 = 0.0;

  EmpiricalCell at(JointObservation y) const;
};

EmpiricalPmf monte_carlo_pmf(const ExpandedModel& expanded, int n, std::uint64_t seed);

}  // namespace rrph::oracle
