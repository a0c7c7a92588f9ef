#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rrph/rrdph.hpp"

namespace rrph {

struct LatticeBounds {
  int y1_max = 0;
  int y2_max = 0;

  std::size_t cells() const {
    return static_cast<std::size_t>(y1_max + 1) * static_cast<std::size_t>(y2_max + 1);
  }
  bool contains(JointObservation y) const {
    return y.y1 >= 0 && y.y2 >= 0 && y.y1 <= y1_max && y.y2 <= y2_max;
  }
};

// Componentwise maximum over a set of observations.
LatticeBounds bounds_of(std::span<const JointObservation> observations);

inline constexpr std::size_t kDefaultCellCap = 20'000'000;

enum class LatticeParts { Full, ForwardOnly };

// Nonzero pattern of the expanded sub-transition matrix, row- and column-wise.
struct SparseTransitions {
  struct Entry {
    int from;
    int to;
    double value;
  };
  explicit SparseTransitions(const Eigen::MatrixXd& B, double drop_below = 0.0);

  int dim = 0;
  std::vector<Entry> entries;
  std::vector<std::vector<Entry>> by_row;
  std::vector<std::vector<Entry>> by_col;

  // Compressed copies for the hot loops: row i owns [row_start[i], row_start[i+1])
  // of (row_to, row_value), column j owns [col_start[j], col_start[j+1]) of
  // (col_from, col_value).
  std::vector<int> row_start, row_to, col_start, col_from;
  std::vector<double> row_value, col_value;
};

// Forward/backward tables over the reward lattice {y : y <= bounds}.
//
//   p(y)_i     = P(rewards collected from a visit to i onward equal y, then absorb)
//   alpha(y)_j = P(some visit is to j with rewards collected so far, including it, equal y)
//
// A visit to state i adds one unit on its channel, so
//   p(y)_i     = 1(y >= e_c(i)) [ b0_i 1(y = e_c(i)) + sum_j B_ij p(y - e_c(i))_j ]
//   alpha(y)_j = 1(y >= e_c(j)) [ beta_j 1(y = e_c(j)) + sum_i alpha(y - e_c(j))_i B_ij ]
// and P(Y = y) = beta . p(y) = alpha(y) . b0.
class LatticeTables {
 public:
  LatticeTables(const LatticeTables&) = default;
  LatticeTables(LatticeTables&&) noexcept = default;
  LatticeTables& operator=(const LatticeTables&) = default;
  LatticeTables& operator=(LatticeTables&&) noexcept = default;
  // Hands the table storage back to a small per-thread pool, so that
  // repeated builds (one per EM iteration) skip fresh page allocation.
  ~LatticeTables();

  const LatticeBounds& bounds() const { return bounds_; }
  int dim() const { return dim_; }

  Eigen::Map<const Eigen::VectorXd> p(JointObservation y) const;
  Eigen::Map<const Eigen::VectorXd> alpha(JointObservation y) const;

  // beta . p(y)
  double likelihood(JointObservation y) const;
  // alpha(y) . b0
  double likelihood_forward(JointObservation y) const;

  bool has_p() const { return !p_.empty(); }

  // alpha(y)_j lives at alpha_data()[(y1 * (y2_max + 1) + y2) * dim + j].
  const double* alpha_data() const { return alpha_.data(); }

  friend LatticeTables lattice_forward(const ExpandedModel& expanded, LatticeBounds bounds,
                                       std::size_t cell_cap, LatticeParts parts);

 private:
  LatticeTables(LatticeBounds bounds, int dim, Eigen::VectorXd beta, Eigen::VectorXd b0,
                LatticeParts parts);
  std::size_t offset(JointObservation y) const;

  LatticeBounds bounds_;
  int dim_;
  Eigen::VectorXd beta_;
  Eigen::VectorXd b0_;
  std::vector<double> p_;
  std::vector<double> alpha_;
};

LatticeTables lattice_forward(const ExpandedModel& expanded, LatticeBounds bounds,
                              std::size_t cell_cap = kDefaultCellCap,
                              LatticeParts parts = LatticeParts::Full);

}  // namespace rrph
