#include "rrph/lattice.hpp"

#include <algorithm>
#include <sstream>

#include "rrph/error.hpp"

namespace rrph {

LatticeBounds bounds_of(std::span<const JointObservation> observations) {
  LatticeBounds b;
  for (const auto& y : observations) {
    if (y.y1 < 0 || y.y2 < 0) throw Error(ErrorCode::InvalidInput, "negative observation");
    b.y1_max = std::max(b.y1_max, y.y1);
    b.y2_max = std::max(b.y2_max, y.y2);
  }
  return b;
}

SparseTransitions::SparseTransitions(const Eigen::MatrixXd& B, double drop_below)
    : dim(static_cast<int>(B.rows())), by_row(B.rows()), by_col(B.cols()) {
  for (int i = 0; i < B.rows(); ++i) {
    for (int j = 0; j < B.cols(); ++j) {
      if (B(i, j) > drop_below) {
        Entry e{i, j, B(i, j)};
        entries.push_back(e);
        by_row[i].push_back(e);
        by_col[j].push_back(e);
      }
    }
  }
  row_start.push_back(0);
  for (const auto& row : by_row) {
    for (const auto& e : row) {
      row_to.push_back(e.to);
      row_value.push_back(e.value);
    }
    row_start.push_back(static_cast<int>(row_to.size()));
  }
  col_start.push_back(0);
  for (const auto& col : by_col) {
    for (const auto& e : col) {
      col_from.push_back(e.from);
      col_value.push_back(e.value);
    }
    col_start.push_back(static_cast<int>(col_from.size()));
  }
}

namespace {

constexpr std::size_t kPooledBuffers = 4;
thread_local std::vector<std::vector<double>> spare_buffers;

std::vector<double> zeroed_buffer(std::size_t size) {
  if (size == 0) return {};
  // Prefer the largest spare so the pool does not fragment.
  auto best = spare_buffers.end();
  for (auto it = spare_buffers.begin(); it != spare_buffers.end(); ++it)
    if (best == spare_buffers.end() || it->capacity() > best->capacity()) best = it;
  if (best == spare_buffers.end()) return std::vector<double>(size, 0.0);
  std::vector<double> v = std::move(*best);
  spare_buffers.erase(best);
  v.assign(size, 0.0);
  return v;
}

void recycle(std::vector<double>& v) {
  if (v.capacity() == 0 || spare_buffers.size() >= kPooledBuffers) return;
  spare_buffers.push_back(std::move(v));
}

}  // namespace

LatticeTables::LatticeTables(LatticeBounds bounds, int dim, Eigen::VectorXd beta,
                             Eigen::VectorXd b0, LatticeParts parts)
    : bounds_(bounds),
      dim_(dim),
      beta_(std::move(beta)),
      b0_(std::move(b0)),
      p_(zeroed_buffer(parts == LatticeParts::Full ? bounds.cells() * static_cast<std::size_t>(dim)
                                                   : 0)),
      alpha_(zeroed_buffer(bounds.cells() * static_cast<std::size_t>(dim))) {}

LatticeTables::~LatticeTables() {
  recycle(p_);
  recycle(alpha_);
}

std::size_t LatticeTables::offset(JointObservation y) const {
  if (!bounds_.contains(y)) {
    std::ostringstream msg;
    msg << "(" << y.y1 << "," << y.y2 << ") outside lattice bounds (" << bounds_.y1_max << ","
        << bounds_.y2_max << ")";
    throw Error(ErrorCode::InvalidInput, msg.str());
  }
  const auto cell = static_cast<std::size_t>(y.y1) * static_cast<std::size_t>(bounds_.y2_max + 1) +
                    static_cast<std::size_t>(y.y2);
  return cell * static_cast<std::size_t>(dim_);
}

Eigen::Map<const Eigen::VectorXd> LatticeTables::p(JointObservation y) const {
  if (!has_p()) throw Error(ErrorCode::InvalidInput, "lattice was built without the p table");
  return {p_.data() + offset(y), dim_};
}

Eigen::Map<const Eigen::VectorXd> LatticeTables::alpha(JointObservation y) const {
  return {alpha_.data() + offset(y), dim_};
}

double LatticeTables::likelihood(JointObservation y) const { return beta_.dot(p(y)); }

double LatticeTables::likelihood_forward(JointObservation y) const { return alpha(y).dot(b0_); }

LatticeTables lattice_forward(const ExpandedModel& expanded, LatticeBounds bounds,
                              std::size_t cell_cap, LatticeParts parts) {
  if (bounds.y1_max < 0 || bounds.y2_max < 0)
    throw Error(ErrorCode::InvalidInput, "negative lattice bound");
  if (bounds.cells() > cell_cap) {
    std::ostringstream msg;
    msg << bounds.cells() << " lattice cells exceed the cap of " << cell_cap;
    throw Error(ErrorCode::OutOfMemoryBudget, msg.str());
  }
  const int n = expanded.dim();
  const int d = expanded.base_dim();
  LatticeTables tables(bounds, n, expanded.beta(), expanded.b0(), parts);
  const bool with_p = parts == LatticeParts::Full;
  const SparseTransitions sparse(expanded.B());
  const auto& beta = expanded.beta();
  const auto& b0 = expanded.b0();
  const std::size_t row_stride = static_cast<std::size_t>(bounds.y2_max + 1) * n;

  for (int y1 = 0; y1 <= bounds.y1_max; ++y1) {
    for (int y2 = 0; y2 <= bounds.y2_max; ++y2) {
      const std::size_t here = tables.offset({y1, y2});
      double* p = with_p ? tables.p_.data() + here : nullptr;
      double* alpha = tables.alpha_.data() + here;
      // Rewarded copies (channel y1) look one step back along y1, the others along y2.
      const double* p_back1 = with_p && y1 > 0 ? p - row_stride : nullptr;
      const double* p_back2 = with_p && y2 > 0 ? p - n : nullptr;
      const double* a_back1 = y1 > 0 ? alpha - row_stride : nullptr;
      const double* a_back2 = y2 > 0 ? alpha - n : nullptr;

      for (int i = 0; i < n; ++i) {
        const bool rewarded = i >= d;
        const double* p_back = rewarded ? p_back1 : p_back2;
        const double* a_back = rewarded ? a_back1 : a_back2;
        if (a_back == nullptr) continue;
        const bool first_step = rewarded ? (y1 == 1 && y2 == 0) : (y1 == 0 && y2 == 1);

        if (with_p) {
          double pv = first_step ? b0(i) : 0.0;
          for (int k = sparse.row_start[i]; k < sparse.row_start[i + 1]; ++k)
            pv += sparse.row_value[k] * p_back[sparse.row_to[k]];
          p[i] = pv;
        }

        double av = first_step ? beta(i) : 0.0;
        for (int k = sparse.col_start[i]; k < sparse.col_start[i + 1]; ++k)
          av += a_back[sparse.col_from[k]] * sparse.col_value[k];
        alpha[i] = av;
      }
    }
  }
  return tables;
}

}  // namespace rrph
