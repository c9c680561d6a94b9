#include "hrmesh/sparse.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "hrmesh/error.hpp"

namespace hrmesh::fem {

CsrMatrix CsrMatrix::from_triplets(int n, std::span<const Triplet> entries) {
  std::vector<Triplet> sorted(entries.begin(), entries.end());
  for (const Triplet& t : sorted) {
    if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n) {
      throw Error(ErrorCode::ShapeMismatch, "triplet outside matrix bounds");
    }
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const Triplet& a, const Triplet& b) { return a.row < b.row || (a.row == b.row && a.col < b.col); });
  CsrMatrix m;
  m.n_ = n;
  m.row_ptr_.assign(n + 1, 0);
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < sorted.size() && sorted[j].row == sorted[i].row && sorted[j].col == sorted[i].col) sum += sorted[j++].value;
    m.cols_.push_back(sorted[i].col);
    m.values_.push_back(sum);
    ++m.row_ptr_[sorted[i].row + 1];
    i = j;
  }
  for (int r = 0; r < n; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int r = 0; r < n_; ++r) {
    double s = 0.0;
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[cols_[k]];
    y[r] = s;
  }
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(n_, 0.0);
  for (int r = 0; r < n_; ++r) d[r] = at(r, r);
  return d;
}

double CsrMatrix::at(int row, int col) const {
  const auto begin = cols_.begin() + row_ptr_[row];
  const auto end = cols_.begin() + row_ptr_[row + 1];
  const auto it = std::lower_bound(begin, end, col);
  return (it != end && *it == col) ? values_[it - cols_.begin()] : 0.0;
}

double CsrMatrix::asymmetry() const {
  double worst = 0.0;
  double scale = 0.0;
  for (int r = 0; r < n_; ++r) {
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      scale = std::max(scale, std::abs(values_[k]));
      worst = std::max(worst, std::abs(values_[k] - at(cols_[k], r)));
    }
  }
  return scale > 0.0 ? worst / scale : 0.0;
}

double relative_residual(const CsrMatrix& a, std::span<const double> x, std::span<const double> b) {
  std::vector<double> ax(a.size());
  a.multiply(x, ax);
  double rn = 0.0, bn = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    rn += (b[i] - ax[i]) * (b[i] - ax[i]);
    bn += b[i] * b[i];
  }
  return bn > 0.0 ? std::sqrt(rn / bn) : std::sqrt(rn);
}

std::vector<double> pcg(const CsrMatrix& a, std::span<const double> b, double rel_tol, int max_iter,
                        SolveStats* stats) {
  const int n = a.size();
  std::vector<double> x(n, 0.0), r(b.begin(), b.end()), z(n), p(n), q(n);
  const std::vector<double> diag = a.diagonal();
  for (double d : diag) {
    if (!(d > 0.0)) throw Error(ErrorCode::SingularSystem, "non-positive diagonal in SPD solve");
  }
  double bnorm = 0.0;
  for (double v : b) bnorm += v * v;
  bnorm = std::sqrt(bnorm);
  SolveStats local;
  if (bnorm == 0.0) {
    if (stats) *stats = local;
    return x;
  }
  for (int i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = 0.0;
  for (int i = 0; i < n; ++i) rz += r[i] * z[i];
  int it = 0;
  double rnorm = bnorm;
  for (; it < max_iter && rnorm > rel_tol * bnorm; ++it) {
    a.multiply(p, q);
    double pq = 0.0;
    for (int i = 0; i < n; ++i) pq += p[i] * q[i];
    if (!(pq > 0.0)) throw Error(ErrorCode::SingularSystem, "matrix is not positive definite");
    const double alpha = rz / pq;
    rnorm = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      rnorm += r[i] * r[i];
    }
    rnorm = std::sqrt(rnorm);
    for (int i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    double rz_next = 0.0;
    for (int i = 0; i < n; ++i) rz_next += r[i] * z[i];
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  local.iterations = it;
  local.relative_residual = rnorm / bnorm;
  if (!(local.relative_residual <= std::max(rel_tol, 1e-10))) {
    throw Error(ErrorCode::SingularSystem,
                "conjugate gradients did not converge (residual " + std::to_string(local.relative_residual) + ")");
  }
  if (stats) *stats = local;
  return x;
}

struct SpdSolver::Dense {
  Eigen::LLT<Eigen::MatrixXd> llt;
};

SpdSolver::SpdSolver(CsrMatrix a) : a_(std::move(a)) {
  const int n = a_.size();
  if (n > 0 && n < kDenseThreshold) {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    const auto rp = a_.row_ptr();
    const auto cols = a_.cols();
    const auto vals = a_.values();
    for (int r = 0; r < n; ++r) {
      for (int k = rp[r]; k < rp[r + 1]; ++k) dense(r, cols[k]) = vals[k];
    }
    dense_ = std::make_unique<Dense>();
    dense_->llt.compute(dense);
    if (dense_->llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularSystem, "Cholesky factorization failed; matrix not SPD");
    }
  }
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

std::vector<double> SpdSolver::solve(std::span<const double> b, SolveStats* stats) const {
  const int n = a_.size();
  if (static_cast<int>(b.size()) != n) throw Error(ErrorCode::ShapeMismatch, "rhs length mismatch");
  if (n == 0) return {};
  if (dense_) {
    Eigen::Map<const Eigen::VectorXd> rhs(b.data(), n);
    Eigen::VectorXd sol = dense_->llt.solve(rhs);
    std::vector<double> x(sol.data(), sol.data() + n);
    for (double v : x) {
      if (!std::isfinite(v)) throw Error(ErrorCode::SingularSystem, "non-finite solution");
    }
    if (stats) {
      stats->dense = true;
      stats->iterations = 0;
      stats->relative_residual = relative_residual(a_, x, b);
    }
    return x;
  }
  return pcg(a_, b, 1e-12, 10 * n, stats);
}

}  // namespace hrmesh::fem
