#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace hrmesh::fem {

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

// Assembly-time representation: duplicate entries are summed on compression.
struct SparseSystem {
  int n = 0;
  std::vector<Triplet> entries;
  std::vector<double> rhs;
};

class CsrMatrix {
 public:
  CsrMatrix() = default;
  static CsrMatrix from_triplets(int n, std::span<const Triplet> entries);

  int size() const { return n_; }
  std::size_t nonzeros() const { return values_.size(); }
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> diagonal() const;
  double at(int row, int col) const;
  // max |a_ij - a_ji| / max |a_ij|
  double asymmetry() const;

  std::span<const int> row_ptr() const { return row_ptr_; }
  std::span<const int> cols() const { return cols_; }
  std::span<const double> values() const { return values_; }

 private:
  int n_ = 0;
  std::vector<int> row_ptr_;
  std::vector<int> cols_;
  std::vector<double> values_;
};

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
  bool dense = false;
};

// Jacobi-preconditioned conjugate gradients.
std::vector<double> pcg(const CsrMatrix& a, std::span<const double> b, double rel_tol, int max_iter,
                        SolveStats* stats = nullptr);

// Symmetric positive-definite solver: dense Cholesky below kDenseThreshold
// unknowns, PCG (tol 1e-12, 10 n iterations) above. Factorizes once and
// supports repeated right-hand sides.
class SpdSolver {
 public:
  static constexpr int kDenseThreshold = 2000;

  explicit SpdSolver(CsrMatrix a);
  ~SpdSolver();
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;

  std::vector<double> solve(std::span<const double> b, SolveStats* stats = nullptr) const;
  const CsrMatrix& matrix() const { return a_; }

 private:
  struct Dense;
  CsrMatrix a_;
  std::unique_ptr<Dense> dense_;
};

double relative_residual(const CsrMatrix& a, std::span<const double> x, std::span<const double> b);

}  // namespace hrmesh::fem
