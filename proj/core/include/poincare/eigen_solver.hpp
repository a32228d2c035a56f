#ifndef POINCARE_EIGEN_SOLVER_HPP_
#define POINCARE_EIGEN_SOLVER_HPP_

#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "poincare/assembly.hpp"

namespace poincare {

struct EigPair {
  double value = 0.0;
  Eigen::VectorXd vector;  // M-normalized, M-orthogonal to the constant vector
};

struct EigenSolveOptions {
  double tol = 1e-10;      // backward error |Kx - tMx| / ((|K|_1 + t|M|_1) |x|)
  int max_iterations = 500;
  int block_size = 0;      // 0 picks max(k + 2, 2k), capped at N - 1
  unsigned seed = 20240607;
};

struct EigenSolveResult {
  std::vector<EigPair> pairs;   // ascending
  Eigen::MatrixXd subspace;     // full converged block, reusable as warm start
  int iterations = 0;
  double max_residual = 0.0;
};

// Smallest eigenpairs of the pencil (K, M) on the M-orthogonal complement of
// the constant vector, by block inverse (subspace) iteration with
// Rayleigh-Ritz extraction. K is factorized with a tiny M-shift so the
// singular constant direction does not break the factorization; that
// direction is projected out after every solve.
//
// The symbolic analysis is cached across calls with the same sparsity
// pattern, which is the normal situation inside the optimizer.
class DeflatedEigenSolver {
 public:
  explicit DeflatedEigenSolver(EigenSolveOptions options = {}) : options_(options) {}

  // Throws ConvergenceError when the iteration budget runs out and
  // kInvalidArgument when k is outside [1, N - 1].
  EigenSolveResult solve(const SparseSym& stiffness, const SparseSym& mass, int k,
                         const Eigen::MatrixXd* warm_start = nullptr);

  const EigenSolveOptions& options() const { return options_; }

 private:
  using Factorization = Eigen::SimplicialLDLT<SparseSym, Eigen::Lower, Eigen::AMDOrdering<int>>;

  EigenSolveOptions options_;
  Factorization factorization_;
  Eigen::Index analyzed_nnz_ = -1;
  Eigen::Index analyzed_rows_ = -1;
};

std::vector<EigPair> smallest_nonzero_pairs(const SparseSym& stiffness, const SparseSym& mass,
                                            int k, double tol = 1e-10);

// u^T K u / u^T M u after M-orthogonal projection against the constant
// vector; throws kDegenerateVector if nothing is left after projection.
double rayleigh(const SparseSym& stiffness, const SparseSym& mass, const Eigen::VectorXd& u);

// Removes the M-weighted mean: u - 1 (1^T M u) / (1^T M 1).
Eigen::VectorXd project_out_constant(const SparseSym& mass, const Eigen::VectorXd& u);

}  // namespace poincare

#endif  // POINCARE_EIGEN_SOLVER_HPP_
