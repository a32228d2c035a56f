#include "poincare/eigen_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "poincare/error.hpp"

namespace poincare {

namespace {

struct Deflation {
  Eigen::VectorXd mass_ones;  // M 1
  double total = 0.0;         // 1^T M 1

  explicit Deflation(const SparseSym& mass)
      : mass_ones(mass * Eigen::VectorXd::Ones(mass.rows())), total(mass_ones.sum()) {}

  void apply(Eigen::Ref<Eigen::VectorXd> u) const {
    u.array() -= mass_ones.dot(u) / total;
  }
};

double norm1(const SparseSym& a) {
  double best = 0.0;
  for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
    double col = 0.0;
    for (SparseSym::InnerIterator it(a, j); it; ++it) col += std::abs(it.value());
    best = std::max(best, col);
  }
  return best;
}

void fill_random(Eigen::Ref<Eigen::VectorXd> v, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = unif(rng);
}

// Modified Gram-Schmidt in the M inner product, two passes. Columns that
// collapse are replaced by fresh random directions.
void m_orthonormalize(Eigen::MatrixXd& y, const SparseSym& mass, const Deflation& deflation,
                      std::mt19937_64& rng) {
  Eigen::MatrixXd my(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (int attempt = 0;; ++attempt) {
      auto col = y.col(j);
      deflation.apply(col);
      double before = std::sqrt(std::max(col.dot(mass * col), 0.0));
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i < j; ++i) col -= my.col(i).dot(col) * y.col(i);
      }
      Eigen::VectorXd mcol = mass * col;
      const double norm = std::sqrt(std::max(col.dot(mcol), 0.0));
      if (norm > 1e-10 * before && norm > 0.0 && std::isfinite(norm)) {
        col /= norm;
        my.col(j) = mcol / norm;
        break;
      }
      if (attempt > 8) {
        throw Error(ErrorCode::kDegenerateVector, "cannot build an M-orthonormal block");
      }
      fill_random(col, rng);
    }
  }
}

std::string format_residual(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", r);
  return buf;
}

}  // namespace

Eigen::VectorXd project_out_constant(const SparseSym& mass, const Eigen::VectorXd& u) {
  Eigen::VectorXd out = u;
  Deflation(mass).apply(out);
  return out;
}

double rayleigh(const SparseSym& stiffness, const SparseSym& mass, const Eigen::VectorXd& u) {
  if (u.size() != mass.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "vector length does not match the matrices");
  }
  const double raw = u.dot(mass * u);
  const Eigen::VectorXd v = project_out_constant(mass, u);
  const double denom = v.dot(mass * v);
  if (!(raw > 0.0) || !(denom > 1e-14 * raw)) {
    throw Error(ErrorCode::kDegenerateVector,
                "vector has no component M-orthogonal to the constants");
  }
  return v.dot(stiffness * v) / denom;
}

EigenSolveResult DeflatedEigenSolver::solve(const SparseSym& stiffness, const SparseSym& mass,
                                            int k, const Eigen::MatrixXd* warm_start) {
  const Eigen::Index n = mass.rows();
  if (stiffness.rows() != n || stiffness.cols() != n || mass.cols() != n) {
    throw Error(ErrorCode::kInvalidArgument, "stiffness and mass dimensions differ");
  }
  if (k < 1 || k > n - 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "requested " + std::to_string(k) + " pairs from a pencil of size " +
                    std::to_string(n));
  }
  const Eigen::Index p = std::min<Eigen::Index>(
      n - 1, options_.block_size > 0 ? std::max(options_.block_size, k)
                                     : std::max(k + 2, 2 * k));

  const Deflation deflation(mass);
  const double k_norm = norm1(stiffness);
  const double m_norm = norm1(mass);
  const double shift =
      1e-10 * stiffness.diagonal().sum() / std::max(mass.diagonal().sum(), 1e-300);
  SparseSym shifted = stiffness + shift * mass;
  shifted.makeCompressed();
  if (shifted.nonZeros() != analyzed_nnz_ || shifted.rows() != analyzed_rows_) {
    factorization_.analyzePattern(shifted);
    analyzed_nnz_ = shifted.nonZeros();
    analyzed_rows_ = shifted.rows();
  }
  factorization_.factorize(shifted);
  if (factorization_.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidArgument, "stiffness + shift * mass is not factorizable");
  }

  std::mt19937_64 rng(options_.seed);
  Eigen::MatrixXd y(n, p);
  Eigen::Index filled = 0;
  if (warm_start != nullptr && warm_start->rows() == n) {
    filled = std::min<Eigen::Index>(p, warm_start->cols());
    y.leftCols(filled) = warm_start->leftCols(filled);
  }
  for (Eigen::Index j = filled; j < p; ++j) fill_random(y.col(j), rng);

  EigenSolveResult result;
  Eigen::MatrixXd x;
  Eigen::VectorXd theta;
  double worst = 0.0;
  for (int it = 0; it <= options_.max_iterations; ++it) {
    if (it > 0) {
      const Eigen::MatrixXd rhs = mass * x;
      y = factorization_.solve(rhs);
    }
    m_orthonormalize(y, mass, deflation, rng);

    const Eigen::MatrixXd ky = stiffness * y;
    Eigen::MatrixXd h = y.transpose() * ky;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(h);
    theta = ritz.eigenvalues();
    x = y * ritz.eigenvectors();
    const Eigen::MatrixXd kx = ky * ritz.eigenvectors();

    worst = 0.0;
    for (int i = 0; i < k; ++i) {
      const Eigen::VectorXd mx = mass * x.col(i);
      const double lam = theta[i];
      // Normwise backward error of the pair.
      const double scale = (k_norm + std::abs(lam) * m_norm) * x.col(i).norm();
      const double res = (kx.col(i) - lam * mx).norm() / std::max(scale, 1e-300);
      worst = std::max(worst, res);
    }
    result.iterations = it;
    if (worst <= options_.tol) break;
    if (it == options_.max_iterations) {
      throw ConvergenceError("eigensolver did not converge in " +
                                 std::to_string(options_.max_iterations) +
                                 " iterations (residual " + format_residual(worst) + ")",
                             worst);
    }
  }

  result.max_residual = worst;
  result.pairs.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    EigPair pair;
    pair.value = std::max(theta[i], 0.0);
    pair.vector = x.col(i);
    Eigen::Index arg = 0;
    pair.vector.cwiseAbs().maxCoeff(&arg);
    if (pair.vector[arg] < 0.0) pair.vector = -pair.vector;
    result.pairs.push_back(std::move(pair));
  }
  result.subspace = std::move(x);
  return result;
}

std::vector<EigPair> smallest_nonzero_pairs(const SparseSym& stiffness, const SparseSym& mass,
                                            int k, double tol) {
  EigenSolveOptions options;
  options.tol = tol;
  DeflatedEigenSolver solver(options);
  return solver.solve(stiffness, mass, k).pairs;
}

}  // namespace poincare
