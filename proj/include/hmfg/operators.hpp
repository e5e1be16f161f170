#pragma once

#include "hmfg/torus_grid.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <memory>

namespace hmfg {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Matrix of the 5-point (3-point in 1D) periodic Laplacian.
SparseMatrix laplacian_matrix(const TorusGrid& g);

// Matrix of -div(w grad .) with face weights (w_i + w_{i+1})/2. Symmetric, positive semidefinite.
SparseMatrix weighted_stiffness(const TorusGrid& g, const Eigen::VectorXd& w);

// Factorized I - kappa*Laplacian, kappa >= 0. kappa == 0 is the identity.
class DiffusionSolve {
 public:
  DiffusionSolve() = default;
  DiffusionSolve(const TorusGrid& g, double kappa);
  Eigen::VectorXd operator()(const Eigen::VectorXd& rhs) const;
  double kappa() const { return kappa_; }

 private:
  double kappa_ = 0;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> llt_;
};

}  // namespace hmfg
