#include "hmfg/operators.hpp"

#include <stdexcept>
#include <vector>

namespace hmfg {

SparseMatrix weighted_stiffness(const TorusGrid& g, const Eigen::VectorXd& w) {
  if (w.size() != g.size()) throw std::invalid_argument("grid mismatch");
  const double ih2 = 1.0 / (g.h() * g.h());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(size_t(g.size()) * (1 + 2 * g.dim()));
  for (Index k = 0; k < g.size(); ++k) {
    double diag = 0;
    for (int a = 0; a < g.dim(); ++a)
      for (int s : {-1, 1}) {
        const Index j = g.neighbor(k, a, s);
        const double face = 0.5 * (w[k] + w[j]) * ih2;
        trip.emplace_back(k, j, -face);
        diag += face;
      }
    trip.emplace_back(k, k, diag);
  }
  SparseMatrix A(g.size(), g.size());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

SparseMatrix laplacian_matrix(const TorusGrid& g) {
  return -weighted_stiffness(g, Eigen::VectorXd::Ones(g.size()));
}

DiffusionSolve::DiffusionSolve(const TorusGrid& g, double kappa) : kappa_(kappa) {
  if (kappa < 0) throw std::invalid_argument("negative diffusion coefficient");
  if (kappa == 0) return;
  SparseMatrix I(g.size(), g.size());
  I.setIdentity();
  SparseMatrix A = I - kappa * laplacian_matrix(g);
  llt_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(A);
  if (llt_->info() != Eigen::Success) throw std::runtime_error("diffusion factorization failed");
}

Eigen::VectorXd DiffusionSolve::operator()(const Eigen::VectorXd& rhs) const {
  if (!llt_) return rhs;
  return llt_->solve(rhs);
}

}  // namespace hmfg
