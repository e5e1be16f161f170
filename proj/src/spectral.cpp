#include "hmfg/spectral.hpp"

#include "hmfg/operators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hmfg {

Eigenpair weighted_principal_eigenpair(double mu, const Field& w, const Field& q, const EigenOptions& opt) {
  require_same_grid(w.grid, q.grid);
  if (!(mu > 0)) throw std::invalid_argument("diffusivity must be positive");
  if (!(w.values.minCoeff() > 0)) throw std::invalid_argument("weight must be positive");
  const TorusGrid& g = w.grid;
  const Index N = g.size();

  SparseMatrix S = mu * weighted_stiffness(g, w.values);
  for (Index k = 0; k < N; ++k) S.coeffRef(k, k) -= q[k];
  // S >= -max(q), so B = S + (max q + 1) I >= I.
  const double sigma = -q.values.maxCoeff() - 1.0;
  SparseMatrix B = S;
  for (Index k = 0; k < N; ++k) B.coeffRef(k, k) -= sigma;
  Eigen::SimplicialLDLT<SparseMatrix> solver(B);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen solver factorization failed");

  Eigen::VectorXd x = Eigen::VectorXd::Ones(N) / std::sqrt(double(N));
  double lambda = x.dot(S * x);
  double res = 0, dl = 0;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    x = solver.solve(x);
    x /= x.norm();
    const Eigen::VectorXd Sx = S * x;
    const double next = x.dot(Sx);
    dl = std::abs(next - lambda);
    lambda = next;
    res = (Sx - lambda * x).norm();
    if (dl <= opt.tol * std::max(1.0, std::abs(lambda)) && res <= 1e-9) break;
  }
  if (it == opt.max_iter && !(dl <= opt.tol * std::max(1.0, std::abs(lambda)) && res <= 1e-8))
    throw std::runtime_error("principal eigenvalue iteration did not converge (residual " + std::to_string(res) + ")");

  if (x.sum() < 0) x = -x;
  if (!(x.minCoeff() > 0)) throw std::runtime_error("principal eigenfunction is not positive");
  x /= std::sqrt(g.cell() * x.squaredNorm());
  return {lambda, Field(g, x), it + 1, res};
}

Eigenpair principal_eigenpair(double mu, const Field& V, const EigenOptions& opt) {
  return weighted_principal_eigenpair(mu, Field::constant(V.grid, 1.0), V, opt);
}

double weighted_principal_eigenvalue(double mu, const Field& w, const Field& q, const EigenOptions& opt) {
  return weighted_principal_eigenpair(mu, w, q, opt).lambda1;
}

}  // namespace hmfg
