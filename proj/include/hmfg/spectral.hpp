#pragma once

#include "hmfg/torus_grid.hpp"

namespace hmfg {

struct EigenOptions {
  double tol = 1e-10;     // on eigenvalue increments, relative to max(1, |lambda|)
  int max_iter = 10000;
};

struct Eigenpair {
  double lambda1 = 0;
  Field eigenfunction;    // positive, h^d sum phi^2 = 1
  int iterations = 0;
  double residual = 0;    // ||A phi - lambda phi||_2 / ||phi||_2
};

// Smallest eigenpair of -mu Lap - V.
Eigenpair principal_eigenpair(double mu, const Field& V, const EigenOptions& opt = {});

// Smallest eigenpair of -mu div(w grad) - q, w > 0.
Eigenpair weighted_principal_eigenpair(double mu, const Field& w, const Field& q, const EigenOptions& opt = {});
double weighted_principal_eigenvalue(double mu, const Field& w, const Field& q, const EigenOptions& opt = {});

}  // namespace hmfg
