#pragma once

#include "hmfg/torus_grid.hpp"

#include <string>
#include <vector>

namespace hmfg {

// Finite cosine series  sum_k c_k cos(2 pi kx x) cos(2 pi ky y).
// Text grammar: signed terms joined by + or -, each  [coef][*]atom  with atom one of
//   (none)        constant
//   cos[k]        1D: cos(2 pi k x); 2D: cos(2 pi k x) cos(2 pi k y)
//   cosx[k] / cosy[k]  single-axis cosine (2D)
// e.g. "1+0.5cos", "cos", "0.3cos2", "1 - 0.2cosx + 0.1cosy3".
struct CosineTerm {
  double coef = 0;
  int kx = 0;
  int ky = 0;
};

class CosineProfile {
 public:
  CosineProfile() = default;
  CosineProfile(int dim, std::vector<CosineTerm> terms);
  static CosineProfile parse(const std::string& text, int dim);
  static CosineProfile constant(int dim, double c) { return CosineProfile(dim, {{c, 0, 0}}); }

  int dim() const { return dim_; }
  const std::vector<CosineTerm>& terms() const { return terms_; }
  double operator()(double x, double y = 0) const;
  double derivative_x(double x) const;      // 1D only
  double primitive(double y) const;         // 1D: integral over [0, y]
  double mean() const;                      // integral over the torus
  bool even() const { return true; }
  // 1D check: strictly decreasing on (0, 0.5), sampled on a fine grid.
  bool decreasing_on_half(int samples = 4096) const;
  Field sample(const TorusGrid& g) const;
  std::string str() const;

 private:
  int dim_ = 1;
  std::vector<CosineTerm> terms_;
};

}  // namespace hmfg
