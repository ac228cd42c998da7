#pragma once

#include <optional>
#include <vector>

#include "sandwich/prob_space.hpp"

namespace sandwich {

// Least-squares coordinates of target vectors in the span of a fixed list of
// basis vectors, with a residual test deciding membership. Built once per
// basis; reused across solves.
class SpanSolver {
 public:
  explicit SpanSolver(const std::vector<RandomVariable>& basis);

  // Coordinates of x in the span, or nullopt if the residual exceeds
  // `residual_tol` in sup norm (relative to max(1, ||x||_inf)).
  std::optional<std::vector<double>> coordinates(const RandomVariable& x,
                                                 double residual_tol = 1e-8) const;
  bool contains(const RandomVariable& x, double residual_tol = 1e-8) const;

  // Numerical rank with a relative singular-value threshold.
  int rank(double rel_threshold = 1e-10) const;
  bool independent(double rel_threshold = 1e-10) const;

  int dimension() const { return n_basis_; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  int n_basis_;
  int n_atoms_;
};

}  // namespace sandwich
