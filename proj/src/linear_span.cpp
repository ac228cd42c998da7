#include "sandwich/linear_span.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace sandwich {

struct SpanSolver::Impl {
  Eigen::MatrixXd basis;                            // n_atoms x n_basis
  Eigen::JacobiSVD<Eigen::MatrixXd> svd;            // thin U/V
};

SpanSolver::SpanSolver(const std::vector<RandomVariable>& basis) {
  if (basis.empty()) throw ValidationError("span: empty basis");
  const auto& space = basis.front().space();
  n_atoms_ = space->n_atoms();
  n_basis_ = static_cast<int>(basis.size());
  auto impl = std::make_shared<Impl>();
  impl->basis.resize(n_atoms_, n_basis_);
  for (int j = 0; j < n_basis_; ++j) {
    require_same_space(basis.front(), basis[j]);
    for (int i = 0; i < n_atoms_; ++i) impl->basis(i, j) = basis[j][i];
  }
  impl->svd.compute(impl->basis, Eigen::ComputeThinU | Eigen::ComputeThinV);
  impl_ = std::move(impl);
}

std::optional<std::vector<double>> SpanSolver::coordinates(const RandomVariable& x,
                                                           double residual_tol) const {
  if (x.size() != n_atoms_) throw ValidationError("span: vector size mismatch");
  Eigen::VectorXd b(n_atoms_);
  for (int i = 0; i < n_atoms_; ++i) b(i) = x[i];
  Eigen::VectorXd coef = impl_->svd.solve(b);
  const Eigen::VectorXd residual = impl_->basis * coef - b;
  const double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  if (residual.lpNorm<Eigen::Infinity>() > residual_tol * scale) return std::nullopt;
  return std::vector<double>(coef.data(), coef.data() + coef.size());
}

bool SpanSolver::contains(const RandomVariable& x, double residual_tol) const {
  return coordinates(x, residual_tol).has_value();
}

int SpanSolver::rank(double rel_threshold) const {
  const auto& sv = impl_->svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cut = rel_threshold * sv(0);
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) ++r;
  return r;
}

bool SpanSolver::independent(double rel_threshold) const {
  return rank(rel_threshold) == n_basis_;
}

}  // namespace sandwich
