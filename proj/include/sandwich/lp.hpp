#pragma once

#include <limits>
#include <vector>

namespace sandwich::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { LessEq, GreaterEq, Equal };
enum class Status { Optimal, Infeasible, Unbounded };

struct Term {
  int var;
  double coef;
};

struct Result {
  Status status = Status::Optimal;
  std::vector<double> x;        // one value per variable (Optimal / Unbounded base point)
  double objective = 0.0;

  // Infeasible: multipliers over the constraint rows (in add order). The
  // combination y'A of constraint rows dominates 0 on every feasible point
  // while y'b stays positive; farkas_value = -y'b < 0 quantifies the gap.
  std::vector<double> farkas;
  double farkas_value = 0.0;

  // Unbounded: improving ray direction per variable, anchored at x.
  std::vector<double> ray;

  double phase1 = 0.0;  // residual infeasibility the first phase could not remove
};

// Small dense two-phase simplex with Bland's rule. Intended for the desk-
// scale programs in this library (tens to a few hundred rows); not a
// general-purpose solver.
class Problem {
 public:
  int add_variable(double lower = 0.0, double upper = kInf);
  int n_variables() const { return static_cast<int>(lower_.size()); }
  int n_constraints() const { return static_cast<int>(rows_.size()); }

  void add_constraint(std::vector<Term> terms, Sense sense, double rhs);
  // Defaults to minimization; pass maximize = true to flip.
  void set_objective(std::vector<Term> terms, bool maximize = false);

  Result solve(double tol = 1e-9) const;

  // Max violation of the Farkas conditions for a candidate certificate
  // (0 means the certificate is exact). Used by tests.
  double farkas_residual(const std::vector<double>& y) const;

 private:
  struct Row {
    std::vector<Term> terms;
    Sense sense;
    double rhs;
  };
  std::vector<double> lower_, upper_;
  std::vector<Row> rows_;
  std::vector<Term> objective_;
  bool maximize_ = false;
};

}  // namespace sandwich::lp
