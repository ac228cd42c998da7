#pragma once

// Internal per-cell convex programs shared by the sandwich checker and the
// one-step extension. Everything here works on one F_s-cell at a time, over
// the F_t-cells inside it.

#include <utility>
#include <vector>

#include "sandwich/bounds.hpp"
#include "sandwich/price_system.hpp"

namespace sandwich::detail {

// Geometry of one F_s-cell: its F_t-subcells, their conditional masses, the
// operator basis restricted to the subcells and the image values on the cell.
struct CellGeometry {
  int s = 0, t = 0;
  int s_cell = 0;
  std::vector<int> tcells;                    // global F_t-cell indices
  std::vector<double> pi;                     // conditional masses, sum 1
  std::vector<std::vector<double>> basis_on;  // [j][d]
  std::vector<double> image_at;               // [j]
};

std::vector<CellGeometry> make_cell_geometry(const PartialOperator& op);

// m/M on one cell as min/max of linear functionals over the subcells.
// LP-representable families carry their complete support lists; good-deal
// bounds answer through the water-filling kernel on demand.
class BoundOracle {
 public:
  static BoundOracle make(const BoundFamily& bounds, const CellGeometry& geo,
                          bool majorant_only);

  // value of m (resp. M) at a subcell vector, plus a supporting functional:
  // m(z') <= <w, z'> for all z' with equality at z (reverse for M).
  std::pair<double, std::vector<double>> m_at(const std::vector<double>& z) const;
  std::pair<double, std::vector<double>> M_at(const std::vector<double>& y) const;

  bool needs_cuts() const { return oracle_; }
  const std::vector<std::vector<double>>& m_supports() const { return m_supports_; }
  const std::vector<std::vector<double>>& M_supports() const { return M_supports_; }
  const std::vector<double>& pi() const { return pi_; }

 private:
  std::vector<std::vector<double>> m_supports_, M_supports_;
  bool oracle_ = false;
  double delta_ = 0.0;
  bool majorant_only_ = false;
  std::vector<double> pi_;
  int cell_ = -1;
};

// sup { m(Z) - x(X) - M(Y) : X in span, Z, Y >= 0 on subcells,
//       Z - X - Y <= rhs, 0 <= y <= y_cap, |alpha| <= alpha_cap }
// evaluated on this cell. Instantiations:
//   sandwich sup (rhs = 0, y_cap = 1), report with X negated;
//   extension lower endpoint c (rhs = +Y0);
//   extension upper endpoint d (rhs = -Y0), d = -sup.
struct CellProgramResult {
  double value = 0.0;             // true objective at the returned point
  std::vector<double> alpha;      // basis coordinates of X
  std::vector<double> z, y;       // per subcell
  bool capped = false;            // active variable cap: program unbounded
  int cuts_used = 0;
};

CellProgramResult cell_sup_program(const CellGeometry& geo, const BoundOracle& oracle,
                                   const std::vector<double>& rhs, double y_cap,
                                   double cut_tol = 1e-8, int max_cuts = 500);

// Good-deal extension intervals through the density characterization: the
// valid values for x(Y0) on one F_s-cell are the prices E_q[Y0] over
// conditional densities q on the subcells that reproduce the operator's
// images and spend at most delta^2 of quadratic budget. Infeasibility of
// that program is exactly the sandwich failing on the current span.
struct CellPriceRange {
  bool feasible = true;
  double lo = 0.0, hi = 0.0;
  std::string certificate;  // farkas note when infeasible
  int cuts_used = 0;
};
CellPriceRange cell_price_range(const CellGeometry& geo, double delta,
                                const std::vector<double>& y0, double cut_tol = 1e-9,
                                int max_cuts = 500);

// Caps are boundedness guards, well above the O(1) scale of normalized
// problems but small enough that cap-scale roundoff stays below the
// norm-stage pin slack (cap * machine-eps * rows << 1e-9).
inline constexpr double kAlphaCap = 1e2;
inline constexpr double kVarCap = 1e2;

}  // namespace sandwich::detail
