#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sandwich/errors.hpp"

namespace sandwich {

class FilteredSpace;
using SpacePtr = std::shared_ptr<const FilteredSpace>;

// Finite filtered probability space: atoms with strictly positive
// probabilities, a strictly increasing trading-time grid t_0 < ... < t_K,
// and one partition of the atoms per grid point, each refining the last.
// The partition at the final grid point must be the discrete one.
class FilteredSpace {
 public:
  using Cell = std::vector<int>;            // atom indices
  using Partition = std::vector<Cell>;

  static SpacePtr create(std::vector<std::string> atoms,
                         std::vector<double> probs,
                         std::vector<double> times,
                         std::vector<Partition> partitions);

  int n_atoms() const { return static_cast<int>(probs_.size()); }
  int n_levels() const { return static_cast<int>(times_.size()); }  // K + 1
  int last_level() const { return n_levels() - 1; }                 // K

  const std::vector<std::string>& atoms() const { return atoms_; }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<double>& times() const { return times_; }
  double prob(int atom) const { return probs_[atom]; }
  double time(int level) const { return times_[level]; }

  const Partition& cells(int level) const { return partitions_[level]; }
  int n_cells(int level) const { return static_cast<int>(partitions_[level].size()); }
  // Cell index of `atom` in the partition at `level`.
  int cell_of(int level, int atom) const { return cell_of_[level][atom]; }
  double cell_mass(int level, int cell) const { return cell_mass_[level][cell]; }

  void require_level(int level) const;

 private:
  FilteredSpace() = default;

  std::vector<std::string> atoms_;
  std::vector<double> probs_;
  std::vector<double> times_;
  std::vector<Partition> partitions_;
  std::vector<std::vector<int>> cell_of_;      // [level][atom]
  std::vector<std::vector<double>> cell_mass_; // [level][cell]
};

// Element of L_inf(F_level): one real value per atom, constant on each cell
// of the partition at `level`. The level is always computed by scanning the
// partitions; declaring one that differs from the computed value is an error.
class RandomVariable {
 public:
  RandomVariable(SpacePtr space, std::vector<double> values);
  RandomVariable(SpacePtr space, std::vector<double> values, int declared_level);

  static RandomVariable constant(SpacePtr space, double value);
  // Indicator of one cell of the partition at `level`.
  static RandomVariable cell_indicator(SpacePtr space, int level, int cell);

  const SpacePtr& space() const { return space_; }
  const std::vector<double>& values() const { return values_; }
  int level() const { return level_; }
  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int atom) const { return values_[atom]; }

  // Value on a cell of the partition at `level` (well defined because the
  // variable is constant there); requires level >= this->level().
  double value_on_cell(int level, int cell) const;

  double min_value() const;
  double max_value() const;
  double sup_norm() const;

 private:
  SpacePtr space_;
  std::vector<double> values_;
  int level_;
};

// Atom-wise algebra. Both operands must live on the same FilteredSpace
// instance (checked by pointer identity).
RandomVariable operator+(const RandomVariable& a, const RandomVariable& b);
RandomVariable operator-(const RandomVariable& a, const RandomVariable& b);
RandomVariable operator*(const RandomVariable& a, const RandomVariable& b);
RandomVariable operator*(double s, const RandomVariable& a);
RandomVariable operator-(const RandomVariable& a);
RandomVariable operator+(const RandomVariable& a, double s);
RandomVariable operator-(const RandomVariable& a, double s);

RandomVariable positive_part(const RandomVariable& a);
RandomVariable negative_part(const RandomVariable& a);

double expectation(const RandomVariable& x);

// E[x | F_k]: cell-wise probability-weighted average; result level <= k.
RandomVariable cond_expect(const RandomVariable& x, int k);
// E_Q[x | F_k] for dQ/dP proportional to f >= 0; every cell of level k must
// carry positive f-mass.
RandomVariable cond_expect_under(const RandomVariable& f, const RandomVariable& x, int k);
// E[x^2 | F_k].
RandomVariable cond_moment2(const RandomVariable& x, int k);
// E[x^2|F_k] - E[x|F_k]^2, clamped at zero (tolerance 1e-12).
RandomVariable cond_variance(const RandomVariable& x, int k);

enum class ExtremaMode { Max, Min };

// Atom-wise max/min over a non-empty list on a common space.
RandomVariable pointwise_extrema(const std::vector<RandomVariable>& xs, ExtremaMode mode);
RandomVariable pointwise_max(const std::vector<RandomVariable>& xs);
RandomVariable pointwise_min(const std::vector<RandomVariable>& xs);

void require_same_space(const RandomVariable& a, const RandomVariable& b);

// For coarse <= fine: the fine-partition cell indices inside each coarse cell.
std::vector<std::vector<int>> subcells(const FilteredSpace& space, int coarse, int fine);

}  // namespace sandwich
