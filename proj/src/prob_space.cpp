#include "sandwich/prob_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace sandwich {

namespace {

constexpr double kProbSumTol = 1e-12;

std::string cell_to_string(const FilteredSpace::Cell& cell) {
  std::ostringstream os;
  os << "{";
  for (size_t i = 0; i < cell.size(); ++i) os << (i ? "," : "") << cell[i];
  os << "}";
  return os.str();
}

}  // namespace

SpacePtr FilteredSpace::create(std::vector<std::string> atoms,
                               std::vector<double> probs,
                               std::vector<double> times,
                               std::vector<Partition> partitions) {
  std::vector<std::string> issues;
  const int n = static_cast<int>(probs.size());

  if (atoms.empty()) {
    atoms.reserve(n);
    for (int i = 0; i < n; ++i) atoms.push_back("w" + std::to_string(i + 1));
  }
  if (static_cast<int>(atoms.size()) != n)
    issues.push_back("space.atoms: expected " + std::to_string(n) + " ids, got " +
                     std::to_string(atoms.size()));
  if (n == 0) issues.push_back("space.probs: empty");

  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(probs[i] > 0.0))
      issues.push_back("space.probs[" + std::to_string(i) + "]: must be > 0, got " +
                       std::to_string(probs[i]));
    sum += probs[i];
  }
  if (n > 0 && std::abs(sum - 1.0) > kProbSumTol)
    issues.push_back("space.probs: sum to " + std::to_string(sum) +
                     ", expected 1 within 1e-12");

  if (times.size() < 2) {
    issues.push_back("space.times: need at least two grid points");
  } else {
    for (size_t k = 1; k < times.size(); ++k)
      if (!(times[k] > times[k - 1]))
        issues.push_back("space.times: not strictly increasing at index " + std::to_string(k));
  }

  if (partitions.size() != times.size())
    issues.push_back("space.partitions: expected one partition per grid point (" +
                     std::to_string(times.size()) + "), got " +
                     std::to_string(partitions.size()));

  if (!issues.empty()) throw ValidationError(issues);

  const int levels = static_cast<int>(times.size());
  std::vector<std::vector<int>> cell_of(levels, std::vector<int>(n, -1));
  for (int k = 0; k < levels; ++k) {
    std::vector<bool> seen(n, false);
    for (size_t c = 0; c < partitions[k].size(); ++c) {
      if (partitions[k][c].empty())
        issues.push_back("space.partitions[" + std::to_string(k) + "][" + std::to_string(c) +
                         "]: empty cell");
      for (int atom : partitions[k][c]) {
        if (atom < 0 || atom >= n) {
          issues.push_back("space.partitions[" + std::to_string(k) +
                           "]: atom index out of range: " + std::to_string(atom));
          continue;
        }
        if (seen[atom])
          issues.push_back("space.partitions[" + std::to_string(k) +
                           "]: atom " + std::to_string(atom) + " covered twice");
        seen[atom] = true;
        cell_of[k][atom] = static_cast<int>(c);
      }
    }
    for (int i = 0; i < n; ++i)
      if (!seen[i])
        issues.push_back("space.partitions[" + std::to_string(k) + "]: atom " +
                         std::to_string(i) + " not covered");
  }
  if (!issues.empty()) throw ValidationError(issues);

  // Refinement: every cell at level k+1 sits inside exactly one cell at k.
  for (int k = 0; k + 1 < levels; ++k) {
    for (const auto& cell : partitions[k + 1]) {
      const int parent = cell_of[k][cell.front()];
      for (int atom : cell)
        if (cell_of[k][atom] != parent) {
          issues.push_back("space.partitions[" + std::to_string(k + 1) + "]: cell " +
                           cell_to_string(cell) + " straddles two cells of level " +
                           std::to_string(k));
          break;
        }
    }
  }
  for (const auto& cell : partitions.back())
    if (cell.size() != 1) {
      issues.push_back("space.partitions: final partition must be discrete, found cell " +
                       cell_to_string(cell));
      break;
    }
  if (!issues.empty()) throw ValidationError(issues);

  auto space = std::shared_ptr<FilteredSpace>(new FilteredSpace());
  space->atoms_ = std::move(atoms);
  space->probs_ = std::move(probs);
  space->times_ = std::move(times);
  space->partitions_ = std::move(partitions);
  space->cell_of_ = std::move(cell_of);
  space->cell_mass_.resize(levels);
  for (int k = 0; k < levels; ++k) {
    space->cell_mass_[k].resize(space->partitions_[k].size(), 0.0);
    for (size_t c = 0; c < space->partitions_[k].size(); ++c)
      for (int atom : space->partitions_[k][c])
        space->cell_mass_[k][c] += space->probs_[atom];
  }
  return space;
}

void FilteredSpace::require_level(int level) const {
  if (level < 0 || level >= n_levels())
    throw ValidationError("grid index " + std::to_string(level) + " out of range [0, " +
                          std::to_string(last_level()) + "]");
}

namespace {

int computed_level(const FilteredSpace& space, const std::vector<double>& values) {
  for (int k = 0; k < space.n_levels(); ++k) {
    bool constant = true;
    for (const auto& cell : space.cells(k)) {
      const double v0 = values[cell.front()];
      for (int atom : cell)
        if (values[atom] != v0) {  // exact equality by design
          constant = false;
          break;
        }
      if (!constant) break;
    }
    if (constant) return k;
  }
    // unreachable: the final partition is discrete
  return space.last_level();
}

}  // namespace

RandomVariable::RandomVariable(SpacePtr space, std::vector<double> values)
    : space_(std::move(space)), values_(std::move(values)) {
  if (!space_) throw ValidationError("random variable: null space");
  if (static_cast<int>(values_.size()) != space_->n_atoms())
    throw ValidationError("random variable: expected " + std::to_string(space_->n_atoms()) +
                          " values, got " + std::to_string(values_.size()));
  level_ = computed_level(*space_, values_);
}

RandomVariable::RandomVariable(SpacePtr space, std::vector<double> values, int declared_level)
    : RandomVariable(std::move(space), std::move(values)) {
  if (declared_level != level_)
    throw ValidationError("random variable: declared level " + std::to_string(declared_level) +
                          " but computed level " + std::to_string(level_));
}

RandomVariable RandomVariable::constant(SpacePtr space, double value) {
  const int n = space->n_atoms();
  return RandomVariable(std::move(space), std::vector<double>(n, value));
}

RandomVariable RandomVariable::cell_indicator(SpacePtr space, int level, int cell) {
  space->require_level(level);
  if (cell < 0 || cell >= space->n_cells(level))
    throw ValidationError("cell index out of range");
  std::vector<double> v(space->n_atoms(), 0.0);
  for (int atom : space->cells(level)[cell]) v[atom] = 1.0;
  return RandomVariable(std::move(space), std::move(v));
}

double RandomVariable::value_on_cell(int level, int cell) const {
  space_->require_level(level);
  if (level < level_)
    throw ValidationError("value_on_cell: variable has level " + std::to_string(level_) +
                          ", not constant on cells of level " + std::to_string(level));
  return values_[space_->cells(level)[cell].front()];
}

double RandomVariable::min_value() const {
  return *std::min_element(values_.begin(), values_.end());
}

double RandomVariable::max_value() const {
  return *std::max_element(values_.begin(), values_.end());
}

double RandomVariable::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

void require_same_space(const RandomVariable& a, const RandomVariable& b) {
  if (a.space() != b.space())
    throw ValidationError("random variables live on different spaces");
}

namespace {

template <typename F>
RandomVariable zip(const RandomVariable& a, const RandomVariable& b, F f) {
  require_same_space(a, b);
  std::vector<double> v(a.size());
  for (int i = 0; i < a.size(); ++i) v[i] = f(a[i], b[i]);
  return RandomVariable(a.space(), std::move(v));
}

template <typename F>
RandomVariable map(const RandomVariable& a, F f) {
  std::vector<double> v(a.size());
  for (int i = 0; i < a.size(); ++i) v[i] = f(a[i]);
  return RandomVariable(a.space(), std::move(v));
}

}  // namespace

RandomVariable operator+(const RandomVariable& a, const RandomVariable& b) {
  return zip(a, b, [](double x, double y) { return x + y; });
}
RandomVariable operator-(const RandomVariable& a, const RandomVariable& b) {
  return zip(a, b, [](double x, double y) { return x - y; });
}
RandomVariable operator*(const RandomVariable& a, const RandomVariable& b) {
  return zip(a, b, [](double x, double y) { return x * y; });
}
RandomVariable operator*(double s, const RandomVariable& a) {
  return map(a, [s](double x) { return s * x; });
}
RandomVariable operator-(const RandomVariable& a) {
  return map(a, [](double x) { return -x; });
}
RandomVariable operator+(const RandomVariable& a, double s) {
  return map(a, [s](double x) { return x + s; });
}
RandomVariable operator-(const RandomVariable& a, double s) {
  return map(a, [s](double x) { return x - s; });
}

RandomVariable positive_part(const RandomVariable& a) {
  return map(a, [](double x) { return std::max(0.0, x); });
}
RandomVariable negative_part(const RandomVariable& a) {
  return map(a, [](double x) { return std::max(0.0, -x); });
}

double expectation(const RandomVariable& x) {
  double e = 0.0;
  for (int i = 0; i < x.size(); ++i) e += x.space()->prob(i) * x[i];
  return e;
}

RandomVariable cond_expect(const RandomVariable& x, int k) {
  const auto& space = *x.space();
  space.require_level(k);
  std::vector<double> v(x.size());
  for (int c = 0; c < space.n_cells(k); ++c) {
    double num = 0.0;
    for (int atom : space.cells(k)[c]) num += space.prob(atom) * x[atom];
    const double avg = num / space.cell_mass(k, c);
    for (int atom : space.cells(k)[c]) v[atom] = avg;
  }
  return RandomVariable(x.space(), std::move(v));
}

RandomVariable cond_expect_under(const RandomVariable& f, const RandomVariable& x, int k) {
  require_same_space(f, x);
  const auto& space = *x.space();
  space.require_level(k);
  std::vector<double> v(x.size());
  for (int c = 0; c < space.n_cells(k); ++c) {
    double num = 0.0, den = 0.0;
    for (int atom : space.cells(k)[c]) {
      num += space.prob(atom) * f[atom] * x[atom];
      den += space.prob(atom) * f[atom];
    }
    if (!(den > 0.0))
      throw EquivalenceError("conditional expectation: zero mass on cell " +
                             std::to_string(c) + " of level " + std::to_string(k));
    const double avg = num / den;
    for (int atom : space.cells(k)[c]) v[atom] = avg;
  }
  return RandomVariable(x.space(), std::move(v));
}

RandomVariable cond_moment2(const RandomVariable& x, int k) {
  return cond_expect(x * x, k);
}

RandomVariable cond_variance(const RandomVariable& x, int k) {
  const RandomVariable m2 = cond_moment2(x, k);
  const RandomVariable m1 = cond_expect(x, k);
  std::vector<double> v(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double var = m2[i] - m1[i] * m1[i];
    v[i] = var > 0.0 ? var : 0.0;  // negative only by roundoff (|.| <= 1e-12 scale)
  }
  return RandomVariable(x.space(), std::move(v));
}

RandomVariable pointwise_extrema(const std::vector<RandomVariable>& xs, ExtremaMode mode) {
  if (xs.empty())
    throw ValidationError("pointwise_extrema: empty list, extremum ill-posed");
  RandomVariable out = xs.front();
  for (size_t j = 1; j < xs.size(); ++j)
    out = mode == ExtremaMode::Max
              ? zip(out, xs[j], [](double x, double y) { return std::max(x, y); })
              : zip(out, xs[j], [](double x, double y) { return std::min(x, y); });
  return out;
}

RandomVariable pointwise_max(const std::vector<RandomVariable>& xs) {
  return pointwise_extrema(xs, ExtremaMode::Max);
}
RandomVariable pointwise_min(const std::vector<RandomVariable>& xs) {
  return pointwise_extrema(xs, ExtremaMode::Min);
}

std::vector<std::vector<int>> subcells(const FilteredSpace& space, int coarse, int fine) {
  space.require_level(coarse);
  space.require_level(fine);
  if (coarse > fine)
    throw ValidationError("subcells: coarse level exceeds fine level");
  std::vector<std::vector<int>> out(space.n_cells(coarse));
  for (int d = 0; d < space.n_cells(fine); ++d) {
    const int atom = space.cells(fine)[d].front();
    out[space.cell_of(coarse, atom)].push_back(d);
  }
  return out;
}

}  // namespace sandwich
