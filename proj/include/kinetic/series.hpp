#pragma once

#include "kinetic/assembly.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace kinetic {

// Vector-valued polynomial in commuting symbols (eps, s, z).
using Monomial = std::array<int, 3>;

class KnSeries {
 public:
  KnSeries() = default;
  explicit KnSeries(int size) : size_(size) {}
  static KnSeries constant(const Vec& v);

  int size() const { return size_; }
  const std::map<Monomial, Vec>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  void add(const Monomial& m, const Vec& v);
  KnSeries& operator+=(const KnSeries& o);
  KnSeries operator+(const KnSeries& o) const;
  KnSeries operator*(double a) const;
  // Multiply by eps^p s^q z^r.
  KnSeries shifted(const Monomial& m) const;
  KnSeries apply(const Mat& op) const;
  // Drop terms whose eps power exceeds cap; true if anything was dropped.
  bool truncate_eps(int cap);
  void prune(double rel = 1e-14);
  int eps_degree() const;
  double max_abs_coeff() const;
  // Coefficient vector, zero if absent.
  Vec coeff(const Monomial& m) const;

 private:
  int size_ = 0;
  std::map<Monomial, Vec> terms_;
};

enum class SystemKind { full, hyperbolic, regularized };
std::string to_string(SystemKind k);

struct IterationTrace {
  SystemKind system = SystemKind::full;
  int seed_index = 0;
  std::vector<KnSeries> iterates;
  std::vector<KnSeries> closures;  // V(0) coordinates
  bool truncated = false;
};

// f_l = seed + eps L+ (s + z Xi) f_{l-1} on the big basis.
IterationTrace iterate_full(const Mat& ldag, const Mat& xi, const Mat& kernel, int seed_index, int l_max,
                            int eps_cap = -1);
// Same recursion with the hat (or tilde) reduced operators.
IterationTrace iterate_reduced(const ReducedOperators& ops, int seed_index, int l_max, int eps_cap = -1);
// Seeds given as V(0) coordinates; seed_index is recorded as -1.
IterationTrace iterate_full(const Mat& ldag, const Mat& xi, const Mat& kernel, const Vec& seed, int l_max,
                            int eps_cap = -1);
IterationTrace iterate_reduced(const ReducedOperators& ops, const Vec& seed, int l_max, int eps_cap = -1);

struct DiscrepancyReport {
  std::vector<double> per_power;  // max relative difference at eps^p
  int first_discrepancy = -1;     // -1: none up to the cap
  double tol = 1e-9;
};
// Compares closures at iteration index `at` for eps powers 0..eps_degree.
DiscrepancyReport compare_closures(const IterationTrace& a, const IterationTrace& b, int at, int eps_degree,
                                   double tol = 1e-9);

// Transport coefficients read off the eps*z^2 closure coefficients of a D=3
// trace pair: shear seed (transverse momentum) and energy seed. Unit density
// and temperature, so p = 1 and c_p = 5/2.
struct NsfCoefficients {
  double viscosity = 0.0;
  double conductivity = 0.0;
  double prandtl = 0.0;
};
NsfCoefficients nsf_coefficients(const IterationTrace& shear, const IterationTrace& energy);
// Seed indices in the V(0) frame used by nsf_coefficients.
int shear_seed_index(int dim);
int energy_seed_index(int dim);

}  // namespace kinetic
