#include "kinetic/series.hpp"

#include "kinetic/errors.hpp"

#include <algorithm>

namespace kinetic {

KnSeries KnSeries::constant(const Vec& v) {
  KnSeries s(static_cast<int>(v.size()));
  s.add({0, 0, 0}, v);
  return s;
}

void KnSeries::add(const Monomial& m, const Vec& v) {
  auto it = terms_.find(m);
  if (it == terms_.end())
    terms_.emplace(m, v);
  else
    it->second += v;
}

KnSeries& KnSeries::operator+=(const KnSeries& o) {
  if (size_ == 0) size_ = o.size_;
  for (const auto& [m, v] : o.terms_) add(m, v);
  return *this;
}

KnSeries KnSeries::operator+(const KnSeries& o) const {
  KnSeries r = *this;
  r += o;
  return r;
}

KnSeries KnSeries::operator*(double a) const {
  KnSeries r(size_);
  for (const auto& [m, v] : terms_) r.terms_.emplace(m, a * v);
  return r;
}

KnSeries KnSeries::shifted(const Monomial& d) const {
  KnSeries r(size_);
  for (const auto& [m, v] : terms_) r.terms_.emplace(Monomial{m[0] + d[0], m[1] + d[1], m[2] + d[2]}, v);
  return r;
}

KnSeries KnSeries::apply(const Mat& op) const {
  KnSeries r(static_cast<int>(op.rows()));
  for (const auto& [m, v] : terms_) r.terms_.emplace(m, op * v);
  return r;
}

bool KnSeries::truncate_eps(int cap) {
  bool dropped = false;
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (it->first[0] > cap) {
      it = terms_.erase(it);
      dropped = true;
    } else {
      ++it;
    }
  }
  return dropped;
}

double KnSeries::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [k, v] : terms_)
    if (v.size()) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

void KnSeries::prune(double rel) {
  double cut = rel * max_abs_coeff();
  for (auto it = terms_.begin(); it != terms_.end();) {
    Vec& v = it->second;
    for (int i = 0; i < v.size(); ++i)
      if (std::abs(v(i)) <= cut) v(i) = 0.0;
    if (v.size() == 0 || v.cwiseAbs().maxCoeff() == 0.0)
      it = terms_.erase(it);
    else
      ++it;
  }
}

int KnSeries::eps_degree() const {
  int d = -1;
  for (const auto& [m, v] : terms_) d = std::max(d, m[0]);
  return d;
}

Vec KnSeries::coeff(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? Vec::Zero(size_) : it->second;
}

std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::full:
      return "full";
    case SystemKind::hyperbolic:
      return "hyperbolic";
    case SystemKind::regularized:
      return "regularized";
  }
  return "full";
}

namespace {

// f_l = seed + eps * Ld (S s + Z z) f_{l-1}; closure = R (S s + Z z) f_l.
IterationTrace run(const Vec& seed, const Mat& ldag, const Mat& s_op, const Mat& z_op, const Mat& closure_rows,
                   int l_max, int eps_cap) {
  if (l_max < 0) throw UsageError("iteration count must be nonnegative");
  if (eps_cap < 0) eps_cap = l_max;
  IterationTrace tr;
  KnSeries f0 = KnSeries::constant(seed);
  Mat ls = ldag * s_op, lz = ldag * z_op;
  Mat cs = closure_rows * s_op, cz = closure_rows * z_op;
  auto closure = [&](const KnSeries& f) {
    KnSeries k = f.apply(cs).shifted({0, 1, 0}) + f.apply(cz).shifted({0, 0, 1});
    k.prune();
    return k;
  };
  tr.iterates.push_back(f0);
  tr.closures.push_back(closure(f0));
  for (int l = 1; l <= l_max; ++l) {
    const KnSeries& prev = tr.iterates.back();
    KnSeries next = f0 + (prev.apply(ls).shifted({1, 1, 0}) + prev.apply(lz).shifted({1, 0, 1}));
    next.prune();
    if (next.truncate_eps(eps_cap)) tr.truncated = true;
    tr.closures.push_back(closure(next));
    tr.iterates.push_back(std::move(next));
  }
  return tr;
}

}  // namespace

IterationTrace iterate_full(const Mat& ldag, const Mat& xi, const Mat& kernel, const Vec& seed, int l_max,
                            int eps_cap) {
  if (seed.size() != kernel.cols()) throw ShapeError("seed must be given in V(0) coordinates");
  const int n = static_cast<int>(ldag.rows());
  auto tr = run(kernel * seed, ldag, Mat::Identity(n, n), xi, kernel.transpose(), l_max, eps_cap);
  tr.system = SystemKind::full;
  tr.seed_index = -1;
  return tr;
}

IterationTrace iterate_full(const Mat& ldag, const Mat& xi, const Mat& kernel, int seed_index, int l_max, int eps_cap) {
  if (seed_index < 0 || seed_index >= kernel.cols()) throw UsageError("seed index out of range");
  auto tr = iterate_full(ldag, xi, kernel, Vec::Unit(kernel.cols(), seed_index), l_max, eps_cap);
  tr.seed_index = seed_index;
  return tr;
}

IterationTrace iterate_reduced(const ReducedOperators& ops, const Vec& seed, int l_max, int eps_cap) {
  const int n0 = ops.sys->dims[0];
  if (seed.size() != n0) throw ShapeError("seed must be given in V(0) coordinates");
  Mat rows = Mat::Zero(n0, ops.total);
  rows.leftCols(n0) = Mat::Identity(n0, n0);
  Vec f0 = Vec::Zero(ops.total);
  f0.head(n0) = seed;
  auto tr = run(f0, ops.Ldag, ops.S, ops.Z, rows, l_max, eps_cap);
  tr.system = ops.variant == Variant::hyperbolic ? SystemKind::hyperbolic : SystemKind::regularized;
  tr.seed_index = -1;
  return tr;
}

IterationTrace iterate_reduced(const ReducedOperators& ops, int seed_index, int l_max, int eps_cap) {
  if (seed_index < 0 || seed_index >= ops.sys->dims[0]) throw UsageError("seed index out of range");
  auto tr = iterate_reduced(ops, Vec::Unit(ops.sys->dims[0], seed_index), l_max, eps_cap);
  tr.seed_index = seed_index;
  return tr;
}

DiscrepancyReport compare_closures(const IterationTrace& a, const IterationTrace& b, int at, int eps_degree,
                                   double tol) {
  if (a.seed_index != b.seed_index) throw UsageError("closures built from different seeds");
  if (at >= static_cast<int>(a.closures.size()) || at >= static_cast<int>(b.closures.size()))
    throw UsageError("iteration index beyond the traces");
  const KnSeries& ka = a.closures[at];
  const KnSeries& kb = b.closures[at];
  double global = std::max(ka.max_abs_coeff(), kb.max_abs_coeff());
  DiscrepancyReport rep;
  rep.tol = tol;
  rep.per_power.assign(eps_degree + 1, 0.0);
  std::map<Monomial, int> keys;
  for (const auto& [m, v] : ka.terms()) keys[m] = 1;
  for (const auto& [m, v] : kb.terms()) keys[m] = 1;
  for (const auto& [m, unused] : keys) {
    if (m[0] > eps_degree) continue;
    Vec va = ka.coeff(m), vb = kb.coeff(m);
    double scale = std::max({va.cwiseAbs().maxCoeff(), vb.cwiseAbs().maxCoeff(), 1e-12 * global, 1e-300});
    double rel = (va - vb).cwiseAbs().maxCoeff() / scale;
    rep.per_power[m[0]] = std::max(rep.per_power[m[0]], rel);
  }
  for (int p = 0; p <= eps_degree; ++p)
    if (rep.per_power[p] > tol) {
      rep.first_discrepancy = p;
      break;
    }
  return rep;
}

int shear_seed_index(int dim) {
  if (dim != 3) throw UsageError("transport coefficients need D=3");
  return 2;
}

int energy_seed_index(int dim) { return dim + 1; }

NsfCoefficients nsf_coefficients(const IterationTrace& shear, const IterationTrace& energy) {
  const int is = shear_seed_index(3), ie = energy_seed_index(3);
  if (shear.seed_index != is || energy.seed_index != ie) throw UsageError("unexpected seeds for transport extraction");
  if (shear.closures.size() < 2 || energy.closures.size() < 2) throw UsageError("need at least one iteration");
  // s u + ... - mu z^2 u = 0 and (3/2) s th - kappa z^2 th = 0
  double gu = shear.closures[1].coeff({1, 0, 2})(is);
  double ge = energy.closures[1].coeff({1, 0, 2})(ie);
  NsfCoefficients c;
  c.viscosity = -gu;
  c.conductivity = -1.5 * ge;
  c.prandtl = 2.5 * c.viscosity / c.conductivity;
  return c;
}

}  // namespace kinetic
