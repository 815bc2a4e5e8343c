#include "kinetic/collision.hpp"

#include "kinetic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace kinetic {

Mat rotation_generator(const BasisTable& table, int p, int q) {
  const int n = table.size();
  Mat j = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    const auto& c = table[a].c;
    auto up = c;
    up[p] += 1;
    up[q] -= 1;
    int b = table.index_of(up);
    if (b >= 0) j(b, a) += std::sqrt(static_cast<double>(c[q] * (c[p] + 1)));
    auto dn = c;
    dn[p] -= 1;
    dn[q] += 1;
    b = table.index_of(dn);
    if (b >= 0) j(b, a) -= std::sqrt(static_cast<double>(c[p] * (c[q] + 1)));
  }
  return j;
}

namespace {

std::vector<int> degree_indices(const BasisTable& table, int n) {
  std::vector<int> out;
  for (int a = 0; a < table.size(); ++a)
    if (table[a].degree == n) out.push_back(a);
  return out;
}

// Raising half of the theta ladder: degree n -> n+2, commutes with rotations.
Mat radial_raise(const BasisTable& table) {
  Mat r = ladder_matrices(table).dtheta;
  for (int a = 0; a < table.size(); ++a) r(a, a) = 0.0;
  return r;
}

}  // namespace

std::vector<Multiplet> rotational_multiplets(const BasisTable& table) {
  std::vector<Multiplet> out;
  const int n = table.size();
  const int nmax = table.max_degree();
  if (table.dim() == 1) {
    for (int d = 0; d <= nmax; ++d) out.push_back({d, d % 2, d / 2, Mat(Vec::Unit(n, d))});
    return out;
  }
  Mat jx = rotation_generator(table, 1, 2);
  Mat jy = rotation_generator(table, 2, 0);
  Mat jz = rotation_generator(table, 0, 1);
  Mat casimir = -(jx * jx + jy * jy + jz * jz);
  Mat raise = radial_raise(table);

  std::vector<Mat> harmonic(nmax + 1);
  for (int ell = 0; ell <= nmax; ++ell) {
    auto ids = degree_indices(table, ell);
    const int m = static_cast<int>(ids.size());
    Mat block(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) block(i, j) = casimir(ids[i], ids[j]);
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(block));
    const int w = 2 * ell + 1;
    Mat top = es.eigenvectors().rightCols(w);
    Mat frame = Mat::Zero(n, w);
    for (int i = 0; i < m; ++i) frame.row(ids[i]) = top.row(i);
    harmonic[ell] = frame;
  }
  for (int d = 0; d <= nmax; ++d) {
    for (int ell = d % 2; ell <= d; ell += 2) {
      int k = (d - ell) / 2;
      Mat f = harmonic[ell];
      for (int r = 0; r < k; ++r) f = raise * f;
      // Schur: raised columns stay orthogonal with a common norm.
      for (int c = 0; c < f.cols(); ++c) f.col(c).normalize();
      out.push_back({d, ell, k, f});
    }
  }
  return out;
}

Mat kernel_frame(const BasisTable& table) {
  const int d = table.dim();
  Mat k = Mat::Zero(table.size(), d + 2);
  k(table.zero(), 0) = 1.0;
  for (int i = 0; i < d; ++i) {
    k(table.unit(i), 1 + i) = 1.0;
    k(table.doubled(i), d + 1) = 1.0 / std::sqrt(static_cast<double>(d));
  }
  return k;
}

const std::vector<std::string>& collision_kind_names() {
  static const std::vector<std::string> names{"bgk", "shakhov", "es-bgk", "maxwell-diagonal", "coupled-synthetic",
                                              "custom-matrix"};
  return names;
}

CollisionKind parse_collision_kind(const std::string& s) {
  const auto& names = collision_kind_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<CollisionKind>(i);
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown collision kind '" + s + "' (valid: " + valid + ")");
}

std::string to_string(CollisionKind k) { return collision_kind_names()[static_cast<int>(k)]; }

double maxwell_eigenvalue(int k, int ell) {
  // Isotropic-scattering Maxwell molecules: integrate over the deflection angle.
  auto legendre = [](int l, double x) {
    double p0 = 1.0, p1 = x;
    if (l == 0) return p0;
    for (int j = 1; j < l; ++j) {
      double p2 = ((2 * j + 1) * x * p1 - j * p0) / (j + 1);
      p0 = p1;
      p1 = p2;
    }
    return p1;
  };
  const int nodes = 64;
  // Gauss-Legendre nodes by Golub-Welsch.
  Mat jac = Mat::Zero(nodes, nodes);
  for (int j = 1; j < nodes; ++j) {
    jac(j, j - 1) = j / std::sqrt(4.0 * j * j - 1.0);
    jac(j - 1, j) = jac(j, j - 1);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jac);
  const double pi = 3.14159265358979323846;
  double sum = 0.0;
  for (int i = 0; i < nodes; ++i) {
    double x = es.eigenvalues()(i);
    double w = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    double chi = 0.5 * pi * (x + 1.0);
    double c = std::cos(0.5 * chi), s = std::sin(0.5 * chi);
    int p = 2 * k + ell;
    double val = std::pow(c, p) * legendre(ell, c) + std::pow(s, p) * legendre(ell, s) - 1.0 -
                 ((k == 0 && ell == 0) ? 1.0 : 0.0);
    sum += w * 0.5 * pi * std::sin(chi) * val;
  }
  return sum;
}

Mat read_dense_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (numeric) rows.push_back(row);  // header rows are skipped
  }
  if (rows.empty()) throw ConfigError(path + ": no numeric rows");
  Mat m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ShapeError(path + ": ragged rows");
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

namespace {

std::map<std::pair<int, int>, double> read_eigen_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open eigenvalue table " + path);
  std::map<std::pair<int, int>, double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string deg, lab, val;
    std::getline(ss, deg, ',');
    std::getline(ss, lab, ',');
    std::getline(ss, val, ',');
    if (deg == "degree") continue;
    try {
      if (lab.empty() || lab[0] != 'l') throw std::invalid_argument(lab);
      out[{std::stoi(deg), std::stoi(lab.substr(1))}] = std::stod(val);
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected degree,l<ell>,eigenvalue");
    }
  }
  return out;
}

Mat from_multiplet_eigenvalues(const BasisTable& table, const std::vector<Multiplet>& mults,
                               const std::map<std::pair<int, int>, double>& eig) {
  Mat l = Mat::Zero(table.size(), table.size());
  for (const auto& m : mults) {
    auto it = eig.find({m.degree, m.ell});
    if (it == eig.end()) continue;
    l += it->second * m.frame * m.frame.transpose();
  }
  return l;
}

bool is_kernel_multiplet(int ell, int k) { return (k == 0 && ell <= 1) || (k == 1 && ell == 0); }

Mat synthetic_coupled(const BasisTable& table, const std::vector<Multiplet>& mults, std::uint64_t seed) {
  Rng rng(seed);
  Mat l = Mat::Zero(table.size(), table.size());
  int max_ell = 0;
  for (const auto& m : mults) max_ell = std::max(max_ell, m.ell);
  for (int ell = 0; ell <= max_ell; ++ell) {
    std::vector<const Multiplet*> radial;
    for (const auto& m : mults)
      if (m.ell == ell && !is_kernel_multiplet(m.ell, m.k)) radial.push_back(&m);
    const int r = static_cast<int>(radial.size());
    if (r == 0) continue;
    Eigen::HouseholderQR<Mat> qr(rng.normal_mat(r, r));
    Mat q = qr.householderQ();
    Vec lam(r);
    for (int i = 0; i < r; ++i) lam(i) = -0.3 - 2.7 * rng.uniform();
    Mat k = q * lam.asDiagonal() * q.transpose();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) l += k(i, j) * radial[i]->frame * radial[j]->frame.transpose();
  }
  return l;
}

}  // namespace

Mat build_linear_unchecked(const CollisionModel& model, const BasisTable& table) {
  if (!(model.tau > 0.0)) throw ConfigError("tau must be positive");
  const int n = table.size();
  Mat k = kernel_frame(table);
  Mat p0 = k * k.transpose();
  Mat id = Mat::Identity(n, n);
  auto mults = rotational_multiplets(table);
  auto multiplet_projector = [&](int ell, int kk) {
    Mat p = Mat::Zero(n, n);
    for (const auto& m : mults)
      if (m.ell == ell && m.k == kk) p += m.frame * m.frame.transpose();
    return p;
  };
  Mat l;
  switch (model.kind) {
    case CollisionKind::bgk:
      l = (p0 - id) / model.tau;
      break;
    case CollisionKind::shakhov:
      if (!(model.prandtl > 0.0)) throw ConfigError("prandtl must be positive");
      l = (p0 - id + (1.0 - model.prandtl) * multiplet_projector(1, 1)) / model.tau;
      break;
    case CollisionKind::es_bgk:
      if (!(model.prandtl > 0.0)) throw ConfigError("prandtl must be positive");
      // D=1 has no ell=2 block, so this reduces to bgk there.
      l = (p0 - id) / model.tau;
      if (table.dim() == 3) l += (1.0 - 1.0 / model.prandtl) * multiplet_projector(2, 0) / model.tau;
      break;
    case CollisionKind::maxwell_diagonal: {
      std::map<std::pair<int, int>, double> eig;
      for (const auto& m : mults) eig[{m.degree, m.ell}] = maxwell_eigenvalue(m.k, m.ell) / model.tau;
      if (!model.table_path.empty())
        for (const auto& [key, v] : read_eigen_table(model.table_path)) eig[key] = v;
      for (const auto& [key, v] : model.eigen_overrides) eig[key] = v;
      l = from_multiplet_eigenvalues(table, mults, eig);
      break;
    }
    case CollisionKind::coupled_synthetic:
      l = synthetic_coupled(table, mults, model.seed) / model.tau;
      break;
    case CollisionKind::custom_matrix: {
      if (model.table_path.empty()) throw ConfigError("custom-matrix needs a matrix file");
      Mat raw = read_dense_csv(model.table_path);
      if (raw.rows() != n || raw.cols() != n)
        throw ShapeError("custom matrix is " + std::to_string(raw.rows()) + "x" + std::to_string(raw.cols()) +
                         ", basis size is " + std::to_string(n));
      double asym = max_abs(raw - raw.transpose());
      if (asym > 1e-8) throw HypothesisError("custom matrix not symmetric (residual " + std::to_string(asym) + ")");
      Mat perp = id - p0;
      l = perp * symmetrized(raw) * perp;
      break;
    }
  }
  return symmetrized(l);
}

Mat build_linear(const CollisionModel& model, const BasisTable& table) {
  Mat l = build_linear_unchecked(model, table);
  auto rep = check_hypotheses(l, table);
  if (rep.kernel_dim != rep.expected_kernel_dim)
    throw HypothesisError("collision kernel has dimension " + std::to_string(rep.kernel_dim) + ", expected " +
                          std::to_string(rep.expected_kernel_dim));
  return l;
}

HypothesisReport check_hypotheses(const Mat& L, const BasisTable& table, double rel_tol) {
  HypothesisReport r;
  const int n = table.size();
  if (L.rows() != n || L.cols() != n) throw ShapeError("operator does not match basis size");
  double scale = std::max(max_abs(L), 1e-300);
  r.symmetry_residual = max_abs(L - L.transpose()) / scale;
  r.symmetric = r.symmetry_residual < 1e-12;

  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(L));
  double top = es.eigenvalues().cwiseAbs().maxCoeff();
  r.kernel_dim = 0;
  for (int i = 0; i < n; ++i)
    if (std::abs(es.eigenvalues()(i)) <= rel_tol * top) ++r.kernel_dim;
  r.expected_kernel_dim = table.dim() + 2;

  Mat k = kernel_frame(table);
  r.kernel_residual = max_abs(L * k) / scale;
  r.kernel_ok = r.kernel_dim == r.expected_kernel_dim && r.kernel_residual < 1e-10;

  Mat c = complement_frame(k, n);
  Eigen::SelfAdjointEigenSolver<Mat> ec(symmetrized(c.transpose() * L * c));
  r.max_complement_eigenvalue = ec.eigenvalues().maxCoeff();
  r.semidefinite = r.max_complement_eigenvalue < -rel_tol * top;
  double lo = ec.eigenvalues().cwiseAbs().minCoeff();
  double hi = ec.eigenvalues().cwiseAbs().maxCoeff();
  r.condition = lo > 0.0 ? hi / lo : INFINITY;
  r.invertible = r.condition < 1e12;
  return r;
}

Mat pseudo_inverse(const Mat& L, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(L));
  const Vec& lam = es.eigenvalues();
  double top = lam.cwiseAbs().maxCoeff();
  if (top == 0.0) return Mat::Zero(L.rows(), L.cols());
  Vec inv = Vec::Zero(lam.size());
  double lo = INFINITY;
  for (int i = 0; i < lam.size(); ++i) {
    if (std::abs(lam(i)) <= rel_tol * top) continue;
    inv(i) = 1.0 / lam(i);
    lo = std::min(lo, std::abs(lam(i)));
  }
  if (top / lo > 1e12)
    throw IllConditionedError("collision operator conditioning " + std::to_string(top / lo) + " exceeds 1e12");
  const Mat& v = es.eigenvectors();
  return symmetrized(v * inv.asDiagonal() * v.transpose());
}

Vec BilinearTensor::apply(const Vec& g, const Vec& h) const {
  Vec out = Vec::Zero(size);
  for (const auto& e : entries) out(e.a) += e.v * g(e.b) * h(e.c);
  return out;
}

QuadraticKind parse_quadratic_kind(const std::string& s) {
  if (s == "none") return QuadraticKind::none;
  if (s == "quadratic-bgk") return QuadraticKind::quadratic_bgk;
  if (s == "custom-tensor") return QuadraticKind::custom_tensor;
  throw ConfigError("unknown quadratic kind '" + s + "' (valid: none, quadratic-bgk, custom-tensor)");
}

std::string to_string(QuadraticKind k) {
  switch (k) {
    case QuadraticKind::none:
      return "none";
    case QuadraticKind::quadratic_bgk:
      return "quadratic-bgk";
    case QuadraticKind::custom_tensor:
      return "custom-tensor";
  }
  return "none";
}

namespace {

// Second-order forward-mode number: value, two first-order parts, cross part.
struct HyperDual {
  double v = 0, e1 = 0, e2 = 0, e12 = 0;
};
HyperDual operator+(HyperDual a, HyperDual b) { return {a.v + b.v, a.e1 + b.e1, a.e2 + b.e2, a.e12 + b.e12}; }
HyperDual operator-(HyperDual a, HyperDual b) { return {a.v - b.v, a.e1 - b.e1, a.e2 - b.e2, a.e12 - b.e12}; }
HyperDual operator*(HyperDual a, HyperDual b) {
  return {a.v * b.v, a.v * b.e1 + a.e1 * b.v, a.v * b.e2 + a.e2 * b.v,
          a.v * b.e12 + a.e1 * b.e2 + a.e2 * b.e1 + a.e12 * b.v};
}
HyperDual operator*(double s, HyperDual a) { return {s * a.v, s * a.e1, s * a.e2, s * a.e12}; }
HyperDual recip(HyperDual a) {
  double i = 1.0 / a.v;
  return {i, -a.e1 * i * i, -a.e2 * i * i, -a.e12 * i * i + 2.0 * a.e1 * a.e2 * i * i * i};
}
HyperDual lift(double v) { return {v, 0, 0, 0}; }
double lift_d(double v, double) { return v; }
HyperDual lift_d(double v, HyperDual) { return lift(v); }
double recip(double a) { return 1.0 / a; }

// E[He_n(X)] for X ~ N(u, theta), normalized by sqrt(n!).
template <class T>
T gaussian_hermite_mean(int n, T u, T theta) {
  T dt = theta - lift_d(1.0, u);
  T sum = lift_d(0.0, u);
  double nfact = std::tgamma(n + 1.0);
  for (int k = 0; 2 * k <= n; ++k) {
    double binom = std::tgamma(n + 1.0) / (std::tgamma(2 * k + 1.0) * std::tgamma(n - 2 * k + 1.0));
    double dfact = 1.0;
    for (int j = 2 * k - 1; j > 0; j -= 2) dfact *= j;
    T term = lift_d(binom * dfact, u);
    for (int j = 0; j < k; ++j) term = term * dt;
    for (int j = 0; j < n - 2 * k; ++j) term = term * u;
    sum = sum + term;
  }
  return (1.0 / std::sqrt(nfact)) * sum;
}

template <class T>
std::vector<T> maxwellian_coeffs_t(const BasisTable& table, const std::vector<T>& c) {
  const int d = table.dim();
  T rho = c[table.zero()];
  T irho = recip(rho);
  std::vector<T> u(d);
  T energy = lift_d(0.0, rho);
  T u2 = lift_d(0.0, rho);
  for (int i = 0; i < d; ++i) {
    u[i] = c[table.unit(i)] * irho;
    energy = energy + std::sqrt(2.0) * c[table.doubled(i)] + rho;
    u2 = u2 + u[i] * u[i];
  }
  T theta = (1.0 / d) * (energy * irho - u2);
  std::vector<T> out(table.size(), lift_d(0.0, rho));
  for (int a = 0; a < table.size(); ++a) {
    T v = rho;
    for (int i = 0; i < d; ++i) v = v * gaussian_hermite_mean(table[a].c[i], u[i], theta);
    out[a] = v;
  }
  return out;
}

std::vector<int> moment_indices(const BasisTable& table) {
  std::vector<int> ids{table.zero()};
  for (int i = 0; i < table.dim(); ++i) ids.push_back(table.unit(i));
  for (int i = 0; i < table.dim(); ++i) ids.push_back(table.doubled(i));
  return ids;
}

BilinearTensor quadratic_bgk(const BasisTable& table, double tau) {
  auto ids = moment_indices(table);
  std::vector<BilinearTensor::Entry> raw;
  for (size_t i = 0; i < ids.size(); ++i) {
    for (size_t j = i; j < ids.size(); ++j) {
      std::vector<HyperDual> c(table.size());
      c[table.zero()].v = 1.0;
      c[ids[i]].e1 = 1.0;
      c[ids[j]].e2 = 1.0;
      auto f = maxwellian_coeffs_t(table, c);
      for (int a = 0; a < table.size(); ++a) {
        double v = 0.5 * f[a].e12 / tau;
        if (v == 0.0) continue;
        raw.push_back({a, ids[i], ids[j], v});
        if (i != j) raw.push_back({a, ids[j], ids[i], v});
      }
    }
  }
  BilinearTensor t;
  t.size = table.size();
  t.entries = std::move(raw);
  return t;
}

}  // namespace

Vec maxwellian_coefficients(const BasisTable& table, const Vec& c) {
  std::vector<double> cv(c.data(), c.data() + c.size());
  auto f = maxwellian_coeffs_t(table, cv);
  return Eigen::Map<Vec>(f.data(), static_cast<Eigen::Index>(f.size()));
}

double conservation_residual(const BilinearTensor& t, const BasisTable& table) {
  Mat k = kernel_frame(table);
  std::map<std::pair<int, int>, Vec> acc;
  for (const auto& e : t.entries) {
    auto& v = acc[{e.b, e.c}];
    if (v.size() == 0) v = Vec::Zero(k.cols());
    v += e.v * k.row(e.a).transpose();
  }
  double worst = 0.0;
  for (const auto& [key, v] : acc) worst = std::max(worst, v.cwiseAbs().maxCoeff());
  return worst;
}

BilinearTensor tensor_from_triplets(const std::vector<BilinearTensor::Entry>& raw, const BasisTable& table) {
  std::map<std::array<int, 3>, double> acc;
  for (const auto& e : raw) {
    if (e.a < 0 || e.b < 0 || e.c < 0 || e.a >= table.size() || e.b >= table.size() || e.c >= table.size())
      throw ShapeError("tensor index out of range");
    if (!std::isfinite(e.v)) throw ConfigError("tensor entry is not finite");
    acc[{e.a, e.b, e.c}] += 0.5 * e.v;
    acc[{e.a, e.c, e.b}] += 0.5 * e.v;
  }
  BilinearTensor t;
  t.size = table.size();
  for (const auto& [key, v] : acc)
    if (v != 0.0) t.entries.push_back({key[0], key[1], key[2], v});
  double res = conservation_residual(t, table);
  if (res > 1e-8) throw HypothesisError("tensor violates conservation (residual " + std::to_string(res) + ")");
  return t;
}

BilinearTensor read_tensor_csv(const std::string& path, const BasisTable& table) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tensor file " + path);
  std::vector<BilinearTensor::Entry> raw;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line[0] == 'a') continue;
    std::stringstream ss(line);
    std::string a, b, c, v;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    std::getline(ss, v, ',');
    try {
      raw.push_back({std::stoi(a), std::stoi(b), std::stoi(c), std::stod(v)});
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected a,b,c,value");
    }
  }
  return tensor_from_triplets(raw, table);
}

void write_tensor_csv(std::ostream& os, const BilinearTensor& t) {
  os << "a,b,c,value\n";
  os.precision(17);
  for (const auto& e : t.entries) os << e.a << "," << e.b << "," << e.c << "," << e.v << "\n";
}

BilinearTensor synthetic_tensor(const BasisTable& table, std::uint64_t seed, int min_degree, double scale) {
  Rng rng(seed);
  std::vector<int> ids;
  for (int a = 0; a < table.size(); ++a)
    if (table[a].degree >= min_degree) ids.push_back(a);
  std::vector<BilinearTensor::Entry> raw;
  double norm = scale / std::sqrt(static_cast<double>(std::max<size_t>(1, ids.size())));
  for (int a : ids)
    for (size_t i = 0; i < ids.size(); ++i)
      for (size_t j = i; j < ids.size(); ++j) {
        double v = norm * rng.normal();
        raw.push_back({a, ids[i], ids[j], v});
        if (i != j) raw.push_back({a, ids[j], ids[i], v});
      }
  return tensor_from_triplets(raw, table);
}

BilinearTensor build_quadratic(const QuadraticModel& model, const BasisTable& table) {
  switch (model.kind) {
    case QuadraticKind::none: {
      BilinearTensor t;
      t.size = table.size();
      return t;
    }
    case QuadraticKind::quadratic_bgk:
      if (!(model.tau > 0.0)) throw ConfigError("tau must be positive");
      return quadratic_bgk(table, model.tau);
    case QuadraticKind::custom_tensor:
      if (model.tensor_path.empty()) throw ConfigError("custom-tensor needs a tensor file");
      return read_tensor_csv(model.tensor_path, table);
  }
  return {};
}

QStar::QStar(BilinearTensor t, const BasisTable& table)
    : tensor_(std::move(t)), kernel_(kernel_frame(table)), size_(table.size()) {}

Vec QStar::operator()(const Vec& g, const Vec& h) const {
  if (zero()) return Vec::Zero(size_);
  Vec gp = g - kernel_ * (kernel_.transpose() * g);
  Vec hp = h - kernel_ * (kernel_.transpose() * h);
  return tensor_.apply(gp, hp);
}

}  // namespace kinetic
