#include "kinetic/velocity_basis.hpp"

#include "kinetic/errors.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

namespace kinetic {

BasisTable::BasisTable(int dim, int max_degree, std::vector<MultiIndex> idx)
    : dim_(dim), max_degree_(max_degree), idx_(std::move(idx)) {
  for (int a = 0; a < size(); ++a) lookup_[idx_[a].c] = a;
}

int BasisTable::index_of(const std::array<int, 3>& c) const {
  for (int v : c)
    if (v < 0) return -1;
  auto it = lookup_.find(c);
  return it == lookup_.end() ? -1 : it->second;
}

std::string BasisTable::label(int a) const {
  const auto& c = idx_[a].c;
  if (dim_ == 1) return std::to_string(c[0]);
  return "(" + std::to_string(c[0]) + ";" + std::to_string(c[1]) + ";" + std::to_string(c[2]) + ")";
}

int BasisTable::unit(int axis) const {
  std::array<int, 3> c{0, 0, 0};
  c[axis] = 1;
  return index_of(c);
}

int BasisTable::doubled(int axis) const {
  std::array<int, 3> c{0, 0, 0};
  c[axis] = 2;
  return index_of(c);
}

BasisTable build_basis(const BasisSpec& spec) {
  if (spec.dim != 1 && spec.dim != 3)
    throw ConfigError("velocity dimension must be 1 or 3, got " + std::to_string(spec.dim));
  if (spec.max_degree < 3)
    throw ConfigError("max_degree must be at least 3, got " + std::to_string(spec.max_degree));
  std::vector<MultiIndex> idx;
  for (int n = 0; n <= spec.max_degree; ++n) {
    if (spec.dim == 1) {
      idx.push_back({{n, 0, 0}, n});
      continue;
    }
    for (int ax = n; ax >= 0; --ax)
      for (int ay = n - ax; ay >= 0; --ay) idx.push_back({{ax, ay, n - ax - ay}, n});
  }
  return BasisTable(spec.dim, spec.max_degree, std::move(idx));
}

Mat streaming_matrix(const BasisTable& table, int axis) {
  if (axis < 0 || axis >= table.dim()) throw UsageError("streaming axis out of range");
  const int n = table.size();
  Mat x = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    auto c = table[a].c;
    c[axis] += 1;
    int b = table.index_of(c);
    if (b < 0) continue;
    double v = std::sqrt(static_cast<double>(c[axis]));
    x(b, a) = v;
    x(a, b) = v;
  }
  return x;
}

Ladders ladder_matrices(const BasisTable& table) {
  const int n = table.size();
  Ladders out;
  for (int i = 0; i < table.dim(); ++i) {
    Mat d = Mat::Zero(n, n);
    for (int a = 0; a < n; ++a) {
      auto c = table[a].c;
      c[i] += 1;
      int b = table.index_of(c);
      if (b >= 0) d(b, a) = std::sqrt(static_cast<double>(c[i]));
    }
    out.du.push_back(d);
  }
  out.dtheta = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    out.dtheta(a, a) = 0.5 * table[a].degree;
    for (int i = 0; i < table.dim(); ++i) {
      auto c = table[a].c;
      c[i] += 2;
      int b = table.index_of(c);
      if (b >= 0) out.dtheta(b, a) = 0.5 * std::sqrt(static_cast<double>((c[i] - 1) * c[i]));
    }
  }
  return out;
}

GaussHermite gauss_hermite(int n) {
  // Golub-Welsch on the Jacobi matrix of the probabilists' recurrence.
  Mat j = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    j(k, k - 1) = std::sqrt(static_cast<double>(k));
    j(k - 1, k) = j(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(j);
  GaussHermite g;
  for (int k = 0; k < n; ++k) {
    g.nodes.push_back(es.eigenvalues()(k));
    double v = es.eigenvectors()(0, k);
    g.weights.push_back(v * v);
  }
  return g;
}

VelocityGrid velocity_grid(const BasisTable& table, int per_axis) {
  if (per_axis <= 0) per_axis = table.max_degree() + 2;
  GaussHermite g = gauss_hermite(per_axis);
  VelocityGrid grid;
  grid.dim = table.dim();
  grid.per_axis = per_axis;
  if (table.dim() == 1) {
    for (int i = 0; i < per_axis; ++i) {
      grid.points.push_back({g.nodes[i], 0.0, 0.0});
      grid.weights.push_back(g.weights[i]);
    }
    return grid;
  }
  for (int i = 0; i < per_axis; ++i)
    for (int j = 0; j < per_axis; ++j)
      for (int k = 0; k < per_axis; ++k) {
        grid.points.push_back({g.nodes[i], g.nodes[j], g.nodes[k]});
        grid.weights.push_back(g.weights[i] * g.weights[j] * g.weights[k]);
      }
  return grid;
}

double hermite_fn(int n, double x) {
  // Stable recurrence for the normalized functions.
  double h0 = 1.0;
  if (n == 0) return h0;
  double h1 = x;
  for (int k = 1; k < n; ++k) {
    double h2 = (x * h1 - std::sqrt(static_cast<double>(k)) * h0) / std::sqrt(static_cast<double>(k + 1));
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

double basis_poly(const BasisTable& table, int a, const std::array<double, 3>& xi) {
  double v = 1.0;
  for (int i = 0; i < table.dim(); ++i) v *= hermite_fn(table[a].c[i], xi[i]);
  return v;
}

double maxwellian0(int dim, const std::array<double, 3>& xi) {
  double r2 = 0.0;
  for (int i = 0; i < dim; ++i) r2 += xi[i] * xi[i];
  return std::exp(-0.5 * r2) / std::pow(2.0 * std::numbers::pi, 0.5 * dim);
}

namespace {

void check_grid(const BasisTable& table, const VelocityGrid& grid) {
  if (grid.dim != table.dim() || grid.per_axis < table.max_degree() + 1)
    throw ShapeError("velocity grid does not match the basis table");
}

}  // namespace

Vec project_samples(const BasisTable& table, const VelocityGrid& grid, const std::vector<double>& values) {
  check_grid(table, grid);
  if (static_cast<int>(values.size()) != grid.size())
    throw ShapeError("sample count " + std::to_string(values.size()) + " != grid size " +
                     std::to_string(grid.size()));
  Vec out = Vec::Zero(table.size());
  for (int k = 0; k < grid.size(); ++k) {
    double g = grid.weights[k] * values[k] / maxwellian0(table.dim(), grid.points[k]);
    for (int a = 0; a < table.size(); ++a) out(a) += g * basis_poly(table, a, grid.points[k]);
  }
  return out;
}

std::vector<double> reconstruct(const BasisTable& table, const VelocityGrid& grid, const Vec& coeffs) {
  check_grid(table, grid);
  if (coeffs.size() != table.size()) throw ShapeError("coefficient vector has wrong length");
  std::vector<double> out(grid.size(), 0.0);
  for (int k = 0; k < grid.size(); ++k) {
    double s = 0.0;
    for (int a = 0; a < table.size(); ++a) s += coeffs(a) * basis_poly(table, a, grid.points[k]);
    out[k] = s * maxwellian0(table.dim(), grid.points[k]);
  }
  return out;
}

void write_matrix_csv(std::ostream& os, const BasisTable& table, const Mat& m) {
  for (int b = 0; b < m.cols(); ++b) os << (b ? "," : "") << (m.cols() == table.size() ? table.label(b) : std::to_string(b));
  os << "\n";
  os.precision(17);
  for (int a = 0; a < m.rows(); ++a) {
    for (int b = 0; b < m.cols(); ++b) os << (b ? "," : "") << m(a, b);
    os << "\n";
  }
}

void write_coeff_csv(std::ostream& os, const BasisTable& table, const Vec& v) {
  for (int a = 0; a < table.size(); ++a) os << (a ? "," : "") << table.label(a);
  os << "\n";
  os.precision(17);
  for (int a = 0; a < v.size(); ++a) os << (a ? "," : "") << v(a);
  os << "\n";
}

}  // namespace kinetic
