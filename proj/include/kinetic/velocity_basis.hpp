#pragma once

#include "kinetic/linalg.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace kinetic {

struct BasisSpec {
  int dim = 3;
  int max_degree = 4;
};

struct MultiIndex {
  std::array<int, 3> c{0, 0, 0};  // unused axes stay 0
  int degree = 0;
};

// Ordered tensor-Hermite index set. Order: total degree ascending, then
// descending lexicographic, so (1,0,0) precedes (0,1,0) precedes (0,0,1).
class BasisTable {
 public:
  BasisTable() = default;
  BasisTable(int dim, int max_degree, std::vector<MultiIndex> idx);

  int dim() const { return dim_; }
  int max_degree() const { return max_degree_; }
  int size() const { return static_cast<int>(idx_.size()); }
  const MultiIndex& operator[](int a) const { return idx_[a]; }
  const std::vector<MultiIndex>& indices() const { return idx_; }

  // -1 when the index is negative or beyond N_max.
  int index_of(const std::array<int, 3>& c) const;
  std::string label(int a) const;

  // Position of psi_0, psi_{e_i}, psi_{2e_i}.
  int zero() const { return 0; }
  int unit(int axis) const;
  int doubled(int axis) const;

 private:
  int dim_ = 0;
  int max_degree_ = 0;
  std::vector<MultiIndex> idx_;
  std::map<std::array<int, 3>, int> lookup_;
};

BasisTable build_basis(const BasisSpec& spec);

// Multiplication by xi_axis (axis is 0-based), Galerkin-truncated at N_max.
Mat streaming_matrix(const BasisTable& table, int axis);

// Derivatives of theta^{-D/2} psi_a((xi-u)/sqrt(theta)) at u=0, theta=1.
struct Ladders {
  std::vector<Mat> du;
  Mat dtheta;
};
Ladders ladder_matrices(const BasisTable& table);

// Probabilists' Gauss-Hermite rule; weights sum to 1.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermite gauss_hermite(int n);

// Tensor grid in velocity space. Weights integrate against M0 (sum 1).
struct VelocityGrid {
  int dim = 0;
  int per_axis = 0;
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};
// per_axis <= 0 picks N_max + 2.
VelocityGrid velocity_grid(const BasisTable& table, int per_axis = 0);

// Orthonormal He_n(x)/sqrt(n!).
double hermite_fn(int n, double x);
// He_a(xi), orthonormal under the Gaussian weight.
double basis_poly(const BasisTable& table, int a, const std::array<double, 3>& xi);
// Frozen Maxwellian M0 in dim dimensions.
double maxwellian0(int dim, const std::array<double, 3>& xi);

// Sampled f(xi_k) -> coefficients of f in the psi frame.
Vec project_samples(const BasisTable& table, const VelocityGrid& grid, const std::vector<double>& values);
// Coefficients -> f(xi_k).
std::vector<double> reconstruct(const BasisTable& table, const VelocityGrid& grid, const Vec& coeffs);

// Row-major CSV with a header of multi-index labels.
void write_matrix_csv(std::ostream& os, const BasisTable& table, const Mat& m);
void write_coeff_csv(std::ostream& os, const BasisTable& table, const Vec& v);

}  // namespace kinetic
