#pragma once

#include "kinetic/velocity_basis.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kinetic {

// Irreducible rotational block: degree = ell + 2k, columns orthonormal.
// For D=1 the "ell" is the parity of the degree and the block is 1-dim.
struct Multiplet {
  int degree = 0;
  int ell = 0;
  int k = 0;
  Mat frame;
};
std::vector<Multiplet> rotational_multiplets(const BasisTable& table);

// Infinitesimal rotation in the (p,q) plane acting on coefficients.
Mat rotation_generator(const BasisTable& table, int p, int q);

// psi_0, psi_{e_i}, (1/sqrt D) sum_i psi_{2 e_i}.
Mat kernel_frame(const BasisTable& table);

enum class CollisionKind { bgk, shakhov, es_bgk, maxwell_diagonal, coupled_synthetic, custom_matrix };
CollisionKind parse_collision_kind(const std::string& s);
std::string to_string(CollisionKind k);
const std::vector<std::string>& collision_kind_names();

struct CollisionModel {
  CollisionKind kind = CollisionKind::bgk;
  double tau = 1.0;
  double prandtl = 2.0 / 3.0;
  std::string table_path;  // maxwell-diagonal table or custom matrix
  std::uint64_t seed = 42;
  // (degree, ell) -> eigenvalue, applied over the default maxwell table.
  std::map<std::pair<int, int>, double> eigen_overrides;
};

// Maxwell-molecule eigenvalue for radial index k and ell, with tau = 1.
double maxwell_eigenvalue(int k, int ell);

// No hypothesis validation; used for constructed counterexamples.
Mat build_linear_unchecked(const CollisionModel& model, const BasisTable& table);
// Throws HypothesisError if the kernel dimension is not D+2.
Mat build_linear(const CollisionModel& model, const BasisTable& table);

struct HypothesisReport {
  double symmetry_residual = 0.0;
  int kernel_dim = 0;
  int expected_kernel_dim = 0;
  double kernel_residual = 0.0;  // |L K| on the expected kernel frame
  double max_complement_eigenvalue = 0.0;
  double condition = 0.0;
  bool symmetric = false;
  bool kernel_ok = false;
  bool semidefinite = false;
  bool invertible = false;
  bool pass() const { return symmetric && kernel_ok && semidefinite && invertible; }
};
HypothesisReport check_hypotheses(const Mat& L, const BasisTable& table, double rel_tol = 1e-10);

Mat pseudo_inverse(const Mat& L, double rel_tol = 1e-10);

// Sparse three-index tensor, stored with both (b,c) orders.
struct BilinearTensor {
  struct Entry {
    int a, b, c;
    double v;
  };
  int size = 0;
  std::vector<Entry> entries;

  bool empty() const { return entries.empty(); }
  Vec apply(const Vec& g, const Vec& h) const;
};

enum class QuadraticKind { none, quadratic_bgk, custom_tensor };
QuadraticKind parse_quadratic_kind(const std::string& s);
std::string to_string(QuadraticKind k);

struct QuadraticModel {
  QuadraticKind kind = QuadraticKind::none;
  double tau = 1.0;
  std::string tensor_path;
};

BilinearTensor build_quadratic(const QuadraticModel& model, const BasisTable& table);
// (b,c)-symmetrized tensor from raw triplets; conservation checked.
BilinearTensor tensor_from_triplets(const std::vector<BilinearTensor::Entry>& raw, const BasisTable& table);
BilinearTensor read_tensor_csv(const std::string& path, const BasisTable& table);
void write_tensor_csv(std::ostream& os, const BilinearTensor& t);
// Max |<kernel, T(psi_b, psi_c)>| over b,c.
double conservation_residual(const BilinearTensor& t, const BasisTable& table);

// Seeded tensor whose three indices all have degree >= min_degree. With
// min_degree >= 3 it is conservative and vanishes on equilibrium directions.
BilinearTensor synthetic_tensor(const BasisTable& table, std::uint64_t seed, int min_degree = 3, double scale = 1.0);

// Q*(g,h) = T(P_perp g, P_perp h): the quadratic term acting on the
// non-equilibrium parts only.
class QStar {
 public:
  QStar() = default;
  QStar(BilinearTensor t, const BasisTable& table);
  bool zero() const { return tensor_.empty(); }
  int size() const { return size_; }
  const BilinearTensor& tensor() const { return tensor_; }
  Vec operator()(const Vec& g, const Vec& h) const;

 private:
  BilinearTensor tensor_;
  Mat kernel_;
  int size_ = 0;
};

// Maxwellian coefficient vector of the moments (rho, m, E) of c.
// Evaluated in plain doubles.
Vec maxwellian_coefficients(const BasisTable& table, const Vec& c);

Mat read_dense_csv(const std::string& path);

}  // namespace kinetic
