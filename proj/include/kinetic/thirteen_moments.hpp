#pragma once

#include "kinetic/assembly.hpp"

#include <array>
#include <string>
#include <vector>

namespace kinetic {

// Stress pairs kept as independent coordinates: 11, 12, 13, 22, 23.
const std::vector<std::array<int, 2>>& stress_pairs();

struct ThirteenBasis {
  // phi_ij = C2 L+ grad_ij, phi_i = C1 L+ grad_i (Hermite coefficients).
  std::array<std::array<Vec, 3>, 3> phi_ij, grad_ij;
  std::array<Vec, 3> phi_i, grad_i;
  double C1 = 0.0, C2 = 0.0;
  // Max over the 9+3 functions of |phi - grad| / |grad|.
  double grad_deviation = 0.0;
  double symmetry_residual = 0.0;
  double trace_residual = 0.0;
  int dim_v1 = 0;
  std::string warning;  // set when dim V(1) != 13
};

// Grad generators of degree 2 (traceless) and 3 (contracted) at u=0, theta=1.
std::array<std::array<Vec, 3>, 3> grad_stress(const BasisTable& table);
std::array<Vec, 3> grad_heat(const BasisTable& table);

// D=3 only. The sign of C1, C2 is fixed by <phi, grad> > 0.
ThirteenBasis build_13(const Mat& ldag, const BasisTable& table);

// Permutation of velocity axes acting on Hermite coefficients: the image of
// psi_c is psi_{c o perm^-1}, i.e. axis a becomes axis perm[a].
Mat axis_permutation(const BasisTable& table, const std::array<int, 3>& perm);

struct Burnett13 {
  ThirteenBasis basis;
  ReducedOperators ops;           // generic n=1 hyperbolic closure
  Mat to_moments;                 // reduced coords -> (V0 coords, sigma_bar, q_bar)
  std::vector<std::string> labels;
  std::vector<Mat> A;             // streaming per axis, moment coordinates
  Mat L;
  // Q[f1, f1] rows in moment coordinates; entry (a, b*13+c).
  Mat Q;
  bool has_q = false;
  std::string listing;            // plain text
  std::string listing_json;
};
// sys must be the generic n=1 system on a D=3 hierarchy.
Burnett13 burnett13_system(const BlockSystem& sys, const Hierarchy& h, const Mat& ldag, const BasisTable& table);

struct SuperBurnett13 {
  ReducedOperators ops;  // generic n=2 regularized closure
  int dim_v1 = 0, dim_v2 = 0;
  // Layer-2 elimination against a direct evaluation of
  // f2 = Kn (L22)^-1 P_2 (z Xi)(f0 + f1) on the full basis.
  double f2_residual = 0.0;
  // |(L22)^-1 L21|: zero when layers are L-invariant.
  double coupling = 0.0;
  std::string listing;
};
SuperBurnett13 superburnett13_system(const BlockSystem& sys, const Hierarchy& h, const Mat& L,
                                     const std::vector<Mat>& xi);

}  // namespace kinetic
