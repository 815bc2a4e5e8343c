#pragma once

#include "kinetic/hierarchy.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace kinetic {

enum class AssemblyMode { frozen, symbolic };

// Stacked reduced coordinates: layer 0 first, then 1..n.
struct BlockSystem {
  int n = 0;
  int size = 0;
  int dim = 0;
  AssemblyMode mode = AssemblyMode::frozen;
  std::vector<int> dims;
  std::vector<int> offset;
  int total = 0;
  Mat phi;                // size x total
  std::vector<Mat> A;     // per velocity axis
  Mat L;
  // Q(a, b*total + c) = <phi_a, Q*(phi_b, phi_c)>; zero unless b,c in layers >= 1.
  Mat Q;
  bool has_q = false;
  // Symbolic mode: placeholder monomial -> coefficient matrix.
  std::map<std::string, Mat> B;
  std::map<std::string, Mat> C;

  Mat block(const Mat& m, int k, int l) const;
  Vec layer(const Vec& f, int k) const { return f.segment(offset[k], dims[k]); }
  // Contract Q over pieces of f restricted to layers l and m.
  Vec q_pair(const Vec& f, int l, int m) const;
};

BlockSystem assemble_blocks(const Hierarchy& h, const Mat& L, const std::vector<Mat>& xi, const Ladders& ladders,
                            const QStar& q, AssemblyMode mode = AssemblyMode::frozen);

// Placeholder names used in symbolic mode.
std::string eu_name(int axis, int j);
std::string eth_name(int j);
std::string gu_name(int axis, int d);
std::string gth_name(int d);

enum class Variant { hyperbolic, regularized };
enum class QTruncation { standard, modified };
std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

// Retained (k,l,m) triples of the truncated quadratic term.
std::vector<std::array<int, 3>> retained_qset(int n, Variant v, QTruncation t = QTruncation::standard);

struct ReducedOperators {
  const BlockSystem* sys = nullptr;
  Variant variant = Variant::hyperbolic;
  QTruncation qtrunc = QTruncation::standard;
  int axis = 0;
  int n = 0;
  int total = 0;
  int evolved = 0;  // layers 0..n (hyperbolic) or 0..n-1 (regularized)
  Mat S;            // coefficient of s in the reduced D
  Mat Z;            // coefficient of z in the reduced D
  Mat Lhat;
  Mat Ldag;
  Mat elim_A;       // (L^nn)^-1 A^{n,<n}
  Mat elim_L;       // (L^nn)^-1 L^{n,<n}
  Eigen::PartialPivLU<Mat> lnn_lu;
  std::vector<std::array<int, 3>> qset;

  // Truncated quadratic term on a stacked state (all layers present).
  Vec q_truncated(const Vec& f) const;
  // Quadratic rows k only.
  Vec q_truncated_row(const Vec& f, int k) const;
};

ReducedOperators make_reduced_operators(const BlockSystem& sys, Variant v, QTruncation t = QTruncation::standard,
                                        int axis = 0);

}  // namespace kinetic
