#include "kinetic/thirteen_moments.hpp"

#include "kinetic/errors.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

namespace kinetic {

namespace {

int idx(const BasisTable& t, std::array<int, 3> c) {
  int a = t.index_of(c);
  if (a < 0) throw UsageError("basis too small for the 13-moment generators (need degree 3)");
  return a;
}

std::array<int, 3> unit3(int i) {
  std::array<int, 3> c{0, 0, 0};
  c[i] = 1;
  return c;
}

int rank_of(const Mat& m, double tol = 1e-10) {
  if (m.cols() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const Vec& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) ++r;
  return r;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void list_matrix(std::ostringstream& os, const std::string& term, const Mat& m, const std::vector<std::string>& rows,
                 const std::vector<std::string>& cols) {
  os << "[" << term << "]\n";
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.cols(); ++b)
      if (std::abs(m(a, b)) > 1e-13) os << "  " << rows[a] << " <- " << fmt(m(a, b)) << " * " << cols[b] << '\n';
}

nlohmann::ordered_json matrix_json(const Mat& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    std::vector<double> row(m.cols());
    for (Eigen::Index b = 0; b < m.cols(); ++b) row[b] = m(a, b);
    j.push_back(row);
  }
  return j;
}

}  // namespace

const std::vector<std::array<int, 2>>& stress_pairs() {
  static const std::vector<std::array<int, 2>> p = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}};
  return p;
}

std::array<std::array<Vec, 3>, 3> grad_stress(const BasisTable& t) {
  if (t.dim() != 3) throw UsageError("13-moment generators need D=3");
  std::array<std::array<Vec, 3>, 3> g;
  const double r2 = std::sqrt(2.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Vec v = Vec::Zero(t.size());
      if (i != j) {
        auto c = unit3(i);
        c[j] += 1;
        v(idx(t, c)) = 1.0;
      } else {
        // xi_i^2 - |xi|^2/3 = sqrt2 (He2(xi_i) - sum_k He2(xi_k)/3)
        for (int k = 0; k < 3; ++k) {
          std::array<int, 3> c{0, 0, 0};
          c[k] = 2;
          v(idx(t, c)) += r2 * ((k == i ? 1.0 : 0.0) - 1.0 / 3.0);
        }
      }
      g[i][j] = v;
    }
  return g;
}

std::array<Vec, 3> grad_heat(const BasisTable& t) {
  if (t.dim() != 3) throw UsageError("13-moment generators need D=3");
  std::array<Vec, 3> g;
  for (int i = 0; i < 3; ++i) {
    Vec v = Vec::Zero(t.size());
    std::array<int, 3> c{0, 0, 0};
    c[i] = 3;
    v(idx(t, c)) = std::sqrt(6.0) / 2.0;
    for (int k = 0; k < 3; ++k) {
      if (k == i) continue;
      std::array<int, 3> e = unit3(i);
      e[k] = 2;
      v(idx(t, e)) = std::sqrt(2.0) / 2.0;
    }
    g[i] = v;
  }
  return g;
}

ThirteenBasis build_13(const Mat& ldag, const BasisTable& table) {
  if (table.dim() != 3) throw UsageError("the 13-moment basis is defined for D=3");
  if (ldag.rows() != table.size()) throw ShapeError("pseudo-inverse and basis differ in size");
  ThirteenBasis b;
  b.grad_ij = grad_stress(table);
  b.grad_i = grad_heat(table);
  // One constant per family, matching the summed norms; exact for isotropic L.
  double gs = 0.0, ls = 0.0, sgn = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Vec l = ldag * b.grad_ij[i][j];
      gs += b.grad_ij[i][j].squaredNorm();
      ls += l.squaredNorm();
      sgn += l.dot(b.grad_ij[i][j]);
    }
  b.C2 = std::copysign(std::sqrt(gs / ls), sgn);
  gs = ls = sgn = 0.0;
  for (int i = 0; i < 3; ++i) {
    Vec l = ldag * b.grad_i[i];
    gs += b.grad_i[i].squaredNorm();
    ls += l.squaredNorm();
    sgn += l.dot(b.grad_i[i]);
  }
  b.C1 = std::copysign(std::sqrt(gs / ls), sgn);

  Vec trace = Vec::Zero(table.size());
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      b.phi_ij[i][j] = b.C2 * (ldag * b.grad_ij[i][j]);
      b.grad_deviation =
          std::max(b.grad_deviation, (b.phi_ij[i][j] - b.grad_ij[i][j]).norm() / b.grad_ij[i][j].norm());
    }
    trace += b.phi_ij[i][i];
    b.phi_i[i] = b.C1 * (ldag * b.grad_i[i]);
    b.grad_deviation = std::max(b.grad_deviation, (b.phi_i[i] - b.grad_i[i]).norm() / b.grad_i[i].norm());
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      b.symmetry_residual = std::max(b.symmetry_residual, max_abs(b.phi_ij[i][j] - b.phi_ij[j][i]));
  b.trace_residual = max_abs(trace);

  Mat span(table.size(), 5 + 9 + 3);
  span.leftCols(5) = kernel_frame(table);
  int c = 5;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) span.col(c++) = b.phi_ij[i][j];
  for (int i = 0; i < 3; ++i) span.col(c++) = b.phi_i[i];
  b.dim_v1 = rank_of(span);
  if (b.dim_v1 != 13) b.warning = "dim V(1) = " + std::to_string(b.dim_v1) + ", expected 13";
  return b;
}

Mat axis_permutation(const BasisTable& table, const std::array<int, 3>& perm) {
  Mat p = Mat::Zero(table.size(), table.size());
  for (int a = 0; a < table.size(); ++a) {
    std::array<int, 3> c{0, 0, 0};
    for (int k = 0; k < table.dim(); ++k) c[perm[k]] = table[a].c[k];
    const int b = table.index_of(c);
    if (b < 0) throw UsageError("permutation leaves the basis");
    p(b, a) = 1.0;
  }
  return p;
}

Burnett13 burnett13_system(const BlockSystem& sys, const Hierarchy& h, const Mat& ldag, const BasisTable& table) {
  if (sys.n != 1 || sys.dim != 3) throw UsageError("the Burnett 13-moment preset needs the n=1 system at D=3");
  Burnett13 out;
  out.basis = build_13(ldag, table);
  if (sys.total != 13) throw InvertibilityError("V(1) has dimension " + std::to_string(sys.total) + ", not 13");
  out.ops = make_reduced_operators(sys, Variant::hyperbolic);
  (void)h;

  const int n0 = sys.dims[0];
  Mat t = Mat::Zero(13, 13);
  t.topLeftCorner(n0, n0).setIdentity();
  int r = n0;
  for (const auto& [i, j] : stress_pairs()) t.row(r++) = out.basis.phi_ij[i][j].transpose() * sys.phi;
  for (int i = 0; i < 3; ++i) t.row(r++) = out.basis.phi_i[i].transpose() * sys.phi;
  Eigen::FullPivLU<Mat> lu(t);
  if (!lu.isInvertible()) throw InvertibilityError("13-moment coordinates are degenerate on V(1)");
  const Mat tinv = lu.inverse();
  out.to_moments = t;
  out.labels = {"rho", "u1", "u2", "u3", "E"};
  for (const auto& [i, j] : stress_pairs()) out.labels.push_back("s" + std::to_string(i + 1) + std::to_string(j + 1));
  for (int i = 0; i < 3; ++i) out.labels.push_back("q" + std::to_string(i + 1));

  for (const Mat& a : sys.A) out.A.push_back(t * a * tinv);
  out.L = t * sys.L * tinv;
  out.has_q = sys.has_q;
  out.Q = Mat::Zero(13, 13 * 13);
  if (sys.has_q) {
    // Only f1 x f1 pairs survive at n=1.
    for (int b = 0; b < 13; ++b)
      for (int c = 0; c < 13; ++c) {
        Vec acc = Vec::Zero(13);
        for (int bb = n0; bb < 13; ++bb)
          for (int cc = n0; cc < 13; ++cc) {
            const double w = tinv(bb, b) * tinv(cc, c);
            if (w != 0.0) acc += w * sys.Q.col(bb * 13 + cc);
          }
        out.Q.col(b * 13 + c) = t * acc;
      }
  }

  std::ostringstream os;
  nlohmann::ordered_json j;
  j["labels"] = out.labels;
  j["C1"] = out.basis.C1;
  j["C2"] = out.basis.C2;
  j["grad_deviation"] = out.basis.grad_deviation;
  os << "Burnett-order 13-moment system (frozen background)\n";
  os << "C1 = " << fmt(out.basis.C1) << ", C2 = " << fmt(out.basis.C2)
     << ", deviation from Grad basis = " << fmt(out.basis.grad_deviation) << "\n";
  std::vector<std::string> dx;
  for (int d = 0; d < 3; ++d) {
    const std::string term = "streaming_x" + std::to_string(d + 1);
    std::vector<std::string> cols;
    for (const auto& l : out.labels) cols.push_back("d" + l + "/dx" + std::to_string(d + 1));
    list_matrix(os, term, -out.A[d], out.labels, cols);
    j[term] = matrix_json(out.A[d]);
  }
  std::vector<std::string> over_kn;
  for (const auto& l : out.labels) over_kn.push_back(l + "/Kn");
  list_matrix(os, "collision", out.L, out.labels, over_kn);
  j["collision"] = matrix_json(out.L);
  nlohmann::ordered_json qj = nlohmann::ordered_json::array();
  if (out.has_q) {
    os << "[quadratic]\n";
    for (int a = 0; a < 13; ++a)
      for (int b = 0; b < 13; ++b)
        for (int c = b; c < 13; ++c) {
          const double v = out.Q(a, b * 13 + c) + (b == c ? 0.0 : out.Q(a, c * 13 + b));
          if (std::abs(v) <= 1e-13) continue;
          os << "  " << out.labels[a] << " <- " << fmt(v) << " * " << out.labels[b] << "*" << out.labels[c] << "/Kn\n";
          qj.push_back({{"row", out.labels[a]}, {"b", out.labels[b]}, {"c", out.labels[c]}, {"value", v}});
        }
  }
  j["quadratic"] = qj;
  out.listing = os.str();
  out.listing_json = j.dump(2);
  return out;
}

SuperBurnett13 superburnett13_system(const BlockSystem& sys, const Hierarchy& h, const Mat& L,
                                     const std::vector<Mat>& xi) {
  if (sys.n != 2 || sys.dim != 3) throw UsageError("the super-Burnett preset needs the n=2 system at D=3");
  SuperBurnett13 out;
  out.ops = make_reduced_operators(sys, Variant::regularized);
  out.dim_v1 = h.v_dim(1);
  out.dim_v2 = h.v_dim(2);
  // Direct route on the full basis: restrict L to layer 2 via a full-basis
  // pseudo-inverse of P2 L P2.
  const Mat& l2 = h.layer[2];
  const Mat p2 = l2 * l2.transpose();
  const Mat inv = (p2 * L * p2).completeOrthogonalDecomposition().pseudoInverse();
  const Mat low = h.stacked(1);
  const Mat direct = l2.transpose() * inv * p2 * xi[out.ops.axis] * low;
  out.f2_residual = max_abs(direct - out.ops.elim_A) / std::max(max_abs(direct), 1e-300);
  out.coupling = max_abs(out.ops.elim_L);
  std::ostringstream os;
  os << "Super-Burnett regularized 13-moment closure\n"
     << "dim V(1) = " << out.dim_v1 << ", dim V(2) = " << out.dim_v2 << "\n"
     << "layer-2 elimination vs direct f2: " << fmt(out.f2_residual) << "\n"
     << "coupling |(L22)^-1 L21| = " << fmt(out.coupling) << "\n";
  out.listing = os.str();
  return out;
}

}  // namespace kinetic
