#include "kinetic/assembly.hpp"

#include "kinetic/errors.hpp"

#include <Eigen/SVD>

namespace kinetic {

Mat BlockSystem::block(const Mat& m, int k, int l) const { return m.block(offset[k], offset[l], dims[k], dims[l]); }

Vec BlockSystem::q_pair(const Vec& f, int l, int m) const {
  Vec out = Vec::Zero(total);
  if (!has_q) return out;
  for (int b = offset[l]; b < offset[l] + dims[l]; ++b) {
    if (f(b) == 0.0) continue;
    for (int c = offset[m]; c < offset[m] + dims[m]; ++c) out += (f(b) * f(c)) * Q.col(b * total + c);
  }
  return out;
}

std::string eu_name(int axis, int j) { return "Eu" + std::to_string(axis + 1) + "^" + std::to_string(j); }
std::string eth_name(int j) { return "Eth^" + std::to_string(j); }
std::string gu_name(int axis, int d) { return "du" + std::to_string(axis + 1) + "/dx" + std::to_string(d + 1); }
std::string gth_name(int d) { return "dth/dx" + std::to_string(d + 1); }

BlockSystem assemble_blocks(const Hierarchy& h, const Mat& L, const std::vector<Mat>& xi, const Ladders& ladders,
                            const QStar& q, AssemblyMode mode) {
  if (L.rows() != h.size || static_cast<int>(xi.size()) < 1 || xi[0].rows() != h.size)
    throw ShapeError("operators and hierarchy live on different bases");
  BlockSystem s;
  s.n = h.n;
  s.size = h.size;
  s.dim = static_cast<int>(xi.size());
  s.mode = mode;
  int at = 0;
  for (int k = 0; k <= h.n; ++k) {
    s.dims.push_back(h.layer_dim(k));
    s.offset.push_back(at);
    at += h.layer_dim(k);
  }
  s.total = at;
  s.phi = h.stacked(h.n);
  const Mat& phi = s.phi;
  for (const Mat& x : xi) s.A.push_back(phi.transpose() * x * phi);
  s.L = symmetrized(phi.transpose() * L * phi);

  s.Q = Mat::Zero(s.total, static_cast<Eigen::Index>(s.total) * s.total);
  s.has_q = !q.zero();
  if (s.has_q) {
    for (int b = s.dims[0]; b < s.total; ++b)
      for (int c = b; c < s.total; ++c) {
        Vec v = phi.transpose() * q(phi.col(b), phi.col(c));
        s.Q.col(b * s.total + c) = v;
        s.Q.col(c * s.total + b) = v;
      }
  }

  if (mode == AssemblyMode::symbolic) {
    // Layer 0 enters through rho*M only; the remaining V(0) directions carry
    // no parameter dependence of their own.
    Mat mask = Mat::Identity(s.total, s.total);
    for (int j = 1; j < s.dims[0]; ++j) mask(j, j) = 0.0;
    auto emit = [&](const std::string& name, const Mat& op_b, const Mat& op_c) {
      s.B[name] = phi.transpose() * op_b * phi * mask;
      s.C[name] = mask * phi.transpose() * op_c * phi;
    };
    for (int j = 0; j <= h.n; ++j) {
      for (int i = 0; i < s.dim; ++i) {
        const Mat& g = ladders.du[i];
        // C = d/dt T + div A - B, with the product rule on <phi, phi>
        emit(eu_name(i, j), g, (g + g.transpose()) - g);
      }
      emit(eth_name(j), ladders.dtheta, (ladders.dtheta + ladders.dtheta.transpose()) - ladders.dtheta);
    }
    for (int d = 0; d < s.dim; ++d) {
      for (int i = 0; i < s.dim; ++i) {
        const Mat& g = ladders.du[i];
        emit(gu_name(i, d), xi[d] * g, (xi[d] * g + g.transpose() * xi[d]) - xi[d] * g);
      }
      const Mat& g = ladders.dtheta;
      emit(gth_name(d), xi[d] * g, (xi[d] * g + g.transpose() * xi[d]) - xi[d] * g);
    }
  }
  return s;
}

std::string to_string(Variant v) { return v == Variant::hyperbolic ? "hyperbolic" : "regularized"; }

Variant parse_variant(const std::string& s) {
  if (s == "hyperbolic") return Variant::hyperbolic;
  if (s == "regularized") return Variant::regularized;
  throw ConfigError("unknown closure variant '" + s + "' (valid: hyperbolic, regularized)");
}

std::vector<std::array<int, 3>> retained_qset(int n, Variant v, QTruncation t) {
  std::vector<std::array<int, 3>> out;
  auto hyperbolic_pairs = [&](int k) {
    for (int l = 1; l <= n; ++l)
      for (int m = 1; m <= n + 1 - l; ++m) out.push_back({k, l, m});
  };
  for (int k = 0; k <= n; ++k) {
    if (v == Variant::hyperbolic) {
      hyperbolic_pairs(k);
      continue;
    }
    if (k == 0) continue;
    if (k == 1) {
      if (n >= 2 || t == QTruncation::modified) hyperbolic_pairs(k);
      continue;
    }
    for (int l = 1; l <= n - 1; ++l)
      for (int m = 1; m <= n - l; ++m) out.push_back({k, l, m});
  }
  return out;
}

Vec ReducedOperators::q_truncated_row(const Vec& f, int k) const {
  Vec out = Vec::Zero(total);
  if (!sys->has_q) return out;
  for (const auto& [kk, l, m] : qset)
    if (kk == k) out += sys->q_pair(f, l, m);
  Vec row = Vec::Zero(total);
  row.segment(sys->offset[k], sys->dims[k]) = out.segment(sys->offset[k], sys->dims[k]);
  return row;
}

Vec ReducedOperators::q_truncated(const Vec& f) const {
  Vec out = Vec::Zero(total);
  if (!sys->has_q) return out;
  for (int k = 0; k <= n; ++k) out += q_truncated_row(f, k);
  return out;
}

ReducedOperators make_reduced_operators(const BlockSystem& sys, Variant v, QTruncation t, int axis) {
  ReducedOperators r;
  r.sys = &sys;
  r.variant = v;
  r.qtrunc = t;
  r.axis = axis;
  r.n = sys.n;
  r.total = sys.total;
  r.qset = retained_qset(sys.n, v, t);
  const int n0 = sys.dims[0];
  const int rest = sys.total - n0;
  r.Lhat = sys.L;
  r.Ldag = Mat::Zero(sys.total, sys.total);
  for (int k = 1; k <= sys.n; ++k)
    if (sys.dims[k] == 0) throw InvertibilityError("layer " + std::to_string(k) + " is empty");
  Mat inner = sys.L.bottomRightCorner(rest, rest);
  if (rest > 0) {
    Eigen::JacobiSVD<Mat> svd(inner);
    const Vec& sv = svd.singularValues();
    if (sv(rest - 1) <= 1e-12 * sv(0)) throw InvertibilityError("collision block on layers 1..n is singular");
  }
  r.Ldag.bottomRightCorner(rest, rest) = symmetrized(inner.inverse());

  r.S = Mat::Identity(sys.total, sys.total);
  r.Z = sys.A[axis];
  r.evolved = sys.total;
  if (v == Variant::regularized) {
    const int on = sys.offset[sys.n], nn = sys.dims[sys.n];
    r.evolved = on;
    r.S.block(on, on, nn, nn).setZero();
    r.Z.block(on, on, nn, nn).setZero();
    Mat lnn = sys.block(sys.L, sys.n, sys.n);
    Eigen::JacobiSVD<Mat> s2(lnn);
    if (s2.singularValues()(nn - 1) <= 1e-12 * s2.singularValues()(0))
      throw InvertibilityError("collision block L^{nn} is singular (layer " + std::to_string(sys.n) + ")");
    r.lnn_lu.compute(lnn);
    r.elim_A = r.lnn_lu.solve(sys.A[axis].block(on, 0, nn, on));
    r.elim_L = r.lnn_lu.solve(sys.L.block(on, 0, nn, on));
  }
  return r;
}

}  // namespace kinetic
