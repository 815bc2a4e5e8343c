#include "kinetic/verifier.hpp"

#include "kinetic/errors.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

namespace kinetic {

namespace {

double rel(double num, double scale) {
  if (num == 0.0) return 0.0;
  return num / std::max(scale, std::numeric_limits<double>::min());
}

int empty_layer(const BlockSystem& sys) {
  for (int k = 1; k <= sys.n; ++k)
    if (sys.dims[k] == 0) return k;
  return 0;
}

std::vector<IdentityReport> all_skipped(const std::vector<std::string>& ids, const std::string& why, const Manifest& m) {
  std::vector<IdentityReport> out;
  for (const auto& id : ids) out.push_back(skipped_report(id, why, m));
  return out;
}

Mat big_ldag_hat(const LemmaInputs& in) {
  auto ops = make_reduced_operators(*in.sys, Variant::hyperbolic);
  return in.sys->phi * ops.Ldag * in.sys->phi.transpose();
}

}  // namespace

IdentityReport make_report(const std::string& id, double residual, double tol, const Manifest& m,
                           const std::string& note) {
  IdentityReport r;
  r.id = id;
  r.residual = residual;
  r.tol = tol;
  r.pass = residual < tol;
  r.note = note;
  r.manifest = m;
  return r;
}

IdentityReport skipped_report(const std::string& id, const std::string& why, const Manifest& m) {
  IdentityReport r;
  r.id = id;
  r.skipped = true;
  r.note = why;
  r.manifest = m;
  return r;
}

std::vector<IdentityReport> verify_operator_lemmas(const LemmaInputs& in) {
  const Hierarchy& h = *in.h;
  const BlockSystem& sys = *in.sys;
  const int n = sys.n;
  if (h.n < n) throw UsageError("hierarchy shallower than the block system");
  if (int k = empty_layer(sys))
    return all_skipped({"DL_hess", "DL_hess_mirror", "invert", "DL_deter", "hat_DL_hess", "Ker"},
                       "degenerate hierarchy: layer " + std::to_string(k) + " is empty", in.manifest);
  const int N = h.size;
  const Mat id = Mat::Identity(N, N);
  const Mat& xi = in.xi[0];
  std::vector<Mat> pv;
  for (int k = 0; k <= n; ++k) pv.push_back(v_projector(h, k));
  const Mat pn_sys = sys.phi * sys.phi.transpose();
  const Mat dhat = pn_sys * xi * pn_sys;
  const Mat lhat_dag = big_ldag_hat(in);
  const double scale = max_abs(xi * in.ldag);
  const double hat_scale = max_abs(dhat * lhat_dag);
  std::vector<IdentityReport> out;

  double hess = 0.0, mirror = 0.0, hat = 0.0;
  for (int k = 1; k <= n; ++k) {
    Mat perp = id - pv[k];
    hess = std::max(hess, max_abs(pv[k - 1] * xi * in.ldag * perp));
    mirror = std::max(mirror, max_abs(perp * in.ldag * xi * pv[k - 1]));
    hat = std::max(hat, max_abs(pv[k - 1] * dhat * lhat_dag * perp));
  }
  out.push_back(make_report("DL_hess", rel(hess, scale), in.tol, in.manifest, "k=1..n, D -> Xi"));
  out.push_back(make_report("DL_hess_mirror", rel(mirror, scale), in.tol, in.manifest, "k=1..n"));

  if (sys.mode == AssemblyMode::symbolic) {
    if (h.cfg.ladder_scope != LadderScope::all) {
      out.push_back(skipped_report("DL_hess_E", "needs a hierarchy with ladders on every level", in.manifest));
    } else {
      std::vector<Mat> gens;
      for (const Mat& g : in.ladders.du) gens.push_back(g);
      gens.push_back(in.ladders.dtheta);
      const std::size_t base = gens.size();
      for (const Mat& x : in.xi)
        for (std::size_t g = 0; g < base; ++g) gens.push_back(x * gens[g]);
      // V(0) enters through rho*M only.
      Mat p00 = Vec::Unit(N, 0) * Vec::Unit(N, 0).transpose();
      double worst = 0.0, sc = 0.0;
      for (int k = 1; k <= n; ++k) {
        Mat src = pv[k - 1] - pv[0] + p00;
        for (const Mat& g : gens) {
          worst = std::max(worst, max_abs((id - pv[k]) * in.ldag * g * src));
          sc = std::max(sc, max_abs(in.ldag * g));
        }
      }
      out.push_back(make_report("DL_hess_E", rel(worst, sc), in.tol, in.manifest,
                                "mirrored form, ladder and gradient placeholders"));
    }
  }

  {
    // S = (V0)^perp within V(n), spanned by layers 1..n.
    int cols = 0;
    for (int k = 1; k <= n; ++k) cols += h.layer_dim(k);
    Mat frame(N, cols);
    for (int k = 1, at = 0; k <= n; at += h.layer_dim(k), ++k) frame.middleCols(at, h.layer_dim(k)) = h.layer[k];
    Mat ls = frame.transpose() * in.L * frame;
    Eigen::JacobiSVD<Mat> svd(ls);
    const auto& sv = svd.singularValues();
    double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
    double res = 1.0;
    if (smin > 1e-14 * (sv.size() ? sv(0) : 1.0)) {
      Mat inv = ls.inverse();
      res = max_abs(inv * ls - Mat::Identity(ls.rows(), ls.cols()));
    }
    out.push_back(make_report("invert", res, in.tol, in.manifest,
                              "sigma_min(P_S L P_S) = " + std::to_string(smin) + " on dim " +
                                  std::to_string(frame.cols())));
  }

  double deter = 0.0, dscale = 0.0;
  for (int i = 0; i <= n - 1; ++i)
    for (int j = 0; j <= n; ++j) {
      Mat lhs = pv[i] * xi * in.ldag * pv[j];
      Mat rhs = pv[i] * dhat * lhat_dag * pv[j];
      deter = std::max(deter, max_abs(lhs - rhs));
      dscale = std::max({dscale, max_abs(lhs), max_abs(rhs)});
    }
  out.push_back(make_report("DL_deter", rel(deter, dscale), in.tol, in.manifest, "i<=n-1, j<=n"));
  out.push_back(make_report("hat_DL_hess", rel(hat, hat_scale), in.tol, in.manifest, "k=1..n"));
  out.push_back(make_report("Ker", 0.0, in.tol, in.manifest,
                            "structural: P_V0 commutes with the scalar symbols s and z"));
  return out;
}

std::vector<IdentityReport> verify_quadratic_lemmas(const LemmaInputs& in, bool break_sequences) {
  const Hierarchy& h = *in.h;
  const BlockSystem& sys = *in.sys;
  const QStar& q = *in.q;
  const int n = sys.n;
  if (int k = empty_layer(sys))
    return all_skipped({"hmQs", "Pn_mQs", "conservation_hatQ", "conservation_tildeQ"},
                       "degenerate hierarchy: layer " + std::to_string(k) + " is empty", in.manifest);
  const int N = h.size;
  std::vector<Mat> pv;
  for (int k = 0; k <= n; ++k) pv.push_back(v_projector(h, k));
  Rng rng(in.seed);
  std::vector<IdentityReport> out;

  // hmQs identity over 2 <= l <= k <= n+1.
  {
    double worst = 0.0, sc = 0.0;
    for (int draw = 0; draw < in.draws; ++draw) {
      std::vector<Vec> delta(n + 1);
      for (int r = 1; r <= n; ++r) {
        Vec g = rng.normal_vec(N);
        delta[r] = break_sequences ? Vec(g - pv[0] * g) : Vec((pv[r] - pv[0]) * g);
        delta[r] /= std::max(delta[r].norm(), 1e-300);
      }
      auto layer = [&](int i, const Vec& v) -> Vec { return pv[i] * v - pv[i - 1] * v; };
      for (int l = 2; l <= n + 1; ++l)
        for (int k = l; k <= n + 1; ++k) {
          Vec lhs = Vec::Zero(N), rhs = Vec::Zero(N);
          for (int r = 1; r < l; ++r)
            for (int s = 1; r + s <= l; ++s) {
              Vec t = q(delta[r], delta[s]);
              rhs += t;
              sc = std::max(sc, t.cwiseAbs().maxCoeff());
              for (int i = 1; i < k && i <= n; ++i)
                for (int j = 1; i + j <= k && j <= n; ++j) lhs += q(layer(i, delta[r]), layer(j, delta[s]));
            }
          worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
        }
    }
    out.push_back(make_report("hmQs", rel(worst, sc), in.tol, in.manifest,
                              std::to_string(in.draws) + " random sequences, 2<=l<=k<=n+1"));
  }

  // Pn_mQs identity with Q*_l = L R, R in (V0)^perp within V(l).
  {
    Mat lhat_dag = big_ldag_hat(in);
    const Mat& pn = pv[n];
    double worst = 0.0, sc = 0.0;
    for (int draw = 0; draw < in.draws; ++draw)
      for (int l = 1; l <= n; ++l) {
        Vec r = (pv[l] - pv[0]) * rng.normal_vec(N);
        Vec qs = in.L * r;
        Vec lhs = pn * in.ldag * qs;
        Vec rhs = pn * lhat_dag * pn * qs;
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
        sc = std::max({sc, lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff()});
      }
    out.push_back(make_report("Pn_mQs", rel(worst, sc), in.tol, in.manifest, "Q*_l = L R substitution, l<=n"));

    if (h.cfg.include_quadratic && !q.zero()) {
      worst = sc = 0.0;
      for (int draw = 0; draw < in.draws; ++draw) {
        std::vector<Vec> delta(n + 1);
        for (int r = 1; r <= n; ++r) delta[r] = (pv[r] - pv[0]) * rng.normal_vec(N);
        for (int l = 2; l <= n; ++l) {
          Vec qs = Vec::Zero(N);
          for (int r = 1; r < l; ++r)
            for (int s = 1; r + s <= l; ++s) qs += q(delta[r], delta[s]);
          Vec lhs = pn * in.ldag * qs;
          Vec rhs = pn * lhat_dag * pn * qs;
          worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
          sc = std::max({sc, lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff()});
        }
      }
      out.push_back(make_report("Pn_mQs_seq", rel(worst, sc), in.tol, in.manifest,
                                "Q*_l built from sequences f_r in V(r)"));
    }
  }

  // Conservation of the truncated quadratic terms.
  for (auto v : {Variant::hyperbolic, Variant::regularized}) {
    std::string id = v == Variant::hyperbolic ? "conservation_hatQ" : "conservation_tildeQ";
    if (v == Variant::regularized && sys.n < 1) continue;
    ReducedOperators ops;
    try {
      ops = make_reduced_operators(sys, v);
    } catch (const InvertibilityError& e) {
      out.push_back(skipped_report(id, e.what(), in.manifest));
      continue;
    }
    double worst = 0.0, sc = 0.0;
    for (int draw = 0; draw < in.draws; ++draw) {
      Vec f = rng.normal_vec(sys.total);
      Vec qv = ops.q_truncated(f);
      worst = std::max(worst, qv.head(sys.dims[0]).cwiseAbs().maxCoeff());
      if (qv.size()) sc = std::max(sc, qv.cwiseAbs().maxCoeff());
    }
    out.push_back(make_report(id, rel(worst, sc), in.tol, in.manifest, "layer-0 rows"));
  }
  return out;
}

Elimination eliminate(const BlockSystem& sys, int axis) {
  Elimination e;
  e.n = sys.n;
  const int n = sys.n;
  auto blk = [&](Mat& m, int i, int j) { return m.block(sys.offset[i], sys.offset[j], sys.dims[i], sys.dims[j]); };
  Mat T = Mat::Identity(sys.total, sys.total);
  Mat A = sys.A[axis];
  Mat L = sys.L;
  std::map<std::string, Mat> B = sys.B;
  e.T.push_back(T);
  e.A.push_back(A);
  e.L.push_back(L);
  for (auto& [k, b] : B) e.B[k].push_back(b);
  for (int l = 1; l <= n - 1; ++l) {
    Mat& Lp = e.L.back();
    Mat piv = blk(Lp, l, l);
    Eigen::FullPivLU<Mat> lu(piv);
    if (!lu.isInvertible()) {
      e.ok = false;
      e.failure = "singular pivot L_" + std::to_string(l - 1) + "^{" + std::to_string(l) + std::to_string(l) + "}";
      return e;
    }
    auto step = [&](const Mat& prev) {
      Mat next = prev;
      Mat prev_copy = prev;
      Mat lp = Lp;
      for (int i = l + 1; i <= n; ++i) {
        Mat fac = blk(lp, i, l) * lu.inverse();
        for (int j = 0; j <= n; ++j) blk(next, i, j) -= fac * blk(prev_copy, l, j);
      }
      return next;
    };
    Mat Tn = step(e.T.back()), An = step(e.A.back()), Ln = step(e.L.back());
    for (auto& [k, v] : e.B) v.push_back(step(v.back()));
    e.T.push_back(Tn);
    e.A.push_back(An);
    e.L.push_back(Ln);
  }
  return e;
}

std::vector<IdentityReport> verify_elimination_lemmas(const BlockSystem& sys, const Manifest& m, double tol) {
  std::vector<IdentityReport> out;
  const int n = sys.n;
  const std::vector<std::string> ids{"max_gauss_1", "max_gauss_2", "max_gauss_3", "rela_A",  "coro_B",
                                     "coro_T",      "exp_A",       "exp_B",       "exp_T",   "exp_C"};
  if (n < 2) return all_skipped(ids, "needs n >= 2", m);
  if (int k = empty_layer(sys)) return all_skipped(ids, "degenerate hierarchy: layer " + std::to_string(k) + " is empty", m);
  Elimination e = eliminate(sys);
  if (!e.ok) {
    for (const auto& id : ids) {
      auto r = make_report(id, std::numeric_limits<double>::infinity(), tol, m, "elimination failed: " + e.failure);
      out.push_back(r);
    }
    return out;
  }
  auto blk = [&](const Mat& mm, int i, int j) {
    return mm.block(sys.offset[i], sys.offset[j], sys.dims[i], sys.dims[j]);
  };
  auto inv = [&](int l, int k) -> Mat { return blk(e.L[l], k, k).inverse(); };
  const double lsc = max_abs(sys.L);
  // l runs over 0..n-1; the stored list has entries 0..n-1 (T_0.. T_{n-1}).
  const int lmax = static_cast<int>(e.L.size()) - 1;

  // statement 1
  {
    double w = 0.0;
    for (int l = 0; l <= lmax; ++l)
      for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= std::min(i - 1, l); ++j) w = std::max(w, max_abs(blk(e.L[l], i, j)));
    out.push_back(make_report("max_gauss_1", rel(w, lsc), tol, m, "L_l^{ij}=0 for j<=i-1, j<=l"));
  }
  // statement 2, for A, T and every B placeholder
  {
    double w = 0.0;
    auto scan = [&](const std::vector<Mat>& xs, double sc) {
      for (int l = 0; l <= lmax; ++l)
        for (int i = 0; i <= n; ++i)
          for (int j = 0; j <= std::min(i - 2, l - 1); ++j) w = std::max(w, rel(max_abs(blk(xs[l], i, j)), sc));
    };
    scan(e.A, max_abs(e.A[0]));
    scan(e.T, 1.0);
    for (const auto& [k, v] : e.B) scan(v, std::max(max_abs(v[0]), lsc));
    out.push_back(make_report("max_gauss_2", w, tol, m, "A,B,T zero for j<=i-2, j<=l-1"));
  }
  // statement 3
  {
    double w = 0.0;
    for (int l = 0; l <= lmax; ++l)
      for (int i = l + 1; i <= n; ++i)
        for (int j = l + 1; j <= n; ++j)
          w = std::max(w, max_abs(blk(e.L[l], i, j) - blk(e.L[l], j, i).transpose()));
    out.push_back(make_report("max_gauss_3", rel(w, lsc), tol, m, "L_l symmetric beyond l"));
  }
  // rela_A / coro_B / coro_T: X_l^{il} = L_l^{i,l+1}(L_l^{l+1,l+1})^-1 X_l^{l+1,l}
  auto coro = [&](const std::vector<Mat>& xs) {
    double w = 0.0, sc = max_abs(xs[0]);
    for (int l = 0; l <= lmax && l + 1 <= n; ++l) {
      Mat pinv = inv(l, l + 1);
      for (int i = l + 1; i <= n; ++i) {
        Mat rhs = blk(e.L[l], i, l + 1) * pinv * blk(xs[l], l + 1, l);
        w = std::max(w, rel(max_abs(blk(xs[l], i, l) - rhs), std::max(sc, lsc)));
      }
    }
    return w;
  };
  out.push_back(make_report("rela_A", coro(e.A), tol, m));
  {
    double w = 0.0;
    for (const auto& [k, v] : e.B) w = std::max(w, coro(v));
    out.push_back(make_report("coro_B", w, tol, m, e.B.empty() ? "frozen: B = 0" : "per placeholder"));
  }
  out.push_back(make_report("coro_T", coro(e.T), tol, m));

  // sum_{l=1}^{c+1} (X_{l-1}^{lc})^T (L_{l-1}^{ll})^-1 L_{l-1}^{lr}
  auto expansion = [&](const std::vector<Mat>& xs, int c, int r) {
    Mat acc = Mat::Zero(sys.dims[c], sys.dims[r]);
    for (int l = 1; l <= c + 1; ++l) acc += blk(xs[l - 1], l, c).transpose() * inv(l - 1, l) * blk(e.L[l - 1], l, r);
    return acc;
  };
  const int cmax = std::min(n - 1, lmax);
  {
    double w = 0.0;
    const double sc = max_abs(e.A[0]);
    for (int i = 1; i <= n; ++i)
      for (int j = 0; j <= cmax; ++j)
        w = std::max(w, rel(max_abs(blk(e.A[0], i, j).transpose() - expansion(e.A, j, i)), sc));
    out.push_back(make_report("exp_A", w, tol, m, "i>=1, j+1<=n"));
  }
  {
    double w = 0.0;
    for (const auto& [k, v] : e.B) {
      const double sc = std::max(max_abs(v[0]), lsc);
      for (int j = 1; j <= n; ++j)
        for (int i = 0; i <= cmax; ++i)
          w = std::max(w, rel(max_abs(blk(v[0], j, i).transpose() - expansion(v, i, j)), sc));
    }
    out.push_back(make_report("exp_B", w, tol, m, e.B.empty() ? "frozen: B = 0" : "per placeholder"));
  }
  {
    double w = 0.0;
    for (int j = 1; j <= n; ++j)
      for (int i = 0; i <= cmax; ++i) w = std::max(w, max_abs(blk(e.T[0], i, j) - expansion(e.T, i, j)));
    out.push_back(make_report("exp_T", w, tol, m));
  }
  {
    double w = 0.0;
    for (const auto& [k, v] : e.B) {
      const Mat& c0 = sys.C.at(k);
      const double sc = std::max(max_abs(v[0]), lsc);
      for (int j = 1; j <= n; ++j)
        for (int i = 0; i <= cmax; ++i) w = std::max(w, rel(max_abs(blk(c0, i, j) - expansion(v, i, j)), sc));
    }
    out.push_back(make_report("exp_C", w, tol, m, e.B.empty() ? "frozen: C = 0" : "per placeholder"));
  }
  return out;
}

OrderReport verify_order_linear(const BlockSystem& sys, const Mat& ldag, const Mat& xi_axis, const Mat& kernel,
                                Variant v, double tol) {
  OrderReport rep;
  rep.variant = v;
  rep.n = sys.n;
  rep.cap = 2 * sys.n;
  rep.expected = v == Variant::hyperbolic ? 2 * sys.n : 2 * sys.n - 1;
  for (int k = 1; k <= sys.n; ++k)
    if (sys.dims[k] == 0) {
      rep.skipped = true;
      rep.note = "empty layer " + std::to_string(k);
      return rep;
    }
  if (sys.has_q) {
    rep.skipped = true;
    rep.note = "quadratic model present; use the solver path";
    return rep;
  }
  auto ops = make_reduced_operators(sys, v);
  rep.order = rep.cap;
  for (int s = 0; s < kernel.cols(); ++s) {
    auto full = iterate_full(ldag, xi_axis, kernel, s, rep.cap);
    auto red = iterate_reduced(ops, s, rep.cap);
    auto d = compare_closures(full, red, rep.cap, rep.cap, tol);
    rep.first_discrepancy.push_back(d.first_discrepancy);
    double below = 0.0;
    int stop = d.first_discrepancy < 0 ? rep.cap + 1 : d.first_discrepancy;
    for (int p = 0; p < stop; ++p) below = std::max(below, d.per_power[p]);
    rep.worst_below.push_back(below);
    if (d.first_discrepancy >= 0) rep.order = std::min(rep.order, d.first_discrepancy - 1);
  }
  rep.pass = rep.order >= rep.expected;
  return rep;
}

Hierarchy corrupt_frame(const Hierarchy& h) {
  if (h.n < 3) throw UsageError("frame control needs depth >= 3");
  if (h.layer_dim(1) == 0 || h.layer_dim(2) == 0) throw UsageError("frame control needs nonempty layers 1 and 2");
  Hierarchy c = h;
  // V(1) frame: swap its last column for the first layer-2 direction.
  Mat& v1 = c.v[1];
  v1.col(v1.cols() - 1) = h.layer[2].col(0);
  return c;
}

bool targeted_by_frame_control(const std::string& id) {
  return id == "DL_hess" || id == "DL_hess_mirror" || id == "hat_DL_hess";
}

void write_reports_json(std::ostream& os, const std::vector<IdentityReport>& reps) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reps) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["residual"] = r.residual;
    j["tolerance"] = r.tol;
    j["pass"] = r.pass;
    j["skipped"] = r.skipped;
    j["note"] = r.note;
    j["manifest"] = r.manifest;
    arr.push_back(j);
  }
  os << arr.dump(2) << "\n";
}

void write_reports_csv(std::ostream& os, const std::vector<IdentityReport>& reps) {
  os << "id,residual,tolerance,pass,skipped\n";
  for (const auto& r : reps) {
    nlohmann::json res = r.residual;
    os << r.id << "," << res.dump() << "," << nlohmann::json(r.tol).dump() << "," << (r.pass ? 1 : 0) << ","
       << (r.skipped ? 1 : 0) << "\n";
  }
}

}  // namespace kinetic
