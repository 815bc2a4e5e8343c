#include "kinetic/solver.hpp"

#include "kinetic/errors.hpp"

#include <fftw3.h>
#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

namespace kinetic {

namespace {

using cd = std::complex<double>;
using cld = std::complex<long double>;
using CMatL = Eigen::Matrix<cld, Eigen::Dynamic, Eigen::Dynamic>;

// exp(M) in extended precision; the stiff spectra here reach |hM| ~ 1e3.
CMat expm(const CMat& m) {
  CMatL ml = m.cast<cld>();
  CMatL e = ml.exp();
  return e.cast<cd>();
}

// Blocks of exp([[hM, I, 0, 0], [0, 0, I, 0], [0, 0, 0, I], [0, 0, 0, 0]]):
// top row is exp(hM), phi1, phi2, phi3.
std::array<CMat, 4> phi_functions(const CMat& hm) {
  const Eigen::Index d = hm.rows();
  CMatL aug = CMatL::Zero(4 * d, 4 * d);
  aug.topLeftCorner(d, d) = hm.cast<cld>();
  for (int k = 0; k < 3; ++k) aug.block(k * d, (k + 1) * d, d, d) = CMatL::Identity(d, d);
  CMatL e = aug.exp();
  std::array<CMat, 4> out;
  for (int k = 0; k < 4; ++k) out[k] = e.block(0, k * d, d, d).cast<cd>();
  return out;
}

// FFTW planning is not thread safe; execution is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Real-field transforms between modes 0..K-1 and a uniform grid.
class Spectral {
 public:
  explicit Spectral(int grid) : g_(grid), k_(grid / 2 + 1) {
    in_ = fftw_alloc_real(g_);
    out_ = fftw_alloc_complex(k_);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd_ = fftw_plan_dft_r2c_1d(g_, in_, out_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_1d(g_, out_, in_, FFTW_ESTIMATE);
  }
  ~Spectral() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(in_);
    fftw_free(out_);
  }
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  int grid() const { return g_; }
  int modes() const { return k_; }

  Mat to_grid(const CMat& u) const {
    Mat x(u.rows(), g_);
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      for (int m = 0; m < k_; ++m) {
        cd v = m < u.cols() ? u(r, m) : cd(0.0);
        if (m == g_ / 2 && g_ % 2 == 0) v = 0.0;
        out_[m][0] = v.real();
        out_[m][1] = m == 0 ? 0.0 : v.imag();
      }
      fftw_execute(bwd_);
      for (int j = 0; j < g_; ++j) x(r, j) = in_[j];
    }
    return x;
  }

  CMat from_grid(const Mat& x, int keep) const {
    CMat u = CMat::Zero(x.rows(), k_);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (int j = 0; j < g_; ++j) in_[j] = x(r, j);
      fftw_execute(fwd_);
      for (int m = 0; m <= keep && m < k_; ++m) u(r, m) = cd(out_[m][0], out_[m][1]) / static_cast<double>(g_);
    }
    return u;
  }

 private:
  int g_, k_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

// du/dt = (stiff(kappa) + soft(kappa)) u + N(u), per Fourier mode.
struct Dynamics {
  std::string model;
  int dim = 0;
  Mat observe;
  std::function<CMat(double)> stiff;
  std::function<CMat(double)> soft;
  // Spectral in, spectral out; unset for linear models.
  std::function<CMat(const CMat&, const Spectral&, int)> nonlinear;
  bool dissipative = true;

  CMat generator(double kappa) const { return stiff(kappa) + soft(kappa); }
};

constexpr cd I1{0.0, 1.0};

double kappa_of(const SimConfig& cfg, int m) { return 2.0 * M_PI * m / cfg.length; }

double burn_time(const SimConfig& cfg) { return cfg.burn_in < 0.0 ? cfg.t_end / 10.0 : cfg.burn_in; }

std::vector<double> output_times(const SimConfig& cfg, double t0) {
  std::vector<double> ts = cfg.snapshots;
  ts.push_back(burn_time(cfg));
  ts.push_back(cfg.t_end);
  std::vector<double> out;
  for (double t : ts)
    if (t > t0 + 1e-14 && t <= cfg.t_end + 1e-14) out.push_back(t);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }),
            out.end());
  return out;
}

void check_config(const SimConfig& cfg) {
  if (!(cfg.kn > 0.0)) throw ConfigError("Kn must be positive");
  if (!(cfg.t_end > 0.0)) throw ConfigError("end time must be positive");
  if (!(cfg.length > 0.0)) throw ConfigError("domain length must be positive");
  if (cfg.grid < 8) throw ConfigError("grid needs at least 8 points");
  if (cfg.wavenumber < 0 || 3 * cfg.wavenumber > cfg.grid) throw ConfigError("wavenumber outside the resolved band");
}

class Diagnostics {
 public:
  Diagnostics(const Dynamics& d, const CMat& u0, double t0) : dyn_(d), t0_(t0) {
    c0_ = d.observe * u0.col(0);
    n0_ = u0.norm();
  }
  void record(Trajectory& tr, const CMat& u, double t) {
    if (!u.allFinite()) throw StiffnessError(dyn_.model + ": non-finite state at t=" + std::to_string(t));
    const double dt = std::max(t - t0_, 1e-300);
    tr.max_drift = std::max(tr.max_drift, (dyn_.observe * u.col(0) - c0_).cwiseAbs().maxCoeff() / std::max(dt, 1.0));
    const double nrm = u.norm();
    if (nrm > prev_ * (1.0 + 1e-10) + 1e-14) tr.energy_monotone = false;
    prev_ = nrm;
    tr.snaps.push_back({t, u});
  }
  void guard(const CMat& u, double t, int step) const {
    const double nrm = u.norm();
    if (!std::isfinite(nrm) || nrm > 1e8 * (n0_ + 1.0))
      throw StiffnessError(dyn_.model + ": state norm " + std::to_string(nrm) + " at t=" + std::to_string(t) +
                           " (step " + std::to_string(step) + ")");
  }

 private:
  const Dynamics& dyn_;
  double t0_;
  CVec c0_;
  double n0_ = 0.0;
  double prev_ = std::numeric_limits<double>::infinity();
};

int steps_for(double span, double h) { return std::max(1, static_cast<int>(std::ceil(span / h - 1e-9))); }

void run_exact(const Dynamics& d, const SimConfig& cfg, const CMat& u0, double t0, Trajectory& tr) {
  Diagnostics diag(d, u0, t0);
  diag.record(tr, u0, t0);
  std::vector<CMat> gen(u0.cols());
  for (Eigen::Index m = 0; m < u0.cols(); ++m)
    if (u0.col(m).norm() > 0.0) gen[m] = d.generator(kappa_of(cfg, static_cast<int>(m)));
  for (double t : output_times(cfg, t0)) {
    CMat u = CMat::Zero(u0.rows(), u0.cols());
    for (Eigen::Index m = 0; m < u0.cols(); ++m)
      if (gen[m].size() > 0) u.col(m) = expm(gen[m] * (t - t0)) * u0.col(m);
    diag.record(tr, u, t);
  }
}

// Ascher-Ruuth-Spiteri (4,4,3): stiff part implicit, streaming explicit.
void run_imex(const Dynamics& d, const SimConfig& cfg, const CMat& u0, double t0, Trajectory& tr) {
  static const double ai[5][5] = {{0, 0, 0, 0, 0},
                                  {0, 0.5, 0, 0, 0},
                                  {0, 1.0 / 6, 0.5, 0, 0},
                                  {0, -0.5, 0.5, 0.5, 0},
                                  {0, 1.5, -1.5, 0.5, 0.5}};
  static const double ae[5][5] = {{0, 0, 0, 0, 0},
                                  {0.5, 0, 0, 0, 0},
                                  {11.0 / 18, 1.0 / 18, 0, 0, 0},
                                  {5.0 / 6, -5.0 / 6, 0.5, 0, 0},
                                  {0.25, 1.75, 0.75, -1.75, 0}};
  if (d.nonlinear) throw UsageError("the IMEX integrator covers linear runs only");
  Diagnostics diag(d, u0, t0);
  diag.record(tr, u0, t0);
  const double h_req = cfg.dt > 0.0 ? cfg.dt : cfg.t_end / 1000.0;
  CMat u = u0;
  double t = t0;
  for (double t_out : output_times(cfg, t0)) {
    const int steps = steps_for(t_out - t, h_req);
    const double h = (t_out - t) / steps;
    for (Eigen::Index m = 0; m < u.cols(); ++m) {
      if (u.col(m).norm() == 0.0) continue;
      const double kap = kappa_of(cfg, static_cast<int>(m));
      const CMat S = d.stiff(kap), E = d.soft(kap);
      Eigen::PartialPivLU<CMat> lu(CMat::Identity(d.dim, d.dim) - 0.5 * h * S);
      CVec y = u.col(m);
      for (int s = 0; s < steps; ++s) {
        std::array<CVec, 5> ks, ke;
        std::array<CVec, 5> st;
        for (int i = 0; i < 5; ++i) {
          CVec rhs = y;
          for (int j = 0; j < i; ++j) rhs += h * (ai[i][j] * ks[j] + ae[i][j] * ke[j]);
          st[i] = ai[i][i] == 0.0 ? rhs : CVec(lu.solve(rhs));
          ks[i] = S * st[i];
          ke[i] = E * st[i];
        }
        // Both tableaux are stiffly accurate: the last stage is the update.
        y = st[4];
        ++tr.steps;
      }
      u.col(m) = y;
    }
    t = t_out;
    diag.guard(u, t, tr.steps);
    diag.record(tr, u, t);
  }
}

// Exponential time differencing RK4 with per-mode phi functions.
void run_etdrk4(const Dynamics& d, const SimConfig& cfg, const CMat& u0_in, double t0, Trajectory& tr) {
  Spectral sp(cfg.grid);
  const int keep = cfg.grid / 3;
  CMat u = CMat::Zero(d.dim, sp.modes());
  u.leftCols(std::min<Eigen::Index>(u0_in.cols(), keep + 1)) =
      u0_in.leftCols(std::min<Eigen::Index>(u0_in.cols(), keep + 1));
  Diagnostics diag(d, u, t0);
  diag.record(tr, u, t0);
  const double h_req = cfg.dt > 0.0 ? cfg.dt : std::min(cfg.t_end / 100.0, cfg.kn);
  auto N = [&](const CMat& v) {
    CMat out = d.nonlinear ? d.nonlinear(v, sp, keep) : CMat::Zero(v.rows(), v.cols());
    out.rightCols(out.cols() - keep - 1).setZero();
    return out;
  };
  struct Coeffs {
    CMat E, E2, Q, f1, f2, f3;
  };
  std::map<double, std::vector<Coeffs>> cache;
  auto coeffs = [&](double h) -> const std::vector<Coeffs>& {
    auto it = cache.find(h);
    if (it != cache.end()) return it->second;
    std::vector<Coeffs> cs(keep + 1);
    for (int m = 0; m <= keep; ++m) {
      const CMat M = d.generator(kappa_of(cfg, m));
      auto full = phi_functions(h * M);
      auto half = phi_functions(0.5 * h * M);
      cs[m].E = full[0];
      cs[m].E2 = half[0];
      cs[m].Q = 0.5 * h * half[1];
      cs[m].f1 = h * (full[1] - 3.0 * full[2] + 4.0 * full[3]);
      cs[m].f2 = h * 2.0 * (full[2] - 2.0 * full[3]);
      cs[m].f3 = h * (4.0 * full[3] - full[2]);
    }
    return cache.emplace(h, std::move(cs)).first->second;
  };
  double t = t0;
  for (double t_out : output_times(cfg, t0)) {
    const int steps = steps_for(t_out - t, h_req);
    const double h = (t_out - t) / steps;
    const auto& cs = coeffs(h);
    for (int s = 0; s < steps; ++s) {
      const CMat nu = N(u);
      CMat a = CMat::Zero(u.rows(), u.cols()), b = a, c = a, next = a;
      for (int m = 0; m <= keep; ++m) a.col(m) = cs[m].E2 * u.col(m) + cs[m].Q * nu.col(m);
      const CMat na = N(a);
      for (int m = 0; m <= keep; ++m) b.col(m) = cs[m].E2 * u.col(m) + cs[m].Q * na.col(m);
      const CMat nb = N(b);
      for (int m = 0; m <= keep; ++m) c.col(m) = cs[m].E2 * a.col(m) + cs[m].Q * (2.0 * nb.col(m) - nu.col(m));
      const CMat nc = N(c);
      for (int m = 0; m <= keep; ++m)
        next.col(m) = cs[m].E * u.col(m) + cs[m].f1 * nu.col(m) + cs[m].f2 * (na.col(m) + nb.col(m)) +
                      cs[m].f3 * nc.col(m);
      u = next;
      ++tr.steps;
      diag.guard(u, t + (s + 1) * h, tr.steps);
    }
    t = t_out;
    diag.record(tr, u, t);
  }
}

Trajectory integrate(const Dynamics& d, const SimConfig& cfg, const CMat& u0, double t0) {
  check_config(cfg);
  Trajectory tr;
  tr.model = d.model;
  tr.cfg = cfg;
  tr.state_dim = d.dim;
  tr.observe = d.observe;
  tr.conserved = static_cast<int>(d.observe.rows());
  tr.wavenumber_unit = 2.0 * M_PI / cfg.length;
  if (u0.rows() != d.dim) throw ShapeError("initial state has the wrong number of coordinates");
  if (cfg.nonlinear)
    run_etdrk4(d, cfg, u0, t0, tr);
  else if (cfg.integrator == Integrator::imex)
    run_imex(d, cfg, u0, t0, tr);
  else if (cfg.integrator == Integrator::etdrk4)
    run_etdrk4(d, cfg, u0, t0, tr);
  else
    run_exact(d, cfg, u0, t0, tr);
  if (!d.dissipative) tr.energy_monotone = true;
  return tr;
}

// Pointwise bilinear map on grid columns.
template <class F>
CMat pointwise(const CMat& v, const Spectral& sp, int keep, int out_rows, F&& f) {
  const Mat x = sp.to_grid(v);
  Mat y(out_rows, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) y.col(j) = f(Vec(x.col(j)));
  return sp.from_grid(y, keep);
}

Dynamics full_dynamics(const FullSystem& sys, const SimConfig& cfg) {
  Dynamics d;
  d.model = "reference";
  d.dim = static_cast<int>(sys.L.rows());
  d.observe = sys.kernel.transpose();
  const Mat L = sys.L, xi = sys.xi;
  const double kn = cfg.kn;
  d.stiff = [L, kn](double) { return CMat(L.cast<cd>() / kn); };
  d.soft = [xi](double k) { return CMat(-I1 * k * xi.cast<cd>()); };
  if (cfg.nonlinear && sys.q && !sys.q->zero()) {
    const QStar* q = sys.q;
    d.nonlinear = [q, kn, n = d.dim](const CMat& v, const Spectral& sp, int keep) {
      return CMat(pointwise(v, sp, keep, n, [&](const Vec& f) { return Vec((*q)(f, f) / kn); }));
    };
  }
  return d;
}

Dynamics reduced_dynamics(const ReducedOperators& ops, const SimConfig& cfg) {
  const BlockSystem& sys = *ops.sys;
  Dynamics d;
  d.model = to_string(ops.variant);
  d.dim = ops.evolved;
  const int n0 = sys.dims[0];
  d.observe = Mat::Zero(n0, d.dim);
  d.observe.leftCols(n0).setIdentity();
  const double kn = cfg.kn;
  const bool quad = cfg.nonlinear && sys.has_q;
  if (ops.variant == Variant::hyperbolic) {
    const Mat L = ops.Lhat, A = sys.A[ops.axis];
    d.stiff = [L, kn](double) { return CMat(L.cast<cd>() / kn); };
    d.soft = [A](double k) { return CMat(-I1 * k * A.cast<cd>()); };
    if (quad)
      d.nonlinear = [&ops, kn, n = d.dim](const CMat& v, const Spectral& sp, int keep) {
        return CMat(pointwise(v, sp, keep, n, [&](const Vec& f) { return Vec(ops.q_truncated(f) / kn); }));
      };
    return d;
  }
  // Regularized: f^n = (i k Kn elim_A - elim_L) y - (L^nn)^-1 Qtilde^n(y).
  const int ny = ops.evolved, nn = sys.dims[sys.n], on = sys.offset[sys.n];
  const Mat Ayy = sys.A[ops.axis].topLeftCorner(ny, ny), Ayn = sys.A[ops.axis].block(0, on, ny, nn);
  const Mat Lyy = sys.L.topLeftCorner(ny, ny), Lyn = sys.L.block(0, on, ny, nn);
  const Mat eA = ops.elim_A, eL = ops.elim_L;
  d.dissipative = false;
  d.stiff = [=](double) { return CMat((Lyy - Lyn * eL).cast<cd>() / kn); };
  d.soft = [=](double k) {
    return CMat(-I1 * k * (Ayy - Ayn * eL).cast<cd>() + I1 * k * (Lyn * eA).cast<cd>() +
                (k * k * kn) * (Ayn * eA).cast<cd>());
  };
  if (quad) {
    const int total = ops.total;
    d.nonlinear = [=, &ops](const CMat& v, const Spectral& sp, int keep) {
      auto pad = [&](const Vec& y) {
        Vec f = Vec::Zero(total);
        f.head(ny) = y;
        return f;
      };
      // Layer-n rows only involve layers below n.
      const CMat qn = pointwise(v, sp, keep, nn,
                                [&](const Vec& y) { return Vec(ops.q_truncated_row(pad(y), sys.n).segment(on, nn)); });
      CMat delta(nn, qn.cols()), fn(nn, qn.cols());
      for (Eigen::Index m = 0; m < qn.cols(); ++m) {
        const double k = 2.0 * M_PI * static_cast<double>(m) / cfg.length;
        delta.col(m) = -(ops.lnn_lu.solve(qn.col(m).real()).cast<cd>() +
                         I1 * ops.lnn_lu.solve(qn.col(m).imag()).cast<cd>());
        const CMat F = I1 * (k * kn) * eA.cast<cd>() - eL.cast<cd>();
        fn.col(m) = (m < v.cols() ? CVec(F * v.col(m)) : CVec::Zero(nn)) + delta.col(m);
      }
      CMat stacked(total, v.cols());
      stacked.topRows(ny) = v;
      stacked.bottomRows(nn) = fn.leftCols(v.cols());
      const CMat qlow = pointwise(stacked, sp, keep, ny, [&](const Vec& f) {
        Vec out = Vec::Zero(ny);
        for (int k = 1; k < sys.n; ++k) out += ops.q_truncated_row(f, k).head(ny);
        return out;
      });
      CMat out(ny, v.cols());
      for (Eigen::Index m = 0; m < v.cols(); ++m) {
        const double k = 2.0 * M_PI * static_cast<double>(m) / cfg.length;
        out.col(m) = -I1 * k * (Ayn.cast<cd>() * delta.col(m)) + (Lyn.cast<cd>() * delta.col(m)) / kn + qlow.col(m) / kn;
      }
      return out;
    };
  }
  return d;
}

}  // namespace

std::string to_string(Integrator i) {
  switch (i) {
    case Integrator::exact: return "exact";
    case Integrator::imex: return "imex";
    case Integrator::etdrk4: return "etdrk4";
  }
  return "?";
}

Integrator parse_integrator(const std::string& s) {
  if (s == "exact") return Integrator::exact;
  if (s == "imex") return Integrator::imex;
  if (s == "etdrk4") return Integrator::etdrk4;
  throw ConfigError("unknown integrator '" + s + "' (valid: exact, imex, etdrk4)");
}

const Snapshot& Trajectory::at(double t) const {
  for (const Snapshot& s : snaps)
    if (std::abs(s.t - t) < 1e-12) return s;
  throw UsageError("no snapshot at t=" + std::to_string(t));
}

CMat Trajectory::conserved_at(double t) const { return observe.cast<cd>() * at(t).u; }

CMat initial_state(const FullSystem& sys, const SimConfig& cfg) {
  check_config(cfg);
  const int n0 = static_cast<int>(sys.kernel.cols());
  const int dim = n0 - 2;
  Vec pert = Vec::Zero(n0);
  if (cfg.moments.empty()) {
    pert(0) = cfg.amplitude;
    pert(dim + 1) = cfg.amplitude;
  } else {
    if (static_cast<int>(cfg.moments.size()) != n0) throw ConfigError("moments need one entry per conserved coordinate");
    for (int i = 0; i < n0; ++i) pert(i) = cfg.moments[i];
  }
  Vec bg = Vec::Zero(n0);
  if (!cfg.background.empty()) {
    if (static_cast<int>(cfg.background.size()) != n0) throw ConfigError("background needs one entry per conserved coordinate");
    for (int i = 0; i < n0; ++i) bg(i) = cfg.background[i];
  }
  const int modes = cfg.nonlinear ? cfg.grid / 2 + 1 : cfg.wavenumber + 1;
  CMat u = CMat::Zero(sys.L.rows(), modes);
  u.col(0) = (sys.kernel * bg).cast<cd>();
  // cos(k x) = (e^{ikx} + e^{-ikx}) / 2
  if (cfg.wavenumber == 0)
    u.col(0) += (sys.kernel * pert).cast<cd>();
  else
    u.col(cfg.wavenumber) = (0.5 * sys.kernel * pert).cast<cd>();
  return u;
}

Trajectory simulate_reference(const FullSystem& sys, const SimConfig& cfg) {
  return simulate_reference(sys, cfg, initial_state(sys, cfg), 0.0);
}

Trajectory simulate_reference(const FullSystem& sys, const SimConfig& cfg, const CMat& u0, double t0) {
  if (sys.xi.rows() != sys.L.rows() || sys.kernel.rows() != sys.L.rows()) throw ShapeError("reference operators disagree in size");
  return integrate(full_dynamics(sys, cfg), cfg, u0, t0);
}

Trajectory simulate_reduced(const ReducedOperators& ops, const SimConfig& cfg, const CMat& u0, double t0) {
  if (!ops.sys) throw UsageError("reduced operators are not attached to a block system");
  return integrate(reduced_dynamics(ops, cfg), cfg, u0, t0);
}

RunPair run_pair(const FullSystem& full, const ReducedOperators& ops, const SimConfig& cfg) {
  RunPair p;
  p.ref = simulate_reference(full, cfg);
  const double tb = burn_time(cfg);
  const CMat proj = ops.sys->phi.transpose().cast<cd>() * p.ref.at(tb).u;
  p.red = simulate_reduced(ops, cfg, proj.topRows(ops.evolved), tb);
  return p;
}

double l2_norm(const CMat& u, double length) {
  double s = 0.0;
  for (Eigen::Index m = 0; m < u.cols(); ++m) s += (m == 0 ? 1.0 : 2.0) * u.col(m).squaredNorm();
  return std::sqrt(length * s);
}

LogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("log-log fit needs matching samples");
  const int n = static_cast<int>(x.size());
  Mat a(n, 2);
  Vec b(n);
  for (int i = 0; i < n; ++i) {
    a(i, 0) = std::log10(x[i]);
    a(i, 1) = 1.0;
    b(i) = std::log10(y[i]);
  }
  LogFit f;
  if (!b.allFinite() || !a.allFinite()) {
    f.slope = f.intercept = f.r2 = std::numeric_limits<double>::quiet_NaN();
    f.max_residual = std::numeric_limits<double>::infinity();
    return f;
  }
  Vec c = a.colPivHouseholderQr().solve(b);
  f.slope = c(0);
  f.intercept = c(1);
  Vec res = b - a * c;
  const double mean = b.mean();
  const double tot = (b.array() - mean).square().sum();
  f.r2 = tot > 0.0 ? 1.0 - res.squaredNorm() / tot : 1.0;
  f.max_residual = res.cwiseAbs().maxCoeff();
  return f;
}

ConvergenceReport fit_order(const std::vector<Trajectory>& ref, const std::vector<Trajectory>& red, double r2_min) {
  if (ref.size() != red.size()) throw UsageError("reference and reduced sweeps differ in length");
  if (ref.size() < 4) throw UsageError("order fitting needs at least 4 Kn points, got " + std::to_string(ref.size()));
  ConvergenceReport r;
  bool floor_hit = false;
  for (size_t i = 0; i < ref.size(); ++i) {
    const Trajectory &a = ref[i], &b = red[i];
    if (std::abs(a.cfg.t_end - b.cfg.t_end) > 1e-14 || a.conserved != b.conserved)
      throw UsageError("sweep entries were run with different settings");
    const double T = a.cfg.t_end;
    const CMat ca = a.conserved_at(T), cb = b.conserved_at(T);
    CMat diff = CMat::Zero(ca.rows(), std::max(ca.cols(), cb.cols()));
    diff.leftCols(ca.cols()) += ca;
    diff.leftCols(cb.cols()) -= cb;
    const int dim = a.conserved - 2;
    const double len = a.cfg.length;
    r.kn.push_back(a.cfg.kn);
    r.err_density.push_back(l2_norm(diff.topRows(1), len));
    r.err_momentum.push_back(l2_norm(diff.middleRows(1, dim), len));
    r.err_energy.push_back(l2_norm(diff.bottomRows(1), len));
    r.err_total.push_back(l2_norm(diff, len));
    if (r.err_total.back() <= 16.0 * std::numeric_limits<double>::epsilon() * l2_norm(ca, len)) floor_hit = true;
  }
  const LogFit f = fit_loglog(r.kn, r.err_total);
  r.slope = f.slope;
  r.r2 = f.r2;
  if (floor_hit) {
    r.non_asymptotic = true;
    r.note = "errors at rounding level";
  } else if (!(f.r2 >= r2_min)) {
    r.non_asymptotic = true;
    r.note = "poor log-log fit";
  }
  return r;
}

namespace {

SlopeReport finish_slope(SlopeReport s) {
  bool all_zero = true;
  for (double v : s.value) all_zero = all_zero && v == 0.0;
  s.identically_zero = all_zero;
  if (all_zero) {
    s.slope = std::numeric_limits<double>::quiet_NaN();
    s.r2 = std::numeric_limits<double>::quiet_NaN();
    s.non_asymptotic = true;
    s.note = "identically zero";
    return s;
  }
  if (s.kn.size() < 4) throw UsageError("slope fitting needs at least 4 Kn points");
  const LogFit f = fit_loglog(s.kn, s.value);
  s.slope = f.slope;
  s.r2 = f.r2;
  s.non_asymptotic = !(f.r2 >= 0.98);
  if (s.non_asymptotic) s.note = "poor log-log fit";
  return s;
}

}  // namespace

SlopeReport verify_projection_scaling(const Hierarchy& h, const FullSystem& full, const SimConfig& cfg, int k,
                                      const std::vector<double>& kn_list) {
  if (k < 0 || k + 1 > h.n) throw UsageError("projection scaling needs 0 <= k < n");
  SlopeReport s;
  s.id = "projection_scaling_k" + std::to_string(k);
  const Mat& next = h.layer[k + 1];
  for (double kn : kn_list) {
    SimConfig c = cfg;
    c.kn = kn;
    // Sup over [t_b, T]: a single-time reading can sit on a phase node of the wave.
    const double tb = burn_time(c);
    for (int i = 0; i <= 16; ++i) c.snapshots.push_back(tb + (c.t_end - tb) * i / 16.0);
    const Trajectory tr = simulate_reference(full, c);
    double worst = 0.0;
    for (const Snapshot& sn : tr.snaps)
      if (sn.t >= tb - 1e-14) worst = std::max(worst, l2_norm(next.transpose().cast<cd>() * sn.u, c.length));
    s.kn.push_back(kn);
    s.value.push_back(worst);
  }
  return finish_slope(s);
}

SlopeReport verify_qstar_truncation(const Hierarchy& h, const FullSystem& full, const SimConfig& cfg, int l,
                                    const std::vector<double>& kn_list) {
  if (l < 1 || l > h.n) throw UsageError("Q* truncation needs 1 <= l <= n");
  if (l > 2) throw UsageError("Q* truncation is implemented for l <= 2");
  SlopeReport s;
  s.id = "qstar_truncation_l" + std::to_string(l);
  const bool zero_q = !full.q || full.q->zero();
  const Mat ldag = zero_q || l == 1 ? Mat() : pseudo_inverse(full.L);
  const Mat p0 = full.kernel * full.kernel.transpose();
  const Mat p1 = h.layer[1] * h.layer[1].transpose();
  Spectral sp(cfg.grid);
  for (double kn : kn_list) {
    s.kn.push_back(kn);
    // Q*_1 is an empty sum, as is the truncated side.
    if (zero_q || l == 1) {
      s.value.push_back(0.0);
      continue;
    }
    SimConfig c = cfg;
    c.kn = kn;
    const Trajectory tr = simulate_reference(full, c);
    const CMat& u = tr.final().u;
    // f_1 - f_0 = Kn L+ (d/dt + Xi d/dx) f_0; the time derivative lands in V(0).
    CMat g(u.rows(), u.cols());
    for (Eigen::Index m = 0; m < u.cols(); ++m)
      g.col(m) = (kn * I1 * kappa_of(c, static_cast<int>(m))) * (ldag * full.xi * p0).cast<cd>() * u.col(m);
    const CMat f1 = p1.cast<cd>() * u;
    const Mat gx = sp.to_grid(g), fx = sp.to_grid(f1);
    double acc = 0.0;
    for (int j = 0; j < sp.grid(); ++j) {
      const Vec a = gx.col(j), b = fx.col(j);
      acc += ((*full.q)(a, a) - (*full.q)(b, b)).squaredNorm();
    }
    s.value.push_back(std::sqrt(acc * c.length / sp.grid()));
  }
  return finish_slope(s);
}

std::vector<double> log_sweep(double lo, double hi, int points) {
  if (points < 2 || !(lo > 0.0) || !(hi > lo)) throw UsageError("log sweep needs 0 < lo < hi and 2+ points");
  std::vector<double> out;
  for (int i = 0; i < points; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
  return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
  os << "time,mode";
  for (int a = 0; a < t.state_dim; ++a) os << ",re" << a << ",im" << a;
  os << '\n';
  os.precision(17);
  for (const Snapshot& s : t.snaps)
    for (Eigen::Index m = 0; m < s.u.cols(); ++m) {
      if (s.u.col(m).norm() == 0.0) continue;
      os << s.t << ',' << m;
      for (Eigen::Index a = 0; a < s.u.rows(); ++a) os << ',' << s.u(a, m).real() << ',' << s.u(a, m).imag();
      os << '\n';
    }
}

void write_convergence_csv(std::ostream& os, const ConvergenceReport& r) {
  os << "kn,err_density,err_momentum,err_energy,err_total\n";
  os.precision(17);
  for (size_t i = 0; i < r.kn.size(); ++i)
    os << r.kn[i] << ',' << r.err_density[i] << ',' << r.err_momentum[i] << ',' << r.err_energy[i] << ','
       << r.err_total[i] << '\n';
}

std::string convergence_json(const ConvergenceReport& r) {
  nlohmann::ordered_json j;
  j["kn"] = r.kn;
  j["err_density"] = r.err_density;
  j["err_momentum"] = r.err_momentum;
  j["err_energy"] = r.err_energy;
  j["err_total"] = r.err_total;
  j["slope"] = std::isfinite(r.slope) ? nlohmann::ordered_json(r.slope) : nlohmann::ordered_json(nullptr);
  j["r2"] = std::isfinite(r.r2) ? nlohmann::ordered_json(r.r2) : nlohmann::ordered_json(nullptr);
  j["non_asymptotic"] = r.non_asymptotic;
  j["note"] = r.note;
  return j.dump(2);
}

void write_gnuplot(std::ostream& os, const std::string& csv_name, const std::string& title) {
  os << "set datafile separator ','\n"
     << "set logscale xy\n"
     << "set xlabel 'Kn'\nset ylabel 'error at T'\n"
     << "set title '" << title << "'\n"
     << "set key left top\n"
     << "plot '" << csv_name << "' every ::1 using 1:5 with linespoints title 'total', \\\n"
     << "     '' every ::1 using 1:2 with linespoints title 'density', \\\n"
     << "     '' every ::1 using 1:4 with linespoints title 'energy'\n";
}

}  // namespace kinetic
