#include "doctest.h"

#include "fixture.hpp"
#include "kinetic/errors.hpp"
#include "kinetic/solver.hpp"

#include <Eigen/QR>
#include <unsupported/Eigen/MatrixFunctions>

#include <sstream>

using namespace kinetic;
using kinetic::testing::Setup;
using cd = std::complex<double>;

namespace {

FullSystem full_of(const Setup& st) { return {st.L, st.xi[0], st.kernel, &st.q}; }

double max_dev(const Trajectory& tr) {
  double worst = 0.0;
  for (const Snapshot& s : tr.snaps) worst = std::max(worst, (s.u - tr.snaps.front().u).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace

TEST_CASE("equilibrium data stays put") {
  BasisTable tb = build_basis({1, 8});
  BilinearTensor t = synthetic_tensor(tb, 3);
  Setup st(1, 8, CollisionKind::coupled_synthetic, 2, 1.0, &t);
  SimConfig c;
  c.kn = 0.01;
  c.amplitude = 0.0;
  c.background = {0.05, -0.02, 0.03};
  for (bool nl : {false, true}) {
    c.nonlinear = nl;
    Trajectory tr = simulate_reference(full_of(st), c);
    CHECK(max_dev(tr) < 1e-12);
    auto ops = make_reduced_operators(*st.sys, Variant::regularized);
    CMat y0 = (st.sys->phi.transpose().cast<cd>() * tr.snaps.front().u).topRows(ops.evolved);
    Trajectory red = simulate_reduced(ops, c, y0, 0.0);
    CHECK(max_dev(red) < 1e-12);
  }
}

TEST_CASE("IMEX agrees with the matrix exponential") {
  for (CollisionKind k : {CollisionKind::bgk, CollisionKind::maxwell_diagonal, CollisionKind::coupled_synthetic}) {
    Setup st(1, 8, k, 1);
    SimConfig c;
    c.kn = 0.1;
    c.t_end = 1.0;
    Trajectory ex = simulate_reference(full_of(st), c);
    c.integrator = Integrator::imex;
    Trajectory im = simulate_reference(full_of(st), c);
    CHECK((ex.final().u - im.final().u).cwiseAbs().maxCoeff() < 1e-8);
    // third order: halving dt cuts the error by about 8
    c.dt = 0.02;
    double e1 = (simulate_reference(full_of(st), c).final().u - ex.final().u).norm();
    c.dt = 0.01;
    double e2 = (simulate_reference(full_of(st), c).final().u - ex.final().u).norm();
    CHECK(e1 / e2 > 6.0);
  }
}

TEST_CASE("exponential integrator is exact without a quadratic term") {
  Setup st(1, 8, CollisionKind::maxwell_diagonal, 2);
  SimConfig c;
  c.kn = 0.003;
  Trajectory ex = simulate_reference(full_of(st), c);
  c.integrator = Integrator::etdrk4;
  Trajectory et = simulate_reference(full_of(st), c);
  CMat a = ex.final().u;
  CMat b = et.final().u.leftCols(a.cols());
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(et.final().u.rightCols(et.final().u.cols() - a.cols()).norm() == 0.0);
}

TEST_CASE("conserved totals do not drift") {
  BasisTable tb = build_basis({1, 8});
  BilinearTensor t = synthetic_tensor(tb, 5);
  Setup st(1, 8, CollisionKind::bgk, 2, 1.0, &t);
  SimConfig c;
  c.kn = 0.01;
  c.amplitude = 0.1;
  c.background = {0.01, 0.02, -0.01};
  c.snapshots = {0.25, 0.5, 0.75};
  for (bool nl : {false, true}) {
    c.nonlinear = nl;
    Trajectory tr = simulate_reference(full_of(st), c);
    CHECK(tr.max_drift < 1e-10);
    for (Variant v : {Variant::hyperbolic, Variant::regularized}) {
      auto ops = make_reduced_operators(*st.sys, v);
      CMat y0 = (st.sys->phi.transpose().cast<cd>() * tr.snaps.front().u).topRows(ops.evolved);
      CHECK(simulate_reduced(ops, c, y0, 0.0).max_drift < 1e-10);
    }
  }
  c.nonlinear = false;
  c.integrator = Integrator::imex;
  CHECK(simulate_reference(full_of(st), c).max_drift < 1e-10);
}

TEST_CASE("linear reference norm never grows") {
  for (CollisionKind k : {CollisionKind::bgk, CollisionKind::maxwell_diagonal, CollisionKind::coupled_synthetic}) {
    Setup st(1, 8, k, 1);
    SimConfig c;
    c.kn = 0.05;
    for (int i = 1; i <= 10; ++i) c.snapshots.push_back(0.1 * i - 0.05);
    Trajectory tr = simulate_reference(full_of(st), c);
    CHECK(tr.energy_monotone);
    CHECK(tr.snaps.back().u.norm() < tr.snaps.front().u.norm());
  }
}

TEST_CASE("small time steps leave the nonlinear run unchanged") {
  BasisTable tb = build_basis({1, 8});
  BilinearTensor t = synthetic_tensor(tb, 11);
  Setup st(1, 8, CollisionKind::bgk, 2, 1.0, &t);
  SimConfig c;
  c.kn = 0.01;
  c.amplitude = 0.1;
  c.nonlinear = true;
  c.t_end = 0.5;
  Trajectory a = simulate_reference(full_of(st), c);
  c.dt = c.kn / 2;
  Trajectory b = simulate_reference(full_of(st), c);
  CHECK((a.final().u - b.final().u).cwiseAbs().maxCoeff() < 1e-10);
  // nonlinearity did something: harmonics appear
  CHECK(a.final().u.col(2).norm() > 1e-8);
}

TEST_CASE("regularized n=1 reproduces the Navier-Stokes-Fourier dispersion") {
  Setup st(1, 8, CollisionKind::bgk, 1, 0.7);
  auto ops = make_reduced_operators(*st.sys, Variant::regularized);
  SimConfig c;
  c.kn = 0.05;
  c.t_end = 0.8;
  Vec y = Vec::Zero(3);
  y << 0.01, 0.004, -0.02;
  CMat y0 = CMat::Zero(3, 2);
  y0.col(1) = y.cast<cd>();
  Trajectory tr = simulate_reduced(ops, c, y0, 0.0);
  // Independent NSF generator: -i k P0 Xi P0 + Kn k^2 P0 Xi L+ P_perp Xi P0.
  Mat ldag = st.L.completeOrthogonalDecomposition().pseudoInverse();
  Mat perp = Mat::Identity(st.table.size(), st.table.size()) - st.kernel * st.kernel.transpose();
  Mat z0 = st.kernel.transpose() * st.xi[0] * st.kernel;
  Mat visc = st.kernel.transpose() * st.xi[0] * ldag * perp * st.xi[0] * st.kernel;
  const double k = 1.0;
  CMat gen = cd(0.0, -k) * z0.cast<cd>() + (c.kn * k * k) * visc.cast<cd>();
  CMat prop = (gen * c.t_end).exp();
  CVec want = prop * y.cast<cd>();
  CHECK((tr.final().u.col(1) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("order fitting") {
  Setup st(1, 8, CollisionKind::bgk, 1);
  auto ops = make_reduced_operators(*st.sys, Variant::hyperbolic);
  std::vector<Trajectory> ref, red;
  for (double kn : log_sweep(1e-3, 1e-1, 6)) {
    SimConfig c;
    c.kn = kn;
    RunPair p = run_pair(full_of(st), ops, c);
    ref.push_back(p.ref);
    red.push_back(p.red);
  }
  ConvergenceReport r = fit_order(ref, red);
  CHECK(r.slope >= 1.7);
  CHECK(r.r2 >= 0.98);
  CHECK_FALSE(r.non_asymptotic);

  ConvergenceReport self = fit_order(ref, ref);
  CHECK(self.non_asymptotic);
  for (double e : self.err_total) CHECK(e == 0.0);

  std::vector<Trajectory> three(ref.begin(), ref.begin() + 3), three_red(red.begin(), red.begin() + 3);
  CHECK_THROWS_AS(fit_order(three, three_red), UsageError);

  std::ostringstream csv, gp;
  write_convergence_csv(csv, r);
  CHECK(csv.str().rfind("kn,err_density", 0) == 0);
  write_gnuplot(gp, "conv.csv", "bgk n=1");
  CHECK(gp.str().find("logscale") != std::string::npos);
  CHECK(convergence_json(r) == convergence_json(r));
}

TEST_CASE("log-log fit") {
  std::vector<double> x = {1e-3, 1e-2, 1e-1, 1.0}, y;
  for (double v : x) y.push_back(3.0 * v * v);
  LogFit f = fit_loglog(x, y);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0));
}

TEST_CASE("projection scaling") {
  Setup st(1, 8, CollisionKind::bgk, 2);
  SimConfig c;
  auto kns = log_sweep(1e-3, 1e-1, 5);
  SlopeReport s0 = verify_projection_scaling(st.h, full_of(st), c, 0, kns);
  CHECK(std::abs(s0.slope - 1.0) < 0.3);
  SlopeReport s1 = verify_projection_scaling(st.h, full_of(st), c, 1, kns);
  CHECK(std::abs(s1.slope - 2.0) < 0.3);
  c.amplitude = 0.0;
  c.background = {0.1, 0.0, 0.1};
  SlopeReport eq = verify_projection_scaling(st.h, full_of(st), c, 0, kns);
  CHECK(eq.identically_zero);
  CHECK_THROWS_AS(verify_projection_scaling(st.h, full_of(st), c, 2, kns), UsageError);
}

TEST_CASE("truncated quadratic term") {
  BasisTable tb = build_basis({1, 8});
  BilinearTensor t = synthetic_tensor(tb, 11);
  Setup st(1, 8, CollisionKind::bgk, 2, 1.0, &t);
  SimConfig c;
  c.grid = 32;
  auto kns = log_sweep(1e-3, 1e-1, 5);
  SlopeReport l1 = verify_qstar_truncation(st.h, full_of(st), c, 1, kns);
  CHECK(l1.identically_zero);
  SlopeReport l2 = verify_qstar_truncation(st.h, full_of(st), c, 2, kns);
  CHECK(std::abs(l2.slope - 3.0) < 0.4);
  Setup none(1, 8, CollisionKind::bgk, 2);
  CHECK(verify_qstar_truncation(none.h, full_of(none), c, 2, kns).identically_zero);
}

TEST_CASE("bad configurations") {
  Setup st(1, 8, CollisionKind::bgk, 1);
  SimConfig c;
  c.kn = -1.0;
  CHECK_THROWS_AS(simulate_reference(full_of(st), c), ConfigError);
  c.kn = 0.1;
  c.moments = {1.0};
  CHECK_THROWS_AS(simulate_reference(full_of(st), c), ConfigError);
  CHECK_THROWS_AS(parse_integrator("rk45"), ConfigError);
  CHECK(to_string(parse_integrator("imex")) == "imex");
}

TEST_CASE("trajectory csv lists nonzero modes") {
  Setup st(1, 6, CollisionKind::bgk, 1);
  SimConfig c;
  Trajectory tr = simulate_reference(full_of(st), c);
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  std::string s = os.str();
  CHECK(s.rfind("time,mode,re0,im0", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + static_cast<long>(tr.snaps.size()));
}
