#include "doctest.h"

#include "kinetic/collision.hpp"
#include "kinetic/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

using namespace kinetic;

namespace {

std::vector<CollisionModel> gallery(const std::string& custom_path = "") {
  std::vector<CollisionModel> g;
  CollisionModel m;
  for (auto k : {CollisionKind::bgk, CollisionKind::shakhov, CollisionKind::es_bgk, CollisionKind::maxwell_diagonal,
                 CollisionKind::coupled_synthetic}) {
    m.kind = k;
    g.push_back(m);
  }
  if (!custom_path.empty()) {
    m.kind = CollisionKind::custom_matrix;
    m.table_path = custom_path;
    g.push_back(m);
  }
  return g;
}

Vec sample_project(const BasisTable& t, const VelocityGrid& g, auto&& f) {
  std::vector<double> s(g.size());
  for (int k = 0; k < g.size(); ++k) s[k] = f(g.points[k]);
  return project_samples(t, g, s);
}

std::string write_custom(const BasisTable& t, const std::string& name, bool skew = false) {
  Rng rng(5);
  Mat b = rng.normal_mat(t.size(), t.size());
  Mat m = -(b * b.transpose() / t.size() + Mat::Identity(t.size(), t.size()));
  if (skew) m(0, 1) += 1e-3;
  std::string path = "/tmp/kinetic_test_" + name + ".csv";
  std::ofstream os(path);
  os.precision(17);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
    os << "\n";
  }
  return path;
}

}  // namespace

TEST_CASE("multiplets tile the basis and carry Casimir ell(ell+1)") {
  auto t = build_basis({3, 5});
  auto mults = rotational_multiplets(t);
  Mat jx = rotation_generator(t, 1, 2), jy = rotation_generator(t, 2, 0), jz = rotation_generator(t, 0, 1);
  Mat cas = -(jx * jx + jy * jy + jz * jz);
  Mat sum = Mat::Zero(t.size(), t.size());
  for (const auto& m : mults) {
    CHECK(m.frame.cols() == 2 * m.ell + 1);
    CHECK(max_abs(m.frame.transpose() * m.frame - Mat::Identity(m.frame.cols(), m.frame.cols())) < 1e-12);
    CHECK(max_abs(cas * m.frame - m.ell * (m.ell + 1.0) * m.frame) < 1e-10);
    sum += m.frame * m.frame.transpose();
  }
  CHECK(max_abs(sum - Mat::Identity(t.size(), t.size())) < 1e-10);
}

TEST_CASE("kernel frame spans collision invariants") {
  auto t = build_basis({3, 4});
  auto g = velocity_grid(t);
  Mat k = kernel_frame(t);
  CHECK(max_abs(k.transpose() * k - Mat::Identity(5, 5)) < 1e-14);
  Vec energy = sample_project(t, g, [](const auto& xi) {
    return (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) * maxwellian0(3, xi);
  });
  CHECK(max_abs(energy - k * (k.transpose() * energy)) < 1e-12);
}

TEST_CASE("maxwell eigenvalues") {
  CHECK(maxwell_eigenvalue(0, 0) == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(std::abs(maxwell_eigenvalue(0, 1)) < 1e-13);
  CHECK(std::abs(maxwell_eigenvalue(1, 0)) < 1e-13);
  CHECK(maxwell_eigenvalue(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(maxwell_eigenvalue(1, 1) == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  for (int k = 0; k < 4; ++k)
    for (int l = 0; l < 5; ++l)
      if (!((k == 0 && l <= 1) || (k == 1 && l == 0))) CHECK(maxwell_eigenvalue(k, l) < 0.0);
}

TEST_CASE("bgk spectrum") {
  auto t = build_basis({3, 4});
  Mat l = build_linear({}, t);
  Eigen::SelfAdjointEigenSolver<Mat> es(l);
  int zeros = 0, minus = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double v = es.eigenvalues()(i);
    if (std::abs(v) < 1e-12) ++zeros;
    if (std::abs(v + 1) < 1e-12) ++minus;
  }
  CHECK(zeros == 5);
  CHECK(minus == t.size() - 5);
  auto rep = check_hypotheses(l, t);
  CHECK(rep.pass());
  CHECK(rep.kernel_dim == 5);
  CHECK(rep.max_complement_eigenvalue == doctest::Approx(-1.0));
}

TEST_CASE("shakhov and es-bgk rescale heat flux and stress") {
  auto t = build_basis({3, 4});
  auto g = velocity_grid(t);
  Vec q = sample_project(t, g, [](const auto& xi) {
    double r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    return xi[0] * (r2 - 5.0) * maxwellian0(3, xi);
  });
  Vec s = sample_project(t, g, [](const auto& xi) { return xi[0] * xi[1] * maxwellian0(3, xi); });
  CollisionModel m;
  m.kind = CollisionKind::shakhov;
  m.prandtl = 2.0 / 3.0;
  Mat l = build_linear(m, t);
  CHECK(max_abs(l * q + (2.0 / 3.0) * q) < 1e-12);
  CHECK(max_abs(l * s + s) < 1e-12);
  m.kind = CollisionKind::es_bgk;
  l = build_linear(m, t);
  CHECK(max_abs(l * q + q) < 1e-12);
  CHECK(max_abs(l * s + 1.5 * s) < 1e-12);
}

TEST_CASE("es-bgk is bgk in 1D") {
  auto t = build_basis({1, 6});
  CollisionModel m;
  m.kind = CollisionKind::es_bgk;
  CHECK(max_abs(build_linear(m, t) - build_linear({}, t)) == 0.0);
}

TEST_CASE("gallery passes hypotheses and pseudo-inverse identities") {
  for (int dim : {1, 3}) {
    auto t = build_basis({dim, dim == 1 ? 8 : 5});
    std::string path = write_custom(t, "custom" + std::to_string(dim));
    Mat k = kernel_frame(t);
    Mat perp = Mat::Identity(t.size(), t.size()) - k * k.transpose();
    for (const auto& m : gallery(path)) {
      CAPTURE(to_string(m.kind));
      Mat l = build_linear(m, t);
      auto rep = check_hypotheses(l, t);
      CHECK(rep.pass());
      CHECK(rep.kernel_dim == dim + 2);
      Mat li = pseudo_inverse(l);
      CHECK(max_abs(li * l - perp) < 1e-10);
      CHECK(max_abs(l * li - perp) < 1e-10);
      CHECK(max_abs(li - li.transpose()) < 1e-12);
      CHECK(max_abs(li * k) < 1e-12);
      // <Lf,f> <= 0 with equality only on the kernel
      Rng rng(3);
      for (int r = 0; r < 10; ++r) {
        Vec f = rng.normal_vec(t.size());
        Vec fp = perp * f;
        CHECK(f.dot(l * f) < -1e-3 * fp.squaredNorm() * 0.1);
      }
    }
  }
}

TEST_CASE("bgk pseudo-inverse is minus the complement projector") {
  auto t = build_basis({3, 4});
  Mat k = kernel_frame(t);
  Mat li = pseudo_inverse(build_linear({}, t));
  CHECK(max_abs(li + (Mat::Identity(t.size(), t.size()) - k * k.transpose())) < 1e-12);
}

TEST_CASE("isotropic models commute with rotations") {
  auto t = build_basis({3, 5});
  Mat jz = rotation_generator(t, 0, 1), jx = rotation_generator(t, 1, 2);
  for (const auto& m : gallery()) {
    CAPTURE(to_string(m.kind));
    Mat l = build_linear(m, t);
    CHECK(max_abs(l * jz - jz * l) < 1e-10);
    CHECK(max_abs(l * jx - jx * l) < 1e-10);
  }
}

TEST_CASE("coupled-synthetic couples degrees and is seeded") {
  auto t = build_basis({3, 5});
  CollisionModel m;
  m.kind = CollisionKind::coupled_synthetic;
  Mat a = build_linear(m, t), b = build_linear(m, t);
  CHECK(max_abs(a - b) == 0.0);
  m.seed = 43;
  CHECK(max_abs(a - build_linear(m, t)) > 1e-3);
  // degree-3 and degree-5 heat-flux-like entries couple
  double cross = 0.0;
  for (int i = 0; i < t.size(); ++i)
    for (int j = 0; j < t.size(); ++j)
      if (t[i].degree == 3 && t[j].degree == 5) cross = std::max(cross, std::abs(a(i, j)));
  CHECK(cross > 1e-3);
}

TEST_CASE("constructed counterexamples are flagged") {
  auto t = build_basis({3, 4});
  Mat l = build_linear({}, t);
  Mat c = complement_frame(kernel_frame(t), t.size());
  Vec v = c.col(3);
  auto rep = check_hypotheses(l + 2.0 * v * v.transpose(), t);
  CHECK_FALSE(rep.semidefinite);
  CHECK_FALSE(rep.pass());

  CollisionModel m;
  m.kind = CollisionKind::maxwell_diagonal;
  m.eigen_overrides[{2, 2}] = 0.0;
  Mat z = build_linear_unchecked(m, t);
  auto rz = check_hypotheses(z, t);
  CHECK(rz.kernel_dim == 10);
  CHECK_FALSE(rz.pass());
  CHECK_THROWS_AS(build_linear(m, t), HypothesisError);
}

TEST_CASE("custom matrix loading") {
  auto t = build_basis({1, 5});
  CollisionModel m;
  m.kind = CollisionKind::custom_matrix;
  m.table_path = write_custom(t, "skew", true);
  CHECK_THROWS_AS(build_linear(m, t), HypothesisError);
  m.table_path = write_custom(t, "ok");
  CHECK(check_hypotheses(build_linear(m, t), t).pass());
  auto big = build_basis({1, 6});
  CHECK_THROWS_AS(build_linear(m, big), ShapeError);
}

TEST_CASE("maxwell table file overrides defaults") {
  auto t = build_basis({3, 4});
  std::string path = "/tmp/kinetic_test_table.csv";
  {
    std::ofstream os(path);
    os << "degree,multiplet,eigenvalue\n2,l2,-3.5\n";
  }
  CollisionModel m;
  m.kind = CollisionKind::maxwell_diagonal;
  m.table_path = path;
  Mat l = build_linear(m, t);
  auto mults = rotational_multiplets(t);
  for (const auto& mu : mults)
    if (mu.degree == 2 && mu.ell == 2) CHECK(max_abs(l * mu.frame + 3.5 * mu.frame) < 1e-12);
}

TEST_CASE("ill-conditioned pseudo-inverse") {
  Mat l = Mat::Zero(3, 3);
  l(0, 0) = -1.0;
  l(1, 1) = -1e-13;
  CHECK_THROWS_AS(pseudo_inverse(l, 1e-15), IllConditionedError);
  CHECK_NOTHROW(pseudo_inverse(l));
}

TEST_CASE("unknown collision kind names valid kinds") {
  try {
    parse_collision_kind("hard-sphere");
    FAIL("expected throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("maxwell-diagonal") != std::string::npos);
  }
}

namespace {

// Independent quadratic oracle: Maxwellian built by quadrature from the
// moments of a perturbed state, projected back, second amplitude coefficient
// extracted by an even-polynomial fit.
struct BgkOracle {
  BasisTable t;
  VelocityGrid g;
  Vec feq(const Vec& c) const {
    auto f = reconstruct(t, g, c);
    double rho = 0, m[3] = {0, 0, 0}, e = 0;
    for (int k = 0; k < g.size(); ++k) {
      double w = g.weights[k] * f[k] / maxwellian0(t.dim(), g.points[k]);
      rho += w;
      for (int i = 0; i < t.dim(); ++i) {
        m[i] += w * g.points[k][i];
        e += w * g.points[k][i] * g.points[k][i];
      }
    }
    double u[3] = {0, 0, 0}, u2 = 0;
    for (int i = 0; i < t.dim(); ++i) {
      u[i] = m[i] / rho;
      u2 += u[i] * u[i];
    }
    double theta = (e / rho - u2) / t.dim();
    std::vector<double> s(g.size());
    for (int k = 0; k < g.size(); ++k) {
      double r2 = 0;
      for (int i = 0; i < t.dim(); ++i) r2 += (g.points[k][i] - u[i]) * (g.points[k][i] - u[i]);
      s[k] = rho * std::exp(-0.5 * r2 / theta) / std::pow(2 * M_PI * theta, 0.5 * t.dim());
    }
    return project_samples(t, g, s);
  }
  // 1/2 d^2/dt^2 feq(e0 + t g) at t=0
  Vec quad(const Vec& v) const {
    Vec e0 = Vec::Unit(t.size(), 0);
    Vec f0 = feq(e0);
    const double hs[4] = {0.01, 0.02, 0.03, 0.04};
    Mat a(4, 4);
    Mat rhs(4, t.size());
    for (int i = 0; i < 4; ++i) {
      Vec s = (feq(e0 + hs[i] * v) + feq(e0 - hs[i] * v) - 2 * f0) / (2 * hs[i] * hs[i]);
      for (int j = 0; j < 4; ++j) a(i, j) = std::pow(hs[i] * hs[i], j);
      rhs.row(i) = s.transpose();
    }
    Mat coef = a.partialPivLu().solve(rhs);
    return coef.row(0).transpose();
  }
  Vec bilinear(const Vec& x, const Vec& y) const { return 0.25 * (quad(x + y) - quad(x - y)); }
};

}  // namespace

TEST_CASE("quadratic-bgk matches the quadrature fitting oracle") {
  for (int dim : {1, 3}) {
    BgkOracle o{build_basis({dim, dim == 1 ? 6 : 3}), {}};
    o.g = velocity_grid(o.t, dim == 1 ? 40 : 16);
    QuadraticModel qm;
    qm.kind = QuadraticKind::quadratic_bgk;
    auto q = build_quadratic(qm, o.t);
    CHECK(conservation_residual(q, o.t) < 1e-12);
    Rng rng(17);
    Mat k = kernel_frame(o.t);
    double worst = 0.0, cons = 0.0;
    for (int r = 0; r < 20; ++r) {
      Vec g = rng.normal_vec(o.t.size()).normalized(), h = rng.normal_vec(o.t.size()).normalized();
      Vec mine = q.apply(g, h);
      worst = std::max(worst, max_abs(mine - o.bilinear(g, h)));
      cons = std::max(cons, max_abs(k.transpose() * mine));
    }
    CHECK(worst < 1e-8);
    CHECK(cons < 1e-10);
  }
}

TEST_CASE("quadratic-bgk Q* vanishes on non-equilibrium parts") {
  auto t = build_basis({1, 6});
  QuadraticModel qm;
  qm.kind = QuadraticKind::quadratic_bgk;
  QStar q(build_quadratic(qm, t), t);
  Rng rng(2);
  for (int r = 0; r < 5; ++r) CHECK(max_abs(q(rng.normal_vec(t.size()), rng.normal_vec(t.size()))) < 1e-14);
}

TEST_CASE("none tensor and custom tensors") {
  auto t = build_basis({1, 6});
  CHECK(build_quadratic({}, t).empty());
  auto syn = synthetic_tensor(t, 9);
  CHECK(conservation_residual(syn, t) < 1e-14);
  std::string path = "/tmp/kinetic_test_tensor.csv";
  {
    std::ofstream os(path);
    write_tensor_csv(os, syn);
  }
  QuadraticModel qm;
  qm.kind = QuadraticKind::custom_tensor;
  qm.tensor_path = path;
  auto back = build_quadratic(qm, t);
  Rng rng(1);
  Vec g = rng.normal_vec(t.size()), h = rng.normal_vec(t.size());
  CHECK(max_abs(back.apply(g, h) - syn.apply(g, h)) < 1e-13);
  CHECK(max_abs(back.apply(g, h) - back.apply(h, g)) < 1e-13);
  {
    std::ofstream os(path);
    os << "a,b,c,value\n0,3,3,1.0\n";
  }
  CHECK_THROWS_AS(build_quadratic(qm, t), HypothesisError);
}
