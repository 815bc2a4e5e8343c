// End-to-end acceptance run: one PASS/FAIL line per criterion.
#include "kinetic/assembly.hpp"
#include "kinetic/collision.hpp"
#include "kinetic/hierarchy.hpp"
#include "kinetic/series.hpp"
#include "kinetic/solver.hpp"
#include "kinetic/thirteen_moments.hpp"
#include "kinetic/verifier.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace kinetic;
namespace fs = std::filesystem;

namespace {

struct Model {
  std::string label;
  CollisionModel m;
};

struct Problem {
  BasisTable table;
  Mat L, ldag, kernel;
  std::vector<Mat> xi;
  Ladders ladders;
  QStar q;
  Hierarchy h;
  BlockSystem sys;
};

Problem make_problem(int dim, int nmax, const CollisionModel& m, int n, const BilinearTensor* t = nullptr,
                     AssemblyMode mode = AssemblyMode::frozen, LadderScope scope = LadderScope::equilibrium) {
  Problem p;
  p.table = build_basis({dim, nmax});
  p.L = build_linear(m, p.table);
  p.ldag = pseudo_inverse(p.L);
  p.kernel = kernel_frame(p.table);
  for (int i = 0; i < dim; ++i) p.xi.push_back(streaming_matrix(p.table, i));
  p.ladders = ladder_matrices(p.table);
  p.q = QStar(t ? *t : BilinearTensor{p.table.size(), {}}, p.table);
  GeneratorConfig gc;
  gc.n = n;
  gc.ladder_scope = scope;
  gc.include_quadratic = t != nullptr;
  p.h = build_hierarchy(make_generator_ops(p.table, p.ldag, p.q), gc);
  p.sys = assemble_blocks(p.h, p.L, p.xi, p.ladders, p.q, mode);
  return p;
}

fs::path g_tmp;

// Gallery at a given dimension; custom-matrix reads a coupled operator back from CSV.
std::vector<Model> gallery(int dim) {
  std::vector<Model> out;
  auto add = [&](const std::string& label, CollisionKind k, double tau, std::uint64_t seed = 42) {
    CollisionModel m;
    m.kind = k;
    m.tau = tau;
    m.seed = seed;
    out.push_back({label, m});
  };
  add("bgk", CollisionKind::bgk, 1.0);
  add("shakhov", CollisionKind::shakhov, 0.7);
  if (dim == 3) add("es-bgk", CollisionKind::es_bgk, 1.3);
  add("maxwell-diagonal", CollisionKind::maxwell_diagonal, 1.0);
  add("coupled-synthetic", CollisionKind::coupled_synthetic, 1.0, 17);
  const int nmax = dim == 1 ? 8 : 5;
  BasisTable t = build_basis({dim, nmax});
  CollisionModel src;
  src.kind = CollisionKind::coupled_synthetic;
  src.seed = 99;
  const fs::path csv = g_tmp / ("custom_d" + std::to_string(dim) + ".csv");
  {
    Mat l = build_linear(src, t);
    std::ofstream os(csv);
    os.precision(17);
    for (Eigen::Index a = 0; a < l.rows(); ++a) {
      for (Eigen::Index b = 0; b < l.cols(); ++b) os << (b ? "," : "") << l(a, b);
      os << "\n";
    }
  }
  CollisionModel cm;
  cm.kind = CollisionKind::custom_matrix;
  cm.table_path = csv.string();
  out.push_back({"custom-matrix", cm});
  return out;
}

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

int failures = 0;

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << title << "  [" << detail << "]"
            << std::endl;
  if (!pass) ++failures;
}

std::set<int> g_only;

void guarded(int id, const std::string& title, const std::function<std::pair<bool, std::string>()>& body) {
  if (!g_only.empty() && !g_only.count(id)) return;
  const auto t0 = std::chrono::steady_clock::now();
  std::pair<bool, std::string> r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(id, title, r.first, r.second + "; " + fmt(s) + " s");
}

// 1 ---------------------------------------------------------------------------
std::pair<bool, std::string> hypotheses() {
  bool ok = true;
  int checked = 0;
  double worst_sym = 0.0, worst_pinv = 0.0, worst_eig = -1e300;
  std::ostringstream bad;
  for (int dim : {1, 3}) {
    const int nmax = dim == 1 ? 8 : 5;
    BasisTable t = build_basis({dim, nmax});
    std::vector<Model> models = gallery(dim);
    // property draws: random relaxation times and coupled seeds
    std::mt19937_64 rng(2024 + dim);
    std::uniform_real_distribution<double> tau(0.2, 5.0);
    for (int d = 0; d < 6; ++d) {
      for (CollisionKind k : {CollisionKind::bgk, CollisionKind::shakhov, CollisionKind::coupled_synthetic}) {
        CollisionModel m;
        m.kind = k;
        m.tau = tau(rng);
        m.seed = rng();
        models.push_back({to_string(k) + "-draw", m});
      }
    }
    Mat k = kernel_frame(t);
    Mat perp = Mat::Identity(t.size(), t.size()) - k * k.transpose();
    for (const auto& mm : models) {
      Mat l = build_linear(mm.m, t);
      HypothesisReport r = check_hypotheses(l, t);
      const double pinv = max_abs(pseudo_inverse(l) * l - perp);
      const bool pass = r.kernel_dim == dim + 2 && r.symmetry_residual < 1e-12 && r.max_complement_eigenvalue < 0.0 &&
                        pinv < 1e-10;
      worst_sym = std::max(worst_sym, r.symmetry_residual);
      worst_pinv = std::max(worst_pinv, pinv);
      worst_eig = std::max(worst_eig, r.max_complement_eigenvalue);
      ++checked;
      if (!pass) {
        ok = false;
        bad << " " << mm.label << "@D" << dim;
      }
    }
  }
  return {ok, std::to_string(checked) + " operators; max symmetry " + fmt(worst_sym) + ", max L+L-P residual " +
                  fmt(worst_pinv) + ", max complement eigenvalue " + fmt(worst_eig) + bad.str()};
}

// 2 ---------------------------------------------------------------------------
std::pair<bool, std::string> counts() {
  bool ok = true;
  std::ostringstream d;
  for (auto k : {CollisionKind::bgk, CollisionKind::shakhov, CollisionKind::es_bgk, CollisionKind::maxwell_diagonal}) {
    CollisionModel m;
    m.kind = k;
    const int n = k == CollisionKind::maxwell_diagonal ? 2 : 1;
    Problem p = make_problem(3, 5, m, n);
    const int v1 = p.h.v_dim(1);
    ok = ok && v1 == 13;
    d << to_string(k) << " V1=" << v1;
    if (n == 2) {
      ok = ok && p.h.v_dim(2) == 26;
      d << " V2=" << p.h.v_dim(2);
    }
    d << "; ";
  }
  return {ok, d.str()};
}

// 3 ---------------------------------------------------------------------------
std::pair<bool, std::string> lemmas() {
  const std::set<std::string> required = {"DL_hess", "invert", "DL_deter", "hat_DL_hess", "hmQs", "Pn_mQs",
                                          "max_gauss_1", "max_gauss_2", "max_gauss_3", "rela_A", "exp_A",
                                          "coro_B", "coro_T", "exp_B", "exp_T", "exp_C"};
  std::set<std::string> exercised;
  int total = 0, failed = 0;
  std::ostringstream bad;
  bool controls_ok = true;
  int frame_controls = 0, sequence_controls = 0;
  for (int dim : {1, 3}) {
    const int nmax = dim == 1 ? 8 : 5;
    BasisTable t = build_basis({dim, nmax});
    const BilinearTensor tensor = synthetic_tensor(t, 5);
    for (const auto& mm : gallery(dim)) {
      for (int n = 1; n <= (dim == 1 ? 3 : 2); ++n) {
        for (AssemblyMode mode : {AssemblyMode::frozen, AssemblyMode::symbolic}) {
          Problem p = make_problem(dim, nmax, mm.m, n, &tensor, mode, LadderScope::all);
          LemmaInputs in;
          in.h = &p.h;
          in.sys = &p.sys;
          in.L = p.L;
          in.ldag = p.ldag;
          in.kernel = p.kernel;
          in.xi = p.xi;
          in.ladders = p.ladders;
          in.q = &p.q;
          in.seed = 1000 + 10 * n + dim;
          in.draws = 50;
          in.manifest = {{"model", mm.label}, {"n", std::to_string(n)}};
          std::vector<IdentityReport> reps = verify_operator_lemmas(in);
          for (auto v : {verify_quadratic_lemmas(in), verify_elimination_lemmas(p.sys, in.manifest)})
            reps.insert(reps.end(), v.begin(), v.end());
          for (const auto& r : reps) {
            if (r.skipped) continue;
            ++total;
            exercised.insert(r.id);
            if (!r.pass) {
              ++failed;
              bad << " " << mm.label << "/D" << dim << "/n" << n << ":" << r.id;
            }
          }
          if (mode != AssemblyMode::frozen) continue;
          // control 1: corrupted frame flips exactly the DL_hess family
          // needs three nonempty layers to corrupt; saturated hierarchies have none left at k = 3
          if (n == 3 && p.h.layer_dim(1) > 0 && p.h.layer_dim(2) > 0 && p.h.layer_dim(3) > 0) {
            Hierarchy broken = corrupt_frame(p.h);
            BlockSystem bsys = assemble_blocks(broken, p.L, p.xi, p.ladders, p.q, AssemblyMode::frozen);
            LemmaInputs bin = in;
            bin.h = &broken;
            bin.sys = &bsys;
            auto clean = verify_operator_lemmas(in);
            auto dirty = verify_operator_lemmas(bin);
            for (size_t i = 0; i < clean.size(); ++i)
              if ((clean[i].pass && !dirty[i].pass) != targeted_by_frame_control(clean[i].id)) {
                controls_ok = false;
                bad << " frame control " << mm.label << "/D" << dim << ":" << clean[i].id;
              }
            ++frame_controls;
          }
          // control 2: broken sequences flip exactly hmQs
          if (n >= 2) {
            auto clean = verify_quadratic_lemmas(in);
            auto dirty = verify_quadratic_lemmas(in, true);
            for (size_t i = 0; i < clean.size(); ++i) {
              if (clean[i].skipped) continue;
              if ((clean[i].pass && !dirty[i].pass) != (clean[i].id == "hmQs")) {
                controls_ok = false;
                bad << " sequence control " << mm.label << "/D" << dim << "/n" << n << ":" << clean[i].id;
              }
            }
            ++sequence_controls;
          }
        }
      }
    }
  }
  // control 3: a self-comparison sweep is refused as non-asymptotic
  CollisionModel bgk;
  Problem p = make_problem(1, 8, bgk, 1);
  FullSystem full{p.L, p.xi[0], p.kernel, nullptr};
  std::vector<Trajectory> ref;
  for (double kn : log_sweep(1e-3, 1e-1, 4)) {
    SimConfig c;
    c.kn = kn;
    ref.push_back(simulate_reference(full, c));
  }
  const bool fit_control = fit_order(ref, ref).non_asymptotic;
  std::set<std::string> missing;
  for (const auto& r : required)
    if (!exercised.count(r)) missing.insert(r);
  std::ostringstream d;
  d << total << " identity checks, " << failed << " failed" << bad.str() << "; " << frame_controls << " frame and "
    << sequence_controls << " sequence controls " << (controls_ok ? "on target" : "OFF TARGET")
    << "; fit self-comparison " << (fit_control ? "refused" : "ACCEPTED");
  for (const auto& m : missing) d << "; never exercised: " << m;
  return {failed == 0 && controls_ok && fit_control && missing.empty() && frame_controls > 0 && sequence_controls > 0,
          d.str()};
}

// 4, 5 ------------------------------------------------------------------------
std::pair<bool, std::string> linear_order(Variant v) {
  int runs = 0, bad = 0;
  std::ostringstream d;
  for (int dim : {1, 3}) {
    const int nmax = dim == 1 ? 8 : 5;
    for (const auto& mm : gallery(dim)) {
      for (int n = 1; n <= (dim == 1 ? 3 : 2); ++n) {
        Problem p = make_problem(dim, nmax, mm.m, n);
        OrderReport r = verify_order_linear(p.sys, p.ldag, p.xi[0], p.kernel, v);
        ++runs;
        if (r.skipped || !r.pass) {
          ++bad;
          d << " " << mm.label << "/D" << dim << "/n" << n << " order " << r.order << (r.skipped ? " skipped" : "");
        }
      }
    }
  }
  return {bad == 0, std::to_string(runs) + " model/depth cases, " + std::to_string(bad) + " short" + d.str()};
}

// 6 ---------------------------------------------------------------------------
ConvergenceReport sweep(const Problem& p, const FullSystem& full, Variant v, double amplitude, double dt_scale) {
  ReducedOperators ops = make_reduced_operators(p.sys, v);
  std::vector<Trajectory> ref, red;
  for (double kn : log_sweep(1e-3, 1e-1, 6)) {
    SimConfig c;
    c.kn = kn;
    c.nonlinear = true;
    c.amplitude = amplitude;
    c.grid = 64;
    if (dt_scale != 1.0) c.dt = std::min(c.t_end / 100.0, kn) * dt_scale;
    RunPair rp = run_pair(full, ops, c);
    ref.push_back(std::move(rp.ref));
    red.push_back(std::move(rp.red));
  }
  return fit_order(ref, red);
}

std::pair<bool, std::string> nonlinear_order() {
  CollisionModel bgk;
  BasisTable t = build_basis({1, 8});
  const BilinearTensor qb = build_quadratic({QuadraticKind::quadratic_bgk, 1.0, ""}, t);
  Problem p = make_problem(1, 8, bgk, 2, &qb);
  FullSystem full{p.L, p.xi[0], p.kernel, &p.q};
  bool ok = true;
  std::ostringstream d;
  for (Variant v : {Variant::hyperbolic, Variant::regularized}) {
    ConvergenceReport r = sweep(p, full, v, 0.1, 1.0);
    ConvergenceReport half = sweep(p, full, v, 0.1, 0.5);
    const double change = std::abs(half.slope - r.slope) / std::abs(r.slope);
    ok = ok && r.slope >= 2.5 && r.r2 >= 0.98 && !r.non_asymptotic && change < 0.05;
    d << to_string(v) << " slope " << fmt(r.slope) << " R2 " << fmt(r.r2) << " dt/2 change " << fmt(change) << "; ";
  }
  // Supplementary: quadratic-bgk leaves Q* = 0, so also drive a tensor with nonzero Q*.
  const BilinearTensor syn = synthetic_tensor(t, 11);
  Problem ps = make_problem(1, 8, bgk, 2, &syn);
  FullSystem fsyn{ps.L, ps.xi[0], ps.kernel, &ps.q};
  d << "synthetic tensor:";
  for (Variant v : {Variant::hyperbolic, Variant::regularized}) {
    ConvergenceReport r = sweep(ps, fsyn, v, 0.1, 1.0);
    ok = ok && r.slope >= 2.5 && r.r2 >= 0.98;
    d << " " << to_string(v) << " " << fmt(r.slope) << " (R2 " << fmt(r.r2) << ")";
  }
  return {ok, d.str()};
}

// 7 ---------------------------------------------------------------------------
std::pair<bool, std::string> projection() {
  CollisionModel bgk;
  Problem p = make_problem(1, 8, bgk, 2);
  FullSystem full{p.L, p.xi[0], p.kernel, nullptr};
  SimConfig c;
  bool ok = true;
  std::ostringstream d;
  for (int k : {0, 1}) {
    SlopeReport s = verify_projection_scaling(p.h, full, c, k, log_sweep(1e-3, 1e-1, 6));
    ok = ok && std::abs(s.slope - (k + 1)) <= 0.3 && !s.identically_zero;
    d << "k=" << k << " slope " << fmt(s.slope) << " (R2 " << fmt(s.r2) << ") ";
  }
  return {ok, d.str()};
}

// 8 ---------------------------------------------------------------------------
// Chapman-Enskog by hand: solve L phi = g for the stress and heat-flux sources
// with a least-squares solve on the full matrix, then read mu and kappa off
// the quadratic forms. Independent of L+ and of the series engine.
std::pair<double, double> ce_oracle(const Mat& L, const BasisTable& t) {
  VelocityGrid g = velocity_grid(t, 8);
  std::vector<double> sxy, qx;
  for (const auto& x : g.points) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    sxy.push_back(x[0] * x[1] * maxwellian0(3, x));
    qx.push_back(x[0] * (r2 / 2.0 - 2.5) * maxwellian0(3, x));
  }
  const Vec s = project_samples(t, g, sxy), q = project_samples(t, g, qx);
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(L);
  const double mu = -s.dot(cod.solve(s)) / s.squaredNorm();
  const double kappa = -q.dot(cod.solve(q));
  return {mu, kappa};
}

std::pair<bool, std::string> prandtl() {
  bool ok = true;
  std::ostringstream d;
  for (auto [k, target] : {std::pair{CollisionKind::bgk, 1.0}, std::pair{CollisionKind::shakhov, 2.0 / 3.0}}) {
    CollisionModel m;
    m.kind = k;
    m.tau = 0.8;
    Problem p = make_problem(3, 5, m, 1);
    auto a = iterate_full(p.ldag, p.xi[0], p.kernel, shear_seed_index(3), 1);
    auto b = iterate_full(p.ldag, p.xi[0], p.kernel, energy_seed_index(3), 1);
    const NsfCoefficients c = nsf_coefficients(a, b);
    const auto [mu, kappa] = ce_oracle(p.L, p.table);
    const double pr_oracle = 2.5 * mu / kappa;
    ok = ok && std::abs(c.prandtl - pr_oracle) < 1e-8 && std::abs(pr_oracle - target) < 1e-8 &&
         std::abs(c.viscosity - mu) < 1e-8;
    d << to_string(k) << " Pr engine " << c.prandtl << " oracle " << pr_oracle << "; ";
  }
  return {ok, d.str()};
}

// 9 ---------------------------------------------------------------------------
std::pair<bool, std::string> grad13() {
  bool ok = true;
  std::ostringstream d;
  BasisTable t = build_basis({3, 5});
  for (auto k : {CollisionKind::maxwell_diagonal, CollisionKind::bgk}) {
    CollisionModel m;
    m.kind = k;
    ThirteenBasis b = build_13(pseudo_inverse(build_linear(m, t)), t);
    ok = ok && b.grad_deviation < 1e-12;
    d << to_string(k) << " " << fmt(b.grad_deviation) << "; ";
  }
  return {ok, d.str()};
}

// 10 --------------------------------------------------------------------------
std::pair<bool, std::string> solver_integrity() {
  BasisTable t = build_basis({1, 8});
  bool ok = true;
  double steady = 0.0, drift = 0.0, imex = 0.0;
  for (auto k : {CollisionKind::bgk, CollisionKind::maxwell_diagonal, CollisionKind::coupled_synthetic}) {
    CollisionModel m;
    m.kind = k;
    const BilinearTensor qt = synthetic_tensor(t, 3);
    Problem p = make_problem(1, 8, m, 2, &qt);
    FullSystem lin{p.L, p.xi[0], p.kernel, nullptr};
    FullSystem nl{p.L, p.xi[0], p.kernel, &p.q};
    for (bool nonlinear : {false, true}) {
      SimConfig c;
      c.kn = 0.05;
      c.amplitude = 0.0;
      c.background = {0.3, 0.1, -0.2};
      c.nonlinear = nonlinear;
      const FullSystem& f = nonlinear ? nl : lin;
      const CMat u0 = initial_state(f, c);
      Trajectory r = simulate_reference(f, c);
      steady = std::max(steady, (r.final().u - u0).cwiseAbs().maxCoeff());
      for (Variant v : {Variant::hyperbolic, Variant::regularized}) {
        ReducedOperators ops = make_reduced_operators(p.sys, v);
        CMat y0 = p.sys.phi.transpose().cast<std::complex<double>>() * u0;
        y0.conservativeResize(ops.evolved, Eigen::NoChange);
        Trajectory red = simulate_reduced(ops, c, y0, 0.0);
        steady = std::max(steady, (red.final().u - y0).cwiseAbs().maxCoeff());
      }
      c.amplitude = 0.05;
      for (Integrator in : {Integrator::exact, Integrator::imex}) {
        c.integrator = in;
        drift = std::max(drift, simulate_reference(f, c).max_drift);
      }
    }
    SimConfig c;
    c.kn = 0.05;
    c.integrator = Integrator::exact;
    Trajectory ex = simulate_reference(lin, c);
    c.integrator = Integrator::imex;
    Trajectory im = simulate_reference(lin, c);
    imex = std::max(imex, (ex.final().u - im.final().u).cwiseAbs().maxCoeff());
  }
  ok = steady < 1e-12 && drift < 1e-10 && imex < 1e-8;
  return {ok, "steadiness " + fmt(steady) + ", drift/unit time " + fmt(drift) + ", IMEX vs exponential " + fmt(imex)};
}

// 11 --------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<bool, std::string> reproducible(const std::string& cli) {
  if (cli.empty()) return {false, "no --cli binary given"};
  const fs::path cfg = fs::path(KINETIC_CONFIG_DIR) / "lemma-suite-all.yaml";
  const fs::path a = g_tmp / "run_a", b = g_tmp / "run_b";
  int status[2];
  int i = 0;
  for (const fs::path& out : {a, b}) {
    const std::string cmd = "\"" + cli + "\" run --config \"" + cfg.string() + "\" --out \"" + out.string() +
                            "\" --seed 7 > \"" + out.string() + ".log\" 2>&1";
    status[i++] = std::system(cmd.c_str());
  }
  int files = 0, differ = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    ++files;
    if (slurp(e.path()) != slurp(b / fs::relative(e.path(), a))) ++differ;
  }
  nlohmann::json m = nlohmann::json::parse(slurp(a / "manifest.json"));
  const std::string status_field = m["payload"]["status"];
  return {differ == 0 && files > 0 && status[0] == 0 && status[1] == 0,
          std::to_string(files) + " JSON files compared, " + std::to_string(differ) + " differ; run status " +
              status_field};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--cli")
      cli = argv[i + 1];
    else if (std::string(argv[i]) == "--only")
      g_only.insert(std::atoi(argv[i + 1]));
  g_tmp = fs::temp_directory_path() / "kinetic_acceptance";
  fs::remove_all(g_tmp);
  fs::create_directories(g_tmp);

  guarded(1, "collision hypotheses across the gallery", hypotheses);
  guarded(2, "hierarchy counts 13 / 26", counts);
  guarded(3, "lemma identity suite and negative controls", lemmas);
  guarded(4, "linear order, hyperbolic (through 2n)", [] { return linear_order(Variant::hyperbolic); });
  guarded(5, "linear order, regularized (through 2n-1)", [] { return linear_order(Variant::regularized); });
  guarded(6, "quadratic convergence slopes, n=2", nonlinear_order);
  guarded(7, "projection scaling k=0,1", projection);
  guarded(8, "Prandtl numbers vs Chapman-Enskog oracle", prandtl);
  guarded(9, "13-moment basis matches Grad", grad13);
  guarded(10, "solver integrity", solver_integrity);
  guarded(11, "byte-identical reruns of lemma-suite-all", [&] { return reproducible(cli); });
  std::cout << (failures ? "acceptance: FAIL (" + std::to_string(failures) + " criteria)" : "acceptance: PASS")
            << std::endl;
  return failures ? 1 : 0;
}
