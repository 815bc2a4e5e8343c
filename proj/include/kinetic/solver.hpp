#pragma once

#include "kinetic/assembly.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace kinetic {

enum class Integrator { exact, imex, etdrk4 };
std::string to_string(Integrator i);
Integrator parse_integrator(const std::string& s);

struct SimConfig {
  double kn = 1e-2;
  double t_end = 1.0;
  double burn_in = -1.0;  // < 0: t_end / 10
  double length = 6.283185307179586;
  int grid = 64;          // x points for nonlinear runs (modes up to grid/3 kept)
  int wavenumber = 1;     // index of the perturbed Fourier mode
  // Perturbation per conserved coordinate (cosine profile). Empty: density and
  // energy at `amplitude`.
  std::vector<double> moments;
  double amplitude = 1e-2;
  // Uniform offset of the conserved coordinates (mode 0).
  std::vector<double> background;
  bool nonlinear = false;
  Integrator integrator = Integrator::exact;  // nonlinear runs always use etdrk4
  double dt = 0.0;                            // 0: automatic
  std::vector<double> snapshots;              // extra output times
};

// Reference Galerkin system on the full basis.
struct FullSystem {
  Mat L;
  Mat xi;      // streaming along x
  Mat kernel;  // V(0) frame
  const QStar* q = nullptr;
};

struct Snapshot {
  double t = 0.0;
  CMat u;  // state x modes 0..K-1
};

struct Trajectory {
  std::string model;
  SimConfig cfg;
  int state_dim = 0;
  int conserved = 0;  // leading coordinates that are conserved moments (or rows of `observe`)
  Mat observe;        // state -> conserved coordinates
  std::vector<Snapshot> snaps;
  int steps = 0;
  double max_drift = 0.0;        // mode-0 conserved drift per unit time
  bool energy_monotone = true;   // linear runs only
  double wavenumber_unit = 1.0;  // 2 pi / length

  const Snapshot& final() const { return snaps.back(); }
  const Snapshot& at(double t) const;
  CMat conserved_at(double t) const;
};

// Initial reference state: equilibrium plus the cfg perturbation.
CMat initial_state(const FullSystem& sys, const SimConfig& cfg);

Trajectory simulate_reference(const FullSystem& sys, const SimConfig& cfg);
Trajectory simulate_reference(const FullSystem& sys, const SimConfig& cfg, const CMat& u0, double t0);
// Reduced coordinates; initial state u0 has ops.evolved rows.
Trajectory simulate_reduced(const ReducedOperators& ops, const SimConfig& cfg, const CMat& u0, double t0);

// Reference to T with a snapshot at the burn-in time; the reduced model
// starts there from the projected reference state.
struct RunPair {
  Trajectory ref;
  Trajectory red;
};
RunPair run_pair(const FullSystem& full, const ReducedOperators& ops, const SimConfig& cfg);

// L2-in-x norm of a spectral field (real field, modes 0..K-1).
double l2_norm(const CMat& u, double length);

struct LogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double max_residual = 0.0;  // log10 units
};
LogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct ConvergenceReport {
  std::vector<double> kn;
  std::vector<double> err_density, err_momentum, err_energy, err_total;
  double slope = 0.0;
  double r2 = 0.0;
  bool non_asymptotic = false;
  std::string note;
  double runtime_s = 0.0;
};
// Pairs matched by index. Fewer than 4 points throws UsageError.
ConvergenceReport fit_order(const std::vector<Trajectory>& ref, const std::vector<Trajectory>& red,
                            double r2_min = 0.98);

struct SlopeReport {
  std::string id;
  std::vector<double> kn;
  std::vector<double> value;
  double slope = 0.0;
  double r2 = 0.0;
  bool non_asymptotic = false;
  bool identically_zero = false;
  std::string note;
};

// Layer k+1 content of the reference solution at T, swept over Kn.
SlopeReport verify_projection_scaling(const Hierarchy& h, const FullSystem& full, const SimConfig& cfg, int k,
                                      const std::vector<double>& kn_list);
// Q*_l against the truncated layer sum along reference trajectories. l <= 2.
SlopeReport verify_qstar_truncation(const Hierarchy& h, const FullSystem& full, const SimConfig& cfg, int l,
                                    const std::vector<double>& kn_list);

std::vector<double> log_sweep(double lo, double hi, int points);

void write_trajectory_csv(std::ostream& os, const Trajectory& t);
void write_convergence_csv(std::ostream& os, const ConvergenceReport& r);
std::string convergence_json(const ConvergenceReport& r);
void write_gnuplot(std::ostream& os, const std::string& csv_name, const std::string& title);

}  // namespace kinetic
