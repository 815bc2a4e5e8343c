#pragma once

#include "kinetic/assembly.hpp"
#include "kinetic/series.hpp"

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace kinetic {

using Manifest = std::map<std::string, std::string>;

struct IdentityReport {
  std::string id;
  double residual = 0.0;
  double tol = 1e-10;
  bool pass = true;
  bool skipped = false;
  std::string note;
  Manifest manifest;
};

IdentityReport make_report(const std::string& id, double residual, double tol, const Manifest& m,
                           const std::string& note = "");
IdentityReport skipped_report(const std::string& id, const std::string& why, const Manifest& m);

// Everything the lemma checks read. Operators live on the big basis.
struct LemmaInputs {
  const Hierarchy* h = nullptr;
  const BlockSystem* sys = nullptr;
  Mat L, ldag, kernel;
  std::vector<Mat> xi;
  Ladders ladders;
  const QStar* q = nullptr;
  std::uint64_t seed = 1;
  int draws = 50;
  double tol = 1e-10;
  Manifest manifest;
};

// DL_hess (+ mirrored, + ladder form in symbolic mode), invert, DL_deter,
// hat_DL_hess, Ker.
std::vector<IdentityReport> verify_operator_lemmas(const LemmaInputs& in);
// hmQs, Pn_mQs, conservation of the truncated terms.
std::vector<IdentityReport> verify_quadratic_lemmas(const LemmaInputs& in, bool break_sequences = false);

// Block Gaussian elimination of the layered system.
struct Elimination {
  int n = 0;
  std::vector<Mat> T, A, L;                        // index l = 0..n-1
  std::map<std::string, std::vector<Mat>> B;       // per placeholder
  bool ok = true;
  std::string failure;
};
Elimination eliminate(const BlockSystem& sys, int axis = 0);
std::vector<IdentityReport> verify_elimination_lemmas(const BlockSystem& sys, const Manifest& m, double tol = 1e-10);

struct OrderReport {
  Variant variant = Variant::hyperbolic;
  int n = 0;
  int cap = 0;                      // highest eps power compared
  std::vector<int> first_discrepancy;  // per seed, -1 = none up to cap
  std::vector<double> worst_below;  // per seed, largest relative diff below the first discrepancy
  int order = 0;                    // lower bound: min over seeds
  int expected = 0;
  bool pass = false;
  bool skipped = false;
  std::string note;
};
// Linear path: formal closure comparison, seeds = the V(0) frame.
OrderReport verify_order_linear(const BlockSystem& sys, const Mat& ldag, const Mat& xi_axis, const Mat& kernel,
                                Variant v, double tol = 1e-9);

// Control 1: swap one V(1) frame column for a layer-2 direction.
Hierarchy corrupt_frame(const Hierarchy& h);
// Ids the frame control is expected to flip.
bool targeted_by_frame_control(const std::string& id);

void write_reports_json(std::ostream& os, const std::vector<IdentityReport>& reps);
void write_reports_csv(std::ostream& os, const std::vector<IdentityReport>& reps);

}  // namespace kinetic
