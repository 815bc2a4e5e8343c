#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace kinetic {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

// Max-abs entry; 0 for empty matrices.
double max_abs(const Mat& m);

// Max-abs of a residual relative to the largest operand entry (floored at 1).
double rel_residual(const Mat& residual, double operand_scale);

// Orthogonal projector onto the column span of an orthonormal frame.
Mat projector(const Mat& frame, int size);

// Orthonormal basis for span(cand). Rank comes from column-pivoted QR at
// rel_tol times the largest column norm; the basis itself is built greedily in
// original column order so column j traces back to cand.col(selected[j]).
struct SpanResult {
  Mat frame;
  std::vector<int> selected;
};
// A positive `scale` replaces the largest column norm as the reference, for
// candidates that were already projected.
SpanResult ordered_span(const Mat& cand, double rel_tol, double scale = -1.0);

// Orthonormal complement of an orthonormal frame inside R^size.
Mat complement_frame(const Mat& frame, int size);

Mat symmetrized(const Mat& m);

// Seeded draws for synthetic operators and random identity checks.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
  double normal() { return normal_(eng_); }
  Vec normal_vec(int n);
  Mat normal_mat(int r, int c);

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace kinetic
