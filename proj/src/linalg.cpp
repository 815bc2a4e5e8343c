#include "kinetic/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace kinetic {

double max_abs(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

double rel_residual(const Mat& residual, double operand_scale) {
  return max_abs(residual) / std::max(1.0, operand_scale);
}

Mat projector(const Mat& frame, int size) {
  if (frame.cols() == 0) return Mat::Zero(size, size);
  return frame * frame.transpose();
}

SpanResult ordered_span(const Mat& cand, double rel_tol, double scale) {
  SpanResult out;
  const int n = static_cast<int>(cand.rows());
  out.frame = Mat::Zero(n, 0);
  if (cand.cols() == 0) return out;
  if (scale <= 0.0) scale = cand.colwise().norm().maxCoeff();
  if (scale == 0.0) return out;
  Eigen::ColPivHouseholderQR<Mat> qr(cand);
  const Mat& r = qr.matrixR();
  int rank = 0;
  for (int i = 0; i < std::min<int>(r.rows(), r.cols()); ++i) {
    if (std::abs(r(i, i)) > rel_tol * scale) ++rank;
  }
  if (rank == 0) return out;

  // Greedy pass in generator order; pivoted QR only fixes the rank.
  std::vector<Vec> q;
  for (int c = 0; c < cand.cols() && static_cast<int>(q.size()) < rank; ++c) {
    Vec v = cand.col(c);
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vec& b : q) v -= b.dot(v) * b;
    }
    if (v.norm() <= rel_tol * scale) continue;
    q.push_back(v.normalized());
    out.selected.push_back(c);
  }
  out.frame.resize(n, static_cast<Eigen::Index>(q.size()));
  for (size_t j = 0; j < q.size(); ++j) out.frame.col(static_cast<Eigen::Index>(j)) = q[j];
  return out;
}

Mat complement_frame(const Mat& frame, int size) {
  Mat p = Mat::Identity(size, size) - projector(frame, size);
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(p));
  int k = size - static_cast<int>(frame.cols());
  // Eigenvalues ascend; the complement is the eigenvalue-1 block at the end.
  return es.eigenvectors().rightCols(k);
}

Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

Vec Rng::normal_vec(int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal();
  return v;
}

Mat Rng::normal_mat(int r, int c) {
  Mat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = normal();
  return m;
}

}  // namespace kinetic
