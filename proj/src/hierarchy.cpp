#include "kinetic/hierarchy.hpp"

#include "kinetic/errors.hpp"

namespace kinetic {

GeneratorOps make_generator_ops(const BasisTable& table, const Mat& ldag, const QStar& q) {
  GeneratorOps ops;
  ops.ldag = ldag;
  for (int i = 0; i < table.dim(); ++i) ops.xi.push_back(streaming_matrix(table, i));
  ops.ladders = ladder_matrices(table);
  ops.qstar = q;
  ops.kernel = kernel_frame(table);
  return ops;
}

std::string to_string(LadderScope s) { return s == LadderScope::all ? "all" : "equilibrium"; }

Mat Hierarchy::stacked(int k) const {
  int cols = 0;
  for (int j = 0; j <= k; ++j) cols += layer_dim(j);
  Mat out(size, cols);
  int at = 0;
  for (int j = 0; j <= k; ++j) {
    out.middleCols(at, layer_dim(j)) = layer[j];
    at += layer_dim(j);
  }
  return out;
}

namespace {

struct Pool {
  std::vector<Vec> cols;
  std::vector<std::string> labels;
  void add(Vec v, std::string label) {
    cols.push_back(std::move(v));
    labels.push_back(std::move(label));
  }
  Mat matrix(int n) const {
    Mat m(n, static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = cols[j];
    return m;
  }
};

std::string col_name(int level, int c) { return "W" + std::to_string(level) + "[" + std::to_string(c) + "]"; }

// Generator images of one level's basis, in the fixed order: identity, xi_j,
// ladders (u_i then theta), xi_j composed with ladders.
void apply_linear_generators(const GeneratorOps& ops, const Mat& basis, int level, bool ladders, Pool& pool) {
  const int d = static_cast<int>(ops.xi.size());
  for (int c = 0; c < basis.cols(); ++c) pool.add(basis.col(c), col_name(level, c));
  for (int j = 0; j < d; ++j)
    for (int c = 0; c < basis.cols(); ++c)
      pool.add(ops.xi[j] * basis.col(c), "xi" + std::to_string(j + 1) + " " + col_name(level, c));
  if (!ladders) return;
  std::vector<std::pair<Mat, std::string>> lad;
  for (int i = 0; i < d; ++i) lad.emplace_back(ops.ladders.du[i], "du" + std::to_string(i + 1));
  lad.emplace_back(ops.ladders.dtheta, "dtheta");
  for (const auto& [m, name] : lad)
    for (int c = 0; c < basis.cols(); ++c) pool.add(m * basis.col(c), name + " " + col_name(level, c));
  for (int j = 0; j < d; ++j)
    for (const auto& [m, name] : lad)
      for (int c = 0; c < basis.cols(); ++c)
        pool.add(ops.xi[j] * (m * basis.col(c)), "xi" + std::to_string(j + 1) + "*" + name + " " + col_name(level, c));
}

}  // namespace

Hierarchy build_hierarchy(const GeneratorOps& ops, const GeneratorConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("hierarchy depth n must be at least 1");
  const int size = static_cast<int>(ops.ldag.rows());
  Hierarchy h;
  h.n = cfg.n;
  h.size = size;
  h.cfg = cfg;
  Vec m0 = ops.kernel.col(0);

  // W(0) = {M}; without ladders the whole V(0) frame seeds the pool.
  h.w.push_back(cfg.include_ladders ? Mat(m0) : ops.kernel);
  h.v.push_back(ops.kernel);
  h.layer.push_back(ops.kernel);
  std::vector<std::string> l0{"M"};
  for (int i = 1; i < ops.kernel.cols(); ++i) l0.push_back("V0[" + std::to_string(i) + "]");
  h.log.push_back(l0);

  for (int k = 1; k <= cfg.n; ++k) {
    Pool pool;
    apply_linear_generators(ops, h.w[0], 0, cfg.include_ladders, pool);
    if (k >= 2) apply_linear_generators(ops, h.w[k - 1], k - 1, cfg.include_ladders && cfg.ladder_scope == LadderScope::all, pool);
    if (cfg.include_quadratic && !ops.qstar.zero()) {
      for (int r = 0; r < k; ++r)
        for (int s = r; s < k && r + s <= k; ++s)
          for (int a = 0; a < h.w[r].cols(); ++a)
            for (int b = (r == s ? a : 0); b < h.w[s].cols(); ++b)
              pool.add(ops.qstar(h.w[r].col(a), h.w[s].col(b)),
                       "Q(" + col_name(r, a) + "," + col_name(s, b) + ")");
    }
    Mat images = ops.ldag * pool.matrix(size);
    Mat cand(size, images.cols() + 1);
    cand.col(0) = m0;
    cand.rightCols(images.cols()) = images;
    std::vector<std::string> labels{"M"};
    for (const auto& l : pool.labels) labels.push_back("L+ " + l);

    double scale = cand.colwise().norm().maxCoeff();
    h.w.push_back(ordered_span(cand, cfg.rank_tol, scale).frame);

    const Mat& prev = h.v[k - 1];
    Mat projected = cand - prev * (prev.transpose() * cand);
    auto fresh = ordered_span(projected, cfg.rank_tol, scale);
    Mat layer = fresh.frame;
    // one more pass against V(k-1) to keep the frame orthogonal to rounding
    layer -= prev * (prev.transpose() * layer);
    for (int c = 0; c < layer.cols(); ++c) layer.col(c).normalize();
    std::vector<std::string> log;
    for (int c : fresh.selected) log.push_back(labels[c]);
    if (layer.cols() == 0) h.warnings.push_back("degenerate hierarchy: empty layer at k=" + std::to_string(k));
    Mat v(size, prev.cols() + layer.cols());
    v.leftCols(prev.cols()) = prev;
    v.rightCols(layer.cols()) = layer;
    h.layer.push_back(layer);
    h.v.push_back(v);
    h.log.push_back(log);
  }
  return h;
}

Mat layer_projector(const Hierarchy& h, int k) {
  if (k < 0 || k > h.n) throw UsageError("layer index " + std::to_string(k) + " out of range 0.." + std::to_string(h.n));
  return projector(h.layer[k], h.size);
}

Mat v_projector(const Hierarchy& h, int k) {
  if (k < 0 || k > h.n) throw UsageError("level " + std::to_string(k) + " out of range 0.." + std::to_string(h.n));
  return projector(h.v[k], h.size);
}

}  // namespace kinetic
