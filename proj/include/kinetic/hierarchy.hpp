#pragma once

#include "kinetic/collision.hpp"

#include <string>
#include <vector>

namespace kinetic {

enum class LadderScope { equilibrium, all };

struct GeneratorConfig {
  int n = 1;
  bool include_ladders = true;
  // equilibrium: parameter derivatives act on W(0) only; all: on every level.
  LadderScope ladder_scope = LadderScope::equilibrium;
  bool include_quadratic = false;
  double rank_tol = 1e-10;
};

// The operators the hierarchy is generated from; all on one basis.
struct GeneratorOps {
  Mat ldag;
  std::vector<Mat> xi;
  Ladders ladders;
  QStar qstar;
  Mat kernel;  // orthonormal V(0) frame
};
GeneratorOps make_generator_ops(const BasisTable& table, const Mat& ldag, const QStar& q);

struct Hierarchy {
  int n = 0;
  int size = 0;
  GeneratorConfig cfg;
  std::vector<Mat> w;                          // span basis of W(k)
  std::vector<Mat> v;                          // orthonormal frame of V(k)
  std::vector<Mat> layer;                      // frame of V(k) minus V(k-1)
  std::vector<std::vector<std::string>> log;   // source of each layer column
  std::vector<std::string> warnings;

  int layer_dim(int k) const { return static_cast<int>(layer[k].cols()); }
  int v_dim(int k) const { return static_cast<int>(v[k].cols()); }
  // Layers 0..k side by side; equals v[k].
  Mat stacked(int k) const;
};

Hierarchy build_hierarchy(const GeneratorOps& ops, const GeneratorConfig& cfg);

// P onto V(k) minus V(k-1) (k=0: V(0)).
Mat layer_projector(const Hierarchy& h, int k);
Mat v_projector(const Hierarchy& h, int k);

std::string to_string(LadderScope s);

}  // namespace kinetic
