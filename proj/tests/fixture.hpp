#pragma once

#include "kinetic/assembly.hpp"
#include "kinetic/collision.hpp"
#include "kinetic/hierarchy.hpp"

#include <memory>

namespace kinetic::testing {

// Everything downstream of one (basis, model, depth) choice.
struct Setup {
  BasisTable table;
  CollisionModel model;
  Mat L, ldag, kernel;
  std::vector<Mat> xi;
  Ladders ladders;
  QStar q;
  Hierarchy h;
  std::unique_ptr<BlockSystem> sys;

  Setup(int dim, int nmax, CollisionKind kind, int n, double tau = 1.0, const BilinearTensor* tensor = nullptr,
        AssemblyMode mode = AssemblyMode::frozen, LadderScope scope = LadderScope::equilibrium, std::uint64_t seed = 42)
      : table(build_basis({dim, nmax})) {
    model.kind = kind;
    model.tau = tau;
    model.seed = seed;
    L = build_linear(model, table);
    ldag = pseudo_inverse(L);
    kernel = kernel_frame(table);
    for (int i = 0; i < dim; ++i) xi.push_back(streaming_matrix(table, i));
    ladders = ladder_matrices(table);
    q = QStar(tensor ? *tensor : BilinearTensor{table.size(), {}}, table);
    GeneratorConfig cfg;
    cfg.n = n;
    cfg.ladder_scope = scope;
    cfg.include_quadratic = tensor != nullptr;
    h = build_hierarchy(make_generator_ops(table, ldag, q), cfg);
    sys = std::make_unique<BlockSystem>(assemble_blocks(h, L, xi, ladders, q, mode));
  }
};

}  // namespace kinetic::testing
