#pragma once

#include <cstdint>
#include <vector>

#include "voltctl/controller.hpp"
#include "voltctl/grid.hpp"

namespace voltctl {

struct RandomTreeOptions {
  double x_min = 0.01;
  double x_max = 1.0;
  double r_over_x_min = 0.5;
  double r_over_x_max = 2.0;
  double v0 = 1.0;
};

/// Random recursive tree: bus k attaches to a uniformly chosen bus in 0..k-1.
/// Bus labels and line order are shuffled so callers cannot rely on them.
RadialNetwork random_radial_network(int n, std::uint64_t seed, const RandomTreeOptions& options = {});

/// Six-bus tree 0-1, 1-2, 2-3, 3-4, 2-5, 5-6 used to illustrate the
/// communication graph of a partially controllable feeder.
RadialNetwork six_bus_illustration();

/// Synthetic stand-in for a 56-bus (55 + substation) single-phase feeder on a
/// 12 kV / 1 MVA base: a 24-bus trunk with five laterals.
RadialNetwork sce_like_feeder();

/// Settings that go with sce_like_feeder: capacity 0.2 p.u. (0.2 MVar), band
/// (0.95^2, 1.05^2), f_i = (eta / s_max_i) q^2 with eta = 10 and s_max_i in
/// [0.5, 1], d = 1.
struct FeederSettings {
  CapacityLimits limits;
  std::vector<QuadraticCost> costs;
  double d = 1.0;
};
FeederSettings sce_like_settings(int n, std::uint64_t seed = 56);

}  // namespace voltctl
