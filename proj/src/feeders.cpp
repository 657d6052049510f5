#include "voltctl/feeders.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "voltctl/rng.hpp"

namespace voltctl {

namespace {

void shuffle(std::vector<int>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    std::swap(v[i], v[rng.uniform_int(0, i)]);
  }
}

}  // namespace

RadialNetwork random_radial_network(int n, std::uint64_t seed, const RandomTreeOptions& options) {
  if (n < 1) throw std::invalid_argument("random_radial_network needs n >= 1");
  Rng rng(seed, kStreamNetwork);
  std::vector<int> label(n);
  std::iota(label.begin(), label.end(), 1);
  shuffle(label, rng);
  // label[k - 1] is the public name of the k-th attached bus
  auto name = [&](int k) { return k == 0 ? 0 : label[k - 1]; };

  std::vector<Line> lines;
  lines.reserve(n);
  for (int k = 1; k <= n; ++k) {
    const int parent = rng.uniform_int(0, k - 1);
    const double x = rng.uniform(options.x_min, options.x_max);
    const double r = x * rng.uniform(options.r_over_x_min, options.r_over_x_max);
    Line line{name(parent), name(k), r, x};
    if (rng.uniform() < 0.5) std::swap(line.from, line.to);
    lines.push_back(line);
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);
  std::vector<Line> shuffled;
  shuffled.reserve(n);
  for (int k : perm) shuffled.push_back(lines[k]);
  return RadialNetwork(n, options.v0, std::move(shuffled));
}

RadialNetwork six_bus_illustration() {
  std::vector<Line> lines = {
      {0, 1, 0.01, 0.02}, {1, 2, 0.01, 0.02}, {2, 3, 0.01, 0.02},
      {3, 4, 0.01, 0.02}, {2, 5, 0.01, 0.02}, {5, 6, 0.01, 0.02},
  };
  return RadialNetwork(6, 1.0, std::move(lines));
}

RadialNetwork sce_like_feeder() {
  constexpr int kTrunk = 24;
  // (branch point on the trunk, lateral length)
  const std::vector<std::pair<int, int>> laterals = {{4, 7}, {8, 6}, {12, 6}, {16, 6}, {20, 6}};
  Rng rng(56, kStreamNetwork);
  auto segment = [&](BusId from, BusId to) {
    // 0.3-0.9 ohm per segment on a 144 ohm base
    const double x = rng.uniform(0.002, 0.006);
    const double r = x * rng.uniform(0.6, 1.4);
    return Line{from, to, r, x};
  };
  std::vector<Line> lines;
  for (int k = 1; k <= kTrunk; ++k) lines.push_back(segment(k - 1, k));
  int next = kTrunk + 1;
  for (const auto& [root, length] : laterals) {
    BusId prev = root;
    for (int k = 0; k < length; ++k) {
      lines.push_back(segment(prev, next));
      prev = next++;
    }
  }
  return RadialNetwork(next - 1, 1.0, std::move(lines));
}

FeederSettings sce_like_settings(int n, std::uint64_t seed) {
  constexpr double kEta = 10.0;
  Rng rng(seed, kStreamProfile);
  FeederSettings out;
  out.limits = CapacityLimits::uniform(n, 0.2, 0.95 * 0.95, 1.05 * 1.05);
  out.costs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double s_max = rng.uniform(0.5, 1.0);
    out.costs.push_back({kEta / s_max, 0.0});
  }
  out.d = 1.0;
  return out;
}

}  // namespace voltctl
