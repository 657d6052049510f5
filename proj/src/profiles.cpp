#include "voltctl/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

namespace voltctl {

namespace {

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

double load_shape_at(double h) {
  return 0.45 + 0.35 * smoothstep((h - 6.0) / 3.0) - 0.35 * smoothstep((h - 21.0) / 3.0) +
         0.2 * std::exp(-std::pow((h - 19.0) / 1.5, 2));
}

/// Rises as a quarter sine from 08:00 to the noon peak, falls as a quarter
/// cosine until 19:00, zero elsewhere.
double pv_shape_at(double h) {
  if (h <= 8.0 || h >= 19.0) return 0.0;
  if (h <= 12.0) return std::sin(0.5 * std::numbers::pi * (h - 8.0) / 4.0);
  return std::cos(0.5 * std::numbers::pi * (h - 12.0) / 7.0);
}

/// Smallest scale (to bisection precision) with exceeds(scale) true.
double bisect_scale(const std::function<bool(double)>& exceeds, double max_scale,
                    const std::string& what) {
  if (!exceeds(max_scale)) {
    std::ostringstream os;
    os << "cannot reach the " << what << " target: even scale " << max_scale
       << " leaves the uncontrolled voltages inside the band";
    throw ProfileError(os.str());
  }
  double lo = 0.0;
  double hi = max_scale;
  for (int it = 0; it < 60 && hi - lo > 1e-12 * max_scale; ++it) {
    const double mid = 0.5 * (lo + hi);
    (exceeds(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

double hour_of_tick(long tick, double tick_seconds) {
  return std::fmod(static_cast<double>(tick) * tick_seconds / 3600.0, 24.0);
}

Eigen::VectorXd uncontrolled_voltage(const RadialNetwork& net, const SensitivityMatrices& mats,
                                     const InjectionProfile& row, PlantKind plant) {
  if (plant == PlantKind::linearized) return make_vpar(net, mats, row.p, row.q);
  return nonlinear_solve(net, row).v;
}

SynthProfiles synth_profiles(ProfileKind kind, const RadialNetwork& net, std::uint64_t seed,
                             const ProfileOptions& options) {
  const int n = net.size();
  const SensitivityMatrices mats = build_sensitivities(net);
  Rng rng(seed, kStreamProfile);
  const double q_per_p = std::tan(std::acos(options.load_power_factor));

  // Unit-scale bus loads around 0.01 p.u. and PV capacities around 0.02 p.u.
  Eigen::VectorXd base_load(n);
  Eigen::VectorXd pv_cap(n);
  for (int i = 0; i < n; ++i) base_load(i) = 0.01 * rng.uniform(0.5, 1.5);
  for (int i = 0; i < n; ++i) pv_cap(i) = 0.02 * rng.uniform(0.5, 1.5);

  auto row_at = [&](double load_mult, double pv_mult) {
    InjectionProfile row;
    row.p = -load_mult * base_load + pv_mult * pv_cap;
    row.q = -load_mult * q_per_p * base_load;
    return row;
  };
  auto min_below = [&](const InjectionProfile& row) {
    try {
      return uncontrolled_voltage(net, mats, row, options.plant).minCoeff() <
             options.v_low - options.depth;
    } catch (const PowerFlowError&) {
      return true;  // collapsed
    }
  };
  auto max_above = [&](const InjectionProfile& row) {
    try {
      return uncontrolled_voltage(net, mats, row, options.plant).maxCoeff() >
             options.v_high + options.depth;
    } catch (const PowerFlowError&) {
      return true;
    }
  };

  SynthProfiles out;
  if (kind == ProfileKind::static_heavy) {
    out.load_scale = bisect_scale([&](double s) { return min_below(row_at(s, 0.0)); },
                                  options.max_scale, "low-voltage");
    out.series = ProfileSeries::constant(row_at(out.load_scale, 0.0));
    return out;
  }

  out.load_shape.resize(kDailyTicks);
  out.pv_shape.resize(kDailyTicks);
  long peak_load_tick = 0;
  for (long t = 0; t < kDailyTicks; ++t) {
    const double h = hour_of_tick(t);
    out.load_shape[t] = load_shape_at(h) * (1.0 + 0.02 * rng.normal());
    const double pv = pv_shape_at(h);
    out.pv_shape[t] = pv > 0.0 ? std::max(0.0, pv * (1.0 + 0.1 * rng.normal())) : 0.0;
    if (out.pv_shape[t] == 0.0 && out.load_shape[t] > out.load_shape[peak_load_tick]) {
      peak_load_tick = t;
    }
  }
  const long noon = kDailyTicks / 2;
  out.load_scale = bisect_scale(
      [&](double s) { return min_below(row_at(s * out.load_shape[peak_load_tick], 0.0)); },
      options.max_scale, "evening low-voltage");
  out.pv_scale = bisect_scale(
      [&](double s) {
        return max_above(row_at(out.load_scale * out.load_shape[noon], s * out.pv_shape[noon]));
      },
      options.max_scale, "midday over-voltage");
  out.series.rows.reserve(kDailyTicks);
  for (long t = 0; t < kDailyTicks; ++t) {
    out.series.rows.push_back(
        row_at(out.load_scale * out.load_shape[t], out.pv_scale * out.pv_shape[t]));
  }
  return out;
}

}  // namespace voltctl
