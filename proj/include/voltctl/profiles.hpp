#pragma once

#include <cstdint>
#include <stdexcept>

#include "voltctl/harness.hpp"

namespace voltctl {

enum class ProfileKind { static_heavy, daily };

class ProfileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProfileOptions {
  double v_low = 0.95 * 0.95;
  double v_high = 1.05 * 1.05;
  /// How far past the band the uncontrolled extreme voltage is pushed (p.u.^2).
  double depth = 0.01;
  /// Scales are searched in (0, max_scale].
  double max_scale = 100.0;
  /// Plant used to judge the uncontrolled voltages.
  PlantKind plant = PlantKind::nonlinear;
  double load_power_factor = 0.9;
};

struct SynthProfiles {
  ProfileSeries series;
  /// Daily only: per-tick multipliers of the load and PV components.
  std::vector<double> load_shape;
  std::vector<double> pv_shape;
  double load_scale = 0.0;
  double pv_scale = 0.0;
};

inline constexpr long kDailyTicks = 14400;  // 24 h at 6 s

/// static_heavy: one row whose uncontrolled minimum voltage is v_low - depth.
/// daily: kDailyTicks rows; loads ramp up after 06:00 and PV is positive only
/// within (08:00, 19:00), peaking at noon with seeded jitter. The uncontrolled
/// daily run dips to v_low - depth at the evening load peak and rises to
/// v_high + depth at noon. Throws ProfileError when no scale within max_scale
/// reaches the target.
SynthProfiles synth_profiles(ProfileKind kind, const RadialNetwork& net, std::uint64_t seed,
                             const ProfileOptions& options = {});

/// Uncontrolled (q = 0) voltages for one injection row.
Eigen::VectorXd uncontrolled_voltage(const RadialNetwork& net, const SensitivityMatrices& mats,
                                     const InjectionProfile& row, PlantKind plant);

/// Hour of day in [0, 24) at `tick` for the given tick length.
double hour_of_tick(long tick, double tick_seconds = 6.0);

}  // namespace voltctl
