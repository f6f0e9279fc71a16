#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace enduromap {

// 2-bit synapse encoding: one high-resistance state, three low-resistance
// states. State transition physics distinguishes only HRS vs LRS.
enum class ResistanceState : std::uint8_t { HRS = 0, LRS1 = 1, LRS2 = 2, LRS3 = 3 };

constexpr bool is_lrs(ResistanceState s) { return s != ResistanceState::HRS; }
const char* to_string(ResistanceState s);

// Filament-gap dynamics of the HRS->LRS read disturb:
//   dg/dt = -nu0 * exp(-Ea*(q/k)/T) * sinh(gamma(g) * (a0/L) * (q/k) * V / T)
//   gamma(g) = gamma0 - beta * (g/g0)^3
// integrated from g0 down to g_min. Constants are fitting parameters
// calibrated so HRS endurance sits below (and within an order of magnitude
// of) LRS endurance across the 0.3-1.2 V operating window.
struct HrsModelParams {
  double nu0 = 2.83184e4;       // attempt velocity, m/s
  double Ea = 1.2;              // activation energy, eV
  double a0 = 2.5e-10;          // atomic hopping distance, m
  double L = 5e-9;              // oxide thickness, m
  double gamma0 = 18.3;         // field-enhancement fitting constant
  double beta = 0.5;            // gap feedback coefficient
  double g0 = 5e-10;            // initial filament gap, m
  double g_min = 1e-10;         // gap threshold ending HRS retention, m
  double q_over_k = 11604.518;  // electron charge / Boltzmann constant, K/V

  void validate() const;  // throws ConfigError
};

// LRS transition time t = 10^(slope*V + intercept) seconds.
struct LrsModelParams {
  double slope = -14.7;   // 1/V
  double intercept = 6.7;

  void validate() const;
};

struct SpikeDuration {
  double duration = 1e-3;  // seconds per read (spike)

  void validate() const;
};

struct DeviceParams {
  HrsModelParams hrs;
  LrsModelParams lrs;
  SpikeDuration spike;
};

// Seconds until an LRS cell read at `volts` flips. Strictly decreasing in v.
double lrs_transition_time(double volts, const LrsModelParams& p = {});

struct HrsTransition {
  double seconds = 0.0;
  bool exceeded_horizon = false;  // integration saturated at the horizon
};

inline constexpr double kDefaultHrsHorizonSeconds = 1e12;

// RK4 with step halving on >1% per-step gap change; the g_min crossing is
// resolved by linear interpolation inside the final step.
HrsTransition integrate_hrs_transition(double volts, double temperature_k,
                                       const HrsModelParams& p,
                                       double horizon_s = kDefaultHrsHorizonSeconds);

double hrs_transition_time(double volts, double temperature_k,
                           const HrsModelParams& p = {});

// Reads survived before a spontaneous state flip: transition time / spike
// duration. Reported as a real count; flooring happens only at report time.
double read_endurance(ResistanceState state, double volts, double temperature_k,
                      const DeviceParams& p = {});

// Flat key=value text, '#' comments. Keys match the struct field names:
// nu0 Ea a0 L gamma0 beta g0 g_min q_over_k slope intercept duration.
DeviceParams load_device_params(const std::filesystem::path& path);
void save_device_params(const DeviceParams& p, const std::filesystem::path& path);

}  // namespace enduromap
