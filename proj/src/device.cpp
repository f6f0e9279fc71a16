#include "enduromap/device.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "enduromap/errors.hpp"

namespace enduromap {

const char* to_string(ResistanceState s) {
  switch (s) {
    case ResistanceState::HRS: return "HRS";
    case ResistanceState::LRS1: return "LRS1";
    case ResistanceState::LRS2: return "LRS2";
    case ResistanceState::LRS3: return "LRS3";
  }
  return "?";
}

void HrsModelParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("HRS model parameter must be positive: ") + name);
    }
  };
  positive(nu0, "nu0");
  positive(Ea, "Ea");
  positive(a0, "a0");
  positive(L, "L");
  positive(gamma0, "gamma0");
  positive(g0, "g0");
  positive(g_min, "g_min");
  positive(q_over_k, "q_over_k");
  if (!std::isfinite(beta)) throw ConfigError("HRS model parameter beta must be finite");
  if (!(g_min < g0)) throw ConfigError("HRS model requires g_min < g0");
  // gamma(g) must stay positive over [g_min, g0]; minimum is at g = g0
  if (!(gamma0 - beta > 0.0)) {
    throw ConfigError("HRS model requires gamma0 - beta > 0 (gamma positive at g0)");
  }
}

void LrsModelParams::validate() const {
  if (!std::isfinite(slope) || !std::isfinite(intercept)) {
    throw ConfigError("LRS model parameters must be finite");
  }
  // endurance must not grow with voltage; zero is the degenerate identity
  if (slope > 0.0) throw ConfigError("LRS model slope must be <= 0");
}

void SpikeDuration::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ConfigError("spike duration must be positive");
  }
}

double lrs_transition_time(double volts, const LrsModelParams& p) {
  if (!(volts > 0.0) || !std::isfinite(volts)) {
    throw ConfigError("lrs_transition_time: voltage must be positive and finite");
  }
  p.validate();
  return std::pow(10.0, p.slope * volts + p.intercept);
}

namespace {

double gap_rate(double g, double volts, double temperature_k, const HrsModelParams& p) {
  const double gamma = p.gamma0 - p.beta * std::pow(g / p.g0, 3.0);
  const double arg = gamma * (p.a0 / p.L) * p.q_over_k * volts / temperature_k;
  return -p.nu0 * std::exp(-p.Ea * p.q_over_k / temperature_k) * std::sinh(arg);
}

}  // namespace

HrsTransition integrate_hrs_transition(double volts, double temperature_k,
                                       const HrsModelParams& p, double horizon_s) {
  if (!(volts > 0.0) || !std::isfinite(volts)) {
    throw ConfigError("hrs_transition_time: voltage must be positive and finite");
  }
  if (!(temperature_k > 0.0) || !std::isfinite(temperature_k)) {
    throw ConfigError("hrs_transition_time: temperature must be positive and finite");
  }
  p.validate();

  const double r0 = gap_rate(p.g0, volts, temperature_k, p);
  if (!(r0 < 0.0)) {
    std::ostringstream os;
    os << "hrs transition model: dg/dt = " << r0 << " >= 0 at g0; no transition occurs";
    throw ModelError(os.str());
  }

  auto rk4_step = [&](double g, double dt) {
    const double k1 = gap_rate(g, volts, temperature_k, p);
    const double k2 = gap_rate(g + 0.5 * dt * k1, volts, temperature_k, p);
    const double k3 = gap_rate(g + 0.5 * dt * k2, volts, temperature_k, p);
    const double k4 = gap_rate(g + dt * k3, volts, temperature_k, p);
    return dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  };

  double g = p.g0;
  double t = 0.0;
  // start near 0.5% span per step; adaptation keeps |dg| <= 1% of g
  double dt = 0.005 * (p.g0 - p.g_min) / (-r0);
  while (g > p.g_min) {
    if (t >= horizon_s) return {horizon_s, true};
    double dg = rk4_step(g, dt);
    while (std::abs(dg) > 0.01 * g) {
      dt *= 0.5;
      dg = rk4_step(g, dt);
    }
    const double g_next = g + dg;
    if (g_next <= p.g_min) {
      t += dt * (g - p.g_min) / (g - g_next);
      g = p.g_min;
      break;
    }
    g = g_next;
    t += dt;
    if (std::abs(dg) < 0.002 * g) dt *= 2.0;
  }
  if (t > horizon_s) return {horizon_s, true};
  return {t, false};
}

double hrs_transition_time(double volts, double temperature_k, const HrsModelParams& p) {
  return integrate_hrs_transition(volts, temperature_k, p).seconds;
}

double read_endurance(ResistanceState state, double volts, double temperature_k,
                      const DeviceParams& p) {
  p.spike.validate();
  const double t = is_lrs(state) ? lrs_transition_time(volts, p.lrs)
                                 : hrs_transition_time(volts, temperature_k, p.hrs);
  return t / p.spike.duration;
}

DeviceParams load_device_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open device parameter file: " + path.string());

  std::map<std::string, double> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string key, eq;
    double value;
    std::istringstream ls(line);
    if (!(ls >> key)) continue;  // blank
    if (!(ls >> eq >> value) || eq != "=") {
      throw ConfigError("device parameter file " + path.string() + ":" +
                        std::to_string(lineno) + ": expected 'key = value'");
    }
    kv[key] = value;
  }

  DeviceParams p;
  auto take = [&](const char* key, double& field) {
    if (auto it = kv.find(key); it != kv.end()) {
      field = it->second;
      kv.erase(it);
    }
  };
  take("nu0", p.hrs.nu0);
  take("Ea", p.hrs.Ea);
  take("a0", p.hrs.a0);
  take("L", p.hrs.L);
  take("gamma0", p.hrs.gamma0);
  take("beta", p.hrs.beta);
  take("g0", p.hrs.g0);
  take("g_min", p.hrs.g_min);
  take("q_over_k", p.hrs.q_over_k);
  take("slope", p.lrs.slope);
  take("intercept", p.lrs.intercept);
  take("duration", p.spike.duration);
  if (!kv.empty()) {
    throw ConfigError("device parameter file " + path.string() + ": unknown key '" +
                      kv.begin()->first + "'");
  }
  p.hrs.validate();
  p.lrs.validate();
  p.spike.validate();
  return p;
}

void save_device_params(const DeviceParams& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write device parameter file: " + path.string());
  out.precision(17);
  out << "# RRAM read-endurance device model parameters\n"
      << "nu0 = " << p.hrs.nu0 << "\n"
      << "Ea = " << p.hrs.Ea << "\n"
      << "a0 = " << p.hrs.a0 << "\n"
      << "L = " << p.hrs.L << "\n"
      << "gamma0 = " << p.hrs.gamma0 << "\n"
      << "beta = " << p.hrs.beta << "\n"
      << "g0 = " << p.hrs.g0 << "\n"
      << "g_min = " << p.hrs.g_min << "\n"
      << "q_over_k = " << p.hrs.q_over_k << "\n"
      << "slope = " << p.lrs.slope << "\n"
      << "intercept = " << p.lrs.intercept << "\n"
      << "duration = " << p.spike.duration << "\n";
}

}  // namespace enduromap
