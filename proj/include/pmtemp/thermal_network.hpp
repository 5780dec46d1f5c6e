#pragma once

#include <cstdint>
#include <string>

#include "pmtemp/data.hpp"

namespace pmtemp {

/// Two-node lumped thermal network: a stator node sinking heat into the
/// coolant and a magnet node sinking heat into the ambient air, coupled
/// through the air gap. Node time constants are defined with the other node
/// held fixed, so C = tau * (sum of the node's conductances).
struct ThermalNetworkParams {
  double stator_time_constant_s = 300.0;
  double magnet_time_constant_s = 900.0;
  double stator_coolant_conductance = 25.0;  // W/K
  double stator_magnet_conductance = 4.0;    // W/K
  double magnet_ambient_conductance = 3.0;   // W/K
};

struct LossCoefficients {
  double copper_w_per_a2 = 4e-3;   // stator copper loss per i_s^2
  double iron_w_per_rpm = 0.08;    // speed-dependent loss per 1/min
  double magnet_share = 0.35;      // fraction of the speed-dependent loss deposited in the magnets
};

struct SyntheticConfig {
  ThermalNetworkParams network;
  LossCoefficients losses;
  double duration_s = 3600.0;  // per profile
  double sample_rate_hz = 2.0;
  std::size_t profiles = 1;
  double ambient_c = 24.0;
  double coolant_c = 40.0;
  /// Scales speed/current/coolant excitation; 0 yields a motor at standstill.
  double excitation = 1.0;
  double max_speed_rpm = 6000.0;
  double max_current_a = 250.0;
  double min_hold_s = 2.0;
  double max_hold_s = 30.0;
  /// Motor at standstill before the excitation starts; profiles begin in
  /// thermal equilibrium with the sinks.
  double standstill_s = 0.0;
  std::string profile_prefix = "syn";
};

/// Per-step energy bookkeeping in J.
struct EnergyBalance {
  double injected = 0.0;
  double stored = 0.0;
  double dissipated = 0.0;
};

class ThermalNetwork {
 public:
  ThermalNetwork(const ThermalNetworkParams& params, double stator_c, double magnet_c);

  /// Advances one step of length h seconds using the backward-difference
  /// discretization x_t = y_t + RC (y_t - y_{t-1}) / h, which is exact-solvable
  /// for the 2x2 system.
  EnergyBalance step(double stator_loss_w, double magnet_loss_w, double coolant_c, double ambient_c,
                     double h);

  double stator() const { return stator_; }
  double magnet() const { return magnet_; }
  double stator_capacity() const { return stator_capacity_; }
  double magnet_capacity() const { return magnet_capacity_; }

  /// Steady-state temperature rise of (stator, magnet) above their sinks for
  /// constant losses, i.e. G^-1 P for the network's conductance matrix.
  std::pair<double, double> steady_state_rise(double stator_loss_w, double magnet_loss_w) const;

  /// Loss-free steady state (stator, magnet) for constant sink temperatures.
  std::pair<double, double> equilibrium(double coolant_c, double ambient_c) const;

 private:
  ThermalNetworkParams params_;
  double stator_capacity_;
  double magnet_capacity_;
  double stator_;
  double magnet_;
};

/// Single RC low-pass discretized as x_t = y_t + RC (y_t - y_{t-1}) / h.
/// The first input initializes the output.
class RcLowPass {
 public:
  RcLowPass(double rc_seconds, double step_seconds);
  double step(double x);
  double value() const { return y_; }

 private:
  double rc_;
  double h_;
  double y_ = 0.0;
  bool started_ = false;
};

struct LossSplit {
  double stator_w = 0.0;
  double magnet_w = 0.0;
};

LossSplit compute_losses(const LossCoefficients& losses, double i_s, double motor_speed);

/// Deterministic synthetic drive cycles whose pm column is the magnet node of
/// the thermal network. Extra columns: torque, stator_winding.
Dataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace pmtemp
