#include "pmtemp/thermal_network.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pmtemp/random.hpp"

namespace pmtemp {

namespace {

constexpr double kStatorResistance = 0.015;  // Ohm
constexpr double kInductanceD = 0.25e-3;     // H
constexpr double kInductanceQ = 0.45e-3;     // H
constexpr double kFluxLinkage = 0.05;        // Vs
constexpr double kPolePairs = 4.0;

void validate(const ThermalNetworkParams& p) {
  if (!(p.stator_time_constant_s > 0.0) || !(p.magnet_time_constant_s > 0.0)) {
    throw std::invalid_argument("thermal time constants must be positive");
  }
  if (p.stator_coolant_conductance < 0.0 || p.stator_magnet_conductance < 0.0 ||
      p.magnet_ambient_conductance < 0.0) {
    throw std::invalid_argument("conductances must be nonnegative");
  }
  if (p.stator_coolant_conductance + p.stator_magnet_conductance <= 0.0 ||
      p.magnet_ambient_conductance + p.stator_magnet_conductance <= 0.0) {
    throw std::invalid_argument("every node needs at least one positive conductance");
  }
}

// First-order tracking of a setpoint with time constant tau.
double track(double value, double target, double tau, double h) {
  const double a = h / (tau + h);
  return value + a * (target - value);
}

}  // namespace

ThermalNetwork::ThermalNetwork(const ThermalNetworkParams& params, double stator_c, double magnet_c)
    : params_(params), stator_(stator_c), magnet_(magnet_c) {
  validate(params_);
  stator_capacity_ = params_.stator_time_constant_s *
                     (params_.stator_coolant_conductance + params_.stator_magnet_conductance);
  magnet_capacity_ = params_.magnet_time_constant_s *
                     (params_.magnet_ambient_conductance + params_.stator_magnet_conductance);
}

EnergyBalance ThermalNetwork::step(double stator_loss_w, double magnet_loss_w, double coolant_c,
                                   double ambient_c, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  const double gsc = params_.stator_coolant_conductance;
  const double gsm = params_.stator_magnet_conductance;
  const double gma = params_.magnet_ambient_conductance;
  const double a11 = stator_capacity_ / h + gsc + gsm;
  const double a22 = magnet_capacity_ / h + gma + gsm;
  const double a12 = -gsm;
  const double b1 = stator_capacity_ / h * stator_ + stator_loss_w + gsc * coolant_c;
  const double b2 = magnet_capacity_ / h * magnet_ + magnet_loss_w + gma * ambient_c;
  const double det = a11 * a22 - a12 * a12;
  const double stator_next = (b1 * a22 - a12 * b2) / det;
  const double magnet_next = (a11 * b2 - a12 * b1) / det;

  EnergyBalance e;
  e.injected = h * (stator_loss_w + magnet_loss_w);
  e.stored = stator_capacity_ * (stator_next - stator_) + magnet_capacity_ * (magnet_next - magnet_);
  e.dissipated = h * (gsc * (stator_next - coolant_c) + gma * (magnet_next - ambient_c));
  stator_ = stator_next;
  magnet_ = magnet_next;
  return e;
}

std::pair<double, double> ThermalNetwork::steady_state_rise(double stator_loss_w,
                                                            double magnet_loss_w) const {
  const double gsc = params_.stator_coolant_conductance;
  const double gsm = params_.stator_magnet_conductance;
  const double gma = params_.magnet_ambient_conductance;
  const double g11 = gsc + gsm;
  const double g22 = gma + gsm;
  const double det = g11 * g22 - gsm * gsm;
  if (det <= 0.0) throw std::domain_error("network has no path to a heat sink");
  return {(g22 * stator_loss_w + gsm * magnet_loss_w) / det,
          (gsm * stator_loss_w + g11 * magnet_loss_w) / det};
}

std::pair<double, double> ThermalNetwork::equilibrium(double coolant_c, double ambient_c) const {
  const double gsc = params_.stator_coolant_conductance;
  const double gsm = params_.stator_magnet_conductance;
  const double gma = params_.magnet_ambient_conductance;
  const double g11 = gsc + gsm;
  const double g22 = gma + gsm;
  const double det = g11 * g22 - gsm * gsm;
  if (det <= 0.0) throw std::domain_error("network has no path to a heat sink");
  const double b1 = gsc * coolant_c, b2 = gma * ambient_c;
  return {(g22 * b1 + gsm * b2) / det, (gsm * b1 + g11 * b2) / det};
}

LossSplit compute_losses(const LossCoefficients& losses, double i_s, double motor_speed) {
  const double copper = losses.copper_w_per_a2 * i_s * i_s;
  const double iron = losses.iron_w_per_rpm * std::abs(motor_speed);
  return {copper + (1.0 - losses.magnet_share) * iron, losses.magnet_share * iron};
}

RcLowPass::RcLowPass(double rc_seconds, double step_seconds) : rc_(rc_seconds), h_(step_seconds) {
  if (!(step_seconds > 0.0) || !(rc_seconds >= 0.0)) throw std::invalid_argument("RC filter needs RC >= 0, h > 0");
}

double RcLowPass::step(double x) {
  if (!started_) {
    started_ = true;
    y_ = x;
    return y_;
  }
  y_ = (h_ * x + rc_ * y_) / (rc_ + h_);
  return y_;
}

Dataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  if (!(config.duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  if (!(config.sample_rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (config.profiles == 0) throw std::invalid_argument("at least one profile is required");
  if (!(config.standstill_s >= 0.0)) throw std::invalid_argument("standstill must be nonnegative");
  if (!(config.min_hold_s > 0.0) || config.max_hold_s < config.min_hold_s) {
    throw std::invalid_argument("invalid excitation hold interval");
  }
  validate(config.network);

  const double h = 1.0 / config.sample_rate_hz;
  const auto steps = static_cast<std::size_t>(std::llround(config.duration_s * config.sample_rate_hz));
  Dataset dataset(config.sample_rate_hz);
  dataset.set_extra_columns({"torque", "stator_winding"});

  for (std::size_t p = 0; p < config.profiles; ++p) {
    Rng rng(seed, p);
    const std::string id = config.profile_prefix + std::to_string(p);
    const double ex = config.excitation;
    const double ambient_base = config.ambient_c + ex * rng.uniform(-3.0, 3.0);
    const double ambient_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double coolant_start = config.coolant_c + ex * rng.uniform(-10.0, 20.0);

    double speed = 0.0, current = 0.0, angle = 0.0, coolant = coolant_start;
    double speed_target = 0.0, current_target = 0.0, angle_target = 0.0, coolant_target = coolant;
    double hold_left = config.standstill_s;
    ThermalNetwork net(config.network, 0.0, 0.0);
    {
      const auto [stator0, magnet0] = net.equilibrium(coolant, ambient_base + ex * 1.5 * std::sin(ambient_phase));
      net = ThermalNetwork(config.network, stator0, magnet0);
    }

    for (std::size_t t = 0; t < steps; ++t) {
      if (hold_left <= 0.0) {
        hold_left = rng.uniform(config.min_hold_s, config.max_hold_s);
        speed_target = ex * rng.uniform(0.0, config.max_speed_rpm);
        current_target = ex * rng.uniform(0.0, config.max_current_a);
        angle_target = rng.uniform(0.0, 0.8);
        if (rng.uniform() < 0.3) coolant_target = config.coolant_c + ex * rng.uniform(-10.0, 20.0);
      }
      hold_left -= h;
      speed = track(speed, speed_target, 5.0, h);
      current = track(current, current_target, 1.0, h);
      angle = track(angle, angle_target, 1.0, h);
      coolant = track(coolant, coolant_target, 120.0, h);
      const double time = static_cast<double>(t) * h;
      const double ambient = ambient_base + ex * 1.5 * std::sin(2.0 * std::numbers::pi * time / 5400.0 + ambient_phase);

      const double i_d = -current * std::sin(angle);
      const double i_q = current * std::cos(angle);
      const double omega_el = kPolePairs * 2.0 * std::numbers::pi * speed / 60.0;
      const double u_d = kStatorResistance * i_d - omega_el * kInductanceQ * i_q;
      const double u_q = kStatorResistance * i_q + omega_el * (kInductanceD * i_d + kFluxLinkage);
      const double i_s = std::hypot(i_d, i_q);
      const auto loss = compute_losses(config.losses, i_s, speed);
      net.step(loss.stator_w, loss.magnet_w, coolant, ambient, h);

      RawSample s;
      s.ambient = ambient;
      s.coolant = coolant;
      s.u_d = u_d;
      s.u_q = u_q;
      s.i_d = i_d;
      s.i_q = i_q;
      s.motor_speed = speed;
      s.pm = net.magnet();
      s.profile_id = id;
      s.extras = {1.5 * kPolePairs * (kFluxLinkage * i_q + (kInductanceD - kInductanceQ) * i_d * i_q),
                  net.stator()};
      dataset.append(std::move(s));
    }
  }
  return dataset;
}

}  // namespace pmtemp
