#include "pmtemp/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace pmtemp {

namespace {

constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
constexpr double kSeluSaturation = -kSeluLambda * kSeluAlpha;

double activate(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? z : 0.0;
  return z > 0.0 ? kSeluLambda * z : kSeluLambda * kSeluAlpha * std::expm1(z);
}

double activate_grad(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  return z > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(z);
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "selu"; }

std::string to_string(OptimizerKind o) {
  switch (o) {
    case OptimizerKind::radam: return "radam";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::nadam: return "nadam";
    case OptimizerKind::adamax: return "adamax";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::sgd: return "sgd";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "selu") return Activation::selu;
  throw std::invalid_argument("unknown activation: " + s);
}

OptimizerKind optimizer_from_string(const std::string& s) {
  for (auto o : {OptimizerKind::radam, OptimizerKind::adam, OptimizerKind::nadam, OptimizerKind::adamax,
                 OptimizerKind::rmsprop, OptimizerKind::sgd}) {
    if (to_string(o) == s) return o;
  }
  throw std::invalid_argument("unknown optimizer: " + s);
}

void validate(const MlpConfig& c) {
  if (c.layers < 1 || c.layers > 3) throw std::invalid_argument("MLP layers must lie in 1..3");
  if (c.units < 4 || c.units > 32) throw std::invalid_argument("MLP units must lie in 4..32");
  if (!(c.dropout >= 0.0 && c.dropout <= 0.3)) throw std::invalid_argument("dropout must lie in 0..0.3");
  if (!(c.l2 >= 0.0 && c.l2 <= 0.1)) throw std::invalid_argument("l2 must lie in 0..0.1");
  if (!(c.learn_rate > 0.0 && c.learn_rate <= 0.1)) throw std::invalid_argument("learn rate must lie in (0, 0.1]");
}

int TrainSchedule::batch_size(int epoch) const {
  std::size_t stage = 0;
  for (int e : batch_switch_epochs) {
    if (epoch >= e) ++stage;
  }
  return batch_sizes.at(std::min(stage, batch_sizes.size() - 1));
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation)
    : sizes_(std::move(layer_sizes)), activation_(activation) {
  if (sizes_.size() < 2) throw std::invalid_argument("network needs an input and an output layer");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw std::invalid_argument("layer sizes must be positive");
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_ = Eigen::VectorXd::Zero(total);
}

Eigen::Map<Eigen::MatrixXd> Mlp::weights(std::size_t l) {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Eigen::MatrixXd> Mlp::weights(std::size_t l) const {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t l) {
  return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t l) const {
  return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}

Mlp init_mlp(const MlpConfig& config, int inputs) {
  validate(config);
  if (inputs < 1) throw std::invalid_argument("network needs at least one input");
  std::vector<int> sizes{inputs};
  for (int l = 0; l < config.layers; ++l) sizes.push_back(config.units);
  sizes.push_back(1);
  Mlp net(sizes, config.activation);
  Rng rng(config.seed, 0);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const bool hidden = l + 1 < net.layer_count();
    const double gain = hidden && config.activation == Activation::relu ? 2.0 : 1.0;
    const double sd = std::sqrt(gain / sizes[l]);
    auto W = net.weights(l);
    for (Eigen::Index c = 0; c < W.cols(); ++c) {
      for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = sd * rng.normal();
    }
  }
  return net;
}

Eigen::RowVectorXd forward(const Mlp& net, const Eigen::MatrixXd& X, ForwardMode mode, double dropout, Rng* rng,
                           ForwardCache* cache) {
  if (X.rows() != net.input_width()) throw std::invalid_argument("input width mismatch");
  const bool drop = mode == ForwardMode::train && dropout > 0.0;
  if (drop && rng == nullptr) throw std::invalid_argument("train-mode dropout needs a generator");
  if (cache) *cache = ForwardCache{};
  Eigen::MatrixXd H = X;
  const std::size_t L = net.layer_count();
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd Z = net.weights(l) * H;
    Z.colwise() += net.bias(l);
    if (cache) {
      cache->inputs.push_back(H);
      cache->pre.push_back(Z);
    }
    if (l + 1 == L) return Z.row(0);

    H = Z.unaryExpr([a = net.activation()](double z) { return activate(a, z); });
    if (drop) {
      Eigen::MatrixXd scale(H.rows(), H.cols());
      if (net.activation() == Activation::relu) {
        const double keep = 1.0 / (1.0 - dropout);
        for (Eigen::Index i = 0; i < H.size(); ++i) {
          const bool kept = rng->uniform() >= dropout;
          scale(i) = kept ? keep : 0.0;
          H(i) *= scale(i);
        }
      } else {
        // Alpha dropout keeps the self-normalizing fixed point.
        const double a = 1.0 / std::sqrt((1.0 - dropout) * (1.0 + dropout * kSeluSaturation * kSeluSaturation));
        const double b = -a * kSeluSaturation * dropout;
        for (Eigen::Index i = 0; i < H.size(); ++i) {
          const bool kept = rng->uniform() >= dropout;
          scale(i) = kept ? a : 0.0;
          H(i) = (kept ? H(i) : kSeluSaturation) * a + b;
        }
      }
      if (cache) cache->dropout_scale.push_back(std::move(scale));
    } else if (cache) {
      cache->dropout_scale.emplace_back();
    }
  }
  return {};
}

Eigen::VectorXd backward(const Mlp& net, const ForwardCache& cache, const Eigen::RowVectorXd& doutput, double l2) {
  const std::size_t L = net.layer_count();
  if (cache.inputs.size() != L) throw std::invalid_argument("cache does not match the network");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::MatrixXd delta = doutput;
  for (std::size_t k = L; k-- > 0;) {
    const auto W = net.weights(k);
    const Eigen::Index off = net.offset(k);
    Eigen::Map<Eigen::MatrixXd> gW(grad.data() + off, W.rows(), W.cols());
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + off + W.size(), W.rows());
    gW = delta * cache.inputs[k].transpose() + 2.0 * l2 * W;
    gb = delta.rowwise().sum();
    if (k == 0) break;
    Eigen::MatrixXd dH = W.transpose() * delta;
    const auto& scale = cache.dropout_scale[k - 1];
    if (scale.size() > 0) dH.array() *= scale.array();
    const auto& Z = cache.pre[k - 1];
    delta = dH.array() * Z.unaryExpr([a = net.activation()](double z) { return activate_grad(a, z); }).array();
  }
  return grad;
}

LossGradient loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& X, const Eigen::RowVectorXd& y, double l2,
                               double dropout, Rng* rng) {
  if (X.cols() != y.size() || X.cols() == 0) throw std::invalid_argument("batch shape mismatch");
  ForwardCache cache;
  const Eigen::RowVectorXd out = forward(net, X, ForwardMode::train, dropout, rng, &cache);
  const Eigen::RowVectorXd r = out - y;
  const double b = static_cast<double>(y.size());
  double penalty = 0.0;
  for (std::size_t l = 0; l < net.layer_count(); ++l) penalty += net.weights(l).squaredNorm();
  LossGradient lg;
  lg.loss = r.squaredNorm() / b + l2 * penalty;
  lg.gradient = backward(net, cache, 2.0 * r / b, l2);
  return lg;
}

Optimizer::Optimizer(OptimizerKind kind, Eigen::Index size)
    : kind_(kind), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw std::invalid_argument("optimizer size mismatch");
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  const double t = static_cast<double>(t_);
  switch (kind_) {
    case OptimizerKind::sgd:
      params -= lr * grad;
      break;
    case OptimizerKind::rmsprop: {
      constexpr double rho = 0.9;
      v_ = rho * v_ + (1.0 - rho) * grad.cwiseAbs2();
      params.array() -= lr * grad.array() / (v_.array().sqrt() + eps);
      break;
    }
    case OptimizerKind::adam: {
      m_ = b1 * m_ + (1.0 - b1) * grad;
      v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
      params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
      break;
    }
    case OptimizerKind::adamax: {
      m_ = b1 * m_ + (1.0 - b1) * grad;
      v_ = (b2 * v_).cwiseMax(grad.cwiseAbs());
      params.array() -= (lr / (1.0 - std::pow(b1, t))) * m_.array() / (v_.array() + eps);
      break;
    }
    case OptimizerKind::nadam: {
      m_ = b1 * m_ + (1.0 - b1) * grad;
      v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
      const Eigen::ArrayXd m_hat =
          b1 * m_.array() / (1.0 - std::pow(b1, t + 1.0)) + (1.0 - b1) * grad.array() / (1.0 - std::pow(b1, t));
      const Eigen::ArrayXd v_hat = v_.array() / (1.0 - std::pow(b2, t));
      params.array() -= lr * m_hat / (v_hat.sqrt() + eps);
      break;
    }
    case OptimizerKind::radam: {
      m_ = b1 * m_ + (1.0 - b1) * grad;
      v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
      const double b2t = std::pow(b2, t);
      const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
      const double rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
      const Eigen::ArrayXd m_hat = m_.array() / (1.0 - std::pow(b1, t));
      if (rho_t > 4.0) {
        const double r = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
        const Eigen::ArrayXd v_hat = v_.array() / (1.0 - b2t);
        params.array() -= lr * r * m_hat / (v_hat.sqrt() + eps);
      } else {
        params.array() -= lr * m_hat;
      }
      break;
    }
  }
}

PlateauSchedule::PlateauSchedule(int patience, double factor, double min_delta)
    : patience_(patience), factor_(factor), min_delta_(min_delta), best_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw std::invalid_argument("plateau patience must be >= 1");
  if (!(factor > 0.0 && factor <= 1.0)) throw std::invalid_argument("plateau factor must lie in (0, 1]");
}

double PlateauSchedule::update(double loss) {
  if (loss < best_ - min_delta_) {
    best_ = loss;
    wait_ = 0;
    return 1.0;
  }
  if (++wait_ >= patience_) {
    wait_ = 0;
    return factor_;
  }
  return 1.0;
}

EarlyStopping::EarlyStopping(int patience, double min_delta)
    : patience_(patience), min_delta_(min_delta), best_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw std::invalid_argument("early-stop patience must be >= 1");
}

bool EarlyStopping::update(double loss) {
  if (loss < best_ - min_delta_) {
    best_ = loss;
    wait_ = 0;
    return false;
  }
  return ++wait_ >= patience_;
}

namespace {

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows, std::size_t begin,
                               std::size_t end) {
  Eigen::MatrixXd out(X.cols(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) out.col(static_cast<Eigen::Index>(i - begin)) = X.row(rows[i]).transpose();
  return out;
}

}  // namespace

MlpModel train_mlp(const Eigen::MatrixXd& X_fit, const Eigen::VectorXd& y_fit, const Eigen::MatrixXd& X_val,
                   const Eigen::VectorXd& y_val, const MlpConfig& config, const TrainSchedule& schedule) {
  validate(config);
  if (X_fit.rows() == 0 || X_fit.rows() != y_fit.size()) throw std::invalid_argument("bad fit set shape");
  if (X_val.rows() == 0) throw std::invalid_argument("empty validation split");
  if (X_val.rows() != y_val.size() || X_val.cols() != X_fit.cols()) throw std::invalid_argument("bad validation set shape");
  if (schedule.max_epochs < 1 || schedule.batch_sizes.empty()) throw std::invalid_argument("invalid schedule");

  MlpModel model;
  model.config = config;
  model.net = init_mlp(config, static_cast<int>(X_fit.cols()));
  model.y_mean = y_fit.mean();
  const double sd = std::sqrt((y_fit.array() - model.y_mean).square().mean());
  model.y_std = sd > 0.0 ? sd : 1.0;
  const Eigen::VectorXd yf = (y_fit.array() - model.y_mean) / model.y_std;
  const Eigen::RowVectorXd yv = ((y_val.array() - model.y_mean) / model.y_std).matrix().transpose();
  const Eigen::MatrixXd Xv = X_val.transpose();

  Rng rng(config.seed, 1);
  Optimizer opt(config.optimizer, model.net.params().size());
  PlateauSchedule plateau(schedule.plateau_patience, schedule.plateau_factor, schedule.plateau_min_delta);
  EarlyStopping stopper(schedule.early_stop_patience, schedule.early_stop_min_delta);
  Eigen::VectorXd best_params = model.net.params();
  model.best_val_loss = std::numeric_limits<double>::infinity();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(X_fit.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  double lr = config.learn_rate;
  for (int epoch = 0; epoch < schedule.max_epochs; ++epoch) {
    const int batch = schedule.batch_size(epoch);
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch));
      const Eigen::MatrixXd Xb = gather_columns(X_fit, order, start, end);
      Eigen::RowVectorXd yb(static_cast<Eigen::Index>(end - start));
      for (std::size_t i = start; i < end; ++i) yb(static_cast<Eigen::Index>(i - start)) = yf(order[i]);
      const auto lg = loss_and_gradient(model.net, Xb, yb, config.l2, config.dropout, &rng);
      opt.step(model.net.params(), lg.gradient, lr);
      loss_sum += lg.loss * static_cast<double>(end - start);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    const Eigen::RowVectorXd pred = forward(model.net, Xv, ForwardMode::infer);
    double val_loss = (pred - yv).squaredNorm() / static_cast<double>(yv.size());
    if (!std::isfinite(val_loss)) val_loss = std::numeric_limits<double>::infinity();
    model.history.push_back({epoch, lr, batch, train_loss, val_loss});
    if (val_loss < model.best_val_loss) {
      model.best_val_loss = val_loss;
      model.best_epoch = epoch;
      best_params = model.net.params();
    }
    if (!std::isfinite(train_loss)) break;
    lr *= plateau.update(train_loss);
    if (stopper.update(val_loss)) break;
  }
  model.net.params() = best_params;
  return model;
}

MlpModel train_mlp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<ProfileSpan>& profiles,
                   const MlpConfig& config, const TrainSchedule& schedule) {
  if (profiles.size() < 2) throw std::invalid_argument("empty validation split: need at least two profiles");
  std::vector<std::size_t> ids(profiles.size());
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(config.seed, 2);
  rng.shuffle(ids);
  const double target = schedule.validation_fraction * static_cast<double>(X.rows());
  std::vector<bool> is_val(profiles.size(), false);
  std::size_t val_rows = 0, val_profiles = 0;
  for (std::size_t i : ids) {
    if (static_cast<double>(val_rows) >= target || val_profiles + 1 == profiles.size()) break;
    is_val[i] = true;
    val_rows += profiles[i].size();
    ++val_profiles;
  }
  if (val_rows == 0) throw std::invalid_argument("empty validation split");

  auto gather = [&](bool val, Eigen::MatrixXd& Xo, Eigen::VectorXd& yo) {
    Eigen::Index rows = 0;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      if (is_val[i] == val) rows += static_cast<Eigen::Index>(profiles[i].size());
    }
    Xo.resize(rows, X.cols());
    yo.resize(rows);
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      if (is_val[i] != val) continue;
      const auto len = static_cast<Eigen::Index>(profiles[i].size());
      const auto begin = static_cast<Eigen::Index>(profiles[i].begin);
      Xo.middleRows(at, len) = X.middleRows(begin, len);
      yo.segment(at, len) = y.segment(begin, len);
      at += len;
    }
  };
  Eigen::MatrixXd Xf, Xv;
  Eigen::VectorXd yf, yv;
  gather(false, Xf, yf);
  gather(true, Xv, yv);
  return train_mlp(Xf, yf, Xv, yv, config, schedule);
}

double predict_mlp(const MlpModel& model, const Eigen::VectorXd& x) {
  const Eigen::RowVectorXd out = forward(model.net, x, ForwardMode::infer);
  return out(0) * model.y_std + model.y_mean;
}

Eigen::VectorXd predict_mlp(const MlpModel& model, const Eigen::MatrixXd& X) {
  const Eigen::RowVectorXd out = forward(model.net, X.transpose(), ForwardMode::infer);
  return (out.transpose().array() * model.y_std + model.y_mean).matrix();
}

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
  out << "epoch,learn_rate,batch_size,train_loss,val_loss\n";
  out.precision(10);
  for (const auto& h : history) {
    out << h.epoch << ',' << h.learn_rate << ',' << h.batch_size << ',' << h.train_loss << ',' << h.val_loss << '\n';
  }
}

}  // namespace pmtemp
