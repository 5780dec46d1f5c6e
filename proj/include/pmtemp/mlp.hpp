#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "pmtemp/data.hpp"
#include "pmtemp/random.hpp"

namespace pmtemp {

enum class Activation { relu, selu };
enum class OptimizerKind { radam, adam, nadam, adamax, rmsprop, sgd };

std::string to_string(Activation a);
std::string to_string(OptimizerKind o);
Activation activation_from_string(const std::string& s);
OptimizerKind optimizer_from_string(const std::string& s);

struct MlpConfig {
  int layers = 1;
  int units = 16;
  Activation activation = Activation::relu;
  double dropout = 0.0;
  double l2 = 1e-8;
  double learn_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument outside layers 1..3, units 4..32,
/// dropout 0..0.3, l2 0..0.1, learn rate (0, 0.1].
void validate(const MlpConfig& config);

struct TrainSchedule {
  int max_epochs = 99;
  std::vector<int> batch_sizes = {32, 64, 128};
  std::vector<int> batch_switch_epochs = {33, 66};
  int plateau_patience = 10;
  double plateau_factor = 0.5;
  double plateau_min_delta = 1e-4;
  int early_stop_patience = 15;
  double early_stop_min_delta = 1e-4;
  double validation_fraction = 0.10;

  int batch_size(int epoch) const;
};

/// Feed-forward network with a linear single-unit output layer. Parameters
/// are one flat vector: for each layer, W (out x in, column-major) then b.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Activation activation);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  int input_width() const { return sizes_.front(); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  Eigen::Map<Eigen::MatrixXd> weights(std::size_t layer);
  Eigen::Map<const Eigen::MatrixXd> weights(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
  /// Offset of layer's W inside params(); b follows W.
  Eigen::Index offset(std::size_t layer) const { return offsets_[layer]; }

 private:
  std::vector<int> sizes_;
  Activation activation_ = Activation::relu;
  Eigen::VectorXd params_;
  std::vector<Eigen::Index> offsets_;
};

/// ReLU layers: He-normal fan-in scaling; SELU layers: LeCun-normal; linear
/// output: LeCun-normal; zero biases.
Mlp init_mlp(const MlpConfig& config, int inputs);

enum class ForwardMode { train, infer };

/// Activations kept by a train-mode forward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;   // layer inputs (after dropout of the previous layer)
  std::vector<Eigen::MatrixXd> pre;      // pre-activations
  std::vector<Eigen::MatrixXd> dropout_scale;  // d(out)/d(activation) per hidden layer
};

/// X holds one sample per column (features x batch). Dropout is only applied in
/// train mode and then requires `rng`.
Eigen::RowVectorXd forward(const Mlp& net, const Eigen::MatrixXd& X, ForwardMode mode, double dropout = 0.0,
                           Rng* rng = nullptr, ForwardCache* cache = nullptr);

/// Gradient of loss + l2 * sum ||W||^2 given d(loss)/d(output) per sample.
Eigen::VectorXd backward(const Mlp& net, const ForwardCache& cache, const Eigen::RowVectorXd& doutput, double l2);

struct LossGradient {
  double loss = 0.0;  // MSE + l2 penalty
  Eigen::VectorXd gradient;
};

LossGradient loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& X, const Eigen::RowVectorXd& y, double l2,
                               double dropout = 0.0, Rng* rng = nullptr);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, Eigen::Index size);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double learn_rate);
  OptimizerKind kind() const { return kind_; }
  long steps() const { return t_; }

 private:
  OptimizerKind kind_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

/// Halves the learn rate after `patience` epochs without training-loss improvement.
class PlateauSchedule {
 public:
  PlateauSchedule(int patience, double factor, double min_delta);
  /// Returns the multiplier to apply to the learn rate after this epoch.
  double update(double loss);

 private:
  int patience_;
  double factor_;
  double min_delta_;
  double best_;
  int wait_ = 0;
};

class EarlyStopping {
 public:
  EarlyStopping(int patience, double min_delta);
  /// True once `patience` epochs passed without an improvement of min_delta.
  bool update(double loss);
  double best() const { return best_; }

 private:
  int patience_;
  double min_delta_;
  double best_;
  int wait_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double learn_rate = 0.0;
  int batch_size = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct MlpModel {
  Mlp net;
  MlpConfig config;
  double y_mean = 0.0;
  double y_std = 1.0;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  std::vector<EpochRecord> history;

  std::size_t parameter_count() const { return net.parameter_count(); }
};

/// Trains on (X_fit, y_fit) with early stopping on (X_val, y_val); rows are
/// samples. Returns the parameters of the best validation epoch.
MlpModel train_mlp(const Eigen::MatrixXd& X_fit, const Eigen::VectorXd& y_fit, const Eigen::MatrixXd& X_val,
                   const Eigen::VectorXd& y_val, const MlpConfig& config, const TrainSchedule& schedule);

/// Holds out whole profiles (about validation_fraction of the rows) for
/// validation, then trains.
MlpModel train_mlp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<ProfileSpan>& profiles,
                   const MlpConfig& config, const TrainSchedule& schedule);

double predict_mlp(const MlpModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd predict_mlp(const MlpModel& model, const Eigen::MatrixXd& X);

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out);

}  // namespace pmtemp
