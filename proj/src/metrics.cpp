#include <cmath>
#include <iomanip>
#include <limits>
#include <stdexcept>

#include "pmtemp/eval.hpp"

namespace pmtemp {

Metrics compute_metrics(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  if (y.size() == 0) throw std::invalid_argument("metrics need at least one sample");
  if (y.size() != y_hat.size()) throw std::invalid_argument("metrics: length mismatch");
  const double n = static_cast<double>(y.size());
  const Eigen::ArrayXd r = (y - y_hat).array();
  Metrics m;
  m.mse = r.square().sum() / n;
  m.mae = r.abs().sum() / n;
  m.linf = r.abs().maxCoeff();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  if (ss_tot > 0.0) {
    m.r2 = 1.0 - r.square().sum() / ss_tot;
  } else {
    m.r2 = std::numeric_limits<double>::quiet_NaN();
    m.r2_defined = false;
  }
  return m;
}

void write_metrics_csv_header(std::ostream& out) { out << "model,split,mse,mae,r2,linf,parameters\n"; }

void write_metrics_csv_row(std::ostream& out, const std::string& model, const std::string& split,
                           const Metrics& m, std::size_t parameter_count) {
  out << model << ',' << split << ',' << std::setprecision(10) << m.mse << ',' << m.mae << ',';
  if (m.r2_defined) out << m.r2;
  else out << "nan";
  out << ',' << m.linf << ',' << parameter_count << '\n';
}

}  // namespace pmtemp
