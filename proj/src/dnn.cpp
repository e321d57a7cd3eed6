#include "xsect/dnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "xsect/error.hpp"

namespace xsect {

void validate(const DnnConfig& c) {
  if (c.hidden_layers.size() != c.dropout_rates.size())
    throw ConfigError("dnn: dropout_rates must have one entry per hidden layer");
  for (int units : c.hidden_layers)
    if (units < 1) throw ConfigError("dnn: hidden layer sizes must be >= 1");
  for (double r : c.dropout_rates)
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dnn: dropout rates must lie in [0, 1)");
  if (c.epochs < 0) throw ConfigError("dnn: epochs must be >= 0");
  if (c.minibatch < 1) throw ConfigError("dnn: minibatch must be >= 1");
  if (!(c.learning_rate > 0)) throw ConfigError("dnn: learning_rate must be > 0");
  if (!(c.bn_epsilon > 0)) throw ConfigError("dnn: bn_epsilon must be > 0");
  if (!(c.bn_momentum >= 0 && c.bn_momentum < 1)) throw ConfigError("dnn: bn_momentum must lie in [0, 1)");
}

DnnModel::DnnModel(int n_inputs, const DnnConfig& config, Rng& rng)
    : n_inputs_(n_inputs), bn_epsilon_(config.bn_epsilon) {
  validate(config);
  int fan_in = n_inputs;
  for (std::size_t l = 0; l < config.hidden_layers.size(); ++l) {
    const int units = config.hidden_layers[l];
    HiddenLayer h;
    const double sigma = std::sqrt(2.0 / fan_in);
    h.weight.resize(fan_in, units);
    for (Eigen::Index j = 0; j < h.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < h.weight.rows(); ++i) h.weight(i, j) = truncated_normal(rng, sigma);
    h.bias = Eigen::RowVectorXd::Zero(units);
    h.gamma = Eigen::RowVectorXd::Ones(units);
    h.beta = Eigen::RowVectorXd::Zero(units);
    h.running_mean = Eigen::RowVectorXd::Zero(units);
    h.running_var = Eigen::RowVectorXd::Ones(units);
    h.dropout = config.dropout_rates[l];
    hidden_.push_back(std::move(h));
    fan_in = units;
  }
  const double sigma = std::sqrt(2.0 / fan_in);
  out_weight_.resize(fan_in);
  for (Eigen::Index i = 0; i < out_weight_.size(); ++i) out_weight_(i) = truncated_normal(rng, sigma);
}

DnnModel::DnnModel(int n_inputs, double bn_epsilon, std::vector<HiddenLayer> hidden, Eigen::VectorXd out_weight,
                   double out_bias)
    : n_inputs_(n_inputs), bn_epsilon_(bn_epsilon), hidden_(std::move(hidden)), out_weight_(std::move(out_weight)),
      out_bias_(out_bias) {}

Eigen::VectorXd DnnModel::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != n_inputs_)
    throw ValidationError("dnn: expected " + std::to_string(n_inputs_) + " features, got " + std::to_string(X.cols()));
  // Inference batch-norm folded into one scale and shift per unit.
  std::vector<Eigen::RowVectorXd> scale, shift;
  for (const auto& h : hidden_) {
    const Eigen::RowVectorXd inv = (h.running_var.array() + bn_epsilon_).rsqrt().matrix();
    scale.push_back(h.gamma.cwiseProduct(inv));
    shift.push_back(h.beta - (h.running_mean - h.bias).cwiseProduct(scale.back()));
  }
  // Row at a time, so a score never depends on what else is in the batch.
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    Eigen::RowVectorXd a = X.row(r);
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
      Eigen::RowVectorXd z = a * hidden_[l].weight;
      a = (z.cwiseProduct(scale[l]) + shift[l]).cwiseMax(0.0);
    }
    out(r) = a.dot(out_weight_.transpose()) + out_bias_;
  }
  return out;
}

std::vector<Eigen::MatrixXd> DnnModel::sample_masks(Eigen::Index batch, Rng& rng) const {
  std::vector<Eigen::MatrixXd> masks;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& h : hidden_) {
    const double keep = 1.0 - h.dropout;
    Eigen::MatrixXd m(batch, h.weight.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng) < keep ? 1.0 / keep : 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

std::vector<Eigen::MatrixXd> DnnModel::unit_masks(Eigen::Index batch) const {
  std::vector<Eigen::MatrixXd> masks;
  for (const auto& h : hidden_) masks.push_back(Eigen::MatrixXd::Ones(batch, h.weight.cols()));
  return masks;
}

ForwardTrace DnnModel::forward_train(const Eigen::MatrixXd& X, const std::vector<Eigen::MatrixXd>& masks) const {
  if (X.cols() != n_inputs_)
    throw ValidationError("dnn: expected " + std::to_string(n_inputs_) + " features, got " + std::to_string(X.cols()));
  ForwardTrace tr;
  Eigen::MatrixXd a = X;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    const auto& h = hidden_[l];
    const Eigen::MatrixXd z = (a * h.weight).rowwise() + h.bias;
    const Eigen::RowVectorXd mean = z.colwise().mean();
    const Eigen::MatrixXd centered = z.rowwise() - mean;
    const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
    const Eigen::RowVectorXd inv = (var.array() + bn_epsilon_).rsqrt().matrix();
    Eigen::MatrixXd zhat = (centered.array().rowwise() * inv.array()).matrix();
    Eigen::MatrixXd y = (zhat.array().rowwise() * h.gamma.array()).matrix().rowwise() + h.beta;
    tr.inputs.push_back(std::move(a));
    a = y.cwiseMax(0.0).cwiseProduct(masks[l]);
    tr.normalized.push_back(std::move(zhat));
    tr.shifted.push_back(std::move(y));
    tr.batch_mean.push_back(mean);
    tr.batch_var.push_back(var);
  }
  tr.output = (a * out_weight_).array() + out_bias_;
  tr.last_hidden = std::move(a);
  return tr;
}

double DnnModel::loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::vector<Eigen::MatrixXd>& masks) const {
  const ForwardTrace tr = forward_train(X, masks);
  return (tr.output - y).squaredNorm() / static_cast<double>(y.size());
}

double DnnModel::loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const std::vector<Eigen::MatrixXd>& masks, Eigen::VectorXd& gradient,
                                   ForwardTrace* trace) const {
  ForwardTrace tr = forward_train(X, masks);
  const double b = static_cast<double>(y.size());
  const Eigen::VectorXd diff = tr.output - y;
  const double value = diff.squaredNorm() / b;

  gradient.resize(parameter_count());
  Eigen::Index tail = gradient.size();
  const Eigen::VectorXd d_out = 2.0 * diff / b;
  tail -= 1;
  gradient(tail) = d_out.sum();
  tail -= out_weight_.size();
  gradient.segment(tail, out_weight_.size()) = tr.last_hidden.transpose() * d_out;
  Eigen::MatrixXd d_a = d_out * out_weight_.transpose();

  for (std::size_t l = hidden_.size(); l-- > 0;) {
    const auto& h = hidden_[l];
    const Eigen::Index units = h.weight.cols();
    const Eigen::MatrixXd d_y =
        d_a.cwiseProduct(masks[l]).cwiseProduct((tr.shifted[l].array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd& zhat = tr.normalized[l];
    const Eigen::RowVectorXd inv = (tr.batch_var[l].array() + bn_epsilon_).rsqrt().matrix();
    const Eigen::MatrixXd d_zhat = (d_y.array().rowwise() * h.gamma.array()).matrix();
    const Eigen::RowVectorXd sum_d = d_zhat.colwise().sum();
    const Eigen::RowVectorXd sum_dz = d_zhat.cwiseProduct(zhat).colwise().sum();
    const Eigen::MatrixXd d_z =
        (((b * d_zhat).rowwise() - sum_d) - (zhat.array().rowwise() * sum_dz.array()).matrix()).array().rowwise() *
        (inv.array() / b);

    tail -= units;
    gradient.segment(tail, units) = d_y.colwise().sum().transpose();  // beta
    tail -= units;
    gradient.segment(tail, units) = d_y.cwiseProduct(zhat).colwise().sum().transpose();  // gamma
    tail -= units;
    gradient.segment(tail, units) = d_z.colwise().sum().transpose();  // bias
    tail -= h.weight.size();
    const Eigen::MatrixXd d_w = tr.inputs[l].transpose() * d_z;
    gradient.segment(tail, h.weight.size()) = Eigen::Map<const Eigen::VectorXd>(d_w.data(), d_w.size());
    if (l > 0) d_a = d_z * h.weight.transpose();
  }
  if (trace != nullptr) *trace = std::move(tr);
  return value;
}

Eigen::Index DnnModel::parameter_count() const {
  Eigen::Index n = out_weight_.size() + 1;
  for (const auto& h : hidden_) n += h.weight.size() + 3 * h.weight.cols();
  return n;
}

Eigen::VectorXd DnnModel::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index at = 0;
  auto put = [&](const auto& m) {
    flat.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    at += m.size();
  };
  for (const auto& h : hidden_) {
    put(h.weight);
    put(h.bias);
    put(h.gamma);
    put(h.beta);
  }
  put(out_weight_);
  flat(at) = out_bias_;
  return flat;
}

void DnnModel::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw ValidationError("dnn: parameter vector has the wrong length");
  Eigen::Index at = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(at, m.size());
    at += m.size();
  };
  for (auto& h : hidden_) {
    take(h.weight);
    take(h.bias);
    take(h.gamma);
    take(h.beta);
  }
  take(out_weight_);
  out_bias_ = flat(at);
}

void DnnModel::update_running_stats(const ForwardTrace& trace, double momentum) {
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    auto& h = hidden_[l];
    h.running_mean = momentum * h.running_mean + (1.0 - momentum) * trace.batch_mean[l];
    h.running_var = momentum * h.running_var + (1.0 - momentum) * trace.batch_var[l];
  }
}

DnnModel dnn_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const DnnConfig& config, std::uint64_t seed) {
  validate(config);
  if (X.rows() < 1) throw ValidationError("dnn: no samples");
  if (X.rows() != y.size()) throw ValidationError("dnn: X and y disagree on sample count");
  Rng rng(seed);
  DnnModel model(static_cast<int>(X.cols()), config, rng);

  const Eigen::Index n = X.rows();
  const Eigen::Index batch = std::min<Eigen::Index>(config.minibatch, n);
  Eigen::VectorXd params = model.parameters();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd xb;
  Eigen::VectorXd yb;
  ForwardTrace trace;
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index rows = std::min(batch, n - start);
      xb.resize(rows, X.cols());
      yb.resize(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto src = order[static_cast<std::size_t>(start + r)];
        xb.row(r) = X.row(src);
        yb(r) = y(src);
      }
      const auto masks = model.sample_masks(rows, rng);
      const double loss = model.loss_and_gradient(xb, yb, masks, grad, &trace);
      if (!std::isfinite(loss) || !grad.allFinite())
        throw Error("dnn: non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                    "; lower learning_rate (currently " + std::to_string(config.learning_rate) + ")");
      ++step;
      m = config.beta1 * m + (1.0 - config.beta1) * grad;
      v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      params.array() -= config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
      model.set_parameters(params);
      model.update_running_stats(trace, config.bn_momentum);
    }
  }
  return model;
}

}  // namespace xsect
