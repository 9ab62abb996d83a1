#include "acorn/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "acorn/error.hpp"
#include "acorn/rng.hpp"

namespace acorn {

namespace {

MlpParameters zero_like(const MlpModel& m) {
  return {Matrix(m.input_dim(), m.hidden()), std::vector<double>(m.hidden(), 0.0),
          Matrix(m.hidden(), m.classes()), std::vector<double>(m.classes(), 0.0)};
}

// hidden pre-activation for one input row
void hidden_pre(const MlpModel& m, std::span<const double> x, std::span<double> pre) {
  std::copy(m.params.b1.begin(), m.params.b1.end(), pre.begin());
  const std::size_t h = m.hidden();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const auto w = m.params.w1.row(i);
    for (std::size_t k = 0; k < h; ++k) pre[k] += xi * w[k];
  }
}

void output_logits(const MlpModel& m, std::span<const double> act, std::span<double> out) {
  std::copy(m.params.b2.begin(), m.params.b2.end(), out.begin());
  const std::size_t c = m.classes();
  for (std::size_t k = 0; k < act.size(); ++k) {
    const double a = act[k];
    if (a == 0.0) continue;
    const auto w = m.params.w2.row(k);
    for (std::size_t j = 0; j < c; ++j) out[j] += a * w[j];
  }
}

// Turns logits into probabilities in place and returns log-sum-exp.
double softmax_inplace(std::span<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return top + std::log(sum);
}

void check_shapes(const MlpModel& m, const Matrix& x, std::span<const std::size_t> rows,
                  std::span<const std::size_t> labels) {
  if (x.cols() != m.input_dim()) throw Error(ErrorKind::ShapeMismatch, "feature width differs from model input");
  for (auto r : rows) {
    if (r >= x.rows() || r >= labels.size()) throw Error(ErrorKind::ShapeMismatch, "row index out of range");
    if (labels[r] >= m.classes()) throw Error(ErrorKind::ShapeMismatch, "label out of range");
  }
}

// Mean loss over `rows`, accumulating gradients into grad (overwritten).
double batch_gradient(const MlpModel& m, const Matrix& x, std::span<const std::size_t> rows,
                      std::span<const std::size_t> labels, MlpParameters& grad) {
  const std::size_t h = m.hidden();
  const std::size_t c = m.classes();
  std::fill(grad.w1.data().begin(), grad.w1.data().end(), 0.0);
  std::fill(grad.b1.begin(), grad.b1.end(), 0.0);
  std::fill(grad.w2.data().begin(), grad.w2.data().end(), 0.0);
  std::fill(grad.b2.begin(), grad.b2.end(), 0.0);

  std::vector<double> pre(h), act(h), prob(c), dact(h);
  const double scale = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (const auto r : rows) {
    const auto xr = x.row(r);
    hidden_pre(m, xr, pre);
    for (std::size_t k = 0; k < h; ++k) act[k] = pre[k] > 0.0 ? pre[k] : 0.0;
    output_logits(m, act, prob);
    const double target_logit = prob[labels[r]];
    loss += softmax_inplace(prob) - target_logit;

    // dL/dlogit = (p - onehot) / B
    prob[labels[r]] -= 1.0;
    for (auto& p : prob) p *= scale;
    for (std::size_t j = 0; j < c; ++j) grad.b2[j] += prob[j];
    for (std::size_t k = 0; k < h; ++k) {
      double d = 0.0;
      const auto w = m.params.w2.row(k);
      auto g = grad.w2.row(k);
      for (std::size_t j = 0; j < c; ++j) {
        g[j] += act[k] * prob[j];
        d += w[j] * prob[j];
      }
      dact[k] = pre[k] > 0.0 ? d : 0.0;
    }
    for (std::size_t k = 0; k < h; ++k) grad.b1[k] += dact[k];
    for (std::size_t i = 0; i < xr.size(); ++i) {
      const double xi = xr[i];
      if (xi == 0.0) continue;
      auto g = grad.w1.row(i);
      for (std::size_t k = 0; k < h; ++k) g[k] += xi * dact[k];
    }
  }
  return loss * scale;
}

class Adam {
 public:
  Adam(const TrainConfig& c, std::size_t size) : c_(c), m_(size, 0.0), v_(size, 0.0) {}

  void begin_step() {
    ++t_;
    correction1_ = 1.0 - std::pow(c_.beta1, static_cast<double>(t_));
    correction2_ = 1.0 - std::pow(c_.beta2, static_cast<double>(t_));
    offset_ = 0;
  }

  void update(std::span<double> param, std::span<const double> grad) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      double& m = m_[offset_ + i];
      double& v = v_[offset_ + i];
      m = c_.beta1 * m + (1.0 - c_.beta1) * grad[i];
      v = c_.beta2 * v + (1.0 - c_.beta2) * grad[i] * grad[i];
      const double m_hat = m / correction1_;
      const double v_hat = v / correction2_;
      param[i] -= c_.learning_rate * m_hat / (std::sqrt(v_hat) + c_.epsilon);
    }
    offset_ += param.size();
  }

 private:
  const TrainConfig& c_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
  double correction1_ = 1.0;
  double correction2_ = 1.0;
  std::size_t offset_ = 0;
};

}  // namespace

MlpModel MlpModel::zeros(std::size_t input_dim, std::size_t hidden, std::vector<std::string> labels) {
  MlpModel m;
  const std::size_t classes = labels.size();
  m.params = {Matrix(input_dim, hidden), std::vector<double>(hidden, 0.0), Matrix(hidden, classes),
              std::vector<double>(classes, 0.0)};
  m.labels = std::move(labels);
  return m;
}

MlpModel MlpModel::glorot(std::size_t input_dim, std::size_t hidden, std::vector<std::string> labels,
                          std::uint64_t seed) {
  MlpModel m = zeros(input_dim, hidden, std::move(labels));
  Rng rng(seed);
  const double limit1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
  for (auto& w : m.params.w1.data()) w = rng.uniform(-limit1, limit1);
  const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden + m.classes()));
  for (auto& w : m.params.w2.data()) w = rng.uniform(-limit2, limit2);
  return m;
}

TrainResult train(const Matrix& features, std::span<const std::size_t> labels,
                  std::vector<std::string> class_labels, const TrainConfig& config) {
  if (features.rows() == 0) throw Error(ErrorKind::ShapeMismatch, "no training rows");
  if (labels.size() != features.rows()) throw Error(ErrorKind::ShapeMismatch, "one label per row required");
  if (class_labels.empty()) throw Error(ErrorKind::ShapeMismatch, "no classes");
  if (!(config.learning_rate > 0.0) || config.batch_size == 0 || config.epochs == 0 || config.hidden == 0) {
    throw Error(ErrorKind::InvalidArgument, "learning rate, batch size, epochs and hidden width must be positive");
  }

  Rng rng(config.seed);
  TrainResult result;
  result.model = MlpModel::glorot(features.cols(), config.hidden, std::move(class_labels), rng.next_u64());
  MlpModel& model = result.model;

  std::vector<std::size_t> order(features.rows());
  std::iota(order.begin(), order.end(), 0);
  check_shapes(model, features, order, labels);

  MlpParameters grad = zero_like(model);
  const std::size_t parameter_count =
      grad.w1.data().size() + grad.b1.size() + grad.w2.data().size() + grad.b2.size();
  Adam adam(config, parameter_count);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const double loss = batch_gradient(model, features, batch, labels, grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::NonFiniteLoss, "loss became non-finite in epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += loss * static_cast<double>(batch.size());
      adam.begin_step();
      adam.update(model.params.w1.data(), grad.w1.data());
      adam.update(model.params.b1, grad.b1);
      adam.update(model.params.w2.data(), grad.w2.data());
      adam.update(model.params.b2, grad.b2);
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

std::vector<double> logits(const MlpModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) throw Error(ErrorKind::ShapeMismatch, "input width differs from model");
  std::vector<double> pre(model.hidden());
  hidden_pre(model, x, pre);
  for (auto& v : pre) v = v > 0.0 ? v : 0.0;
  std::vector<double> out(model.classes());
  output_logits(model, pre, out);
  return out;
}

Prediction predict(const MlpModel& model, std::span<const double> x) {
  Prediction p;
  p.probabilities = logits(model, x);
  softmax_inplace(p.probabilities);
  p.label = static_cast<std::size_t>(
      std::max_element(p.probabilities.begin(), p.probabilities.end()) - p.probabilities.begin());
  return p;
}

LossGradient loss_and_gradient(const MlpModel& model, const Matrix& features,
                               std::span<const std::size_t> labels) {
  std::vector<std::size_t> rows(features.rows());
  std::iota(rows.begin(), rows.end(), 0);
  check_shapes(model, features, rows, labels);
  LossGradient out;
  out.gradient = zero_like(model);
  out.loss = batch_gradient(model, features, rows, labels, out.gradient);
  return out;
}

}  // namespace acorn
