#include "hybridnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "hybridnn/circuit.hpp"
#include "hybridnn/error.hpp"

namespace hybridnn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// dL/dz for L = -log(p_c + eps), p = softmax(z).
Eigen::VectorXd softmax_ce_backward(const Eigen::VectorXd& p, int label) {
  const double pc = p[label];
  const double g = -1.0 / (pc + kLogEpsilon);
  Eigen::VectorXd dz = -pc * p;
  dz[label] += pc;
  return g * dz;
}

void accumulate_dense(const Eigen::VectorXd& dz, const Eigen::VectorXd& input, Eigen::VectorXd& grad,
                      Eigen::Index offset) {
  const Eigen::Index out = dz.size();
  const Eigen::Index in = input.size();
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) grad[offset + r * in + c] += dz[r] * input[c];
  }
  for (Eigen::Index r = 0; r < out; ++r) grad[offset + out * in + r] += dz[r];
}

void check_label(int label, Eigen::Index classes) {
  if (label < 0 || label >= classes) {
    throw Error(ErrorKind::shape, "label " + std::to_string(label) + " outside output range");
  }
}

double hybrid_sample(const HybridNetwork& net, const cvqnn::QuantumCircuit& circuit,
                     const Eigen::VectorXd& x, int label, Eigen::VectorXd& grad) {
  const Eigen::VectorXd y_raw = dense_forward(net.input, x);
  const cvqnn::EncodingInputs raw{std::vector<double>(y_raw.data(), y_raw.data() + y_raw.size())};
  const auto scaled = cvqnn::scale_encoding(raw, net.a_max);
  const auto pass = circuit.forward(scaled);
  const auto& q_vec = pass.outputs();
  const Eigen::Map<const Eigen::VectorXd> q(q_vec.data(), Eigen::Index(q_vec.size()));
  const Eigen::VectorXd p = dense_forward(net.output, q);
  check_label(label, p.size());
  const double loss = -std::log(p[label] + kLogEpsilon);

  const Eigen::Index in_count = net.input.param_count();
  const Eigen::Index q_count = Eigen::Index(net.layers.size()) * cvqnn::layer_param_count(net.shape.modes);
  const Eigen::VectorXd dz = softmax_ce_backward(p, label);
  accumulate_dense(dz, q, grad, in_count + q_count);
  const Eigen::VectorXd dq = net.output.weights.transpose() * dz;

  const auto cg = pass.backward(std::span<const double>(dq.data(), std::size_t(dq.size())));
  for (Eigen::Index i = 0; i < q_count; ++i) grad[in_count + i] += cg.d_layers[std::size_t(i)];

  Eigen::VectorXd d_raw(y_raw.size());
  for (Eigen::Index i = 0; i < y_raw.size(); ++i) {
    const double s = cvqnn::sigmoid(y_raw[i]);
    const double scale = cvqnn::is_amplitude_slot(int(i % cvqnn::kEncodingSlots)) ? net.a_max : kTwoPi;
    d_raw[i] = cg.d_encoding[std::size_t(i)] * scale * s * (1.0 - s);
  }
  accumulate_dense(d_raw, x, grad, 0);
  return loss;
}

double classical_sample(const ClassicalNetwork& net, const Eigen::VectorXd& x, int label,
                        Eigen::VectorXd& grad, std::span<const Eigen::Index> offsets) {
  std::vector<Eigen::VectorXd> acts{x};
  std::vector<Eigen::VectorXd> pre;
  for (const auto& l : net.layers) {
    pre.push_back(l.weights * acts.back() + l.bias);
    acts.push_back(dense_forward(l, acts.back()));
  }
  const Eigen::VectorXd& p = acts.back();
  check_label(label, p.size());
  const double loss = -std::log(p[label] + kLogEpsilon);
  Eigen::VectorXd dz = softmax_ce_backward(p, label);
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    accumulate_dense(dz, acts[k], grad, offsets[k]);
    if (k == 0) break;
    Eigen::VectorXd da = net.layers[k].weights.transpose() * dz;
    const auto& prev = net.layers[k - 1];
    if (prev.activation == Activation::relu) {
      da = (pre[k - 1].array() > 0.0).select(da, 0.0);
    } else if (prev.activation == Activation::softmax) {
      throw Error(ErrorKind::shape, "softmax is only supported on the final layer");
    }
    dz = std::move(da);
  }
  return loss;
}

void raise_non_finite(const Network& network, double loss) {
  const Eigen::VectorXd flat = flat_params(network);
  std::string where = "no non-finite parameter";
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    if (!std::isfinite(flat[i])) {
      where = "parameter " + std::to_string(i) + " = " + std::to_string(flat[i]);
      break;
    }
  }
  throw Error(ErrorKind::numerical, "non-finite loss " + std::to_string(loss) + " (" + where + ")");
}

}  // namespace

double cross_entropy_loss(const Eigen::VectorXd& probabilities, const Eigen::VectorXd& one_hot) {
  if (probabilities.size() != one_hot.size()) {
    throw Error(ErrorKind::shape, "probabilities and labels differ in length");
  }
  return -(one_hot.array() * (probabilities.array() + kLogEpsilon).log()).sum();
}

double cross_entropy_loss(const Eigen::VectorXd& probabilities, int label) {
  check_label(label, probabilities.size());
  return -std::log(probabilities[label] + kLogEpsilon);
}

double l1_amplitude_penalty(const Network& network, double lambda) {
  const auto* h = std::get_if<HybridNetwork>(&network);
  if (!h) return 0.0;
  double s = 0.0;
  for (const auto& layer : h->layers) {
    for (double a : layer.r_amp) s += std::abs(a);
    for (double a : layer.d_amp) s += std::abs(a);
  }
  return lambda * s;
}

LossGradient loss_and_gradient(const Network& network, const SampleSet& data,
                               std::span<const std::size_t> batch, double l1_lambda) {
  if (batch.empty()) throw Error(ErrorKind::shape, "empty batch");
  LossGradient out;
  out.gradient = Eigen::VectorXd::Zero(param_count(network));
  double total = 0.0;
  if (const auto* h = std::get_if<HybridNetwork>(&network)) {
    const cvqnn::QuantumCircuit circuit(h->shape.modes, h->shape.cutoff, h->layers);
    for (std::size_t i : batch) total += hybrid_sample(*h, circuit, data.sample(i), data.labels[i], out.gradient);
  } else {
    const auto& c = std::get<ClassicalNetwork>(network);
    c.check();
    std::vector<Eigen::Index> offsets;
    Eigen::Index pos = 0;
    for (const auto& l : c.layers) {
      offsets.push_back(pos);
      pos += l.param_count();
    }
    for (std::size_t i : batch) total += classical_sample(c, data.sample(i), data.labels[i], out.gradient, offsets);
  }
  const double n = double(batch.size());
  out.gradient /= n;
  out.loss = total / n + l1_amplitude_penalty(network, l1_lambda);

  if (const auto* h = std::get_if<HybridNetwork>(&network); h && l1_lambda != 0.0) {
    const auto layout = parameter_layout(network);
    const Eigen::VectorXd flat = flat_params(network);
    for (std::size_t i = 0; i < layout.size(); ++i) {
      if (layout[i].domain == Domain::amplitude) {
        const double a = flat[Eigen::Index(i)];
        out.gradient[Eigen::Index(i)] += l1_lambda * double((a > 0.0) - (a < 0.0));
      }
    }
  }
  if (!std::isfinite(out.loss)) raise_non_finite(network, out.loss);
  return out;
}

double batch_objective(const Network& network, const SampleSet& data,
                       std::span<const std::size_t> batch, double l1_lambda) {
  if (batch.empty()) throw Error(ErrorKind::shape, "empty batch");
  const Evaluator eval(network);
  double total = 0.0;
  for (std::size_t i : batch) total += cross_entropy_loss(eval(data.sample(i)), data.labels[i]);
  return total / double(batch.size()) + l1_amplitude_penalty(network, l1_lambda);
}

std::vector<GradientReport> gradient_check(const Network& network, const SampleSet& data,
                                           std::span<const std::size_t> batch, double l1_lambda,
                                           double step) {
  const LossGradient lg = loss_and_gradient(network, data, batch, l1_lambda);
  const Eigen::VectorXd base = flat_params(network);
  Network probe = network;
  std::vector<GradientReport> out;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    Eigen::VectorXd p = base;
    p[i] = base[i] + step;
    set_flat_params(probe, p);
    const double up = batch_objective(probe, data, batch, l1_lambda);
    p[i] = base[i] - step;
    set_flat_params(probe, p);
    const double down = batch_objective(probe, data, batch, l1_lambda);
    const double fd = (up - down) / (2.0 * step);
    const double a = lg.gradient[i];
    out.push_back({long(i), a, fd, std::abs(a - fd) / std::max(std::abs(fd), 1e-8)});
  }
  return out;
}

AdamState AdamState::zeros(Eigen::Index n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               const AdamConfig& config, std::span<const ParamInfo> layout, double a_max) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorKind::shape, "adam state does not match parameter vector");
  }
  ++state.t;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grads;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(config.beta1, double(state.t));
  const double c2 = 1.0 - std::pow(config.beta2, double(state.t));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
  project_params(params, layout, a_max);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::configuration, "field 'learning_rate': must be positive");
  if (batch_size < 1) throw Error(ErrorKind::configuration, "field 'batch_size': must be positive");
  if (epochs < 1) throw Error(ErrorKind::configuration, "field 'epochs': must be positive");
  if (l1_amplitude_weight < 0.0) throw Error(ErrorKind::configuration, "field 'l1_amplitude_weight': must be >= 0");
  if (cutoff < 2) throw Error(ErrorKind::configuration, "field 'cutoff': must be >= 2");
}

int updates_per_epoch(std::size_t train_size, int batch_size) {
  return int((train_size + std::size_t(batch_size) - 1) / std::size_t(batch_size));
}

int predicted_class(const Eigen::VectorXd& probabilities) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < probabilities.size(); ++k) {
    if (probabilities[k] > probabilities[best]) best = k;
  }
  return int(best);
}

double accuracy(const Network& network, const SampleSet& samples) {
  if (samples.size() == 0) throw Error(ErrorKind::shape, "accuracy of an empty set");
  const Evaluator eval(network);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (predicted_class(eval(samples.sample(i))) == samples.labels[i]) ++correct;
  }
  return double(correct) / double(samples.size());
}

TrainResult train(Network network, const Dataset& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const SampleSet train_set = dataset.train();
  const SampleSet val_set = dataset.validation();
  const auto layout = parameter_layout(network);
  const double a_max = amplitude_bound(network);
  const AdamConfig adam{config.learning_rate};

  TrainResult result{network, network, 0, -1.0, {}, updates_per_epoch(train_set.size(), config.batch_size), 0,
                     AdamState::zeros(param_count(network))};
  Eigen::VectorXd params = flat_params(network);
  Rng shuffle_rng(config.seed, "shuffle");
  std::vector<std::size_t> order(train_set.size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + std::size_t(config.batch_size));
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      LossGradient lg;
      try {
        lg = loss_and_gradient(network, train_set, batch, config.l1_amplitude_weight);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::numerical && e.kind() != ErrorKind::degenerate_state) throw;
        throw Error(e.kind(), "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches) +
                                  ": " + e.what());
      }
      adam_step(params, lg.gradient, result.optimizer, adam, layout, a_max);
      set_flat_params(network, params);
      loss_sum += lg.loss;
      ++batches;
      ++result.total_updates;
    }
    EpochRecord rec{epoch, accuracy(network, train_set), accuracy(network, val_set), loss_sum / batches};
    result.history.push_back(rec);
    if (rec.validation_accuracy > result.best_validation_accuracy) {
      result.best_validation_accuracy = rec.validation_accuracy;
      result.best_epoch = epoch;
      result.best_network = network;
    }
    if (on_epoch) on_epoch(rec);
  }
  result.final_network = std::move(network);
  return result;
}

}  // namespace hybridnn
