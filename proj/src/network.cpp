#include "hybridnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include "hybridnn/error.hpp"

namespace hybridnn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void append_dense(const DenseLayer& layer, Eigen::VectorXd& out, Eigen::Index& pos) {
  for (int r = 0; r < layer.out_dim; ++r) {
    for (int c = 0; c < layer.in_dim; ++c) out[pos++] = layer.weights(r, c);
  }
  for (int r = 0; r < layer.out_dim; ++r) out[pos++] = layer.bias[r];
}

void read_dense(DenseLayer& layer, const Eigen::VectorXd& in, Eigen::Index& pos) {
  for (int r = 0; r < layer.out_dim; ++r) {
    for (int c = 0; c < layer.in_dim; ++c) layer.weights(r, c) = in[pos++];
  }
  for (int r = 0; r < layer.out_dim; ++r) layer.bias[r] = in[pos++];
}

void append_info(std::vector<ParamInfo>& out, long count, Domain d, GateGroup g) {
  out.insert(out.end(), static_cast<std::size_t>(count), ParamInfo{d, g});
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
  }
  return "none";
}

Activation activation_from_string(const std::string& name) {
  if (name == "none") return Activation::none;
  if (name == "relu") return Activation::relu;
  if (name == "softmax") return Activation::softmax;
  throw Error(ErrorKind::configuration, "unknown activation '" + name + "'");
}

const char* to_string(Domain d) {
  switch (d) {
    case Domain::classical: return "classical";
    case Domain::phase: return "phase";
    case Domain::amplitude: return "amplitude";
  }
  return "classical";
}

const char* to_string(GateGroup g) {
  switch (g) {
    case GateGroup::classical: return "classical";
    case GateGroup::interferometer: return "interferometer";
    case GateGroup::squeezing: return "squeezing";
    case GateGroup::displacement: return "displacement";
    case GateGroup::kerr: return "kerr";
  }
  return "classical";
}

DenseLayer DenseLayer::zeros(int in_dim, int out_dim, Activation activation) {
  if (in_dim < 1 || out_dim < 1) throw Error(ErrorKind::shape, "dense layer dims must be positive");
  return {in_dim, out_dim, Eigen::MatrixXd::Zero(out_dim, in_dim), Eigen::VectorXd::Zero(out_dim),
          activation};
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp();
  return e / e.sum();
}

Eigen::VectorXd dense_forward(const DenseLayer& layer, const Eigen::VectorXd& input) {
  if (input.size() != layer.in_dim) {
    throw Error(ErrorKind::shape, "dense input has length " + std::to_string(input.size()) +
                                      ", expected " + std::to_string(layer.in_dim));
  }
  Eigen::VectorXd z = layer.weights * input + layer.bias;
  switch (layer.activation) {
    case Activation::none: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::softmax: return softmax(z);
  }
  return z;
}

DenseLayer clip_weights(DenseLayer layer) {
  layer.weights = layer.weights.cwiseMax(-1.0).cwiseMin(1.0);
  layer.bias = layer.bias.cwiseMax(-1.0).cwiseMin(1.0);
  return layer;
}

void init_uniform(DenseLayer& layer, Rng& rng) {
  const double s = std::min(1.0, std::sqrt(6.0 / double(layer.in_dim + layer.out_dim)));
  for (int r = 0; r < layer.out_dim; ++r) {
    for (int c = 0; c < layer.in_dim; ++c) layer.weights(r, c) = rng.uniform(-s, s);
  }
  for (int r = 0; r < layer.out_dim; ++r) layer.bias[r] = rng.uniform(-s, s);
  layer = clip_weights(std::move(layer));
}

std::vector<int> ClassicalNetwork::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(layers.front().in_dim);
  for (const auto& l : layers) w.push_back(l.out_dim);
  return w;
}

long ClassicalNetwork::param_count() const {
  long n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

void ClassicalNetwork::check() const {
  if (layers.empty()) throw Error(ErrorKind::shape, "classical network has no layers");
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].in_dim != layers[i - 1].out_dim) {
      throw Error(ErrorKind::shape, "layer " + std::to_string(i) + " does not chain");
    }
  }
  if (layers.back().activation != Activation::softmax) {
    throw Error(ErrorKind::shape, "final layer must be softmax");
  }
}

HybridNetwork HybridNetwork::zeros(const cvqnn::NetworkShape& shape, double a_max) {
  shape.validate();
  if (!(a_max > 0.0)) throw Error(ErrorKind::range, "a_max must be positive");
  HybridNetwork n;
  n.shape = shape;
  n.a_max = a_max;
  n.input = DenseLayer::zeros(shape.inputs, cvqnn::kEncodingSlots * shape.modes, Activation::none);
  n.layers.assign(std::size_t(shape.layers), cvqnn::QuantumLayerParams::zeros(shape.modes));
  n.output = DenseLayer::zeros(shape.modes, shape.outputs, Activation::softmax);
  return n;
}

HybridNetwork HybridNetwork::random(const cvqnn::NetworkShape& shape, double a_max, Rng& rng) {
  HybridNetwork n = zeros(shape, a_max);
  init_uniform(n.input, rng);
  for (auto& layer : n.layers) {
    layer.for_each_field([&](const char* name, std::vector<double>& v) {
      const std::string field = name;
      const bool amplitude = field == "r_amp" || field == "d_amp";
      for (double& x : v) x = amplitude ? rng.uniform(0.0, a_max) : rng.uniform(0.0, kTwoPi);
    });
  }
  init_uniform(n.output, rng);
  return n;
}

long HybridNetwork::param_count() const {
  return input.param_count() + long(layers.size()) * cvqnn::layer_param_count(shape.modes) +
         output.param_count();
}

ClassicalNetwork build_classical_twin(const cvqnn::NetworkShape& shape) {
  shape.validate();
  const int m = shape.modes;
  const int o = shape.outputs;
  const long quantum_layer = cvqnn::layer_param_count(m);
  ClassicalNetwork net;
  int prev = cvqnn::kEncodingSlots * m;
  net.layers.push_back(DenseLayer::zeros(shape.inputs, prev, Activation::relu));
  long twin_total = net.layers.back().param_count();
  long hybrid_total = twin_total;
  for (int l = 0; l < shape.layers; ++l) {
    const bool last = l + 1 == shape.layers;
    const long target = hybrid_total + quantum_layer + (last ? long(o) * (m + 1) : 0);
    int best_w = 1;
    long best_gap = -1;
    // The gap grows without bound past target / (prev + 1) + 1.
    const int limit = int(target / (prev + 1)) + 2;
    for (int w = 1; w <= limit; ++w) {
      const long total = twin_total + long(prev + 1) * w + (last ? long(w + 1) * o : 0);
      const long gap = std::labs(total - target);
      if (best_gap < 0 || gap <= best_gap) {
        best_gap = gap;
        best_w = w;
      }
    }
    net.layers.push_back(DenseLayer::zeros(prev, best_w, Activation::relu));
    twin_total += long(prev + 1) * best_w;
    hybrid_total += quantum_layer;
    prev = best_w;
  }
  net.layers.push_back(DenseLayer::zeros(prev, o, Activation::softmax));
  return net;
}

ClassicalNetwork random_classical_twin(const cvqnn::NetworkShape& shape, Rng& rng) {
  ClassicalNetwork net = build_classical_twin(shape);
  for (auto& l : net.layers) init_uniform(l, rng);
  return net;
}

const char* kind_name(const Network& n) { return is_hybrid(n) ? "hybrid" : "classical"; }

long param_count(const Network& n) {
  return std::visit([](const auto& net) { return net.param_count(); }, n);
}

Eigen::VectorXd flat_params(const Network& n) {
  Eigen::VectorXd out(param_count(n));
  Eigen::Index pos = 0;
  if (const auto* h = std::get_if<HybridNetwork>(&n)) {
    append_dense(h->input, out, pos);
    for (const auto& layer : h->layers) {
      for (double v : layer.flatten()) out[pos++] = v;
    }
    append_dense(h->output, out, pos);
  } else {
    for (const auto& l : std::get<ClassicalNetwork>(n).layers) append_dense(l, out, pos);
  }
  return out;
}

void set_flat_params(Network& n, const Eigen::VectorXd& flat) {
  if (flat.size() != param_count(n)) {
    throw Error(ErrorKind::shape, "flat parameter vector has length " + std::to_string(flat.size()) +
                                      ", expected " + std::to_string(param_count(n)));
  }
  Eigen::Index pos = 0;
  if (auto* h = std::get_if<HybridNetwork>(&n)) {
    read_dense(h->input, flat, pos);
    const long per = cvqnn::layer_param_count(h->shape.modes);
    for (auto& layer : h->layers) {
      layer = cvqnn::QuantumLayerParams::unflatten(
          std::span<const double>(flat.data() + pos, std::size_t(per)), h->shape.modes);
      pos += per;
    }
    read_dense(h->output, flat, pos);
  } else {
    for (auto& l : std::get<ClassicalNetwork>(n).layers) read_dense(l, flat, pos);
  }
}

std::vector<ParamInfo> parameter_layout(const Network& n) {
  std::vector<ParamInfo> out;
  if (const auto* h = std::get_if<HybridNetwork>(&n)) {
    append_info(out, h->input.param_count(), Domain::classical, GateGroup::classical);
    const long bs = cvqnn::beamsplitter_count(h->shape.modes);
    const long m = h->shape.modes;
    for (std::size_t l = 0; l < h->layers.size(); ++l) {
      append_info(out, bs + m, Domain::phase, GateGroup::interferometer);  // theta1, phi1
      append_info(out, m, Domain::amplitude, GateGroup::squeezing);
      append_info(out, m, Domain::phase, GateGroup::squeezing);
      append_info(out, bs + m, Domain::phase, GateGroup::interferometer);  // theta2, phi2
      append_info(out, m, Domain::amplitude, GateGroup::displacement);
      append_info(out, m, Domain::phase, GateGroup::displacement);
      append_info(out, m, Domain::phase, GateGroup::kerr);
    }
    append_info(out, h->output.param_count(), Domain::classical, GateGroup::classical);
  } else {
    append_info(out, param_count(n), Domain::classical, GateGroup::classical);
  }
  return out;
}

std::pair<double, double> domain_range(Domain d, double a_max) {
  switch (d) {
    case Domain::classical: return {-1.0, 1.0};
    case Domain::phase: return {0.0, kTwoPi};
    case Domain::amplitude: return {0.0, a_max};
  }
  return {-1.0, 1.0};
}

double amplitude_bound(const Network& n) {
  if (const auto* h = std::get_if<HybridNetwork>(&n)) return h->a_max;
  return 0.0;
}

void project_params(Eigen::VectorXd& flat, std::span<const ParamInfo> layout, double a_max) {
  if (static_cast<std::size_t>(flat.size()) != layout.size()) {
    throw Error(ErrorKind::shape, "layout does not match parameter vector");
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    double& x = flat[Eigen::Index(i)];
    switch (layout[i].domain) {
      case Domain::classical: x = std::clamp(x, -1.0, 1.0); break;
      case Domain::amplitude: x = std::clamp(x, 0.0, a_max); break;
      case Domain::phase:
        x = std::fmod(x, kTwoPi);
        if (x < 0.0) x += kTwoPi;
        if (x >= kTwoPi) x = 0.0;
        break;
    }
  }
}

cvqnn::EncodingInputs hybrid_encoding(const HybridNetwork& n, const Eigen::VectorXd& features) {
  const Eigen::VectorXd y = dense_forward(n.input, features);
  return {std::vector<double>(y.data(), y.data() + y.size())};
}

Evaluator::Evaluator(const Network& network) : network_(&network) {
  if (const auto* h = std::get_if<HybridNetwork>(&network)) {
    circuit_.emplace(h->shape.modes, h->shape.cutoff, h->layers);
  } else {
    std::get<ClassicalNetwork>(network).check();
  }
}

Eigen::VectorXd Evaluator::operator()(const Eigen::VectorXd& features) const {
  if (const auto* h = std::get_if<HybridNetwork>(network_)) {
    const auto scaled = cvqnn::scale_encoding(hybrid_encoding(*h, features), h->a_max);
    const auto y = circuit_->run(scaled);
    return dense_forward(h->output, Eigen::Map<const Eigen::VectorXd>(y.data(), Eigen::Index(y.size())));
  }
  Eigen::VectorXd x = features;
  for (const auto& l : std::get<ClassicalNetwork>(*network_).layers) x = dense_forward(l, x);
  return x;
}

Eigen::VectorXd predict(const Network& n, const Eigen::VectorXd& features) {
  return Evaluator(n)(features);
}

}  // namespace hybridnn
