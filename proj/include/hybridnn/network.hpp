#pragma once

// Classical dense layers, the classical twin, the hybrid network, and the
// flat-parameter views used by the optimizer and the noise model.

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hybridnn/circuit.hpp"
#include "hybridnn/cvqnn.hpp"
#include "hybridnn/rng.hpp"

namespace hybridnn {

enum class Activation { none, relu, softmax };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  int in_dim = 0;
  int out_dim = 0;
  Eigen::MatrixXd weights;  // out_dim x in_dim
  Eigen::VectorXd bias;
  Activation activation = Activation::none;

  static DenseLayer zeros(int in_dim, int out_dim, Activation activation);
  long param_count() const { return long(out_dim) * (in_dim + 1); }
};

/// activation(W x + b).
Eigen::VectorXd dense_forward(const DenseLayer& layer, const Eigen::VectorXd& input);

/// Elementwise clamp of weights and bias to [-1, 1].
DenseLayer clip_weights(DenseLayer layer);

/// Uniform on [-s, s], s = min(1, sqrt(6 / (fan_in + fan_out))), then clipped.
void init_uniform(DenseLayer& layer, Rng& rng);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct ClassicalNetwork {
  std::vector<DenseLayer> layers;

  /// Input width followed by every layer's output width.
  std::vector<int> widths() const;
  long param_count() const;
  /// Throws ErrorKind::shape if dims do not chain or the head is not softmax.
  void check() const;
};

struct HybridNetwork {
  cvqnn::NetworkShape shape;
  double a_max = 0.0;
  DenseLayer input;   // I -> 5M, no activation
  std::vector<cvqnn::QuantumLayerParams> layers;
  DenseLayer output;  // M -> O, softmax

  static HybridNetwork zeros(const cvqnn::NetworkShape& shape, double a_max);
  /// Classical layers as init_uniform; amplitudes uniform on [0, a_max];
  /// phases, angles and Kerr strengths uniform on [0, 2 pi].
  static HybridNetwork random(const cvqnn::NetworkShape& shape, double a_max, Rng& rng);

  long param_count() const;
};

/// Input layer I -> 5M, then one hidden ReLU layer per quantum layer, then a
/// softmax head. Hidden widths are chosen layer by layer to keep the running
/// parameter total closest to the hybrid's running total (the last hidden
/// layer also counts the head it feeds); ties go to the larger width.
/// Weights are zero; call init_uniform on each layer to randomize.
ClassicalNetwork build_classical_twin(const cvqnn::NetworkShape& shape);

ClassicalNetwork random_classical_twin(const cvqnn::NetworkShape& shape, Rng& rng);

using Network = std::variant<HybridNetwork, ClassicalNetwork>;

enum class Domain { classical, phase, amplitude };
enum class GateGroup { classical, interferometer, squeezing, displacement, kerr };

const char* to_string(Domain d);
const char* to_string(GateGroup g);

struct ParamInfo {
  Domain domain;
  GateGroup group;
};

inline bool is_hybrid(const Network& n) { return std::holds_alternative<HybridNetwork>(n); }
const char* kind_name(const Network& n);

long param_count(const Network& n);

/// Flat parameter vector. Classical layers contribute W (row-major) then b;
/// the hybrid layout is input layer, each quantum layer in
/// QuantumLayerParams::flatten order, output layer.
Eigen::VectorXd flat_params(const Network& n);
void set_flat_params(Network& n, const Eigen::VectorXd& flat);

/// One entry per flat parameter.
std::vector<ParamInfo> parameter_layout(const Network& n);

/// [w_min, w_max] for a domain; a_max is used for amplitudes.
std::pair<double, double> domain_range(Domain d, double a_max);

/// a_max of a hybrid network, 0 for classical.
double amplitude_bound(const Network& n);

/// Project each parameter into its domain: classical clamp to [-1, 1],
/// phases wrapped into [0, 2 pi), amplitudes clamped to [0, a_max].
void project_params(Eigen::VectorXd& flat, std::span<const ParamInfo> layout, double a_max);

/// Class probabilities for one sample.
Eigen::VectorXd predict(const Network& n, const Eigen::VectorXd& features);

/// Raw encoding vector (input layer output) of a hybrid network.
cvqnn::EncodingInputs hybrid_encoding(const HybridNetwork& n, const Eigen::VectorXd& features);

}  // namespace hybridnn

namespace hybridnn {

/// Forward evaluator that builds the quantum layer gates once. Holds a
/// reference to the network; the network must outlive it and stay unchanged.
class Evaluator {
 public:
  explicit Evaluator(const Network& network);
  Eigen::VectorXd operator()(const Eigen::VectorXd& features) const;

 private:
  const Network* network_;
  std::optional<cvqnn::QuantumCircuit> circuit_;
};

}  // namespace hybridnn
