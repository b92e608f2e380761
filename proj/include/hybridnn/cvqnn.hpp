#pragma once

// Encoding layer and CV quantum neural-network layer built from fock gates.

#include <span>
#include <utility>
#include <vector>

#include "hybridnn/fock.hpp"

namespace hybridnn::cvqnn {

struct NetworkShape {
  int inputs = 8;
  int modes = 2;
  int layers = 1;
  int outputs = 4;
  int cutoff = 7;

  /// Throws ErrorKind::shape unless all fields are positive (layers may be 0).
  void validate() const;
  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Per-mode slot order of the encoding vector.
enum EncodingSlot : int {
  squeeze_amplitude = 0,
  squeeze_phase = 1,
  displacement_amplitude = 2,
  displacement_phase = 3,
  kerr_strength = 4,
};
inline constexpr int kEncodingSlots = 5;

struct EncodingInputs {
  std::vector<double> values;  // 5 * M, mode-major

  int modes() const { return static_cast<int>(values.size()) / kEncodingSlots; }
  double at(int mode, EncodingSlot slot) const { return values[mode * kEncodingSlots + slot]; }
};

inline bool is_amplitude_slot(int slot) {
  return slot == squeeze_amplitude || slot == displacement_amplitude;
}

/// Trainable parameters of one CVQNN layer U2 S U1, D, Phi.
struct QuantumLayerParams {
  std::vector<double> theta1, phi1;    // U1: M(M-1)/2 beamsplitters, M rotations
  std::vector<double> r_amp, r_phase;  // S
  std::vector<double> theta2, phi2;    // U2
  std::vector<double> d_amp, d_phase;  // D
  std::vector<double> kappa;           // Phi

  static QuantumLayerParams zeros(int modes);
  int modes() const { return static_cast<int>(phi1.size()); }

  /// Throws ErrorKind::shape if the vectors do not describe `modes` qumodes.
  void check(int modes) const;

  /// Fixed field order theta1, phi1, r_amp, r_phase, theta2, phi2, d_amp,
  /// d_phase, kappa.
  std::vector<double> flatten() const;
  static QuantumLayerParams unflatten(std::span<const double> flat, int modes);

  /// Visit every field with (name, vector&) in the flatten order.
  template <typename F>
  void for_each_field(F&& f) {
    f("theta1", theta1); f("phi1", phi1); f("r_amp", r_amp); f("r_phase", r_phase);
    f("theta2", theta2); f("phi2", phi2); f("d_amp", d_amp); f("d_phase", d_phase);
    f("kappa", kappa);
  }
};

struct AmaxCalibration {
  double a_max = 0.0;
  int cutoff = 0;
  double norm_floor = 0.0;
};

/// Beamsplitter count of one interferometer.
inline int beamsplitter_count(int modes) { return modes * (modes - 1) / 2; }

/// M(M-1) + 7M.
long layer_param_count(int modes);

/// 5M(I+1) + L(M(M-1) + 7M) + O(M+1).
long param_count(const NetworkShape& shape);

/// Adjacent mode pairs of the triangular mesh, in application order:
/// pass p = 0..M-2 sweeps (0,1), (1,2), ..., (M-2-p, M-1-p).
std::vector<std::pair<int, int>> mesh_pairs(int modes);

double sigmoid(double y);

/// Amplitude slots -> a_max * sig(y); phase and Kerr slots -> 2 pi * sig(y).
EncodingInputs scale_encoding(const EncodingInputs& raw, double a_max);

/// Per qumode S(r, phi_r), then D(a, phi_d), then Phi(kappa) on the vacuum.
/// Amplitudes must lie in [0, a_max] (ErrorKind::range otherwise).
fock::FockState encode(const fock::FockState& vacuum, const EncodingInputs& scaled, double a_max);

/// Beamsplitter mesh BS(theta_k, 0) over mesh_pairs, then R(phi_m) per mode.
fock::FockState interferometer(const fock::FockState& state, std::span<const double> thetas,
                               std::span<const double> phis);

/// U1, S, U2, D, Phi.
fock::FockState quantum_layer(const fock::FockState& state, const QuantumLayerParams& params);

/// Normalized homodyne <x> per mode.
std::vector<double> measure_all(const fock::FockState& state);

/// Candidate amplitudes in steps of 0.05 from 0; the single-mode probe sets
/// both amplitude slots to a and both phase slots to every point of an
/// 8-point grid on [0, 2 pi). Kerr is diagonal and cannot change the norm, so
/// it is not probed. Returns the last candidate before the first failure.
AmaxCalibration calibrate_amax(int cutoff, double norm_floor);

/// Worst-case probe norm at amplitude a (exposed for tests and the CLI).
double calibration_probe_min_norm(double a, int cutoff);

inline constexpr double kAmaxStep = 0.05;
inline constexpr int kPhaseProbePoints = 8;

}  // namespace hybridnn::cvqnn
