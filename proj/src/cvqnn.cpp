#include "hybridnn/cvqnn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hybridnn/error.hpp"

namespace hybridnn::cvqnn {

using fock::FockState;

void NetworkShape::validate() const {
  if (inputs < 1 || modes < 1 || layers < 0 || outputs < 1) {
    throw Error(ErrorKind::shape, "network dimensions must be positive");
  }
  if (cutoff < 2) throw Error(ErrorKind::invalid_cutoff, "cutoff must be >= 2");
}

QuantumLayerParams QuantumLayerParams::zeros(int modes) {
  QuantumLayerParams p;
  const auto bs = static_cast<std::size_t>(beamsplitter_count(modes));
  const auto m = static_cast<std::size_t>(modes);
  p.theta1.assign(bs, 0.0);
  p.phi1.assign(m, 0.0);
  p.r_amp.assign(m, 0.0);
  p.r_phase.assign(m, 0.0);
  p.theta2.assign(bs, 0.0);
  p.phi2.assign(m, 0.0);
  p.d_amp.assign(m, 0.0);
  p.d_phase.assign(m, 0.0);
  p.kappa.assign(m, 0.0);
  return p;
}

void QuantumLayerParams::check(int modes) const {
  const auto bs = static_cast<std::size_t>(beamsplitter_count(modes));
  const auto m = static_cast<std::size_t>(modes);
  const bool ok = theta1.size() == bs && theta2.size() == bs && phi1.size() == m &&
                  phi2.size() == m && r_amp.size() == m && r_phase.size() == m &&
                  d_amp.size() == m && d_phase.size() == m && kappa.size() == m;
  if (!ok) {
    throw Error(ErrorKind::shape,
                "quantum layer parameters do not match " + std::to_string(modes) + " modes");
  }
}

std::vector<double> QuantumLayerParams::flatten() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(layer_param_count(modes())));
  for (const auto* v : {&theta1, &phi1, &r_amp, &r_phase, &theta2, &phi2, &d_amp, &d_phase, &kappa}) {
    out.insert(out.end(), v->begin(), v->end());
  }
  return out;
}

QuantumLayerParams QuantumLayerParams::unflatten(std::span<const double> flat, int modes) {
  if (static_cast<long>(flat.size()) != layer_param_count(modes)) {
    throw Error(ErrorKind::shape, "flat layer vector has wrong length");
  }
  QuantumLayerParams p = zeros(modes);
  std::size_t pos = 0;
  p.for_each_field([&](const char*, std::vector<double>& v) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), v.size(), v.begin());
    pos += v.size();
  });
  return p;
}

long layer_param_count(int modes) { return long(modes) * (modes - 1) + 7L * modes; }

long param_count(const NetworkShape& shape) {
  shape.validate();
  const long m = shape.modes;
  return 5 * m * (shape.inputs + 1) + shape.layers * layer_param_count(shape.modes) +
         long(shape.outputs) * (m + 1);
}

std::vector<std::pair<int, int>> mesh_pairs(int modes) {
  std::vector<std::pair<int, int>> pairs;
  for (int pass = 0; pass + 1 < modes; ++pass) {
    for (int k = 0; k + 1 < modes - pass; ++k) pairs.emplace_back(k, k + 1);
  }
  return pairs;
}

double sigmoid(double y) {
  if (y >= 0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

EncodingInputs scale_encoding(const EncodingInputs& raw, double a_max) {
  if (!(a_max > 0.0)) throw Error(ErrorKind::range, "a_max must be positive");
  if (raw.values.size() % kEncodingSlots != 0) {
    throw Error(ErrorKind::shape, "encoding length must be a multiple of 5");
  }
  EncodingInputs out = raw;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double s = sigmoid(raw.values[i]);
    out.values[i] = is_amplitude_slot(int(i % kEncodingSlots)) ? a_max * s : 2.0 * std::numbers::pi * s;
  }
  return out;
}

FockState encode(const FockState& vacuum, const EncodingInputs& scaled, double a_max) {
  const int m = vacuum.num_modes();
  const int d = vacuum.cutoff();
  if (scaled.values.size() != static_cast<std::size_t>(kEncodingSlots * m)) {
    throw Error(ErrorKind::shape, "encoding needs 5 values per qumode");
  }
  FockState state = vacuum;
  for (int mode = 0; mode < m; ++mode) {
    const double r = scaled.at(mode, squeeze_amplitude);
    const double a = scaled.at(mode, displacement_amplitude);
    for (double amp : {r, a}) {
      if (!(amp >= 0.0 && amp <= a_max)) {
        throw Error(ErrorKind::range, "encoding amplitude " + std::to_string(amp) +
                                          " outside [0, a_max]");
      }
    }
    state = fock::apply_one_mode(state, fock::squeezing_matrix(r, scaled.at(mode, squeeze_phase), d), mode);
    state = fock::apply_one_mode(
        state, fock::displacement_matrix(a, scaled.at(mode, displacement_phase), d), mode);
    state = fock::apply_one_mode(state, fock::kerr_matrix(scaled.at(mode, kerr_strength), d), mode);
  }
  return state;
}

FockState interferometer(const FockState& state, std::span<const double> thetas,
                         std::span<const double> phis) {
  const int m = state.num_modes();
  if (static_cast<int>(thetas.size()) != beamsplitter_count(m) ||
      static_cast<int>(phis.size()) != m) {
    throw Error(ErrorKind::shape, "interferometer needs M(M-1)/2 angles and M phases");
  }
  const int d = state.cutoff();
  FockState out = state;
  const auto pairs = mesh_pairs(m);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out = fock::apply_two_mode(out, fock::beamsplitter_matrix(thetas[k], 0.0, d), pairs[k].first,
                               pairs[k].second);
  }
  for (int mode = 0; mode < m; ++mode) {
    out = fock::apply_one_mode(out, fock::rotation_matrix(phis[std::size_t(mode)], d), mode);
  }
  return out;
}

FockState quantum_layer(const FockState& state, const QuantumLayerParams& params) {
  const int m = state.num_modes();
  const int d = state.cutoff();
  params.check(m);
  FockState out = interferometer(state, params.theta1, params.phi1);
  for (int mode = 0; mode < m; ++mode) {
    const auto i = std::size_t(mode);
    out = fock::apply_one_mode(out, fock::squeezing_matrix(params.r_amp[i], params.r_phase[i], d), mode);
  }
  out = interferometer(out, params.theta2, params.phi2);
  for (int mode = 0; mode < m; ++mode) {
    const auto i = std::size_t(mode);
    out = fock::apply_one_mode(out, fock::displacement_matrix(params.d_amp[i], params.d_phase[i], d),
                               mode);
  }
  for (int mode = 0; mode < m; ++mode) {
    out = fock::apply_one_mode(out, fock::kerr_matrix(params.kappa[std::size_t(mode)], d), mode);
  }
  return out;
}

std::vector<double> measure_all(const FockState& state) {
  std::vector<double> out(std::size_t(state.num_modes()));
  for (int mode = 0; mode < state.num_modes(); ++mode) {
    out[std::size_t(mode)] = fock::homodyne_x_expectation(state, mode);
  }
  return out;
}

double calibration_probe_min_norm(double a, int cutoff) {
  double worst = 1.0;
  const FockState vac = FockState::vacuum(1, cutoff);
  for (int i = 0; i < kPhaseProbePoints; ++i) {
    const double phi_s = 2.0 * std::numbers::pi * i / kPhaseProbePoints;
    const FockState squeezed = fock::apply_one_mode(vac, fock::squeezing_matrix(a, phi_s, cutoff), 0);
    for (int j = 0; j < kPhaseProbePoints; ++j) {
      const double phi_d = 2.0 * std::numbers::pi * j / kPhaseProbePoints;
      const FockState s =
          fock::apply_one_mode(squeezed, fock::displacement_matrix(a, phi_d, cutoff), 0);
      worst = std::min(worst, fock::state_norm_sq(s));
    }
  }
  return worst;
}

AmaxCalibration calibrate_amax(int cutoff, double norm_floor) {
  if (!(norm_floor > 0.0 && norm_floor < 1.0)) {
    throw Error(ErrorKind::range, "norm_floor must lie in (0, 1)");
  }
  if (cutoff < 2) throw Error(ErrorKind::invalid_cutoff, "cutoff must be >= 2");
  // Past this the probe states are far outside any useful truncation.
  constexpr int kMaxSteps = 400;
  int passed = 0;
  for (int step = 1; step <= kMaxSteps; ++step) {
    if (calibration_probe_min_norm(step * kAmaxStep, cutoff) < norm_floor) break;
    passed = step;
  }
  if (passed == 0) {
    throw Error(ErrorKind::calibration_failure,
                "no amplitude >= " + std::to_string(kAmaxStep) + " keeps norm above floor");
  }
  return {passed * kAmaxStep, cutoff, norm_floor};
}

}  // namespace hybridnn::cvqnn
