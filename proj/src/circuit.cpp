#include "hybridnn/circuit.hpp"

#include <string>

#include "hybridnn/error.hpp"

namespace hybridnn::cvqnn {

using fock::Arity;
using fock::CMatrix;
using fock::Complex;

namespace {

void apply(const CMatrix& m, Arity arity, int a, int b, std::span<const Complex> in,
           std::span<Complex> out, int modes, int cutoff) {
  if (arity == Arity::one_mode) {
    fock::contract_one_mode(in, out, m, modes, cutoff, a);
  } else {
    fock::contract_two_mode(in, out, m, modes, cutoff, a, b);
  }
}

double re_inner(std::span<const Complex> lhs, std::span<const Complex> rhs) {
  double acc = 0.0;
  for (std::size_t i = 0; i < lhs.size(); ++i) acc += std::real(std::conj(lhs[i]) * rhs[i]);
  return acc;
}

}  // namespace

QuantumCircuit::QuantumCircuit(int modes, int cutoff, std::span<const QuantumLayerParams> layers)
    : modes_(modes),
      cutoff_(cutoff),
      layer_size_(layer_param_count(modes)),
      num_layers_(static_cast<int>(layers.size())) {
  if (modes < 1) throw Error(ErrorKind::shape, "need at least one mode");
  if (cutoff < 2) throw Error(ErrorKind::invalid_cutoff, "cutoff must be >= 2");
  const int bs = beamsplitter_count(modes);
  const auto pairs = mesh_pairs(modes);
  // Offsets inside one flattened layer.
  const int o_theta1 = 0, o_phi1 = bs, o_ramp = bs + modes, o_rphase = bs + 2 * modes,
            o_theta2 = bs + 3 * modes, o_phi2 = 2 * bs + 3 * modes, o_damp = 2 * bs + 4 * modes,
            o_dphase = 2 * bs + 5 * modes, o_kappa = 2 * bs + 6 * modes;

  auto push = [&](Arity arity, int a, int b, fock::GateJet jet, std::vector<int> refs) {
    CMatrix adj = jet.gate.adjoint();
    layer_ops_.push_back({arity, a, b, std::move(jet), std::move(adj), std::move(refs)});
  };

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& p = layers[l];
    p.check(modes);
    const int base = static_cast<int>(l * static_cast<std::size_t>(layer_size_));
    auto add_interferometer = [&](const std::vector<double>& thetas, const std::vector<double>& phis,
                                  int o_theta, int o_phi) {
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        push(Arity::two_mode, pairs[k].first, pairs[k].second,
             fock::beamsplitter_jet(thetas[k], 0.0, cutoff), {base + o_theta + int(k)});
      }
      for (int m = 0; m < modes; ++m) {
        push(Arity::one_mode, m, 0, fock::rotation_jet(phis[std::size_t(m)], cutoff),
             {base + o_phi + m});
      }
    };
    add_interferometer(p.theta1, p.phi1, o_theta1, o_phi1);
    for (int m = 0; m < modes; ++m) {
      const auto i = std::size_t(m);
      push(Arity::one_mode, m, 0, fock::squeezing_jet(p.r_amp[i], p.r_phase[i], cutoff),
           {base + o_ramp + m, base + o_rphase + m});
    }
    add_interferometer(p.theta2, p.phi2, o_theta2, o_phi2);
    for (int m = 0; m < modes; ++m) {
      const auto i = std::size_t(m);
      push(Arity::one_mode, m, 0, fock::displacement_jet(p.d_amp[i], p.d_phase[i], cutoff),
           {base + o_damp + m, base + o_dphase + m});
    }
    for (int m = 0; m < modes; ++m) {
      push(Arity::one_mode, m, 0, fock::kerr_jet(p.kappa[std::size_t(m)], cutoff),
           {base + o_kappa + m});
    }
  }
}

QuantumCircuit::Pass QuantumCircuit::forward(const EncodingInputs& scaled) const {
  if (scaled.values.size() != static_cast<std::size_t>(kEncodingSlots * modes_)) {
    throw Error(ErrorKind::shape, "encoding needs 5 values per qumode");
  }
  Pass pass;
  pass.circuit_ = this;
  pass.encoding_jets_.reserve(3 * std::size_t(modes_));
  pass.encoding_adjoints_.reserve(3 * std::size_t(modes_));
  for (int m = 0; m < modes_; ++m) {
    const int s = m * kEncodingSlots;
    auto add = [&](fock::GateJet jet, std::vector<int> refs) {
      pass.encoding_adjoints_.push_back(jet.gate.adjoint());
      pass.encoding_jets_.push_back(std::move(jet));
      pass.ops_.push_back({Arity::one_mode, m, 0, &pass.encoding_jets_.back(),
                           &pass.encoding_adjoints_.back(), true, std::move(refs)});
    };
    add(fock::squeezing_jet(scaled.at(m, squeeze_amplitude), scaled.at(m, squeeze_phase), cutoff_),
        {s + squeeze_amplitude, s + squeeze_phase});
    add(fock::displacement_jet(scaled.at(m, displacement_amplitude),
                               scaled.at(m, displacement_phase), cutoff_),
        {s + displacement_amplitude, s + displacement_phase});
    add(fock::kerr_jet(scaled.at(m, kerr_strength), cutoff_), {s + kerr_strength});
  }
  for (const auto& op : layer_ops_) {
    pass.ops_.push_back({op.arity, op.mode_a, op.mode_b, &op.jet, &op.adjoint, false, op.param_refs});
  }

  fock::FockState vac = fock::FockState::vacuum(modes_, cutoff_);
  const std::size_t n = vac.size();
  pass.states_.assign(pass.ops_.size() + 1, std::vector<Complex>(n));
  std::copy(vac.amplitudes().begin(), vac.amplitudes().end(), pass.states_[0].begin());
  for (std::size_t k = 0; k < pass.ops_.size(); ++k) {
    const auto& op = pass.ops_[k];
    apply(op.jet->gate, op.arity, op.mode_a, op.mode_b, pass.states_[k], pass.states_[k + 1], modes_,
          cutoff_);
  }
  pass.final_ = fock::FockState(modes_, cutoff_, pass.states_.back());
  pass.norm_sq_ = fock::state_norm_sq(pass.final_);
  if (!(pass.norm_sq_ > 0.0)) throw Error(ErrorKind::degenerate_state, "circuit output has zero norm");
  pass.outputs_ = measure_all(pass.final_);
  return pass;
}

std::vector<double> QuantumCircuit::run(const EncodingInputs& scaled) const {
  return forward(scaled).outputs();
}

CircuitGradient QuantumCircuit::Pass::backward(std::span<const double> d_outputs) const {
  const int modes = circuit_->modes_;
  const int cutoff = circuit_->cutoff_;
  if (static_cast<int>(d_outputs.size()) != modes) {
    throw Error(ErrorKind::shape, "need one output adjoint per mode");
  }
  CircuitGradient grad;
  grad.d_encoding.assign(std::size_t(kEncodingSlots * modes), 0.0);
  grad.d_layers.assign(std::size_t(circuit_->layer_size_) * std::size_t(circuit_->num_layers_), 0.0);

  const auto& psi = states_.back();
  const std::size_t n = psi.size();
  // y_m = <psi|X_m|psi>/<psi|psi>  =>  g = sum_m dL/dy_m (X_m - y_m) psi / <psi|psi>
  std::vector<Complex> g(n, Complex{0.0, 0.0});
  std::vector<Complex> tmp(n);
  for (int m = 0; m < modes; ++m) {
    const double w = d_outputs[std::size_t(m)];
    if (w == 0.0) continue;
    fock::apply_position(psi, tmp, modes, cutoff, m);
    const double y = outputs_[std::size_t(m)];
    for (std::size_t i = 0; i < n; ++i) g[i] += w * (tmp[i] - y * psi[i]) / norm_sq_;
  }

  std::vector<Complex> g_prev(n);
  for (std::size_t k = ops_.size(); k-- > 0;) {
    const auto& op = ops_[k];
    for (std::size_t p = 0; p < op.param_refs.size(); ++p) {
      apply(op.jet->partials[p], op.arity, op.mode_a, op.mode_b, states_[k], tmp, modes, cutoff);
      const double contrib = 2.0 * re_inner(g, tmp);
      auto& target = op.encoding ? grad.d_encoding : grad.d_layers;
      target[std::size_t(op.param_refs[p])] += contrib;
    }
    if (k == 0) break;
    apply(*op.adjoint, op.arity, op.mode_a, op.mode_b, g, g_prev, modes, cutoff);
    g.swap(g_prev);
  }
  return grad;
}

}  // namespace hybridnn::cvqnn
