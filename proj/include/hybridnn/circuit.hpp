#pragma once

// Gate tape for the encoding + CVQNN block with reverse-mode gradients.
//
// Every gate G_k and its partials dG_k/dp are materialized. With psi_k the
// state after gate k and g_k the adjoint (dL = 2 Re <g_k | d psi_k>):
//   dL/dp   += 2 Re <g_k | dG_k/dp psi_{k-1}>
//   g_{k-1}  = G_k^dagger g_k
// G_k is only sub-unitary after truncation, so the adjoint uses G^dagger, not
// an inverse, and all intermediate states are kept.

#include <span>
#include <vector>

#include "hybridnn/cvqnn.hpp"
#include "hybridnn/fock.hpp"

namespace hybridnn::cvqnn {

struct CircuitGradient {
  std::vector<double> d_encoding;  // w.r.t. scaled encoding values, 5M
  std::vector<double> d_layers;    // w.r.t. flattened layer parameters, L * layer_param_count
};

class QuantumCircuit {
 public:
  /// Builds the layer gates once; reuse across all samples of a batch.
  QuantumCircuit(int modes, int cutoff, std::span<const QuantumLayerParams> layers);

  int modes() const { return modes_; }
  int cutoff() const { return cutoff_; }
  int layers() const { return num_layers_; }

  /// Forward pass only: homodyne outputs per mode.
  std::vector<double> run(const EncodingInputs& scaled) const;

  /// Forward pass recording everything needed for `backward`.
  class Pass {
   public:
    Pass(Pass&&) noexcept = default;
    Pass& operator=(Pass&&) noexcept = default;
    Pass(const Pass&) = delete;  // ops hold pointers into the jets
    Pass& operator=(const Pass&) = delete;

    const std::vector<double>& outputs() const { return outputs_; }
    double norm_sq() const { return norm_sq_; }
    const fock::FockState& final_state() const { return final_; }
    CircuitGradient backward(std::span<const double> d_outputs) const;

   private:
    friend class QuantumCircuit;
    Pass() = default;
    struct Op {
      fock::Arity arity;
      int mode_a = 0;
      int mode_b = 0;
      const fock::GateJet* jet = nullptr;
      const fock::CMatrix* adjoint = nullptr;
      bool encoding = false;        // params refer to encoding slots
      std::vector<int> param_refs;  // one per partial
    };
    const QuantumCircuit* circuit_ = nullptr;
    std::vector<fock::GateJet> encoding_jets_;
    std::vector<fock::CMatrix> encoding_adjoints_;
    std::vector<Op> ops_;
    std::vector<std::vector<fock::Complex>> states_;  // states_[k] after op k-1; states_[0] vacuum
    fock::FockState final_{1, 2};
    std::vector<double> outputs_;
    double norm_sq_ = 0.0;
  };

  Pass forward(const EncodingInputs& scaled) const;

 private:
  struct LayerOp {
    fock::Arity arity;
    int mode_a = 0;
    int mode_b = 0;
    fock::GateJet jet;
    fock::CMatrix adjoint;
    std::vector<int> param_refs;  // flat index into all layer parameters
  };

  int modes_;
  int cutoff_;
  long layer_size_;
  int num_layers_;
  std::vector<LayerOp> layer_ops_;
};

}  // namespace hybridnn::cvqnn
