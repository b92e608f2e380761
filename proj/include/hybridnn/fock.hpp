#pragma once

// Truncated Fock-basis states, CV gate matrices and homodyne readout.
//
// Conventions: hbar = 2, x = a + a^dagger, so the vacuum has Var(x) = 1 and a
// coherent state |alpha> has <x> = 2 Re(alpha).
//
// Gate matrices are the projection of the exact (infinite-dimensional)
// operator onto the first D Fock levels, P U P. Displacement and squeezing are
// filled by their ladder-operator recurrences, the beamsplitter by exact
// exponentials of its photon-number blocks. Unlike exp(P G P), the projection
// loses norm when the state leaks past the cutoff, which is what the a_max
// calibration measures.

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hybridnn::fock {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

struct QuadratureConvention {
  static constexpr double hbar = 2.0;
};

enum class Arity { one_mode, two_mode };

class GateMatrix {
 public:
  GateMatrix(Arity arity, CMatrix entries);

  Arity arity() const noexcept { return arity_; }
  Eigen::Index dim() const noexcept { return entries_.rows(); }
  const CMatrix& entries() const noexcept { return entries_; }

 private:
  Arity arity_;
  CMatrix entries_;
};

/// Pure state of `num_modes` qumodes; amplitudes indexed row-major by the
/// photon numbers (n_0, ..., n_{M-1}), mode 0 most significant.
class FockState {
 public:
  FockState(int num_modes, int cutoff);  // zero amplitudes
  FockState(int num_modes, int cutoff, std::vector<Complex> amplitudes);

  static FockState vacuum(int num_modes, int cutoff);
  /// Product of number states |n_0, ..., n_{M-1}>.
  static FockState number_state(std::span<const int> photons, int cutoff);

  int num_modes() const noexcept { return num_modes_; }
  int cutoff() const noexcept { return cutoff_; }
  std::size_t size() const noexcept { return amplitudes_.size(); }

  std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  std::span<Complex> amplitudes() noexcept { return amplitudes_; }

  std::size_t index_of(std::span<const int> photons) const;
  Complex amplitude(std::span<const int> photons) const { return amplitudes_[index_of(photons)]; }

  /// Stride of `mode` in the flat amplitude array.
  std::size_t stride(int mode) const;

 private:
  int num_modes_;
  int cutoff_;
  std::vector<Complex> amplitudes_;
};

/// Annihilation and creation matrices, a[n-1, n] = sqrt(n).
std::pair<CMatrix, CMatrix> ladder_matrices(int cutoff);

/// Number operator diag(0, ..., D-1).
Eigen::VectorXd number_diagonal(int cutoff);

/// D(alpha) = exp(alpha a^dag - alpha* a), alpha = amplitude * e^{i phase}.
GateMatrix displacement_matrix(double amplitude, double phase, int cutoff);
/// S(z) = exp((z* a^2 - z a^dag^2) / 2), z = r e^{i phase}.
GateMatrix squeezing_matrix(double r, double phase, int cutoff);
/// BS(theta, phi) = exp(theta (e^{i phi} a^dag b - e^{-i phi} a b^dag)).
/// Row/column index is n_a * D + n_b.
GateMatrix beamsplitter_matrix(double theta, double phase, int cutoff);
/// R(phi) = diag(e^{i phi n}).
GateMatrix rotation_matrix(double phi, int cutoff);
/// K(kappa) = diag(e^{i kappa n^2}).
GateMatrix kerr_matrix(double kappa, int cutoff);

/// A gate together with its partial derivatives in its real parameters.
struct GateJet {
  Arity arity = Arity::one_mode;
  CMatrix gate;
  std::vector<CMatrix> partials;
};

/// Partials in (amplitude, phase).
GateJet displacement_jet(double amplitude, double phase, int cutoff);
/// Partials in (r, phase).
GateJet squeezing_jet(double r, double phase, int cutoff);
/// Partial in theta only (the phase is a fixed mesh constant).
GateJet beamsplitter_jet(double theta, double phase, int cutoff);
GateJet rotation_jet(double phi, int cutoff);
GateJet kerr_jet(double kappa, int cutoff);

FockState apply_one_mode(const FockState& state, const GateMatrix& gate, int mode);
FockState apply_two_mode(const FockState& state, const GateMatrix& gate, int mode_a, int mode_b);

/// Raw contractions without arity bookkeeping; `in` and `out` must not alias.
void contract_one_mode(std::span<const Complex> in, std::span<Complex> out, const CMatrix& gate,
                       int num_modes, int cutoff, int mode);
void contract_two_mode(std::span<const Complex> in, std::span<Complex> out, const CMatrix& gate,
                       int num_modes, int cutoff, int mode_a, int mode_b);

/// Sum of |amplitude|^2.
double state_norm_sq(const FockState& state);
double state_norm_sq(std::span<const Complex> amplitudes);

/// <x> / <psi|psi> on `mode`.
double homodyne_x_expectation(const FockState& state, int mode);

/// (a + a^dag) applied along `mode`.
void apply_position(std::span<const Complex> in, std::span<Complex> out, int num_modes, int cutoff,
                    int mode);

}  // namespace hybridnn::fock
