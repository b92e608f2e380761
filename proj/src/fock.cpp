#include "hybridnn/fock.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "hybridnn/error.hpp"

namespace hybridnn::fock {
namespace {

constexpr Complex kI{0.0, 1.0};

void require_cutoff(int cutoff) {
  if (cutoff < 2) {
    throw Error(ErrorKind::invalid_cutoff, "cutoff must be >= 2, got " + std::to_string(cutoff));
  }
}

std::size_t ipow(int base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= static_cast<std::size_t>(base);
  return r;
}

// <m|D(alpha)|n> from D a^dag = a^dag D - alpha* D:
//   D[m,n] = (sqrt(m) D[m-1,n-1] - alpha* D[m,n-1]) / sqrt(n).
CMatrix displacement_entries(double amplitude, double phase, int cutoff) {
  const Complex alpha = std::polar(amplitude, phase);
  CMatrix d = CMatrix::Zero(cutoff, cutoff);
  d(0, 0) = std::exp(-0.5 * amplitude * amplitude);
  for (int m = 1; m < cutoff; ++m) d(m, 0) = alpha / std::sqrt(double(m)) * d(m - 1, 0);
  for (int n = 1; n < cutoff; ++n) {
    const double sn = std::sqrt(double(n));
    for (int m = 0; m < cutoff; ++m) {
      Complex v = -std::conj(alpha) * d(m, n - 1);
      if (m > 0) v += std::sqrt(double(m)) * d(m - 1, n - 1);
      d(m, n) = v / sn;
    }
  }
  return d;
}

// <m|S(r e^{i phi})|n>; only m + n even is populated.
//   S[m,0] = -e^{i phi} tanh r sqrt(m-1)/sqrt(m) S[m-2,0]
//   S[m,n] = (sqrt(m) sech r S[m-1,n-1] + e^{-i phi} tanh r sqrt(n-1) S[m,n-2]) / sqrt(n)
CMatrix squeezing_entries(double r, double phase, int cutoff) {
  const double sech = 1.0 / std::cosh(r);
  const double th = std::tanh(r);
  const Complex e = std::polar(1.0, phase);
  CMatrix s = CMatrix::Zero(cutoff, cutoff);
  s(0, 0) = std::sqrt(sech);
  for (int m = 2; m < cutoff; m += 2) {
    s(m, 0) = -e * th * std::sqrt(double(m - 1) / double(m)) * s(m - 2, 0);
  }
  for (int n = 1; n < cutoff; ++n) {
    const double sn = std::sqrt(double(n));
    for (int m = (n % 2); m < cutoff; m += 2) {
      Complex v{0.0, 0.0};
      if (m > 0) v += std::sqrt(double(m)) * sech * s(m - 1, n - 1);
      if (n > 1) v += std::conj(e) * th * std::sqrt(double(n - 1)) * s(m, n - 2);
      s(m, n) = v / sn;
    }
  }
  return s;
}

// Generator of the beamsplitter restricted to the total-photon block N,
// basis |k, N-k>, k = 0..N. The block is invariant, so its exponential is
// exact.
CMatrix beamsplitter_block_generator(int total, double phase) {
  const Complex e = std::polar(1.0, phase);
  CMatrix g = CMatrix::Zero(total + 1, total + 1);
  for (int k = 0; k < total; ++k) {
    // a^dag b |k, N-k> = sqrt(k+1) sqrt(N-k) |k+1, N-k-1>
    const double c = std::sqrt(double(k + 1) * double(total - k));
    g(k + 1, k) += e * c;
    // -e^{-i phi} a b^dag |k+1, N-k-1> = -e^{-i phi} sqrt(k+1) sqrt(N-k) |k, N-k>
    g(k, k + 1) -= std::conj(e) * c;
  }
  return g;
}

CMatrix commutator_with_number(const CMatrix& g, double scale) {
  // scale * i (N G - G N)
  const auto cutoff = g.rows();
  CMatrix out(cutoff, cutoff);
  for (Eigen::Index m = 0; m < cutoff; ++m) {
    for (Eigen::Index n = 0; n < cutoff; ++n) {
      out(m, n) = scale * kI * double(m - n) * g(m, n);
    }
  }
  return out;
}

}  // namespace

GateMatrix::GateMatrix(Arity arity, CMatrix entries) : arity_(arity), entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) {
    throw Error(ErrorKind::shape, "gate matrix must be square");
  }
}

FockState::FockState(int num_modes, int cutoff) : num_modes_(num_modes), cutoff_(cutoff) {
  require_cutoff(cutoff);
  if (num_modes < 1) throw Error(ErrorKind::shape, "need at least one mode");
  amplitudes_.assign(ipow(cutoff, num_modes), Complex{0.0, 0.0});
}

FockState::FockState(int num_modes, int cutoff, std::vector<Complex> amplitudes)
    : num_modes_(num_modes), cutoff_(cutoff), amplitudes_(std::move(amplitudes)) {
  require_cutoff(cutoff);
  if (num_modes < 1) throw Error(ErrorKind::shape, "need at least one mode");
  if (amplitudes_.size() != ipow(cutoff, num_modes)) {
    throw Error(ErrorKind::shape, "amplitude count " + std::to_string(amplitudes_.size()) +
                                      " != cutoff^modes");
  }
}

FockState FockState::vacuum(int num_modes, int cutoff) {
  FockState s(num_modes, cutoff);
  s.amplitudes_[0] = 1.0;
  return s;
}

FockState FockState::number_state(std::span<const int> photons, int cutoff) {
  FockState s(static_cast<int>(photons.size()), cutoff);
  s.amplitudes_[s.index_of(photons)] = 1.0;
  return s;
}

std::size_t FockState::index_of(std::span<const int> photons) const {
  if (static_cast<int>(photons.size()) != num_modes_) {
    throw Error(ErrorKind::shape, "photon tuple length != mode count");
  }
  std::size_t idx = 0;
  for (int n : photons) {
    if (n < 0 || n >= cutoff_) throw Error(ErrorKind::range, "photon number outside cutoff");
    idx = idx * static_cast<std::size_t>(cutoff_) + static_cast<std::size_t>(n);
  }
  return idx;
}

std::size_t FockState::stride(int mode) const { return ipow(cutoff_, num_modes_ - 1 - mode); }

std::pair<CMatrix, CMatrix> ladder_matrices(int cutoff) {
  require_cutoff(cutoff);
  CMatrix a = CMatrix::Zero(cutoff, cutoff);
  for (int n = 1; n < cutoff; ++n) a(n - 1, n) = std::sqrt(double(n));
  CMatrix adag = a.adjoint();
  return {std::move(a), std::move(adag)};
}

Eigen::VectorXd number_diagonal(int cutoff) {
  require_cutoff(cutoff);
  return Eigen::VectorXd::LinSpaced(cutoff, 0.0, double(cutoff - 1));
}

GateMatrix displacement_matrix(double amplitude, double phase, int cutoff) {
  require_cutoff(cutoff);
  return {Arity::one_mode, displacement_entries(amplitude, phase, cutoff)};
}

GateMatrix squeezing_matrix(double r, double phase, int cutoff) {
  require_cutoff(cutoff);
  return {Arity::one_mode, squeezing_entries(r, phase, cutoff)};
}

GateMatrix beamsplitter_matrix(double theta, double phase, int cutoff) {
  return {Arity::two_mode, beamsplitter_jet(theta, phase, cutoff).gate};
}

GateMatrix rotation_matrix(double phi, int cutoff) {
  require_cutoff(cutoff);
  CMatrix g = CMatrix::Zero(cutoff, cutoff);
  for (int n = 0; n < cutoff; ++n) g(n, n) = std::polar(1.0, phi * n);
  return {Arity::one_mode, std::move(g)};
}

GateMatrix kerr_matrix(double kappa, int cutoff) {
  require_cutoff(cutoff);
  CMatrix g = CMatrix::Zero(cutoff, cutoff);
  for (int n = 0; n < cutoff; ++n) g(n, n) = std::polar(1.0, kappa * n * n);
  return {Arity::one_mode, std::move(g)};
}

GateJet displacement_jet(double amplitude, double phase, int cutoff) {
  require_cutoff(cutoff);
  // dD/da = P X U P with X = e^{i phi} a^dag - e^{-i phi} a. X only couples
  // neighbouring levels, so one extra level makes the product exact.
  const int ext = cutoff + 1;
  const CMatrix big = displacement_entries(amplitude, phase, ext);
  auto [a, adag] = ladder_matrices(ext);
  const Complex e = std::polar(1.0, phase);
  const CMatrix gen = e * adag - std::conj(e) * a;
  GateJet jet;
  jet.gate = big.topLeftCorner(cutoff, cutoff);
  jet.partials.push_back((gen * big).topLeftCorner(cutoff, cutoff));
  // D(a, phi) = R(phi) D(a, 0) R(-phi)
  jet.partials.push_back(commutator_with_number(jet.gate, 1.0));
  return jet;
}

GateJet squeezing_jet(double r, double phase, int cutoff) {
  require_cutoff(cutoff);
  const int ext = cutoff + 2;
  const CMatrix big = squeezing_entries(r, phase, ext);
  auto [a, adag] = ladder_matrices(ext);
  const Complex e = std::polar(1.0, phase);
  const CMatrix gen = 0.5 * (std::conj(e) * a * a - e * adag * adag);
  GateJet jet;
  jet.gate = big.topLeftCorner(cutoff, cutoff);
  jet.partials.push_back((gen * big).topLeftCorner(cutoff, cutoff));
  // S(r, phi) = R(phi/2) S(r, 0) R(-phi/2)
  jet.partials.push_back(commutator_with_number(jet.gate, 0.5));
  return jet;
}

GateJet beamsplitter_jet(double theta, double phase, int cutoff) {
  require_cutoff(cutoff);
  const Eigen::Index dim = Eigen::Index(cutoff) * cutoff;
  GateJet jet;
  jet.arity = Arity::two_mode;
  jet.gate = CMatrix::Zero(dim, dim);
  jet.partials.assign(1, CMatrix::Zero(dim, dim));
  for (int total = 0; total <= 2 * (cutoff - 1); ++total) {
    const CMatrix gen = beamsplitter_block_generator(total, phase);
    const CMatrix block = (theta * gen).exp();
    const CMatrix dblock = gen * block;
    for (int k = 0; k <= total; ++k) {
      const int kb = total - k;
      if (k >= cutoff || kb >= cutoff) continue;
      for (int j = 0; j <= total; ++j) {
        const int jb = total - j;
        if (j >= cutoff || jb >= cutoff) continue;
        const Eigen::Index row = Eigen::Index(k) * cutoff + kb;
        const Eigen::Index col = Eigen::Index(j) * cutoff + jb;
        jet.gate(row, col) = block(k, j);
        jet.partials[0](row, col) = dblock(k, j);
      }
    }
  }
  return jet;
}

GateJet rotation_jet(double phi, int cutoff) {
  GateJet jet;
  jet.gate = rotation_matrix(phi, cutoff).entries();
  CMatrix d = jet.gate;
  for (int n = 0; n < cutoff; ++n) d(n, n) *= kI * double(n);
  jet.partials.push_back(std::move(d));
  return jet;
}

GateJet kerr_jet(double kappa, int cutoff) {
  GateJet jet;
  jet.gate = kerr_matrix(kappa, cutoff).entries();
  CMatrix d = jet.gate;
  for (int n = 0; n < cutoff; ++n) d(n, n) *= kI * double(n * n);
  jet.partials.push_back(std::move(d));
  return jet;
}

void contract_one_mode(std::span<const Complex> in, std::span<Complex> out, const CMatrix& gate,
                       int num_modes, int cutoff, int mode) {
  const std::size_t inner = ipow(cutoff, num_modes - 1 - mode);
  const std::size_t outer = ipow(cutoff, mode);
  const std::size_t block = inner * static_cast<std::size_t>(cutoff);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * block + i;
      for (int n = 0; n < cutoff; ++n) {
        Complex acc{0.0, 0.0};
        for (int k = 0; k < cutoff; ++k) {
          const Complex g = gate(n, k);
          if (g != Complex{0.0, 0.0}) acc += g * in[base + k * inner];
        }
        out[base + n * inner] = acc;
      }
    }
  }
}

void contract_two_mode(std::span<const Complex> in, std::span<Complex> out, const CMatrix& gate,
                       int num_modes, int cutoff, int mode_a, int mode_b) {
  const std::size_t sa = ipow(cutoff, num_modes - 1 - mode_a);
  const std::size_t sb = ipow(cutoff, num_modes - 1 - mode_b);
  const std::size_t total = in.size();
  const std::size_t d = static_cast<std::size_t>(cutoff);
  const std::size_t dim = d * d;
  std::vector<Complex> v(dim);
  for (std::size_t base = 0; base < total; ++base) {
    if ((base / sa) % d != 0 || (base / sb) % d != 0) continue;
    for (std::size_t na = 0; na < d; ++na) {
      for (std::size_t nb = 0; nb < d; ++nb) v[na * d + nb] = in[base + na * sa + nb * sb];
    }
    for (std::size_t row = 0; row < dim; ++row) {
      Complex acc{0.0, 0.0};
      for (std::size_t col = 0; col < dim; ++col) {
        const Complex g = gate(Eigen::Index(row), Eigen::Index(col));
        if (g != Complex{0.0, 0.0}) acc += g * v[col];
      }
      out[base + (row / d) * sa + (row % d) * sb] = acc;
    }
  }
}

FockState apply_one_mode(const FockState& state, const GateMatrix& gate, int mode) {
  if (gate.arity() != Arity::one_mode || gate.dim() != state.cutoff()) {
    throw Error(ErrorKind::shape, "one-mode gate of dim " + std::to_string(gate.dim()) +
                                      " does not fit cutoff " + std::to_string(state.cutoff()));
  }
  if (mode < 0 || mode >= state.num_modes()) throw Error(ErrorKind::shape, "mode out of range");
  FockState out(state.num_modes(), state.cutoff());
  contract_one_mode(state.amplitudes(), out.amplitudes(), gate.entries(), state.num_modes(),
                    state.cutoff(), mode);
  return out;
}

FockState apply_two_mode(const FockState& state, const GateMatrix& gate, int mode_a, int mode_b) {
  if (mode_a == mode_b) throw Error(ErrorKind::invalid_modes, "two-mode gate on a single mode");
  if (gate.arity() != Arity::two_mode ||
      gate.dim() != Eigen::Index(state.cutoff()) * state.cutoff()) {
    throw Error(ErrorKind::shape, "two-mode gate does not fit state cutoff");
  }
  if (mode_a < 0 || mode_b < 0 || mode_a >= state.num_modes() || mode_b >= state.num_modes()) {
    throw Error(ErrorKind::shape, "mode out of range");
  }
  FockState out(state.num_modes(), state.cutoff());
  contract_two_mode(state.amplitudes(), out.amplitudes(), gate.entries(), state.num_modes(),
                    state.cutoff(), mode_a, mode_b);
  return out;
}

double state_norm_sq(std::span<const Complex> amplitudes) {
  double s = 0.0;
  for (const Complex& c : amplitudes) s += std::norm(c);
  return s;
}

double state_norm_sq(const FockState& state) { return state_norm_sq(state.amplitudes()); }

void apply_position(std::span<const Complex> in, std::span<Complex> out, int num_modes, int cutoff,
                    int mode) {
  const std::size_t inner = ipow(cutoff, num_modes - 1 - mode);
  const std::size_t outer = ipow(cutoff, mode);
  const std::size_t block = inner * static_cast<std::size_t>(cutoff);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * block + i;
      for (int n = 0; n < cutoff; ++n) {
        Complex acc{0.0, 0.0};
        if (n + 1 < cutoff) acc += std::sqrt(double(n + 1)) * in[base + (n + 1) * inner];
        if (n > 0) acc += std::sqrt(double(n)) * in[base + (n - 1) * inner];
        out[base + n * inner] = acc;
      }
    }
  }
}

double homodyne_x_expectation(const FockState& state, int mode) {
  if (mode < 0 || mode >= state.num_modes()) throw Error(ErrorKind::shape, "mode out of range");
  const double norm = state_norm_sq(state);
  if (!(norm > 0.0)) throw Error(ErrorKind::degenerate_state, "state has zero norm");
  const auto amps = state.amplitudes();
  const std::size_t inner = state.stride(mode);
  const std::size_t d = static_cast<std::size_t>(state.cutoff());
  double acc = 0.0;
  // <a + a^dag> = 2 Re sum conj(psi_n) sqrt(n+1) psi_{n+1}
  for (std::size_t idx = 0; idx < amps.size(); ++idx) {
    const std::size_t n = (idx / inner) % d;
    if (n + 1 >= d) continue;
    acc += std::sqrt(double(n + 1)) * std::real(std::conj(amps[idx]) * amps[idx + inner]);
  }
  return 2.0 * acc / norm;
}

}  // namespace hybridnn::fock
