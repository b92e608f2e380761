#pragma once

// Finite-precision parameter noise, expressed as effective number of bits.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridnn/datagen.hpp"
#include "hybridnn/network.hpp"

namespace hybridnn::noise {

/// Gate groups partition a network by where a parameter acts; the phase and
/// amplitude groups partition its quantum parameters by domain. A NoiseSpec
/// may not mix the two families where they overlap.
enum class NoiseGroup { classical, displacement, squeezing, kerr, interferometer, phase, amplitude };

const char* to_string(NoiseGroup g);
/// Throws ErrorKind::configuration for an unknown name.
NoiseGroup noise_group_from_string(const std::string& name);
bool is_quantum_group(NoiseGroup g);

struct ParameterRange {
  double w_min = 0.0;
  double w_max = 1.0;

  /// Throws ErrorKind::range unless w_max > w_min.
  ParameterRange(double w_min, double w_max);
  double width() const { return w_max - w_min; }
};

ParameterRange range_of(Domain domain, double a_max);

inline constexpr double kInfinitePrecision = std::numeric_limits<double>::infinity();

/// log2(1 + width / sigma); sigma == 0 gives kInfinitePrecision.
double enob(const ParameterRange& range, double sigma);
/// width / (2^bits - 1); bits == infinity gives 0.
double sigma_for_enob(const ParameterRange& range, double bits);

/// Per-group precision in bits. Each parameter draws noise with
/// sigma_for_enob(its own range, bits of its group). Parameters in no listed
/// group are left exact.
struct NoiseSpec {
  std::map<NoiseGroup, double> bits;
  int realizations = 10;

  static NoiseSpec whole_network(const Network& network, double bits);
  static NoiseSpec single(NoiseGroup group, double bits);

  /// Throws ErrorKind::configuration on overlapping groups, a quantum group on
  /// a classical network, negative bits or realizations < 1.
  void validate(const Network& network) const;
};

/// Group membership of one parameter, or nullopt if no listed group holds it.
std::optional<NoiseGroup> group_of(const ParamInfo& info, const NoiseSpec& spec);

/// Per-parameter sigma in flat parameter order.
std::vector<double> parameter_sigmas(const Network& network, const NoiseSpec& spec);

/// Noisy copy: independent Gaussian noise, then projection into each domain.
Network perturb(const Network& network, const NoiseSpec& spec, std::uint64_t seed);

struct CurvePoint {
  double enob = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // population std over realizations
  std::vector<double> accuracies;
};

struct NoiseCurve {
  std::string group;  // "network" for whole-network sweeps
  double noiseless_accuracy = 0.0;
  std::vector<CurvePoint> points;
  double spearman = 0.0;  // rank correlation of mean accuracy with ENOB
};

/// 0.5, 1, 2, ..., 10, 12.
std::vector<double> default_enob_grid();

struct SweepOptions {
  int realizations = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Validation accuracy under noise on every parameter of the network.
NoiseCurve enob_sweep(const Network& network, const Dataset& dataset,
                      const std::vector<double>& grid, const SweepOptions& options = {});

/// Noise on one group only.
NoiseCurve per_gate_sweep(const Network& network, const Dataset& dataset, NoiseGroup group,
                          const std::vector<double>& grid, const SweepOptions& options = {});

/// Smallest ENOB whose mean accuracy reaches fraction * noiseless, linearly
/// interpolated between grid points; nullopt if the curve never gets there.
std::optional<double> near_ideal_enob(const NoiseCurve& curve, double fraction = 0.9);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

void write_raw_csv(const std::filesystem::path& path, const std::vector<NoiseCurve>& curves);
/// Aggregate rows include an "inf" row per curve holding the noiseless accuracy.
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<NoiseCurve>& curves);
std::string curves_svg(const std::vector<NoiseCurve>& curves, const std::string& title);

}  // namespace hybridnn::noise
