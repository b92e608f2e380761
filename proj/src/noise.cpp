#include "hybridnn/noise.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <functional>
#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "hybridnn/error.hpp"
#include "hybridnn/rng.hpp"
#include "hybridnn/svg.hpp"
#include "hybridnn/training.hpp"

namespace hybridnn::noise {
namespace {

constexpr std::array kAllGroups{NoiseGroup::classical,      NoiseGroup::displacement,
                                NoiseGroup::squeezing,      NoiseGroup::kerr,
                                NoiseGroup::interferometer, NoiseGroup::phase,
                                NoiseGroup::amplitude};

bool is_gate_group(NoiseGroup g) {
  return g == NoiseGroup::displacement || g == NoiseGroup::squeezing || g == NoiseGroup::kerr ||
         g == NoiseGroup::interferometer;
}

bool holds(NoiseGroup g, const ParamInfo& info) {
  switch (g) {
    case NoiseGroup::classical: return info.group == GateGroup::classical;
    case NoiseGroup::displacement: return info.group == GateGroup::displacement;
    case NoiseGroup::squeezing: return info.group == GateGroup::squeezing;
    case NoiseGroup::kerr: return info.group == GateGroup::kerr;
    case NoiseGroup::interferometer: return info.group == GateGroup::interferometer;
    case NoiseGroup::phase: return info.group != GateGroup::classical && info.domain == Domain::phase;
    case NoiseGroup::amplitude:
      return info.group != GateGroup::classical && info.domain == Domain::amplitude;
  }
  return false;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double population_std(const std::vector<double>& v, double mean) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / double(v.size()));
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

NoiseCurve sweep(const Network& network, const Dataset& dataset, const std::string& label,
                 const std::function<NoiseSpec(double)>& spec_at, const std::vector<double>& grid,
                 const SweepOptions& options) {
  if (options.realizations < 1) {
    throw Error(ErrorKind::configuration, "realizations must be >= 1");
  }
  for (double b : grid) {
    if (!(b > 0.0)) throw Error(ErrorKind::configuration, fmt::format("ENOB grid value {} must be > 0", b));
  }
  spec_at(grid.empty() ? 1.0 : grid.front()).validate(network);

  const SampleSet validation = dataset.validation();
  NoiseCurve curve;
  curve.group = label;
  curve.noiseless_accuracy = accuracy(network, validation);
  curve.points.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    curve.points[i].enob = grid[i];
    curve.points[i].accuracies.assign(std::size_t(options.realizations), 0.0);
  }

  const std::size_t tasks = grid.size() * std::size_t(options.realizations);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t i = t / std::size_t(options.realizations);
      const std::size_t r = t % std::size_t(options.realizations);
      try {
        const std::uint64_t seed =
            fnv1a(fmt::format("{}/{}/{}/{}", options.seed, label, i, r));
        const Network noisy = perturb(network, spec_at(grid[i]), seed);
        curve.points[i].accuracies[r] = accuracy(noisy, validation);
      } catch (const Error& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::make_exception_ptr(
              Error(e.kind(), fmt::format("{} at ENOB {}: {}", label, grid[i], e.what())));
        }
        next = tasks;
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(options.jobs, int(tasks)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> xs, ys;
  for (auto& p : curve.points) {
    p.mean = mean_of(p.accuracies);
    p.stddev = population_std(p.accuracies, p.mean);
    xs.push_back(p.enob);
    ys.push_back(p.mean);
  }
  curve.spearman = spearman(xs, ys);
  return curve;
}

}  // namespace

const char* to_string(NoiseGroup g) {
  switch (g) {
    case NoiseGroup::classical: return "classical";
    case NoiseGroup::displacement: return "displacement";
    case NoiseGroup::squeezing: return "squeezing";
    case NoiseGroup::kerr: return "kerr";
    case NoiseGroup::interferometer: return "interferometer";
    case NoiseGroup::phase: return "phase";
    case NoiseGroup::amplitude: return "amplitude";
  }
  return "?";
}

NoiseGroup noise_group_from_string(const std::string& name) {
  for (NoiseGroup g : kAllGroups) {
    if (name == to_string(g)) return g;
  }
  throw Error(ErrorKind::configuration, "unknown noise group '" + name + "'");
}

bool is_quantum_group(NoiseGroup g) { return g != NoiseGroup::classical; }

ParameterRange::ParameterRange(double lo, double hi) : w_min(lo), w_max(hi) {
  if (!(hi > lo)) {
    throw Error(ErrorKind::range, fmt::format("parameter range [{}, {}] is empty", lo, hi));
  }
}

ParameterRange range_of(Domain domain, double a_max) {
  const auto [lo, hi] = domain_range(domain, a_max);
  return {lo, hi};
}

double enob(const ParameterRange& range, double sigma) {
  if (sigma < 0.0) throw Error(ErrorKind::range, "sigma must be >= 0");
  if (sigma == 0.0) return kInfinitePrecision;
  return std::log2(1.0 + range.width() / sigma);
}

double sigma_for_enob(const ParameterRange& range, double bits) {
  if (!(bits > 0.0)) throw Error(ErrorKind::range, "ENOB must be > 0");
  if (std::isinf(bits)) return 0.0;
  return range.width() / (std::exp2(bits) - 1.0);
}

NoiseSpec NoiseSpec::whole_network(const Network& network, double bits) {
  NoiseSpec spec;
  spec.bits[NoiseGroup::classical] = bits;
  if (is_hybrid(network)) {
    for (NoiseGroup g : kAllGroups) {
      if (is_gate_group(g)) spec.bits[g] = bits;
    }
  }
  return spec;
}

NoiseSpec NoiseSpec::single(NoiseGroup group, double bits) {
  NoiseSpec spec;
  spec.bits[group] = bits;
  return spec;
}

void NoiseSpec::validate(const Network& network) const {
  if (realizations < 1) throw Error(ErrorKind::configuration, "realizations must be >= 1");
  bool gate = false, domain = false;
  for (const auto& [g, b] : bits) {
    if (!(b > 0.0)) {
      throw Error(ErrorKind::configuration, fmt::format("group '{}': ENOB must be > 0", to_string(g)));
    }
    if (is_quantum_group(g) && !is_hybrid(network)) {
      throw Error(ErrorKind::configuration,
                  fmt::format("group '{}' does not exist in a classical network", to_string(g)));
    }
    gate = gate || is_gate_group(g);
    domain = domain || g == NoiseGroup::phase || g == NoiseGroup::amplitude;
  }
  if (gate && domain) {
    throw Error(ErrorKind::configuration,
                "noise groups overlap: gate groups and phase/amplitude groups cannot be combined");
  }
}

std::optional<NoiseGroup> group_of(const ParamInfo& info, const NoiseSpec& spec) {
  for (const auto& entry : spec.bits) {
    if (holds(entry.first, info)) return entry.first;
  }
  return std::nullopt;
}

std::vector<double> parameter_sigmas(const Network& network, const NoiseSpec& spec) {
  spec.validate(network);
  const double a_max = amplitude_bound(network);
  const auto layout = parameter_layout(network);
  std::vector<double> sigmas(layout.size(), 0.0);
  for (std::size_t k = 0; k < layout.size(); ++k) {
    if (auto g = group_of(layout[k], spec)) {
      sigmas[k] = sigma_for_enob(range_of(layout[k].domain, a_max), spec.bits.at(*g));
    }
  }
  return sigmas;
}

Network perturb(const Network& network, const NoiseSpec& spec, std::uint64_t seed) {
  const auto sigmas = parameter_sigmas(network, spec);
  const auto layout = parameter_layout(network);
  Eigen::VectorXd flat = flat_params(network);
  Rng rng(seed, "noise");
  for (Eigen::Index k = 0; k < flat.size(); ++k) {
    const double n = rng.normal();
    if (sigmas[std::size_t(k)] > 0.0) flat[k] += sigmas[std::size_t(k)] * n;
  }
  project_params(flat, layout, amplitude_bound(network));
  Network noisy = network;
  set_flat_params(noisy, flat);
  return noisy;
}

std::vector<double> default_enob_grid() { return {0.5, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12}; }

NoiseCurve enob_sweep(const Network& network, const Dataset& dataset,
                      const std::vector<double>& grid, const SweepOptions& options) {
  return sweep(
      network, dataset, "network",
      [&](double b) {
        NoiseSpec s = NoiseSpec::whole_network(network, b);
        s.realizations = options.realizations;
        return s;
      },
      grid, options);
}

NoiseCurve per_gate_sweep(const Network& network, const Dataset& dataset, NoiseGroup group,
                          const std::vector<double>& grid, const SweepOptions& options) {
  return sweep(
      network, dataset, to_string(group),
      [&](double b) {
        NoiseSpec s = NoiseSpec::single(group, b);
        s.realizations = options.realizations;
        return s;
      },
      grid, options);
}

std::optional<double> near_ideal_enob(const NoiseCurve& curve, double fraction) {
  const double target = fraction * curve.noiseless_accuracy;
  auto pts = curve.points;
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.enob < b.enob; });
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].mean >= target) {
      if (i == 0) return pts[0].enob;
      const auto& lo = pts[i - 1];
      const auto& hi = pts[i];
      const double t = (target - lo.mean) / (hi.mean - lo.mean);
      return lo.enob + t * (hi.enob - lo.enob);
    }
  }
  return std::nullopt;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorKind::shape, "spearman needs two equal-length samples of size >= 2");
  }
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = mean_of(ra), mb = mean_of(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

void write_raw_csv(const std::filesystem::path& path, const std::vector<NoiseCurve>& curves) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "# hybridnn.noise-raw/1\n" << "group,enob,realization,accuracy\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      for (std::size_t r = 0; r < p.accuracies.size(); ++r) {
        out << fmt::format("{},{},{},{}\n", c.group, p.enob, r, p.accuracies[r]);
      }
    }
  }
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<NoiseCurve>& curves) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "# hybridnn.noise-aggregate/1\n" << "group,enob,mean,std\n";
  for (const auto& c : curves) {
    out << fmt::format("{},inf,{},0\n", c.group, c.noiseless_accuracy);
    for (const auto& p : c.points) out << fmt::format("{},{},{},{}\n", c.group, p.enob, p.mean, p.stddev);
  }
}

std::string curves_svg(const std::vector<NoiseCurve>& curves, const std::string& title) {
  svg::Chart chart;
  chart.title = title;
  chart.x_label = "ENOB (bits)";
  chart.y_label = "validation accuracy";
  for (const auto& c : curves) {
    svg::Series s;
    s.label = c.group;
    for (const auto& p : c.points) {
      s.x.push_back(p.enob);
      s.y.push_back(p.mean);
      s.band_low.push_back(p.mean - p.stddev);
      s.band_high.push_back(p.mean + p.stddev);
    }
    chart.series.push_back(std::move(s));
  }
  return svg::render(chart);
}

}  // namespace hybridnn::noise
