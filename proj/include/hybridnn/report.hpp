#pragma once

// Accuracy distributions of a sweep: kernel density estimates and tables.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hybridnn/experiment.hpp"

namespace hybridnn::report {

/// 0.9 * min(sd, IQR / 1.34) * n^(-1/5); 0 when the sample has no spread.
double silverman_bandwidth(const std::vector<double>& samples);

struct Kde {
  double bandwidth = 0.0;
  std::vector<double> x;
  std::vector<double> density;
};

/// Gaussian KDE on an odd number of evenly spaced points covering
/// [min - 5h, max + 5h]. nullopt for fewer than two samples or zero spread.
std::optional<Kde> gaussian_kde(const std::vector<double>& samples, int points = 257);

/// Composite Simpson rule on an evenly spaced grid with an odd point count.
double simpson(const std::vector<double>& x, const std::vector<double>& y);

struct Distribution {
  exp::NetworkKind kind = exp::NetworkKind::hybrid;
  long param_count = 0;
  std::vector<std::string> run_ids;
  std::vector<double> accuracies;  // best validation accuracy, failed runs as 0
  std::optional<Kde> kde;
};

struct Report {
  exp::SweepSummary summary;
  std::vector<Distribution> distributions;  // sorted by (kind, param_count)
};

Report build_report(const std::vector<exp::RunRecord>& records, double threshold);

/// Reads a sweep directory and writes report/{accuracies,kde,summary}.csv and
/// report/violins.svg. The threshold comes from summary.json, else from a
/// fresh baseline fit on the grid's dataset.
Report write_report(const std::filesystem::path& sweep_dir);

std::string violins_svg(const Report& report);

}  // namespace hybridnn::report
