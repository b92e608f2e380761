#include "hybridnn/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "hybridnn/error.hpp"

namespace hybridnn::report {
namespace fs = std::filesystem;

namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const auto lo = std::size_t(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
}

}  // namespace

double silverman_bandwidth(const std::vector<double>& samples) {
  const auto n = double(samples.size());
  if (samples.size() < 2) return 0.0;
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  const double iqr = quantile(samples, 0.75) - quantile(samples, 0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

std::optional<Kde> gaussian_kde(const std::vector<double>& samples, int points) {
  const double h = silverman_bandwidth(samples);
  if (!(h > 0.0)) return std::nullopt;
  if (points < 3) points = 3;
  if (points % 2 == 0) ++points;
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it - 5.0 * h;
  const double hi = *hi_it + 5.0 * h;
  Kde k;
  k.bandwidth = h;
  const double norm = 1.0 / (double(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * i / double(points - 1);
    double d = 0.0;
    for (double s : samples) {
      const double z = (x - s) / h;
      d += std::exp(-0.5 * z * z);
    }
    k.x.push_back(x);
    k.density.push_back(norm * d);
  }
  return k;
}

double simpson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3 || x.size() % 2 == 0) {
    throw Error(ErrorKind::shape, "simpson needs an odd number (>= 3) of matching points");
  }
  const double h = (x.back() - x.front()) / double(x.size() - 1);
  double acc = y.front() + y.back();
  for (std::size_t i = 1; i + 1 < y.size(); ++i) acc += (i % 2 ? 4.0 : 2.0) * y[i];
  return acc * h / 3.0;
}

Report build_report(const std::vector<exp::RunRecord>& records, double threshold) {
  Report r;
  r.summary = exp::summarize(records, threshold);
  std::map<std::pair<int, long>, Distribution> groups;
  for (const auto& rec : records) {
    auto& d = groups[{int(rec.kind), rec.param_count}];
    d.kind = rec.kind;
    d.param_count = rec.param_count;
    d.run_ids.push_back(rec.run_id);
    d.accuracies.push_back(rec.status == exp::RunStatus::completed ? rec.best_validation_accuracy : 0.0);
  }
  for (auto& [key, d] : groups) {
    d.kde = gaussian_kde(d.accuracies);
    r.distributions.push_back(std::move(d));
  }
  return r;
}

Report write_report(const fs::path& sweep_dir) {
  const auto records = exp::collect_records(sweep_dir);
  double threshold = 0.0;
  if (fs::exists(sweep_dir / "summary.json")) {
    std::ifstream in(sweep_dir / "summary.json");
    threshold = exp::Json::parse(in).at("threshold").get<double>();
  } else {
    const auto grid = exp::load_sweep_grid(sweep_dir / "grid.json");
    threshold = fit_linear_baseline(grid.dataset.load()).validation_accuracy;
  }
  const Report r = build_report(records, threshold);
  const fs::path out = sweep_dir / "report";

  std::string acc = "# hybridnn.report-accuracies/1\nkind,param_count,run_id,accuracy\n";
  std::string kde = "# hybridnn.report-kde/1\nkind,param_count,bandwidth,x,density\n";
  for (const auto& d : r.distributions) {
    for (std::size_t i = 0; i < d.accuracies.size(); ++i) {
      acc += fmt::format("{},{},{},{}\n", exp::to_string(d.kind), d.param_count, d.run_ids[i], d.accuracies[i]);
    }
    if (d.kde) {
      for (std::size_t i = 0; i < d.kde->x.size(); ++i) {
        kde += fmt::format("{},{},{},{},{}\n", exp::to_string(d.kind), d.param_count,
                           d.kde->bandwidth, d.kde->x[i], d.kde->density[i]);
      }
    }
  }
  write_file(out / "accuracies.csv", acc);
  write_file(out / "kde.csv", kde);
  exp::write_summary_csv(out / "summary.csv", r.summary);
  write_file(out / "violins.svg", violins_svg(r));
  return r;
}

std::string violins_svg(const Report& report) {
  const double left = 60, top = 40, bottom = 70, slot = 70;
  const double ph = 320;
  const double width = left + 20 + slot * double(std::max<std::size_t>(report.distributions.size(), 1));
  const double height = top + ph + bottom;
  auto sy = [&](double a) { return top + (1.0 - a) * ph; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{:.0f}\" y=\"22\" font-size=\"14\">best validation accuracy by network size</text>\n",
      width, height, left);
  for (int i = 0; i <= 10; i += 2) {
    const double a = i / 10.0;
    out += fmt::format("<text x=\"{:.0f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.1f}</text>\n", left - 6, sy(a) + 4, a);
    out += fmt::format("<line x1=\"{:.0f}\" y1=\"{:.1f}\" x2=\"{:.0f}\" y2=\"{:.1f}\" stroke=\"#eee\"/>\n",
                       left, sy(a), width - 10, sy(a));
  }
  for (double level : {report.summary.threshold, exp::kFailedAccuracy}) {
    out += fmt::format(
        "<line x1=\"{:.0f}\" y1=\"{:.1f}\" x2=\"{:.0f}\" y2=\"{:.1f}\" stroke=\"#888\" stroke-dasharray=\"5,4\"/>\n",
        left, sy(level), width - 10, sy(level));
  }

  for (std::size_t g = 0; g < report.distributions.size(); ++g) {
    const auto& d = report.distributions[g];
    const double cx = left + slot * (double(g) + 0.5);
    const char* color = d.kind == exp::NetworkKind::hybrid ? "#1f77b4" : "#d62728";
    if (d.kde) {
      const double peak = *std::max_element(d.kde->density.begin(), d.kde->density.end());
      const double half = 0.42 * slot;
      std::string right, leftside;
      for (std::size_t i = 0; i < d.kde->x.size(); ++i) {
        const double a = std::clamp(d.kde->x[i], 0.0, 1.0);
        const double w = half * d.kde->density[i] / peak;
        right += fmt::format("{:.2f},{:.2f} ", cx + w, sy(a));
      }
      for (std::size_t i = d.kde->x.size(); i-- > 0;) {
        const double a = std::clamp(d.kde->x[i], 0.0, 1.0);
        const double w = half * d.kde->density[i] / peak;
        leftside += fmt::format("{:.2f},{:.2f} ", cx - w, sy(a));
      }
      out += fmt::format("<polygon points=\"{}{}\" fill=\"{}\" fill-opacity=\"0.3\" stroke=\"{}\"/>\n",
                         right, leftside, color, color);
    }
    for (double a : d.accuracies) {
      out += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#333\"/>\n",
                         cx - 8, sy(a), cx + 8, sy(a));
    }
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.0f}\" text-anchor=\"middle\">{}</text>\n", cx,
                       top + ph + 18, exp::to_string(d.kind));
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.0f}\" text-anchor=\"middle\">{} params</text>\n", cx,
                       top + ph + 34, d.param_count);
  }
  out += "</svg>\n";
  return out;
}

}  // namespace hybridnn::report
