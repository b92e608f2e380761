// hybridnn: dataset generation, training, sweeps, noise studies and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hybridnn/cvqnn.hpp"
#include "hybridnn/datagen.hpp"
#include "hybridnn/error.hpp"
#include "hybridnn/experiment.hpp"
#include "hybridnn/noise.hpp"
#include "hybridnn/report.hpp"
#include "hybridnn/training.hpp"

namespace fs = std::filesystem;
using namespace hybridnn;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::optional<int> cutoff;
};

void add_common(CLI::App* cmd, Common& c, bool jobs, bool cutoff) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--out", c.out, "output path (default: $HYBRIDNN_OUT or ./hybridnn-out)");
  cmd->add_option("--seed", c.seed, "override the seed");
  if (jobs) cmd->add_option("--jobs", c.jobs, "parallel workers")->check(CLI::PositiveNumber);
  if (cutoff) cmd->add_option("--cutoff", c.cutoff, "Fock cutoff dimension")->check(CLI::Range(2, 64));
}

fs::path out_or(const Common& c, const fs::path& fallback) {
  return c.out.empty() ? exp::default_output_root() / fallback : fs::path(c.out);
}

exp::Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::not_found, "cannot open " + path);
  try {
    return exp::Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::configuration, path + ": invalid JSON: " + e.what());
  }
}

GenSpec load_gen_spec(const Common& c) {
  GenSpec spec;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw Error(ErrorKind::not_found, "cannot open " + c.config);
    std::stringstream buf;
    buf << in.rdbuf();
    spec = gen_spec_from_json(buf.str());
  }
  if (c.seed) spec.seed = *c.seed;
  spec.validate();
  return spec;
}

exp::RunConfig load_run(const Common& c) {
  exp::RunConfig rc = c.config.empty() ? exp::RunConfig{} : exp::load_run_config(c.config);
  if (c.seed) rc.train.seed = *c.seed;
  if (c.cutoff) rc.shape.cutoff = rc.train.cutoff = *c.cutoff;
  rc.validate();
  return rc;
}

int cmd_gen_data(const Common& c) {
  const GenSpec spec = load_gen_spec(c);
  const fs::path out = out_or(c, "dataset.csv");
  save_dataset(generate(spec), out);
  fmt::print("wrote {} and {}\n", out.string(), spec_sidecar_path(out).string());
  return 0;
}

int cmd_train(const Common& c) {
  const exp::RunConfig rc = load_run(c);
  const fs::path root = out_or(c, "runs");
  fmt::print("run {} ({} {}x{}x{}x{}, cutoff {})\n", exp::run_id(rc), exp::to_string(rc.kind),
             rc.shape.inputs, rc.shape.modes, rc.shape.layers, rc.shape.outputs, rc.shape.cutoff);
  const auto rec = exp::execute_run(rc, root, [](const EpochRecord& e) {
    if (e.epoch % 10 == 0) {
      fmt::print("epoch {:4d}  loss {:.4f}  train {:.3f}  val {:.3f}\n", e.epoch, e.train_loss,
                 e.train_accuracy, e.validation_accuracy);
    }
  });
  if (rec.status == exp::RunStatus::failed) {
    fmt::print(stderr, "run failed: {}\n", rec.error);
    return 3;
  }
  fmt::print("best validation accuracy {:.4f} at epoch {} ({} parameters)\n{}\n",
             rec.best_validation_accuracy, rec.best_epoch, rec.param_count, (root / rec.run_id).string());
  return 0;
}

int cmd_sweep(const Common& c) {
  exp::SweepGrid grid =
      c.config.empty() ? exp::SweepGrid::desk_default() : exp::load_sweep_grid(c.config);
  if (c.cutoff) {
    grid.train.cutoff = *c.cutoff;
    for (auto& e : grid.entries) e.cutoffs = {*c.cutoff};
  }
  if (c.seed) {
    for (auto& e : grid.entries) e.first_seed = *c.seed;
  }
  const fs::path out = out_or(c, "sweep");
  const std::size_t total = grid.expand().size();
  std::size_t done = 0;
  const auto result = exp::run_sweep(grid, out, c.jobs, [&](const exp::RunRecord& r) {
    ++done;
    fmt::print("[{}/{}] {} {} params={} acc={:.4f}{}\n", done, total, r.run_id, exp::to_string(r.kind),
               r.param_count, r.best_validation_accuracy,
               r.status == exp::RunStatus::failed ? " FAILED" : "");
  });
  fmt::print("threshold {:.4f}; {} runs ({} resumed); checksum {}\n", result.summary.threshold,
             result.summary.run_count, result.resumed, result.summary.run_checksum);
  for (const auto& row : result.summary.rows) {
    fmt::print("{:9s} {:5d} params  n={:3d}  well-trained {:.4f} +/- {:.4f}  poorly {:.2f}  failed {:.2f}\n",
               exp::to_string(row.kind), row.param_count, row.runs, row.well_trained_mean,
               row.well_trained_std, row.poorly_trained_fraction, row.failed_fraction);
  }
  return 0;
}

int cmd_noise(const Common& c, const std::string& run_dir, int realizations) {
  exp::NoiseStudyConfig nc =
      c.config.empty() ? exp::NoiseStudyConfig{} : exp::noise_study_config_from_json(read_json(c.config));
  if (c.seed) nc.seed = *c.seed;
  if (realizations > 0) nc.realizations = realizations;
  const fs::path out = c.out.empty() ? fs::path(run_dir) / "noise" : fs::path(c.out);
  const auto study = exp::run_noise_study(run_dir, nc, out, c.jobs);
  for (const auto& curve : study.curves) {
    const auto near = noise::near_ideal_enob(curve);
    fmt::print("{:14s} noiseless {:.4f}  near-ideal ENOB {}  spearman {:.3f}\n", curve.group,
               curve.noiseless_accuracy, near ? fmt::format("{:.2f}", *near) : std::string("n/a"),
               curve.spearman);
  }
  fmt::print("{}\n", out.string());
  return 0;
}

int cmd_report(const Common& c, const std::string& sweep_dir) {
  const fs::path dir = !sweep_dir.empty() ? fs::path(sweep_dir) : out_or(c, "sweep");
  const auto r = report::write_report(dir);
  fmt::print("{} distributions, threshold {:.4f}\n{}\n", r.distributions.size(), r.summary.threshold,
             (dir / "report").string());
  return 0;
}

int cmd_calibrate(const Common& c, double floor, const std::vector<int>& table) {
  if (table.empty()) {
    const auto cal = cvqnn::calibrate_amax(c.cutoff.value_or(7), floor);
    fmt::print("cutoff {}  norm floor {}  a_max {:.2f}\n", cal.cutoff, cal.norm_floor, cal.a_max);
    return 0;
  }
  std::string text = "# cutoff norm_floor a_max\n";
  for (int d : table) {
    const auto cal = cvqnn::calibrate_amax(d, floor);
    text += fmt::format("{} {} {:.2f}\n", cal.cutoff, cal.norm_floor, cal.a_max);
  }
  if (c.out.empty()) {
    fmt::print("{}", text);
    return 0;
  }
  std::ofstream out(c.out);
  if (!(out << text)) throw Error(ErrorKind::io, "cannot write " + c.out);
  fmt::print("wrote {}\n", c.out);
  return 0;
}

int cmd_baseline(const Common& c, const std::string& data) {
  const Dataset d = data.empty() ? generate(load_gen_spec(c)) : load_dataset(data);
  const auto b = fit_linear_baseline(d);
  fmt::print("linear baseline: validation {:.4f}  train {:.4f}  iterations {}  converged {}\n",
             b.validation_accuracy, b.train_accuracy, b.iterations, b.converged);
  return 0;
}

int cmd_gradcheck(const Common& c, int batch, double step, const std::string& kind) {
  exp::RunConfig rc = load_run(c);
  if (!kind.empty()) rc.kind = exp::network_kind_from_string(kind);
  const double a_max = rc.kind == exp::NetworkKind::hybrid ? exp::resolve_amax(rc) : 0.0;
  const Network net = exp::initial_network(rc, a_max);
  const Dataset d = rc.dataset.load();
  const SampleSet train = d.train();
  std::vector<std::size_t> idx(std::size_t(std::min<long>(batch, long(train.size()))));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto reports = gradient_check(net, train, idx, rc.train.l1_amplitude_weight, step);
  std::size_t bad = 0;
  double worst = 0.0;
  for (const auto& r : reports) {
    if (r.relative_error > 1e-3) ++bad;
    worst = std::max(worst, r.relative_error);
  }
  fmt::print("{} parameters, {} above 1e-3 relative error, worst {:.3e}\n", reports.size(), bad, worst);
  return bad * 100 <= reports.size() ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybridnn: hybrid continuous-variable quantum / classical network experiments"};
  app.require_subcommand(1);

  Common gen, tr, sw, no, rep, cal, base, grad;
  add_common(app.add_subcommand("gen-data", "generate the synthetic dataset (CSV + spec sidecar)"), gen, false, false);

  auto* train_cmd = app.add_subcommand("train", "train one network from a run config");
  add_common(train_cmd, tr, false, true);

  auto* sweep_cmd = app.add_subcommand("sweep", "run a grid of trainings and summarize");
  add_common(sweep_cmd, sw, true, true);

  auto* noise_cmd = app.add_subcommand("noise", "ENOB noise sweeps on a trained run");
  add_common(noise_cmd, no, true, false);
  std::string run_dir;
  int realizations = 0;
  noise_cmd->add_option("--run", run_dir, "run directory holding checkpoint.json")->required();
  noise_cmd->add_option("--realizations", realizations, "noise draws per ENOB value");

  auto* report_cmd = app.add_subcommand("report", "accuracy distributions of a sweep");
  add_common(report_cmd, rep, false, false);
  std::string sweep_dir;
  report_cmd->add_option("--sweep", sweep_dir, "sweep directory (default: --out)");

  auto* cal_cmd = app.add_subcommand("calibrate-amax", "largest safe encoding amplitude for a cutoff");
  add_common(cal_cmd, cal, false, true);
  double floor = 0.99;
  cal_cmd->add_option("--floor", floor, "minimum retained state norm")->check(CLI::Range(0.0, 1.0));
  std::vector<int> table;
  cal_cmd->add_option("--table", table, "cutoffs to tabulate (plain-text fixture, written to --out)")
      ->check(CLI::Range(2, 64));

  auto* base_cmd = app.add_subcommand("baseline", "linear baseline accuracy (well-trained threshold)");
  add_common(base_cmd, base, false, false);
  std::string data;
  base_cmd->add_option("--data", data, "dataset CSV (with spec sidecar)");

  auto* grad_cmd = app.add_subcommand("gradcheck", "analytic vs finite-difference gradient");
  add_common(grad_cmd, grad, false, true);
  int batch = 4;
  double step = 1e-4;
  std::string kind;
  grad_cmd->add_option("--batch", batch, "batch size")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--step", step, "central difference step");
  grad_cmd->add_option("--kind", kind, "hybrid or classical");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("gen-data")) return cmd_gen_data(gen);
    if (app.got_subcommand("train")) return cmd_train(tr);
    if (app.got_subcommand("sweep")) return cmd_sweep(sw);
    if (app.got_subcommand("noise")) return cmd_noise(no, run_dir, realizations);
    if (app.got_subcommand("report")) return cmd_report(rep, sweep_dir.empty() ? rep.out : sweep_dir);
    if (app.got_subcommand("calibrate-amax")) return cmd_calibrate(cal, floor, table);
    if (app.got_subcommand("baseline")) return cmd_baseline(base, data);
    if (app.got_subcommand("gradcheck")) return cmd_gradcheck(grad, batch, step, kind);
  } catch (const Error& e) {
    fmt::print(stderr, "error ({}): {}\n", to_string(e.kind()), e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
