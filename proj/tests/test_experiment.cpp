#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "hybridnn/error.hpp"
#include "hybridnn/experiment.hpp"
#include "hybridnn/report.hpp"

using namespace hybridnn;
using namespace hybridnn::exp;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hybridnn-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny_config(NetworkKind kind, std::uint64_t seed) {
  RunConfig c;
  c.kind = kind;
  c.shape = {8, 2, 1, 4, 5};
  c.train.epochs = 2;
  c.train.cutoff = 5;
  c.train.seed = seed;
  return c;
}

RunRecord record(const std::string& id, NetworkKind kind, long params, double acc,
                 RunStatus status = RunStatus::completed) {
  RunRecord r;
  r.run_id = id;
  r.kind = kind;
  r.param_count = params;
  r.best_validation_accuracy = acc;
  r.status = status;
  return r;
}

}  // namespace

TEST_CASE("run config JSON and hashing") {
  RunConfig c = tiny_config(NetworkKind::hybrid, 4);
  c.dataset.spec.seed = 11;
  const Json j = to_json(c);
  CHECK(j.at("schema") == "hybridnn.run/1");
  const RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);

  RunConfig other_seed = c;
  other_seed.train.seed = 5;
  CHECK(config_hash(other_seed) == config_hash(c));
  CHECK(run_id(other_seed) != run_id(c));
  CHECK(run_id(c) == config_hash(c) + "-s4");
  RunConfig other_lr = c;
  other_lr.train.learning_rate = 2e-3;
  CHECK(config_hash(other_lr) != config_hash(c));

  auto error_text = [](Json bad) -> std::string {
    try {
      (void)run_config_from_json(bad);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::configuration);
      return e.what();
    }
    return "";
  };
  Json unknown = j;
  unknown["train"]["momentum"] = 0.9;
  CHECK(error_text(unknown).find("momentum") != std::string::npos);
  Json wrong_type = j;
  wrong_type["shape"]["modes"] = "two";
  CHECK(error_text(wrong_type).find("modes") != std::string::npos);
  Json bad_kind = j;
  bad_kind["kind"] = "photonic";
  CHECK(error_text(bad_kind).find("kind") != std::string::npos);

  const fs::path dir = scratch_dir("config");
  Json with_csv = j;
  with_csv["dataset"] = Json{{"csv", "data/d.csv"}};
  std::ofstream(dir / "run.json") << with_csv.dump(2);
  CHECK(*load_run_config(dir / "run.json").dataset.csv == dir / "data/d.csv");
  CHECK_THROWS_AS(load_run_config(dir / "absent.json"), Error);
  fs::remove_all(dir);
}

TEST_CASE("a run writes identical artifacts modulo wall time") {
  const fs::path root = scratch_dir("run");
  const RunConfig hybrid = tiny_config(NetworkKind::hybrid, 3);
  const RunRecord a = execute_run(hybrid, root / "a");
  const RunRecord b = execute_run(hybrid, root / "b");
  CHECK(a.status == RunStatus::completed);
  CHECK(a.param_count == 118);
  CHECK(a.updates_per_epoch == 22);
  CHECK(a.run_id == run_id(hybrid));
  CHECK(a.a_max == doctest::Approx(0.40));
  CHECK(a.best_validation_accuracy >= 0.0);
  CHECK(a.best_validation_accuracy <= 1.0);

  Json ja = to_json(a), jb = to_json(b);
  ja.erase("wall_time_seconds");
  jb.erase("wall_time_seconds");
  CHECK(ja == jb);
  for (const char* f : {"checkpoint.json", "history.csv"}) {
    CHECK(slurp(root / "a" / a.run_id / f) == slurp(root / "b" / b.run_id / f));
  }
  const RunRecord read = read_run_record(root / "a" / a.run_id);
  CHECK(to_json(read) == to_json(a));

  const auto history = read_history_csv(root / "a" / a.run_id / "history.csv");
  REQUIRE(history.size() == 2);
  CHECK(history[1].epoch == 2);
  CHECK(slurp(root / "a" / a.run_id / "history.csv").rfind("# hybridnn.history/1\nepoch,train_acc,val_acc,train_loss\n", 0) == 0);

  const Checkpoint cp = read_checkpoint(root / "a" / a.run_id / "checkpoint.json");
  CHECK(to_json(cp.config) == to_json(hybrid));
  CHECK(param_count(cp.best) == 118);
  CHECK(cp.optimizer.t == 44);
  CHECK(accuracy(cp.best, hybrid.dataset.load().validation()) == a.best_validation_accuracy);
  const fs::path copy = root / "copy.json";
  write_checkpoint(copy, cp);
  CHECK(slurp(copy) == slurp(root / "a" / a.run_id / "checkpoint.json"));
  CHECK_THROWS_AS(read_checkpoint(root / "nope.json"), Error);

  const RunRecord c = execute_run(tiny_config(NetworkKind::classical, 3), root / "a");
  CHECK(c.param_count == 124);
  CHECK(c.a_max == 0.0);
  fs::remove_all(root);
}

TEST_CASE("summary statistics and accounting") {
  const std::vector<RunRecord> recs{
      record("h1", NetworkKind::hybrid, 118, 0.86), record("h2", NetworkKind::hybrid, 118, 0.80),
      record("h3", NetworkKind::hybrid, 118, 0.70), record("h4", NetworkKind::hybrid, 118, 0.0, RunStatus::failed),
      record("c1", NetworkKind::classical, 124, 0.78), record("c2", NetworkKind::classical, 124, 0.25),
      record("c3", NetworkKind::classical, 124, 0.72), record("d1", NetworkKind::classical, 200, 0.9)};
  const SweepSummary s = summarize(recs, 0.72);
  REQUIRE(s.rows.size() == 3);
  CHECK(s.run_count == 8);
  const SummaryRow& h = s.rows[0];
  CHECK(h.kind == NetworkKind::hybrid);
  CHECK(h.runs == 4);
  CHECK(h.well_trained == 2);
  CHECK(h.well_trained_mean == doctest::Approx(0.83));
  CHECK(h.well_trained_std == doctest::Approx(0.03));
  CHECK(h.poorly_trained_fraction == doctest::Approx(0.5));
  CHECK(h.failed_fraction == doctest::Approx(0.25));
  const SummaryRow& c = s.rows[1];
  CHECK(c.kind == NetworkKind::classical);
  CHECK(c.param_count == 124);
  CHECK(c.well_trained == 1);
  CHECK(c.poorly_trained_fraction == doctest::Approx(2.0 / 3.0));  // 0.72 is at the threshold
  CHECK(c.failed_fraction == doctest::Approx(1.0 / 3.0));
  for (const auto& row : s.rows) {
    CHECK(row.poorly_trained_fraction >= row.failed_fraction);
    CHECK(row.poorly_trained_fraction <= 1.0);
  }
  CHECK(s.rows[2].well_trained_std == 0.0);

  CHECK(run_checksum({"b", "a", "c"}) == run_checksum({"c", "a", "b"}));
  CHECK(run_checksum({"a", "b"}) != run_checksum({"a", "b", "b"}));
  CHECK(s.run_checksum == run_checksum({"h1", "h2", "h3", "h4", "c1", "c2", "c3", "d1"}));

  const SweepSummary empty = summarize({}, 0.7);
  CHECK(empty.rows.empty());
  CHECK(empty.run_count == 0);
  const Json j = to_json(s);
  CHECK(j.at("run_count") == 8);
}

TEST_CASE("sweeps are resumable and idempotent") {
  const fs::path dir = scratch_dir("sweep");
  SweepGrid grid;
  grid.train.epochs = 1;
  grid.entries.push_back({NetworkKind::hybrid, {2}, {1}, {5}, 2, 1});
  grid.entries.push_back({NetworkKind::classical, {2}, {1}, {}, 2, 1});
  CHECK(grid.expand().size() == 4);
  CHECK(sweep_grid_from_json(to_json(grid)).expand().size() == 4);

  int seen = 0;
  const SweepResult first = run_sweep(grid, dir, 2, [&](const RunRecord&) { ++seen; });
  CHECK(seen == 4);
  CHECK(first.resumed == 0);
  CHECK(first.records.size() == 4);
  CHECK(first.summary.run_count == 4);
  CHECK(first.summary.threshold == fit_linear_baseline(grid.dataset.load()).validation_accuracy);
  for (const char* f : {"grid.json", "records.csv", "summary.json", "summary.csv"}) CHECK(fs::exists(dir / f));
  const std::string summary_json = slurp(dir / "summary.json");
  const std::string records_csv = slurp(dir / "records.csv");
  CHECK(records_csv.rfind("# hybridnn.records/1\n", 0) == 0);
  CHECK(slurp(dir / "summary.csv").rfind("# hybridnn.summary/1\n", 0) == 0);

  const SweepResult again = run_sweep(grid, dir, 1);
  CHECK(again.resumed == 4);
  CHECK(slurp(dir / "summary.json") == summary_json);
  CHECK(slurp(dir / "records.csv") == records_csv);
  CHECK(collect_records(dir).size() == 4);

  // A lost record is rerun and reproduced exactly.
  fs::remove(dir / "runs" / first.records[0].run_id / "record.json");
  const SweepResult healed = run_sweep(grid, dir, 1);
  CHECK(healed.resumed == 3);
  CHECK(slurp(dir / "records.csv") == records_csv);

  const fs::path empty_dir = scratch_dir("sweep-empty");
  SweepGrid none;
  const SweepResult e = run_sweep(none, empty_dir, 1);
  CHECK(e.records.empty());
  CHECK(e.summary.rows.empty());
  CHECK(fs::exists(empty_dir / "summary.json"));

  const SweepGrid shipped = load_sweep_grid(HYBRIDNN_CONFIGS "/grid_desk.json");
  CHECK(to_json(shipped) == to_json(SweepGrid::desk_default()));
  CHECK(load_run_config(HYBRIDNN_CONFIGS "/run_hybrid.json").dataset.spec.seed == 3);
  CHECK(load_run_config(HYBRIDNN_CONFIGS "/run_classical.json").kind == NetworkKind::classical);

  SweepGrid desk = SweepGrid::desk_default();
  int hybrids = 0, classicals = 0;
  for (const auto& c : desk.expand()) (c.kind == NetworkKind::hybrid ? hybrids : classicals)++;
  CHECK(hybrids == 2 * 2 * 2 * 5);
  CHECK(classicals == 2 * 2 * 10);
  fs::remove_all(dir);
  fs::remove_all(empty_dir);
}

TEST_CASE("noise study on a stored run") {
  const fs::path root = scratch_dir("noise-study");
  const RunRecord h = execute_run(tiny_config(NetworkKind::hybrid, 2), root);
  const RunRecord c = execute_run(tiny_config(NetworkKind::classical, 2), root);

  NoiseStudyConfig cfg;
  cfg.grid = {1.0, 6.0, noise::kInfinitePrecision};
  cfg.realizations = 3;
  cfg.groups = std::vector<noise::NoiseGroup>{noise::NoiseGroup::kerr};
  CHECK(to_json(noise_study_config_from_json(to_json(cfg))) == to_json(cfg));

  const NoiseStudy study = run_noise_study(root / h.run_id, cfg, root / "hn", 2);
  CHECK(study.record_accuracy == h.best_validation_accuracy);
  REQUIRE(study.curves.size() == 2);
  CHECK(study.curves[0].noiseless_accuracy == h.best_validation_accuracy);
  CHECK(study.curves[0].points.back().mean == h.best_validation_accuracy);
  std::ifstream raw(root / "hn" / "noise_raw.csv");
  int rows = 0;
  for (std::string line; std::getline(raw, line);) rows += !line.empty() && line[0] != '#' && line.rfind("group", 0) != 0;
  CHECK(rows == 2 * 3 * 3);
  CHECK(fs::exists(root / "hn" / "noise_aggregate.csv"));
  CHECK(fs::exists(root / "hn" / "noise.svg"));

  try {
    (void)run_noise_study(root / c.run_id, cfg, root / "cn", 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
  }
  try {
    (void)run_noise_study(root / "missing-run", cfg, root / "mn", 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::not_found);
  }
  fs::remove_all(root);
}

TEST_CASE("KDE") {
  using report::gaussian_kde;
  CHECK_FALSE(gaussian_kde({0.8}).has_value());
  CHECK_FALSE(gaussian_kde({0.5, 0.5, 0.5}).has_value());
  CHECK(report::silverman_bandwidth({0.5, 0.5}) == 0.0);

  const std::vector<double> acc{0.86, 0.79, 0.69, 0.80, 0.78, 0.76, 0.87, 0.84, 0.76, 0.77};
  const auto kde = gaussian_kde(acc);
  REQUIRE(kde.has_value());
  CHECK(kde->x.size() == 257);
  CHECK(std::abs(report::simpson(kde->x, kde->density) - 1.0) < 1e-3);
  CHECK(kde->x.front() == doctest::Approx(0.69 - 5 * kde->bandwidth));

  // Silverman: 0.9 * min(sd, IQR / 1.34) * n^(-1/5), sample sd.
  const std::vector<double> s{1, 2, 3, 4, 10};
  const double sd = std::sqrt((9.0 + 4 + 1 + 0 + 36) / 4.0 - 0.0);  // mean 4
  const double iqr = 4.0 - 2.0;
  CHECK(report::silverman_bandwidth(s) == doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(5.0, -0.2)));

  std::vector<double> x, y;
  for (int i = 0; i <= 10; ++i) {
    x.push_back(i * 0.1);
    y.push_back(x.back() * x.back());
  }
  CHECK(report::simpson(x, y) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  x.pop_back();
  y.pop_back();
  CHECK_THROWS_AS(report::simpson(x, y), Error);
}

TEST_CASE("report from records and from a sweep directory") {
  const std::vector<RunRecord> recs{record("h1", NetworkKind::hybrid, 118, 0.86),
                                    record("h2", NetworkKind::hybrid, 118, 0.75),
                                    record("c1", NetworkKind::classical, 124, 0.70),
                                    record("c2", NetworkKind::classical, 124, 0.0, RunStatus::failed),
                                    record("x1", NetworkKind::classical, 60, 0.5)};
  const report::Report r = report::build_report(recs, 0.72);
  REQUIRE(r.distributions.size() == 3);
  const auto& single = r.distributions[1];
  CHECK(single.param_count == 60);
  CHECK(single.accuracies == std::vector<double>{0.5});
  CHECK_FALSE(single.kde.has_value());
  CHECK(r.distributions[2].accuracies.size() == 2);
  CHECK(r.distributions[2].kde.has_value());
  const std::string svg = report::violins_svg(r);
  CHECK(svg.rfind("<svg", 0) == 0);

  const fs::path dir = scratch_dir("report");
  SweepGrid grid;
  grid.train.epochs = 1;
  grid.entries.push_back({NetworkKind::classical, {2}, {1}, {}, 3, 1});
  (void)run_sweep(grid, dir, 1);
  const report::Report a = report::write_report(dir);
  const std::string acc_csv = slurp(dir / "report" / "accuracies.csv");
  const std::string kde_csv = slurp(dir / "report" / "kde.csv");
  (void)report::write_report(dir);
  CHECK(slurp(dir / "report" / "accuracies.csv") == acc_csv);
  CHECK(slurp(dir / "report" / "kde.csv") == kde_csv);
  CHECK(acc_csv.rfind("# hybridnn.report-accuracies/1\n", 0) == 0);
  CHECK(fs::exists(dir / "report" / "summary.csv"));
  CHECK(fs::exists(dir / "report" / "violins.svg"));
  CHECK(a.summary.run_count == 3);
  fs::remove_all(dir);
}
