#include "hybridnn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "hybridnn/error.hpp"
#include "hybridnn/rng.hpp"

namespace hybridnn::exp {
namespace fs = std::filesystem;

namespace {

Error config_error(const std::string& key, const std::string& what) {
  return Error(ErrorKind::configuration, fmt::format("field '{}': {}", key, what));
}

/// Strict object reader: every key must be consumed or listed as known.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw config_error(where_, "expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      j_.at(key).get_to(out);
    } catch (const nlohmann::json::exception&) {
      throw config_error(path(key), "wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const Json& at(const char* key) const { return j_.at(key); }
  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void reject_unknown(std::initializer_list<const char*> known) const {
    for (const auto& item : j_.items()) {
      if (std::none_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; })) {
        throw config_error(path(item.key().c_str()), "unknown field");
      }
    }
  }

 private:
  const Json& j_;
  std::string where_;
};

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::not_found, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::configuration, path.string() + ": invalid JSON: " + e.what());
  }
}

/// Write then rename, so readers never see a partial file.
void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorKind::io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Json shape_to_json(const cvqnn::NetworkShape& s) {
  Json j;
  j["inputs"] = s.inputs;
  j["modes"] = s.modes;
  j["layers"] = s.layers;
  j["outputs"] = s.outputs;
  j["cutoff"] = s.cutoff;
  return j;
}

cvqnn::NetworkShape shape_from_json(const Json& j, const std::string& where) {
  Fields f(j, where);
  f.reject_unknown({"inputs", "modes", "layers", "outputs", "cutoff"});
  cvqnn::NetworkShape s;
  f.read("inputs", s.inputs);
  f.read("modes", s.modes);
  f.read("layers", s.layers);
  f.read("outputs", s.outputs);
  f.read("cutoff", s.cutoff);
  return s;
}

Json train_to_json(const TrainConfig& t, bool with_seed) {
  Json j;
  j["learning_rate"] = t.learning_rate;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["l1_amplitude_weight"] = t.l1_amplitude_weight;
  if (with_seed) j["seed"] = t.seed;
  j["a_max"] = t.a_max;
  return j;
}

void train_from_json(const Json& j, const std::string& where, TrainConfig& t) {
  Fields f(j, where);
  f.reject_unknown({"learning_rate", "batch_size", "epochs", "l1_amplitude_weight", "seed", "a_max"});
  f.read("learning_rate", t.learning_rate);
  f.read("batch_size", t.batch_size);
  f.read("epochs", t.epochs);
  f.read("l1_amplitude_weight", t.l1_amplitude_weight);
  f.read("seed", t.seed);
  f.read("a_max", t.a_max);
}

Json dataset_to_json(const DatasetSource& d) {
  Json j;
  if (d.csv) {
    j["csv"] = d.csv->generic_string();
  } else {
    j["spec"] = Json::parse(gen_spec_to_json(d.spec));
  }
  return j;
}

DatasetSource dataset_from_json(const Json& j, const std::string& where, const fs::path& base) {
  Fields f(j, where);
  f.reject_unknown({"csv", "spec"});
  DatasetSource d;
  if (f.has("csv") && f.has("spec")) throw config_error(where, "give either 'csv' or 'spec', not both");
  if (f.has("csv")) {
    std::string p;
    f.read("csv", p);
    fs::path path(p);
    d.csv = path.is_relative() && !base.empty() ? base / path : path;
  } else if (f.has("spec")) {
    d.spec = gen_spec_from_json(f.at("spec").dump());
  }
  return d;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Eigen::VectorXd vector_from_json(const Json& a, const std::string& where) {
  if (!a.is_array()) throw Error(ErrorKind::io, "checkpoint '" + where + "' is not an array");
  Eigen::VectorXd v(Eigen::Index(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[Eigen::Index(i)] = a[i].get<double>();
  return v;
}

Network empty_network(const RunConfig& config, double a_max) {
  if (config.kind == NetworkKind::hybrid) return HybridNetwork::zeros(config.shape, a_max);
  return build_classical_twin(config.shape);
}

Network network_from_flat(const RunConfig& config, double a_max, const Eigen::VectorXd& flat) {
  Network n = empty_network(config, a_max);
  if (flat.size() != param_count(n)) {
    throw Error(ErrorKind::shape, fmt::format("checkpoint holds {} parameters, shape needs {}",
                                              flat.size(), param_count(n)));
  }
  set_flat_params(n, flat);
  return n;
}

double calibrated_amax(int cutoff, double floor) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, double> cache;
  std::lock_guard lock(mutex);
  const auto key = std::make_pair(cutoff, floor);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const double a = cvqnn::calibrate_amax(cutoff, floor).a_max;
  cache.emplace(key, a);
  return a;
}

RunRecord execute_run_on(const RunConfig& config, const Dataset& dataset, const fs::path& out_root,
                         const EpochCallback& on_epoch) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.run_id = run_id(config);
  rec.kind = config.kind;
  rec.shape = config.shape;
  rec.seed = config.train.seed;
  rec.config_hash = config_hash(config);
  rec.history_file = "history.csv";

  const fs::path dir = out_root / rec.run_id;
  fs::create_directories(dir);

  try {
    const double a_max = config.kind == NetworkKind::hybrid ? resolve_amax(config) : 0.0;
    rec.a_max = a_max;
    const Network init = initial_network(config, a_max);
    rec.param_count = param_count(init);
    TrainConfig tc = config.train;
    tc.cutoff = config.shape.cutoff;
    tc.a_max = a_max;
    TrainResult result = train(init, dataset, tc, on_epoch);
    rec.best_validation_accuracy = result.best_validation_accuracy;
    rec.best_epoch = result.best_epoch;
    rec.final_validation_accuracy =
        result.history.empty() ? 0.0 : result.history.back().validation_accuracy;
    rec.updates_per_epoch = result.updates_per_epoch;
    write_history_csv(dir / rec.history_file, result.history);
    write_checkpoint(dir / "checkpoint.json",
                     Checkpoint{config, std::move(result.best_network),
                                std::move(result.final_network), std::move(result.optimizer)});
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    rec.status = RunStatus::failed;
    rec.error = fmt::format("{}: {}", to_string(e.kind()), e.what());
  }
  rec.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text_atomic(dir / "record.json", to_json(rec).dump(2) + "\n");
  return rec;
}

}  // namespace

const char* to_string(NetworkKind k) { return k == NetworkKind::hybrid ? "hybrid" : "classical"; }

NetworkKind network_kind_from_string(const std::string& name) {
  if (name == "hybrid") return NetworkKind::hybrid;
  if (name == "classical") return NetworkKind::classical;
  throw Error(ErrorKind::configuration, "field 'kind': unknown network kind '" + name + "'");
}

Dataset DatasetSource::load() const { return csv ? load_dataset(*csv) : generate(spec); }

void RunConfig::validate() const {
  shape.validate();
  TrainConfig t = train;
  t.cutoff = shape.cutoff;
  t.validate();
  if (train.a_max < 0.0) throw config_error("train.a_max", "must be >= 0");
  if (!(norm_floor > 0.0 && norm_floor < 1.0)) throw config_error("norm_floor", "must lie in (0, 1)");
  if (!dataset.csv) dataset.spec.validate();
}

Json to_json(const RunConfig& c) {
  Json j;
  j["schema"] = "hybridnn.run/1";
  j["kind"] = to_string(c.kind);
  j["shape"] = shape_to_json(c.shape);
  j["train"] = train_to_json(c.train, true);
  j["norm_floor"] = c.norm_floor;
  j["dataset"] = dataset_to_json(c.dataset);
  return j;
}

namespace {

RunConfig run_config_from_json_at(const Json& j, const fs::path& base) {
  Fields f(j, "");
  f.reject_unknown({"schema", "kind", "shape", "train", "norm_floor", "dataset"});
  RunConfig c;
  std::string kind = "hybrid";
  f.read("kind", kind);
  c.kind = network_kind_from_string(kind);
  if (f.has("shape")) c.shape = shape_from_json(f.at("shape"), "shape");
  if (f.has("train")) train_from_json(f.at("train"), "train", c.train);
  f.read("norm_floor", c.norm_floor);
  if (f.has("dataset")) c.dataset = dataset_from_json(f.at("dataset"), "dataset", base);
  c.train.cutoff = c.shape.cutoff;
  c.validate();
  return c;
}

}  // namespace

RunConfig run_config_from_json(const Json& j) { return run_config_from_json_at(j, {}); }

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json_at(read_json_file(path), path.parent_path());
}

std::string config_hash(const RunConfig& config) {
  Json j = to_json(config);
  j["train"].erase("seed");
  return fmt::format("{:016x}", fnv1a(j.dump()));
}

std::string run_id(const RunConfig& config) {
  return fmt::format("{}-s{}", config_hash(config), config.train.seed);
}

Json to_json(const RunRecord& r) {
  Json j;
  j["schema"] = "hybridnn.record/1";
  j["run_id"] = r.run_id;
  j["kind"] = to_string(r.kind);
  j["shape"] = shape_to_json(r.shape);
  j["param_count"] = r.param_count;
  j["seed"] = r.seed;
  j["status"] = r.status == RunStatus::completed ? "completed" : "failed";
  j["error"] = r.error;
  j["best_validation_accuracy"] = r.best_validation_accuracy;
  j["best_epoch"] = r.best_epoch;
  j["final_validation_accuracy"] = r.final_validation_accuracy;
  j["a_max"] = r.a_max;
  j["updates_per_epoch"] = r.updates_per_epoch;
  j["history_file"] = r.history_file;
  j["config_hash"] = r.config_hash;
  j["wall_time_seconds"] = r.wall_time_seconds;
  return j;
}

RunRecord run_record_from_json(const Json& j) {
  Fields f(j, "");
  RunRecord r;
  std::string kind, status;
  f.read("run_id", r.run_id);
  f.read("kind", kind);
  r.kind = network_kind_from_string(kind);
  if (f.has("shape")) r.shape = shape_from_json(f.at("shape"), "shape");
  f.read("param_count", r.param_count);
  f.read("seed", r.seed);
  f.read("status", status);
  if (status != "completed" && status != "failed") throw config_error("status", "unknown value '" + status + "'");
  r.status = status == "completed" ? RunStatus::completed : RunStatus::failed;
  f.read("error", r.error);
  f.read("best_validation_accuracy", r.best_validation_accuracy);
  f.read("best_epoch", r.best_epoch);
  f.read("final_validation_accuracy", r.final_validation_accuracy);
  f.read("a_max", r.a_max);
  f.read("updates_per_epoch", r.updates_per_epoch);
  f.read("history_file", r.history_file);
  f.read("config_hash", r.config_hash);
  f.read("wall_time_seconds", r.wall_time_seconds);
  return r;
}

void write_checkpoint(const fs::path& path, const Checkpoint& c) {
  Json j;
  j["schema"] = "hybridnn.checkpoint/1";
  j["config"] = to_json(c.config);
  j["kind"] = kind_name(c.best);
  j["a_max"] = amplitude_bound(c.best);
  j["best"] = vector_to_json(flat_params(c.best));
  j["final"] = vector_to_json(flat_params(c.final));
  Json adam;
  adam["t"] = c.optimizer.t;
  adam["m"] = vector_to_json(c.optimizer.m);
  adam["v"] = vector_to_json(c.optimizer.v);
  j["adam"] = std::move(adam);
  write_text_atomic(path, j.dump() + "\n");
}

Checkpoint read_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::not_found, "missing checkpoint " + path.string());
  const Json j = read_json_file(path);
  try {
    Checkpoint c;
    c.config = run_config_from_json(j.at("config"));
    const double a_max = j.at("a_max").get<double>();
    c.best = network_from_flat(c.config, a_max, vector_from_json(j.at("best"), "best"));
    c.final = network_from_flat(c.config, a_max, vector_from_json(j.at("final"), "final"));
    c.optimizer.t = j.at("adam").at("t").get<long>();
    c.optimizer.m = vector_from_json(j.at("adam").at("m"), "adam.m");
    c.optimizer.v = vector_from_json(j.at("adam").at("v"), "adam.v");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, path.string() + ": malformed checkpoint: " + e.what());
  }
}

void write_history_csv(const fs::path& path, const std::vector<EpochRecord>& history) {
  std::string text = "# hybridnn.history/1\nepoch,train_acc,val_acc,train_loss\n";
  for (const auto& e : history) {
    text += fmt::format("{},{},{},{}\n", e.epoch, e.train_accuracy, e.validation_accuracy, e.train_loss);
  }
  write_text_atomic(path, text);
}

std::vector<EpochRecord> read_history_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::not_found, "cannot open " + path.string());
  std::vector<EpochRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
    std::istringstream ss(line);
    EpochRecord e;
    char c1, c2, c3;
    if (!(ss >> e.epoch >> c1 >> e.train_accuracy >> c2 >> e.validation_accuracy >> c3 >> e.train_loss)) {
      throw Error(ErrorKind::io, path.string() + ": malformed history line '" + line + "'");
    }
    out.push_back(e);
  }
  return out;
}

Network initial_network(const RunConfig& config, double a_max) {
  Rng rng(config.train.seed, "init");
  if (config.kind == NetworkKind::hybrid) return HybridNetwork::random(config.shape, a_max, rng);
  return random_classical_twin(config.shape, rng);
}

double resolve_amax(const RunConfig& config) {
  if (config.train.a_max > 0.0) return config.train.a_max;
  return calibrated_amax(config.shape.cutoff, config.norm_floor);
}

RunRecord execute_run(const RunConfig& config, const fs::path& out_root, const EpochCallback& on_epoch) {
  config.validate();
  return execute_run_on(config, config.dataset.load(), out_root, on_epoch);
}

RunRecord read_run_record(const fs::path& run_dir) {
  return run_record_from_json(read_json_file(run_dir / "record.json"));
}

SweepGrid SweepGrid::desk_default() {
  SweepGrid g;
  g.entries.push_back({NetworkKind::hybrid, {2, 3}, {1, 2}, {5, 7}, 5, 1});
  g.entries.push_back({NetworkKind::classical, {2, 3}, {1, 2}, {}, 10, 1});
  return g;
}

std::vector<RunConfig> SweepGrid::expand() const {
  std::vector<RunConfig> out;
  for (const auto& e : entries) {
    const std::vector<int> cutoffs =
        e.kind == NetworkKind::hybrid ? e.cutoffs : std::vector<int>{train.cutoff};
    for (int m : e.modes) {
      for (int l : e.layers) {
        for (int d : cutoffs) {
          for (int s = 0; s < e.seeds; ++s) {
            RunConfig c;
            c.kind = e.kind;
            c.shape = {inputs, m, l, outputs, d};
            c.train = train;
            c.train.cutoff = d;
            c.train.seed = e.first_seed + std::uint64_t(s);
            c.norm_floor = norm_floor;
            c.dataset = dataset;
            out.push_back(std::move(c));
          }
        }
      }
    }
  }
  return out;
}

Json to_json(const SweepGrid& g) {
  Json j;
  j["schema"] = "hybridnn.grid/1";
  j["inputs"] = g.inputs;
  j["outputs"] = g.outputs;
  Json t = train_to_json(g.train, false);
  t["cutoff"] = g.train.cutoff;
  j["train"] = std::move(t);
  j["norm_floor"] = g.norm_floor;
  j["dataset"] = dataset_to_json(g.dataset);
  Json entries = Json::array();
  for (const auto& e : g.entries) {
    Json je;
    je["kind"] = to_string(e.kind);
    je["modes"] = e.modes;
    je["layers"] = e.layers;
    if (e.kind == NetworkKind::hybrid) je["cutoffs"] = e.cutoffs;
    je["seeds"] = e.seeds;
    je["first_seed"] = e.first_seed;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  return j;
}

namespace {

SweepGrid sweep_grid_from_json_at(const Json& j, const fs::path& base) {
  Fields f(j, "");
  f.reject_unknown({"schema", "inputs", "outputs", "train", "norm_floor", "dataset", "entries"});
  SweepGrid g;
  f.read("inputs", g.inputs);
  f.read("outputs", g.outputs);
  if (f.has("train")) {
    Json t = f.at("train");
    if (t.is_object() && t.contains("cutoff")) {
      try {
        g.train.cutoff = t.at("cutoff").get<int>();
      } catch (const nlohmann::json::exception&) {
        throw config_error("train.cutoff", "wrong type");
      }
      t.erase("cutoff");
    }
    train_from_json(t, "train", g.train);
  }
  f.read("norm_floor", g.norm_floor);
  if (f.has("dataset")) g.dataset = dataset_from_json(f.at("dataset"), "dataset", base);
  if (f.has("entries")) {
    const Json& arr = f.at("entries");
    if (!arr.is_array()) throw config_error("entries", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = fmt::format("entries[{}]", i);
      Fields fe(arr[i], where);
      fe.reject_unknown({"kind", "modes", "layers", "cutoffs", "seeds", "first_seed"});
      GridEntry e;
      std::string kind = "hybrid";
      fe.read("kind", kind);
      e.kind = network_kind_from_string(kind);
      fe.read("modes", e.modes);
      fe.read("layers", e.layers);
      fe.read("cutoffs", e.cutoffs);
      fe.read("seeds", e.seeds);
      fe.read("first_seed", e.first_seed);
      if (e.seeds < 0) throw config_error(where + ".seeds", "must be >= 0");
      if (e.kind == NetworkKind::hybrid && e.cutoffs.empty()) e.cutoffs = {g.train.cutoff};
      g.entries.push_back(std::move(e));
    }
  }
  for (const auto& c : g.expand()) c.validate();
  return g;
}

}  // namespace

SweepGrid sweep_grid_from_json(const Json& j) { return sweep_grid_from_json_at(j, {}); }

SweepGrid load_sweep_grid(const fs::path& path) {
  return sweep_grid_from_json_at(read_json_file(path), path.parent_path());
}

std::string run_checksum(std::vector<std::string> run_ids) {
  std::sort(run_ids.begin(), run_ids.end());
  std::string joined;
  for (const auto& id : run_ids) joined += id + "\n";
  return fmt::format("{:016x}", fnv1a(joined));
}

SweepSummary summarize(const std::vector<RunRecord>& records, double threshold) {
  SweepSummary s;
  s.threshold = threshold;
  s.run_count = records.size();
  std::map<std::pair<int, long>, std::vector<const RunRecord*>> groups;
  std::vector<std::string> ids;
  for (const auto& r : records) {
    groups[{int(r.kind), r.param_count}].push_back(&r);
    ids.push_back(r.run_id);
  }
  s.run_checksum = run_checksum(std::move(ids));
  for (const auto& [key, runs] : groups) {
    SummaryRow row;
    row.kind = NetworkKind(key.first);
    row.param_count = key.second;
    row.runs = int(runs.size());
    std::vector<double> good;
    int poor = 0, failed = 0;
    for (const RunRecord* r : runs) {
      const bool ok = r->status == RunStatus::completed;
      const double acc = ok ? r->best_validation_accuracy : 0.0;
      if (ok && acc > threshold) {
        good.push_back(acc);
      } else {
        ++poor;
      }
      if (!ok || acc <= kFailedAccuracy) ++failed;
    }
    row.well_trained = int(good.size());
    if (!good.empty()) {
      double sum = 0.0;
      for (double a : good) sum += a;
      row.well_trained_mean = sum / double(good.size());
      double var = 0.0;
      for (double a : good) var += (a - row.well_trained_mean) * (a - row.well_trained_mean);
      row.well_trained_std = std::sqrt(var / double(good.size()));
    }
    row.poorly_trained_fraction = double(poor) / double(row.runs);
    row.failed_fraction = double(failed) / double(row.runs);
    s.rows.push_back(row);
  }
  return s;
}

Json to_json(const SweepSummary& s) {
  Json j;
  j["schema"] = "hybridnn.summary/1";
  j["threshold"] = s.threshold;
  j["failed_accuracy"] = kFailedAccuracy;
  j["run_count"] = s.run_count;
  j["run_checksum"] = s.run_checksum;
  Json rows = Json::array();
  for (const auto& r : s.rows) {
    Json jr;
    jr["kind"] = to_string(r.kind);
    jr["param_count"] = r.param_count;
    jr["runs"] = r.runs;
    jr["well_trained"] = r.well_trained;
    jr["well_trained_mean"] = r.well_trained_mean;
    jr["well_trained_std"] = r.well_trained_std;
    jr["poorly_trained_fraction"] = r.poorly_trained_fraction;
    jr["failed_fraction"] = r.failed_fraction;
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  return j;
}

void write_summary_csv(const fs::path& path, const SweepSummary& s) {
  std::string text =
      "# hybridnn.summary/1\n"
      "kind,param_count,runs,well_trained,well_trained_mean,well_trained_std,"
      "poorly_trained_fraction,failed_fraction\n";
  for (const auto& r : s.rows) {
    text += fmt::format("{},{},{},{},{},{},{},{}\n", to_string(r.kind), r.param_count, r.runs,
                        r.well_trained, r.well_trained_mean, r.well_trained_std,
                        r.poorly_trained_fraction, r.failed_fraction);
  }
  write_text_atomic(path, text);
}

std::vector<RunRecord> collect_records(const fs::path& sweep_dir) {
  std::vector<RunRecord> out;
  const fs::path runs = sweep_dir / "runs";
  if (!fs::exists(runs)) return out;
  for (const auto& entry : fs::directory_iterator(runs)) {
    if (entry.is_directory() && fs::exists(entry.path() / "record.json")) {
      out.push_back(read_run_record(entry.path()));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.run_id < b.run_id; });
  return out;
}

SweepResult run_sweep(const SweepGrid& grid, const fs::path& out_dir, int jobs,
                      const std::function<void(const RunRecord&)>& on_run) {
  const auto configs = grid.expand();
  const fs::path runs_dir = out_dir / "runs";
  fs::create_directories(runs_dir);
  write_text_atomic(out_dir / "grid.json", to_json(grid).dump(2) + "\n");

  const Dataset dataset = grid.dataset.load();
  const double threshold = fit_linear_baseline(dataset).validation_accuracy;

  SweepResult result;
  std::vector<RunRecord> records(configs.size());
  std::vector<bool> done(configs.size(), false);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const fs::path rec_path = runs_dir / run_id(configs[i]) / "record.json";
    if (fs::exists(rec_path)) {
      RunRecord r = read_run_record(rec_path.parent_path());
      if (r.status == RunStatus::completed && r.config_hash == config_hash(configs[i])) {
        records[i] = std::move(r);
        done[i] = true;
        ++result.resumed;
      }
    }
  }

  std::mutex writer;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      if (done[i]) continue;
      try {
        RunRecord r = execute_run_on(configs[i], dataset, runs_dir, {});
        std::lock_guard lock(writer);
        if (on_run) on_run(r);
        records[i] = std::move(r);
      } catch (...) {
        std::lock_guard lock(writer);
        if (!failure) failure = std::current_exception();
        next = configs.size();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, int(configs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.run_id < b.run_id; });
  records.erase(std::unique(records.begin(), records.end(),
                            [](const auto& a, const auto& b) { return a.run_id == b.run_id; }),
                records.end());
  result.summary = summarize(records, threshold);

  std::string csv =
      "# hybridnn.records/1\n"
      "run_id,kind,inputs,modes,layers,outputs,cutoff,param_count,seed,status,"
      "best_val_acc,best_epoch,final_val_acc\n";
  for (const auto& r : records) {
    csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.run_id, to_string(r.kind),
                       r.shape.inputs, r.shape.modes, r.shape.layers, r.shape.outputs,
                       r.shape.cutoff, r.param_count, r.seed,
                       r.status == RunStatus::completed ? "completed" : "failed",
                       r.best_validation_accuracy, r.best_epoch, r.final_validation_accuracy);
  }
  write_text_atomic(out_dir / "records.csv", csv);
  write_text_atomic(out_dir / "summary.json", to_json(result.summary).dump(2) + "\n");
  write_summary_csv(out_dir / "summary.csv", result.summary);
  result.records = std::move(records);
  return result;
}

Json to_json(const NoiseStudyConfig& c) {
  Json j;
  j["schema"] = "hybridnn.noise-study/1";
  j["grid"] = c.grid;
  j["realizations"] = c.realizations;
  j["seed"] = c.seed;
  j["whole_network"] = c.whole_network;
  if (c.groups) {
    Json g = Json::array();
    for (auto group : *c.groups) g.push_back(noise::to_string(group));
    j["groups"] = std::move(g);
  }
  j["svg"] = c.svg;
  return j;
}

NoiseStudyConfig noise_study_config_from_json(const Json& j) {
  Fields f(j, "");
  f.reject_unknown({"schema", "grid", "realizations", "seed", "whole_network", "groups", "svg"});
  NoiseStudyConfig c;
  f.read("grid", c.grid);
  f.read("realizations", c.realizations);
  f.read("seed", c.seed);
  f.read("whole_network", c.whole_network);
  f.read("svg", c.svg);
  if (f.has("groups")) {
    std::vector<std::string> names;
    f.read("groups", names);
    std::vector<noise::NoiseGroup> groups;
    for (const auto& n : names) groups.push_back(noise::noise_group_from_string(n));
    c.groups = std::move(groups);
  }
  if (c.realizations < 1) throw config_error("realizations", "must be >= 1");
  if (c.grid.empty()) throw config_error("grid", "must not be empty");
  for (double b : c.grid) {
    if (!(b > 0.0)) throw config_error("grid", "ENOB values must be > 0");
  }
  return c;
}

NoiseStudy run_noise_study(const fs::path& run_dir, const NoiseStudyConfig& config,
                           const fs::path& out_dir, int jobs) {
  const Checkpoint cp = read_checkpoint(run_dir / "checkpoint.json");
  const RunRecord rec = read_run_record(run_dir);
  const Dataset dataset = cp.config.dataset.load();
  const noise::SweepOptions opts{config.realizations, config.seed, jobs};

  std::vector<noise::NoiseGroup> groups;
  if (config.groups) {
    groups = *config.groups;
  } else if (is_hybrid(cp.best)) {
    groups = {noise::NoiseGroup::interferometer, noise::NoiseGroup::squeezing,
              noise::NoiseGroup::displacement, noise::NoiseGroup::kerr};
  }
  // Fail on an invalid group before any sweep runs.
  for (auto g : groups) noise::NoiseSpec::single(g, 1.0).validate(cp.best);

  NoiseStudy study;
  study.record_accuracy = rec.best_validation_accuracy;
  if (config.whole_network) study.curves.push_back(noise::enob_sweep(cp.best, dataset, config.grid, opts));
  for (auto g : groups) study.curves.push_back(noise::per_gate_sweep(cp.best, dataset, g, config.grid, opts));

  fs::create_directories(out_dir);
  noise::write_raw_csv(out_dir / "noise_raw.csv", study.curves);
  noise::write_aggregate_csv(out_dir / "noise_aggregate.csv", study.curves);
  if (config.svg) {
    write_text_atomic(out_dir / "noise.svg",
                      noise::curves_svg(study.curves, fmt::format("noise study {}", rec.run_id)));
  }
  return study;
}

fs::path default_output_root() {
  if (const char* env = std::getenv("HYBRIDNN_OUT"); env && *env) return env;
  return "hybridnn-out";
}

}  // namespace hybridnn::exp
