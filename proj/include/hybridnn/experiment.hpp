#pragma once

// Run configuration, run artifacts, and multi-run sweeps.
//
// A run directory holds record.json, checkpoint.json and history.csv. Its name
// is "<config hash>-s<seed>", where the hash covers every config field except
// the seed, so all seeds of one configuration share a prefix.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridnn/cvqnn.hpp"
#include "hybridnn/datagen.hpp"
#include "hybridnn/network.hpp"
#include "hybridnn/noise.hpp"
#include "hybridnn/training.hpp"

namespace hybridnn::exp {

using Json = nlohmann::ordered_json;

enum class NetworkKind { hybrid, classical };

const char* to_string(NetworkKind k);
NetworkKind network_kind_from_string(const std::string& name);

/// Dataset source: a CSV with its spec sidecar, or a spec generated in memory.
struct DatasetSource {
  std::optional<std::filesystem::path> csv;
  GenSpec spec;

  Dataset load() const;
};

struct RunConfig {
  NetworkKind kind = NetworkKind::hybrid;
  cvqnn::NetworkShape shape;
  TrainConfig train;          // train.seed is the run seed; train.cutoff mirrors shape.cutoff
  double norm_floor = 0.99;   // a_max calibration floor when train.a_max == 0
  DatasetSource dataset;

  void validate() const;
};

Json to_json(const RunConfig& config);
/// Strict: unknown keys and wrong types raise ErrorKind::configuration naming the key.
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// FNV-1a of the canonical config JSON with the seed removed, as 16 hex digits.
std::string config_hash(const RunConfig& config);
std::string run_id(const RunConfig& config);

enum class RunStatus { completed, failed };

struct RunRecord {
  std::string run_id;
  NetworkKind kind = NetworkKind::hybrid;
  cvqnn::NetworkShape shape;
  long param_count = 0;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::completed;
  std::string error;
  double best_validation_accuracy = 0.0;
  int best_epoch = 0;
  double final_validation_accuracy = 0.0;
  double a_max = 0.0;
  int updates_per_epoch = 0;
  std::string history_file;
  double wall_time_seconds = 0.0;
  std::string config_hash;
};

Json to_json(const RunRecord& record);
RunRecord run_record_from_json(const Json& j);

struct Checkpoint {
  RunConfig config;
  Network best;
  Network final;
  AdamState optimizer;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws ErrorKind::not_found if the file is missing.
Checkpoint read_checkpoint(const std::filesystem::path& path);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);
std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path);

/// Random initial network for a config ("init" stream of the run seed).
Network initial_network(const RunConfig& config, double a_max);

/// Resolved a_max: train.a_max if positive, else calibrated at norm_floor.
double resolve_amax(const RunConfig& config);

/// Trains one run and writes its directory under out_root. Numerical
/// failures produce a failed record instead of an exception.
RunRecord execute_run(const RunConfig& config, const std::filesystem::path& out_root,
                      const EpochCallback& on_epoch = {});

RunRecord read_run_record(const std::filesystem::path& run_dir);

// Sweeps

struct GridEntry {
  NetworkKind kind = NetworkKind::hybrid;
  std::vector<int> modes;
  std::vector<int> layers;
  std::vector<int> cutoffs;  // ignored for classical runs
  int seeds = 5;
  std::uint64_t first_seed = 1;
};

struct SweepGrid {
  int inputs = 8;
  int outputs = 4;
  TrainConfig train;
  double norm_floor = 0.99;
  DatasetSource dataset;
  std::vector<GridEntry> entries;

  /// M in {2, 3}, L in {1, 2}; hybrids at cutoffs {5, 7} with 5 seeds each,
  /// classical twins with 10 seeds.
  static SweepGrid desk_default();
  std::vector<RunConfig> expand() const;
};

Json to_json(const SweepGrid& grid);
SweepGrid sweep_grid_from_json(const Json& j);
SweepGrid load_sweep_grid(const std::filesystem::path& path);

inline constexpr double kFailedAccuracy = 0.30;

struct SummaryRow {
  NetworkKind kind = NetworkKind::hybrid;
  long param_count = 0;
  int runs = 0;
  int well_trained = 0;
  double well_trained_mean = 0.0;
  double well_trained_std = 0.0;  // population std
  double poorly_trained_fraction = 0.0;
  double failed_fraction = 0.0;
};

struct SweepSummary {
  double threshold = 0.0;
  std::vector<SummaryRow> rows;  // sorted by (kind, param_count)
  std::size_t run_count = 0;
  std::string run_checksum;      // FNV-1a over sorted run ids
};

/// Accuracy above threshold is well-trained; at or below is poorly trained;
/// at or below kFailedAccuracy (or a failed run) is failed.
SweepSummary summarize(const std::vector<RunRecord>& records, double threshold);
std::string run_checksum(std::vector<std::string> run_ids);

Json to_json(const SweepSummary& summary);
void write_summary_csv(const std::filesystem::path& path, const SweepSummary& summary);

struct SweepResult {
  std::vector<RunRecord> records;  // sorted by run id
  SweepSummary summary;
  int resumed = 0;                 // runs skipped because already complete
};

/// Runs every grid config under out_dir/runs with up to `jobs` workers,
/// skipping runs whose record is already complete, then writes grid.json,
/// records.csv, summary.json and summary.csv to out_dir.
SweepResult run_sweep(const SweepGrid& grid, const std::filesystem::path& out_dir, int jobs,
                      const std::function<void(const RunRecord&)>& on_run = {});

/// Every record.json under dir/runs, sorted by run id.
std::vector<RunRecord> collect_records(const std::filesystem::path& sweep_dir);

// Noise studies on a trained run

struct NoiseStudyConfig {
  std::vector<double> grid = noise::default_enob_grid();
  int realizations = 10;
  std::uint64_t seed = 0;
  bool whole_network = true;
  /// Gate groups swept one at a time; defaults to every gate group for a
  /// hybrid network and none for a classical one.
  std::optional<std::vector<noise::NoiseGroup>> groups;
  bool svg = true;
};

Json to_json(const NoiseStudyConfig& config);
NoiseStudyConfig noise_study_config_from_json(const Json& j);

struct NoiseStudy {
  std::vector<noise::NoiseCurve> curves;  // whole network first, then groups
  double record_accuracy = 0.0;
};

/// Loads run_dir/checkpoint.json (best network) and its dataset, sweeps, and
/// writes noise_raw.csv, noise_aggregate.csv and optionally noise.svg to out_dir.
NoiseStudy run_noise_study(const std::filesystem::path& run_dir, const NoiseStudyConfig& config,
                           const std::filesystem::path& out_dir, int jobs);

/// Default output root: $HYBRIDNN_OUT if set, else "./hybridnn-out".
std::filesystem::path default_output_root();

}  // namespace hybridnn::exp
