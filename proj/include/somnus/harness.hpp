#pragma once

// Experiment orchestration: recording-level splits, the three-part protocol
// (local evaluation, cross-database matrix, leave-one-out ensembles), report
// rendering, and the model / prediction-track caches behind it.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "somnus/cnn.hpp"
#include "somnus/common.hpp"
#include "somnus/metrics.hpp"
#include "somnus/types.hpp"

namespace somnus::harness {

SOMNUS_DEFINE_ERROR(TooFewRecordings);
SOMNUS_DEFINE_ERROR(BadDatasetDir);
SOMNUS_DEFINE_ERROR(BadTrackFile);
SOMNUS_DEFINE_ERROR(NeedTwoDatasets);

// ============================================================
// Datasets on disk
// ============================================================

// One conditioned, labeled recording. Epochs carry their stage labels; epochs
// whose hypnogram entry maps to Excluded are already dropped.
struct LoadedRecording {
  std::string name;
  std::vector<Epoch> epochs;
};

struct Dataset {
  std::string id;
  double mains_hz = 50.0;
  std::vector<LoadedRecording> recordings;
  std::vector<std::string> notes;  // conditioning reports, e.g. skipped notch

  std::size_t total_epochs() const;
};

// Reads a directory produced by the synth generator (or assembled by hand):
// dataset.json manifest naming EDF files and hypnogram CSV sidecars. Applies
// the conditioning pipeline when filtering is on, plain resampling otherwise.
Dataset load_dataset(const std::string& dir, bool filtering_enabled);

// Hypnogram sidecar helpers (epoch_index,stage).
std::vector<SleepStage> read_hypnogram_csv(const std::string& path);

// ============================================================
// Recording-level split
// ============================================================

struct DataSplit {
  std::vector<int> train, validate, test;  // recording indices, ascending
};

// Seeded shuffle of the recording indices; round-half-up 20% to TS, then 20%
// of the remainder to VAL, rest to TR. Requires at least 5 recordings.
DataSplit split_recordings(int n_recordings, std::uint64_t seed,
                           const std::string& dataset_id);

// Epochs of a set of recordings, recording order then epoch order.
std::vector<Epoch> gather(const Dataset& ds, const std::vector<int>& recordings);
std::vector<SleepStage> labels_of(const std::vector<Epoch>& epochs);

// ============================================================
// Prediction tracks
// ============================================================

// A model's per-epoch output over one dataset, in canonical epoch order.
struct Track {
  std::vector<SleepStage> stages;
  std::vector<std::array<double, kNumStages>> posteriors;
};

Track predict_track(const cnn::TrainedModel& model, const std::vector<Epoch>& epochs);

// CSV form: epoch_index,stage,p_W,p_N1,p_N2,p_N3,p_R with posteriors printed
// at full precision, so a reloaded track votes identically.
std::string track_to_csv(const Track& t);
Track track_from_csv(const std::string& text);

// ============================================================
// Experiment protocol
// ============================================================

struct RunOptions {
  std::uint64_t split_seed = 1;
  std::string cache_dir;        // empty: no on-disk caching
  bool reuse_cache = true;      // false: recompute and overwrite cache entries
  bool ensemble_only = false;   // redo only the ensemble part from cached models
};

// Table rows. "Local" follows the per-database table: agreement of the local
// model on its own TR/VAL/TS partitions plus the training effort. The cross
// matrix holds model-on-database agreement with a biased diagonal. The
// ensemble table compares, per target database, the local reference against
// external single-model predictions and the leave-one-out ensemble.
struct LocalRow {
  std::string config_name;
  std::string dataset_id;
  metrics::KappaReport tr, val, ts;
  std::uint64_t training_iterations = 0;
  int epochs_run = 0;
};

struct CrossMatrix {
  std::string config_name;
  // cells[k][j]: model trained on dataset k, evaluated on all of dataset j.
  std::vector<std::vector<metrics::KappaReport>> cells;
};

struct EnsembleRow {
  std::string config_name;
  std::string dataset_id;                    // the held-out target
  std::optional<double> local_ref;           // local model on its own TS
  std::optional<double> external_min, external_max, external_avg;
  std::optional<double> ensemble;            // leave-one-out ensemble on the target
};

struct SummaryRow {
  std::string config_name;
  // Averages across databases: local reference (I), external single-model
  // average (II), ensemble (III), and pairwise differences (later minus
  // earlier, so "I vs II" = II - I).
  std::optional<double> local_avg, external_avg, ensemble_avg;
  std::optional<double> i_vs_ii, i_vs_iii, ii_vs_iii;
};

struct ExperimentReport {
  std::vector<std::string> dataset_ids;
  std::vector<std::string> config_names;
  std::vector<LocalRow> local;
  std::vector<CrossMatrix> cross;
  std::vector<EnsembleRow> ensemble;
  std::vector<SummaryRow> summary;
  std::vector<std::string> notes;

  // Run audit, not rendered: which models this run actually trained (as
  // opposed to loading from cache), as "config/dataset" strings.
  std::vector<std::string> trained;
};

// Runs the full protocol over the given dataset directories for each model
// configuration. Models and prediction tracks are cached under cache_dir so
// reruns (and ensemble recomputation) never retrain or repredict.
ExperimentReport run_experiments(const std::vector<std::string>& dataset_dirs,
                                 const std::vector<cnn::ModelConfig>& configs,
                                 const RunOptions& options);

enum class ReportFormat { Tsv, Markdown };

// Per-cell values at 2 decimals, averages and differences at 4.
std::string render_report(const ExperimentReport& r, ReportFormat format);

}  // namespace somnus::harness
