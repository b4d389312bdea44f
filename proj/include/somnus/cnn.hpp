#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "somnus/common.hpp"
#include "somnus/normalize.hpp"
#include "somnus/rng.hpp"
#include "somnus/types.hpp"

// The staging network and its trainer. Architecture: N blocks of
// [same-padded conv (stride 1) -> batch norm -> ReLU -> average pool
// halving the time axis], then dropout, a single dense layer and softmax.
// Block k carries initial_filters * 2^(k-1) filters. Everything is double
// precision and bit-reproducible for a fixed seed and data order.

namespace somnus::cnn {

SOMNUS_DEFINE_ERROR(InvalidConfig);
SOMNUS_DEFINE_ERROR(ShapeMismatch);
SOMNUS_DEFINE_ERROR(EmptyBatch);
SOMNUS_DEFINE_ERROR(EmptyClass);
SOMNUS_DEFINE_ERROR(BadModelFile);

enum class LossWeighting { Weighted, Unweighted };
enum class Mode { Train, Infer };

struct ModelConfig {
  std::string name;  // free-form label used in reports; defaulted if empty
  int num_blocks = 3;
  int kernel_rows = 1;
  int kernel_cols = 10;
  int initial_filters = 8;
  LossWeighting loss_weighting = LossWeighting::Weighted;
  norm::Strategy normalization = norm::Strategy::EpochBased;
  bool filtering_enabled = true;
  int num_classes = 5;
  int input_samples = static_cast<int>(kEpochSamples);
  std::uint64_t seed = 1;
  // schedule
  int max_epochs = 30;
  int batch_size = 100;
  double initial_lr = 1e-3;
  int lr_step_epochs = 10;     // divide the rate every this many epochs
  double lr_decay = 10.0;
  double min_lr = 1e-6;
  int val_checks_per_epoch = 5;
  int patience_checks = 10;
  double dropout = 0.5;

  bool operator==(const ModelConfig&) const = default;
};

// Throws InvalidConfig unless every field is usable (positive sizes, kernel
// rows within the 4 input rows, time axis survives num_blocks halvings...).
void validate_config(const ModelConfig& c);

// Learning rate for a 1-based epoch index under the step schedule.
double learning_rate(const ModelConfig& c, int epoch);

struct LayerShape {
  int channels = 0;
  int rows = 0;
  int cols = 0;
};

// Shape after each block's pooling, input shape excluded.
std::vector<LayerShape> layer_shapes(const ModelConfig& c);
std::size_t flattened_size(const ModelConfig& c);
// Trainable parameters only (conv weights/biases, batch-norm affine pairs,
// dense weights/biases); running statistics are state, not parameters.
std::size_t parameter_count(const ModelConfig& c);

struct ConvBlock {
  std::vector<double> weight;    // [filters][in_ch][kernel_rows][kernel_cols]
  std::vector<double> bias;      // [filters]
  std::vector<double> gamma;     // batch-norm scale [filters]
  std::vector<double> beta;      // batch-norm shift [filters]
  std::vector<double> run_mean;  // tracked during training, used at inference
  std::vector<double> run_var;
};

struct Dense {
  std::vector<double> weight;  // [num_classes][flattened]
  std::vector<double> bias;    // [num_classes]
};

struct Provenance {
  std::string dataset_id;
  std::uint64_t seed = 0;
  std::uint64_t training_iterations = 0;  // gradient steps taken
  int epochs_run = 0;
  double best_val_loss = 0.0;
  bool has_val_loss = false;
  std::int64_t best_check = -1;     // 1-based validation check index
  std::int64_t stopped_check = -1;  // check that triggered early stopping
};

struct TrainedModel {
  ModelConfig config;
  std::vector<ConvBlock> blocks;
  Dense dense;
  std::optional<norm::ChannelStats> stats;  // present iff TR_BASED
  Provenance provenance;
};

// Freshly initialized model: conv/dense weights from a scaled uniform
// fan-in law drawn off config.seed, biases zero, batch-norm at identity.
TrainedModel init_model(const ModelConfig& c);

// Posteriors, row-major [batch][num_classes]. Epochs must already be
// normalized per the model's strategy. Train mode normalizes with batch
// statistics (updating the running ones) and applies dropout from *rng;
// Infer mode uses running statistics and no dropout.
std::vector<double> forward(TrainedModel& m, const std::vector<const Epoch*>& batch, Mode mode,
                            Rng* rng = nullptr);
std::vector<double> forward(const TrainedModel& m, const std::vector<const Epoch*>& batch);

// Mean weighted cross-entropy with the posterior floored at 1e-12.
double weighted_cross_entropy(const std::vector<double>& posteriors,
                              const std::vector<SleepStage>& labels,
                              const std::vector<double>& class_weights, int num_classes);

// w(i) proportional to inverse cardinality, normalized to sum 1 (Weighted);
// all ones (Unweighted). Weighted requires every class to be represented.
std::vector<double> class_weights(const std::vector<std::uint64_t>& cardinalities,
                                  LossWeighting w);

struct BlockGrads {
  std::vector<double> weight, bias, gamma, beta;
};

struct Gradients {
  std::vector<BlockGrads> blocks;
  std::vector<double> dense_weight, dense_bias;
  double loss = 0.0;
};

// Train-mode forward plus full backward pass over one batch. Labels come
// from the epochs. Updates the model's running batch-norm statistics as a
// side effect; parameters are untouched.
Gradients gradients(TrainedModel& m, const std::vector<const Epoch*>& batch,
                    const std::vector<double>& class_weights, Rng* dropout_rng = nullptr);

struct Prediction {
  SleepStage stage = SleepStage::Excluded;
  std::vector<double> posterior;
};

// Normalizes raw epochs per the model's own strategy (using its stored
// statistics for TR_BASED), runs inference, argmaxes. Posterior ties break
// toward the earlier stage in the fixed W, N1, N2, N3, R order.
std::vector<Prediction> predict(const TrainedModel& m, const std::vector<Epoch>& raw_epochs);

// Called after every validation check with the 1-based check index, the
// measured validation loss and the current parameter state. Its return
// value is used as the loss, letting tests script the sequence.
using ValCheckHook =
    std::function<double(std::size_t check_index, double val_loss, const TrainedModel& current)>;

// Plain SGD with the step schedule, early stopping on patience_checks
// non-improving validation checks, best-snapshot restore. An empty
// validation set disables checks and runs all max_epochs. Raw epochs in;
// normalization (and TR_BASED statistics fitting) happens inside.
TrainedModel train(const std::vector<Epoch>& tr_epochs, const std::vector<Epoch>& val_epochs,
                   const ModelConfig& config, const std::string& dataset_id = "",
                   const ValCheckHook& hook = {});

// Single-file container: magic, JSON manifest (config, provenance, stats),
// then raw little-endian float64 parameter arrays. load(save(m)) == m down
// to the last bit.
std::vector<std::uint8_t> to_bytes(const TrainedModel& m);
TrainedModel from_bytes(const std::vector<std::uint8_t>& bytes);
void save_model(const TrainedModel& m, const std::string& path);
TrainedModel load_model(const std::string& path);

// Canonical JSON round-trip for configs (sorted keys, defaults filled in);
// also the cache key basis for the experiment harness.
std::string config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const std::string& text);

// Process-wide count of gradient batches, for audits asserting that cached
// models are reused rather than retrained.
std::uint64_t gradient_batch_count();
void reset_gradient_batch_count();

}  // namespace somnus::cnn
