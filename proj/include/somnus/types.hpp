#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "somnus/common.hpp"

namespace somnus {

// Five-class staging vocabulary plus an exclusion marker for movement time,
// unscored epochs and other labels that never enter training or scoring.
// The enum order doubles as the fixed tie-break order for ensemble votes.
enum class SleepStage : std::uint8_t { W = 0, N1, N2, N3, R, Excluded };

inline constexpr std::size_t kNumStages = 5;
inline constexpr std::size_t kEpochChannels = 4;   // EEG1, EEG2, EMG, EOG
inline constexpr double kTargetRateHz = 100.0;
inline constexpr double kEpochSeconds = 30.0;
inline constexpr std::size_t kEpochSamples = 3000;  // 30 s at 100 Hz

const char* stage_name(SleepStage s);
// Maps one hypnogram label to a stage. Accepts the five-class names, the
// older six-stage vocabulary (S1..S4 with S3/S4 merged into N3, REM, MT) and
// common synonyms; anything unrecognized is Excluded.
SleepStage map_stage(const std::string& raw_label);

// One channel of evenly sampled data.
struct SampleSeries {
  std::vector<double> samples;
  double rate_hz = 0.0;
};

// A scored 30 s window: 4 conditioned channels at 100 Hz, row-major
// [channel][sample], plus where it came from.
struct Epoch {
  std::vector<double> data;  // kEpochChannels * cols
  std::size_t cols = kEpochSamples;
  SleepStage label = SleepStage::Excluded;
  std::string dataset_id;
  std::string recording_id;
  std::size_t index_in_recording = 0;

  double* row(std::size_t ch) { return data.data() + ch * cols; }
  const double* row(std::size_t ch) const { return data.data() + ch * cols; }
};

}  // namespace somnus
