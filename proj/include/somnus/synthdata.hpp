#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "somnus/common.hpp"
#include "somnus/edf.hpp"
#include "somnus/types.hpp"

// Synthetic multi-database PSG generator. Signals are built from
// stage-conditional spectral templates (fixed constants of this module)
// sampled at per-database native rates, then dressed with mains
// interference, broadband noise, a shared cardiac pulse train and an
// amplitude gain. Everything is bit-reproducible from the spec's seed.

namespace somnus::synth {

SOMNUS_DEFINE_ERROR(InvalidSpec);

struct DatabaseSpec {
  std::string dataset_id = "A";
  int n_recordings = 10;
  int epochs_per_recording = 20;
  // Stage priors in W, N1, N2, N3, R order; must sum to 1.
  std::array<double, kNumStages> class_priors = {0.20, 0.10, 0.35, 0.20, 0.15};
  // Native sampling rates for EEG1, EEG2, EMG, EOG, ECG. Integer-valued so
  // one EDF data record can hold exactly one second per signal.
  std::array<double, 5> channel_rates_hz = {256.0, 256.0, 256.0, 256.0, 256.0};
  double amplitude_gain = 1.0;   // montage amplification, applied to all channels
  double mains_hz = 50.0;
  double mains_amplitude = 10.0;
  double noise_std = 4.0;        // broadband sensor noise, all data channels
  double ecg_coupling = 0.0;     // cardiac artifact peak in the data channels;
                                 // 0 also means no ECG channel is recorded
  double label_noise_p = 0.0;    // chance a recorded label flips to another stage
  // Population character: shifts every EEG and EOG template band by a fixed
  // offset so databases differ spectrally, not just in montage and noise.
  double spectral_shift_hz = 0.0;
  std::uint64_t seed = 1;
};

void validate_spec(const DatabaseSpec& spec);

std::string spec_to_json(const DatabaseSpec& spec);
DatabaseSpec spec_from_json(const std::string& text);

struct GeneratedRecording {
  edf::Recording recording;
  std::vector<SleepStage> true_stages;      // drives the signals
  std::vector<SleepStage> recorded_stages;  // what the hypnogram file says
};

// Deterministic in (spec, index): each recording derives its own stream
// from the spec seed and its index.
GeneratedRecording generate_recording(const DatabaseSpec& spec, int index);

// Writes <id>_r###.edf plus <id>_r###.csv hypnogram sidecars
// (epoch_index,stage) and a dataset.json manifest into out_dir.
void generate_database(const DatabaseSpec& spec, const std::string& out_dir);

}  // namespace somnus::synth
