#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "somnus/common.hpp"
#include "somnus/types.hpp"

// Signal conditioning between raw EDF channels and model-ready epochs.
// All filters are causal, forward-only, linear and time-invariant; the
// pipeline order is fixed: notch -> EMG high-pass -> ECG cancellation ->
// resample to 100 Hz -> epoch assembly.

namespace somnus::dsp {

SOMNUS_DEFINE_ERROR(NyquistViolation);
SOMNUS_DEFINE_ERROR(RateMismatch);
SOMNUS_DEFINE_ERROR(LengthMismatch);
SOMNUS_DEFINE_ERROR(ChannelCountMismatch);
SOMNUS_DEFINE_ERROR(ChannelTooShort);

// Mains interference notch (biquad, Q = 30). If mains_hz is at or above the
// Nyquist frequency the filter cannot exist at this rate; the input is
// returned unchanged and *skipped (when given) is set, mirroring how a
// 50 Hz notch is meaningless for a 64 Hz EMG channel.
SampleSeries notch(const SampleSeries& in, double mains_hz, bool* skipped = nullptr);

// First-order 15 Hz high-pass for EMG channels (bilinear transform with
// prewarping, so the -3 dB point lands exactly on 15 Hz). Throws
// NyquistViolation when the rate is too low for the cutoff to exist.
SampleSeries highpass_emg(const SampleSeries& in);

// NLMS adaptive cancellation of cardiac artifact using the ECG channel as
// reference: 32 taps centered on zero lag, adaptation rate 0.01. Returns the
// residual (input minus the adaptive ECG estimate). An empty reference is a
// pass-through; rates must match (resample the ECG first if they differ).
SampleSeries ecg_cancel(const SampleSeries& in, const SampleSeries& ecg);

// Rational-ratio polyphase resampler (Kaiser-windowed sinc, 64 taps per
// phase, per-phase DC normalization). Output length is
// round(len * target / rate). Matched rates pass the input through bitwise.
SampleSeries resample_to(const SampleSeries& in, double target_hz);

// Slices four conditioned 100 Hz channels into labeled 30 s epochs. Epochs
// labeled Excluded are dropped; a trailing partial window is discarded.
std::vector<Epoch> build_epochs(const std::vector<SampleSeries>& channels,
                                const std::vector<SleepStage>& hypnogram,
                                const std::string& dataset_id = "",
                                const std::string& recording_id = "");

struct ConditionInput {
  SampleSeries eeg1, eeg2, emg, eog;
  std::optional<SampleSeries> ecg;
  double mains_hz = 50.0;
};

// Full conditioning pipeline for one recording. With filtering disabled only
// the resampling step runs (normalization is a separate concern entirely).
// Skipped notches and other conditions are appended to *notes when given.
std::array<SampleSeries, kEpochChannels> condition_channels(
    const ConditionInput& in, bool filtering_enabled,
    std::vector<std::string>* notes = nullptr);

}  // namespace somnus::dsp
