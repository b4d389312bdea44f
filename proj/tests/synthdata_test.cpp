#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "somnus/dsp.hpp"
#include "somnus/edf.hpp"
#include "somnus/metrics.hpp"
#include "somnus/normalize.hpp"
#include "somnus/synthdata.hpp"

using namespace somnus;

namespace {

constexpr double kPi = 3.14159265358979323846;

double row_rms(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(n));
}

// |X_k|^2 of one plain DFT bin, Goertzel recurrence.
double goertzel_power(const double* x, std::size_t n, std::size_t k) {
  const double c = 2.0 * std::cos(2.0 * kPi * static_cast<double>(k) / static_cast<double>(n));
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s0 = x[i] + c * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  return s1 * s1 + s2 * s2 - c * s1 * s2;
}

// Single-sided mean-square power inside [f_lo, f_hi]: a pure in-band tone of
// amplitude A contributes about A^2/2, leakage aside.
double band_power(const double* x, std::size_t n, double rate, double f_lo, double f_hi) {
  const double res = rate / static_cast<double>(n);
  const auto k_lo = static_cast<std::size_t>(std::ceil(f_lo / res));
  const auto k_hi = static_cast<std::size_t>(std::floor(f_hi / res));
  double p = 0.0;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    p += 2.0 * goertzel_power(x, n, k) / (static_cast<double>(n) * static_cast<double>(n));
  }
  return p;
}

// Spectral rule-of-thumb stager. The thresholds sit in the wide gaps the
// stage templates leave between classes: slow-wave power picks N3, muscle
// tone picks W, sigma-band bursts pick N2, and slow eye movements split R
// from N1. High agreement with the generating labels shows each stage's
// signal content carries its class, which is the property the learned
// models later depend on.
SleepStage rule_stage(const Epoch& e) {
  const double p_delta = band_power(e.row(0), e.cols, kTargetRateHz, 0.2, 2.7);
  if (p_delta > 800.0) return SleepStage::N3;
  if (row_rms(e.row(2), e.cols) > 15.0) return SleepStage::W;
  const double p_sigma = band_power(e.row(0), e.cols, kTargetRateHz, 11.2, 15.2);
  if (p_sigma > 6.0) return SleepStage::N2;
  const double p_sem = band_power(e.row(3), e.cols, kTargetRateHz, 0.1, 1.3);
  return p_sem > 2500.0 ? SleepStage::R : SleepStage::N1;
}

std::vector<Epoch> epochs_at_100hz(const synth::GeneratedRecording& gen,
                                   const std::vector<SleepStage>& hypnogram,
                                   const std::string& dataset_id) {
  std::vector<SampleSeries> channels;
  for (const char* label : {"EEG1", "EEG2", "EMG", "EOG"}) {
    channels.push_back(dsp::resample_to(edf::extract_channel(gen.recording, label), kTargetRateHz));
  }
  return dsp::build_epochs(channels, hypnogram, dataset_id, gen.recording.patient_id);
}

synth::DatabaseSpec quick_spec() {
  synth::DatabaseSpec s;
  s.dataset_id = "Q";
  s.n_recordings = 1;
  s.epochs_per_recording = 8;
  s.channel_rates_hz = {16.0, 16.0, 16.0, 16.0, 16.0};
  s.noise_std = 2.0;
  s.seed = 11;
  return s;
}

}  // namespace

TEST_SUITE("synthdata") {

TEST_CASE("spec JSON round-trips field for field") {
  synth::DatabaseSpec s;
  s.dataset_id = "XY";
  s.n_recordings = 7;
  s.epochs_per_recording = 41;
  s.class_priors = {0.30, 0.05, 0.25, 0.15, 0.25};
  s.channel_rates_hz = {128.0, 128.0, 64.0, 128.0, 256.0};
  s.amplitude_gain = 2.5;
  s.mains_hz = 60.0;
  s.mains_amplitude = 13.0;
  s.noise_std = 5.5;
  s.ecg_coupling = 9.0;
  s.label_noise_p = 0.125;
  s.spectral_shift_hz = -1.25;
  s.seed = 0xabcdef01;

  const synth::DatabaseSpec back = synth::spec_from_json(synth::spec_to_json(s));
  CHECK(back.dataset_id == s.dataset_id);
  CHECK(back.n_recordings == s.n_recordings);
  CHECK(back.epochs_per_recording == s.epochs_per_recording);
  CHECK(back.class_priors == s.class_priors);
  CHECK(back.channel_rates_hz == s.channel_rates_hz);
  CHECK(back.amplitude_gain == s.amplitude_gain);
  CHECK(back.mains_hz == s.mains_hz);
  CHECK(back.mains_amplitude == s.mains_amplitude);
  CHECK(back.noise_std == s.noise_std);
  CHECK(back.ecg_coupling == s.ecg_coupling);
  CHECK(back.label_noise_p == s.label_noise_p);
  CHECK(back.spectral_shift_hz == s.spectral_shift_hz);
  CHECK(back.seed == s.seed);

  // Partial specs inherit defaults; junk is rejected, not ignored.
  const synth::DatabaseSpec partial = synth::spec_from_json("{\"dataset_id\": \"Z\"}");
  CHECK(partial.dataset_id == "Z");
  CHECK(partial.n_recordings == synth::DatabaseSpec{}.n_recordings);
  CHECK_THROWS_AS(synth::spec_from_json("{\"n_recordingz\": 3}"), synth::InvalidSpec);
  CHECK_THROWS_AS(synth::spec_from_json("{\"seed\": \"abc\"}"), synth::InvalidSpec);
  CHECK_THROWS_AS(synth::spec_from_json("{\"class_priors\": [1.0]}"), synth::InvalidSpec);
  CHECK_THROWS_AS(synth::spec_from_json("not json"), synth::InvalidSpec);
  CHECK_THROWS_AS(synth::spec_from_json("[1, 2]"), synth::InvalidSpec);
}

TEST_CASE("spec validation rejects each out-of-range field") {
  CHECK_NOTHROW(synth::validate_spec(synth::DatabaseSpec{}));
  auto reject = [](void (*tweak)(synth::DatabaseSpec&)) {
    synth::DatabaseSpec s;
    tweak(s);
    CHECK_THROWS_AS(synth::validate_spec(s), synth::InvalidSpec);
  };
  reject([](synth::DatabaseSpec& s) { s.dataset_id.clear(); });
  reject([](synth::DatabaseSpec& s) { s.n_recordings = 0; });
  reject([](synth::DatabaseSpec& s) { s.epochs_per_recording = 0; });
  reject([](synth::DatabaseSpec& s) { s.class_priors[1] = -0.1; });
  reject([](synth::DatabaseSpec& s) { s.class_priors[0] += 0.01; });  // sums to 1.01
  reject([](synth::DatabaseSpec& s) { s.channel_rates_hz[2] = 8.0; });
  reject([](synth::DatabaseSpec& s) { s.channel_rates_hz[0] = 100.5; });
  reject([](synth::DatabaseSpec& s) { s.channel_rates_hz[4] = 8192.0; });
  reject([](synth::DatabaseSpec& s) { s.amplitude_gain = 0.0; });
  reject([](synth::DatabaseSpec& s) { s.mains_hz = 0.0; });
  reject([](synth::DatabaseSpec& s) { s.mains_amplitude = -1.0; });
  reject([](synth::DatabaseSpec& s) { s.noise_std = -1.0; });
  reject([](synth::DatabaseSpec& s) { s.ecg_coupling = -2.0; });
  reject([](synth::DatabaseSpec& s) { s.label_noise_p = 1.0; });
  reject([](synth::DatabaseSpec& s) { s.label_noise_p = -0.1; });
  reject([](synth::DatabaseSpec& s) { s.spectral_shift_hz = 3.5; });
  reject([](synth::DatabaseSpec& s) { s.spectral_shift_hz = -3.5; });
}

TEST_CASE("generation is bitwise deterministic in spec and index") {
  const synth::DatabaseSpec s = quick_spec();
  const synth::GeneratedRecording a = synth::generate_recording(s, 3);
  const synth::GeneratedRecording b = synth::generate_recording(s, 3);
  CHECK(edf::write_recording(a.recording) == edf::write_recording(b.recording));
  CHECK(a.true_stages == b.true_stages);
  CHECK(a.recorded_stages == b.recorded_stages);

  const synth::GeneratedRecording c = synth::generate_recording(s, 4);
  CHECK(a.recording.samples[0] != c.recording.samples[0]);
}

TEST_CASE("the ECG channel exists exactly when coupling is nonzero") {
  synth::DatabaseSpec s = quick_spec();
  s.channel_rates_hz = {16.0, 16.0, 16.0, 16.0, 64.0};

  const synth::GeneratedRecording without = synth::generate_recording(s, 0);
  REQUIRE(without.recording.signals.size() == 4);
  CHECK(without.recording.signals[3].label == "EOG");
  CHECK_THROWS_AS(edf::extract_channel(without.recording, "ECG"), edf::UnknownChannel);

  s.ecg_coupling = 12.0;
  const synth::GeneratedRecording with = synth::generate_recording(s, 0);
  REQUIRE(with.recording.signals.size() == 5);
  CHECK(with.recording.signals[4].label == "ECG");
  CHECK(with.recording.signals[4].samples_per_record == 64);
  const SampleSeries ecg = edf::extract_channel(with.recording, "ECG");
  CHECK(ecg.rate_hz == 64.0);
  double peak = 0.0;
  for (double v : ecg.samples) peak = std::max(peak, std::fabs(v));
  CHECK(peak > 500.0);  // QRS-like pulses, not just noise
}

TEST_CASE("label noise flips roughly its share of labels and only to other stages") {
  synth::DatabaseSpec s = quick_spec();
  s.epochs_per_recording = 400;

  const synth::GeneratedRecording clean = synth::generate_recording(s, 0);
  CHECK(clean.recorded_stages == clean.true_stages);

  s.label_noise_p = 0.3;
  const synth::GeneratedRecording noisy = synth::generate_recording(s, 0);
  REQUIRE(noisy.recorded_stages.size() == 400);
  int flips = 0;
  for (std::size_t e = 0; e < 400; ++e) {
    if (noisy.recorded_stages[e] != noisy.true_stages[e]) ++flips;
    CHECK(noisy.recorded_stages[e] != SleepStage::Excluded);
  }
  // Binomial(400, 0.3): mean 120, sigma ~9.2; allow four sigma.
  CHECK(flips >= 84);
  CHECK(flips <= 156);
  // The signals are driven by the true stages, so they must not change.
  CHECK(noisy.recording.samples == clean.recording.samples);
}

TEST_CASE("stage draws follow the class priors") {
  synth::DatabaseSpec s = quick_spec();
  s.n_recordings = 40;
  s.epochs_per_recording = 50;
  s.class_priors = {0.35, 0.05, 0.30, 0.10, 0.20};

  std::array<int, kNumStages> counts = {};
  for (int r = 0; r < s.n_recordings; ++r) {
    for (SleepStage st : synth::generate_recording(s, r).true_stages) {
      ++counts[static_cast<std::size_t>(st)];
    }
  }
  const double n = static_cast<double>(s.n_recordings * s.epochs_per_recording);
  for (std::size_t k = 0; k < kNumStages; ++k) {
    const double p = s.class_priors[k];
    const double sigma = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::fabs(counts[k] / n - p) < 4.0 * sigma);
  }
}

TEST_CASE("each stage's signal content identifies its class") {
  synth::DatabaseSpec s;
  s.dataset_id = "CLS";
  s.n_recordings = 5;
  s.epochs_per_recording = 32;
  s.class_priors = {0.2, 0.2, 0.2, 0.2, 0.2};
  s.mains_amplitude = 0.0;
  s.noise_std = 4.0;
  s.seed = 0xc1a55;

  std::vector<SleepStage> reference, predicted;
  for (int r = 0; r < s.n_recordings; ++r) {
    const synth::GeneratedRecording gen = synth::generate_recording(s, r);
    for (const Epoch& e : epochs_at_100hz(gen, gen.true_stages, s.dataset_id)) {
      reference.push_back(e.label);
      predicted.push_back(rule_stage(e));
    }
  }
  REQUIRE(reference.size() == 160);
  const metrics::KappaReport rep = metrics::cohen_kappa(reference, predicted);
  REQUIRE(rep.kappa.has_value());
  CHECK(*rep.kappa >= 0.9);
  CHECK(rep.observed_agreement >= 0.92);
}

TEST_CASE("spectral shift moves the slow-wave band without touching eye movements") {
  synth::DatabaseSpec lo = quick_spec();
  lo.class_priors = {0.0, 0.0, 0.0, 1.0, 0.0};  // slow-wave sleep only
  lo.channel_rates_hz = {256.0, 256.0, 256.0, 256.0, 256.0};
  lo.epochs_per_recording = 6;
  synth::DatabaseSpec hi = lo;
  hi.spectral_shift_hz = 2.0;

  const SampleSeries eeg_lo =
      edf::extract_channel(synth::generate_recording(lo, 0).recording, "EEG1");
  const SampleSeries eeg_hi =
      edf::extract_channel(synth::generate_recording(hi, 0).recording, "EEG1");
  const auto power = [](const SampleSeries& x, double f_lo, double f_hi) {
    return band_power(x.samples.data(), x.samples.size(), x.rate_hz, f_lo, f_hi);
  };
  // Template band 0.5-2 Hz moves to 2.5-4 Hz wholesale.
  CHECK(power(eeg_lo, 0.4, 2.1) > 5.0 * power(eeg_hi, 0.4, 2.1));
  CHECK(power(eeg_hi, 2.4, 4.1) > 5.0 * power(eeg_lo, 2.4, 4.1));

  const SampleSeries eog_lo =
      edf::extract_channel(synth::generate_recording(lo, 0).recording, "EOG");
  const SampleSeries eog_hi =
      edf::extract_channel(synth::generate_recording(hi, 0).recording, "EOG");
  // The slow-eye-movement band stays put; N3's EOG component lives at 0.2-0.5 Hz.
  const double sem_lo = power(eog_lo, 0.1, 0.6);
  const double sem_hi = power(eog_hi, 0.1, 0.6);
  CHECK(sem_hi > 0.5 * sem_lo);
  CHECK(sem_hi < 2.0 * sem_lo);
}

TEST_CASE("montage gain rescales the signals and epoch normalization undoes it") {
  synth::DatabaseSpec base = quick_spec();
  base.channel_rates_hz = {128.0, 128.0, 128.0, 128.0, 128.0};
  base.epochs_per_recording = 4;
  synth::DatabaseSpec boosted = base;
  boosted.amplitude_gain = 3.0;

  const synth::GeneratedRecording a = synth::generate_recording(base, 0);
  const synth::GeneratedRecording b = synth::generate_recording(boosted, 0);
  CHECK(a.true_stages == b.true_stages);  // gain must not disturb the draws

  for (const char* label : {"EEG1", "EEG2", "EMG", "EOG"}) {
    const SampleSeries sa = edf::extract_channel(a.recording, label);
    const SampleSeries sb = edf::extract_channel(b.recording, label);
    const double ratio = row_rms(sb.samples.data(), sb.samples.size()) /
                         row_rms(sa.samples.data(), sa.samples.size());
    CHECK(ratio > 2.95);
    CHECK(ratio < 3.05);
  }

  // Per-epoch standardization erases the montage difference down to
  // quantization error.
  const std::vector<Epoch> ea = epochs_at_100hz(a, a.true_stages, "gain1");
  const std::vector<Epoch> eb = epochs_at_100hz(b, b.true_stages, "gain3");
  REQUIRE(ea.size() == eb.size());
  for (std::size_t i = 0; i < ea.size(); ++i) {
    const Epoch na = norm::apply(ea[i], norm::Strategy::EpochBased);
    const Epoch nb = norm::apply(eb[i], norm::Strategy::EpochBased);
    double worst = 0.0;
    for (std::size_t j = 0; j < na.data.size(); ++j) {
      worst = std::max(worst, std::fabs(na.data[j] - nb.data[j]));
    }
    CHECK(worst < 0.02);
  }
}

TEST_CASE("mains interference sits at the spec frequency and the notch removes it") {
  synth::DatabaseSpec s = quick_spec();
  s.channel_rates_hz = {256.0, 256.0, 256.0, 256.0, 256.0};
  s.epochs_per_recording = 4;
  s.mains_hz = 50.0;
  s.mains_amplitude = 25.0;

  const SampleSeries eeg =
      edf::extract_channel(synth::generate_recording(s, 0).recording, "EEG1");
  const std::size_t skip = static_cast<std::size_t>(8.0 * eeg.rate_hz);
  const auto tone = [&](const SampleSeries& x) {
    double acc_s = 0.0, acc_c = 0.0;
    for (std::size_t i = skip; i < x.samples.size(); ++i) {
      const double t = static_cast<double>(i) / x.rate_hz;
      acc_s += x.samples[i] * std::sin(2.0 * kPi * 50.0 * t);
      acc_c += x.samples[i] * std::cos(2.0 * kPi * 50.0 * t);
    }
    const double m = static_cast<double>(x.samples.size() - skip);
    return 2.0 * std::hypot(acc_s, acc_c) / m;
  };

  const double before = tone(eeg);
  CHECK(before > 0.8 * s.mains_amplitude);
  CHECK(before < 1.2 * s.mains_amplitude);
  const double after = tone(dsp::notch(eeg, s.mains_hz));
  CHECK(after < 0.3 * before);
}

TEST_CASE("a written database matches in-memory generation file for file") {
  synth::DatabaseSpec s = quick_spec();
  s.dataset_id = "DBT";
  s.n_recordings = 3;
  s.epochs_per_recording = 2;
  s.channel_rates_hz = {32.0, 32.0, 32.0, 32.0, 32.0};
  s.label_noise_p = 0.2;
  s.seed = 7;

  const std::string dir = "synth_db_test";
  synth::generate_database(s, dir);

  for (int r = 0; r < s.n_recordings; ++r) {
    const synth::GeneratedRecording gen = synth::generate_recording(s, r);
    char base[32];
    std::snprintf(base, sizeof(base), "DBT_r%03d", r);

    const edf::Recording from_disk = edf::read_file(dir + "/" + base + ".edf");
    CHECK(edf::write_recording(from_disk) == edf::write_recording(gen.recording));

    std::ifstream csv(dir + "/" + std::string(base) + ".csv");
    REQUIRE(csv.good());
    std::string line;
    REQUIRE(std::getline(csv, line));
    CHECK(line == "epoch_index,stage");
    for (std::size_t e = 0; e < gen.recorded_stages.size(); ++e) {
      REQUIRE(std::getline(csv, line));
      const std::size_t comma = line.find(',');
      REQUIRE(comma != std::string::npos);
      CHECK(line.substr(0, comma) == std::to_string(e));
      CHECK(line.substr(comma + 1) == stage_name(gen.recorded_stages[e]));
    }
    CHECK_FALSE(std::getline(csv, line));
  }

  std::ifstream mf(dir + "/dataset.json");
  REQUIRE(mf.good());
  std::string manifest((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());
  CHECK(manifest.find("\"dataset_id\": \"DBT\"") != std::string::npos);
  CHECK(manifest.find("DBT_r000.edf") != std::string::npos);
  CHECK(manifest.find("DBT_r002.csv") != std::string::npos);

  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
