#include "somnus/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "somnus/rng.hpp"

namespace somnus::synth {

using json = nlohmann::json;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// ============================================================
// Stage-conditional spectral templates (module constants)
// ============================================================

struct Band {
  double f_lo, f_hi, amp;
};

struct StageTemplate {
  std::vector<Band> eeg;   // sinusoid components for both EEG channels
  Band eog;                // dominant slow eye-movement component
  double emg_rms;          // white-noise muscle tone
  double emg_tone;         // 35 Hz component riding on the EMG
  bool spindles;           // 12-14 Hz bursts (stage 2 signature)
};

const StageTemplate& stage_template(SleepStage s) {
  static const StageTemplate w = {
      {{8.0, 12.0, 18.0}, {18.0, 30.0, 10.0}, {0.5, 2.0, 6.0}}, {0.4, 1.0, 35.0}, 30.0, 21.0, false};
  static const StageTemplate n1 = {
      {{4.0, 7.0, 28.0}, {8.0, 11.0, 7.0}}, {0.25, 0.6, 45.0}, 12.0, 8.4, false};
  static const StageTemplate n2 = {
      {{4.0, 7.0, 22.0}, {0.7, 2.0, 14.0}}, {0.2, 0.5, 12.0}, 8.0, 5.6, true};
  static const StageTemplate n3 = {
      {{0.5, 2.0, 110.0}, {4.0, 6.0, 12.0}}, {0.2, 0.5, 8.0}, 4.0, 2.8, false};
  static const StageTemplate rem = {
      {{4.0, 8.0, 18.0}, {16.0, 24.0, 7.0}}, {0.3, 0.8, 110.0}, 1.5, 1.05, false};
  switch (s) {
    case SleepStage::W: return w;
    case SleepStage::N1: return n1;
    case SleepStage::N2: return n2;
    case SleepStage::N3: return n3;
    default: return rem;
  }
}

struct Component {
  double freq, phase, amp;
};

struct SpindleBurst {
  double t0, freq, phase;  // t0 relative to epoch start
};

constexpr double kSpindleDur = 1.0;
constexpr double kSpindleAmp = 45.0;
constexpr int kSpindlesPerEpoch = 2;
constexpr double kEmgToneHz = 35.0;
constexpr double kEogLeakAmp = 8.0;
constexpr double kEcgPeak = 800.0;
constexpr double kEcgNoise = 2.0;
constexpr double kQrsSigma = 0.012;

// Per-epoch realization of one stage's template.
struct EpochModel {
  SleepStage stage = SleepStage::W;
  std::vector<Component> eeg1, eeg2;
  Component eog, eog_leak;
  double emg_tone_phase = 0.0;
  std::vector<SpindleBurst> spindles;
};

Component draw_component(Rng& rng, const Band& b, double shift) {
  return {rng.uniform(b.f_lo, b.f_hi) + shift, rng.uniform(0.0, kTwoPi), b.amp};
}

EpochModel draw_epoch_model(Rng& rng, SleepStage stage, double shift) {
  const StageTemplate& tpl = stage_template(stage);
  EpochModel m;
  m.stage = stage;
  for (const Band& b : tpl.eeg) m.eeg1.push_back(draw_component(rng, b, shift));
  for (const Band& b : tpl.eeg) m.eeg2.push_back(draw_component(rng, b, shift));
  m.eog = draw_component(rng, tpl.eog, 0.0);  // slow eye movements stay put
  m.eog_leak = {rng.uniform(4.0, 7.0) + shift, rng.uniform(0.0, kTwoPi), kEogLeakAmp};
  m.emg_tone_phase = rng.uniform(0.0, kTwoPi);
  if (tpl.spindles) {
    for (int i = 0; i < kSpindlesPerEpoch; ++i) {
      m.spindles.push_back({rng.uniform(0.0, kEpochSeconds - kSpindleDur),
                            rng.uniform(12.0, 14.0) + shift, rng.uniform(0.0, kTwoPi)});
    }
  }
  return m;
}

double eval_components(const std::vector<Component>& comps, double t) {
  double v = 0.0;
  for (const Component& c : comps) v += c.amp * std::sin(kTwoPi * c.freq * t + c.phase);
  return v;
}

double eval_spindles(const std::vector<SpindleBurst>& bursts, double t_in_epoch, double t_abs) {
  double v = 0.0;
  for (const SpindleBurst& s : bursts) {
    const double u = t_in_epoch - s.t0;
    if (u < 0.0 || u > kSpindleDur) continue;
    const double env = 0.5 * (1.0 - std::cos(kTwoPi * u / kSpindleDur));
    v += kSpindleAmp * env * std::sin(kTwoPi * s.freq * t_abs + s.phase);
  }
  return v;
}

// Gaussian QRS-like pulse train; only the neighboring beats matter at any t.
double eval_pulse(double t, double t0, double beat_period) {
  const double k = std::floor((t - t0) / beat_period);
  double v = 0.0;
  for (int d = 0; d <= 2; ++d) {
    const double tb = t0 + (k - 1.0 + d) * beat_period;
    const double u = (t - tb) / kQrsSigma;
    if (std::fabs(u) < 8.0) v += std::exp(-0.5 * u * u);
  }
  return v;
}

// ============================================================
// EDF encoding
// ============================================================

edf::Recording encode(const DatabaseSpec& spec, int index,
                      const std::vector<std::vector<double>>& channels,
                      const std::vector<std::string>& labels) {
  edf::Recording rec;
  char name[64];
  std::snprintf(name, sizeof(name), "%s_r%03d", spec.dataset_id.c_str(), index);
  rec.patient_id = std::string("synthetic subject ") + name;
  rec.recording_id = std::string("Startdate 01-JAN-2000 ") + name;
  rec.start_date = "01.01.00";
  rec.start_time = "22.00.00";
  rec.record_duration_s = 1.0;
  rec.num_records = spec.epochs_per_recording * static_cast<int>(kEpochSeconds);

  for (std::size_t c = 0; c < channels.size(); ++c) {
    const int rate = static_cast<int>(spec.channel_rates_hz[c]);
    double peak = 1.0;
    for (double v : channels[c]) peak = std::max(peak, std::fabs(v));
    const double limit = std::ceil(peak * 1.05);

    edf::SignalDef sd;
    sd.label = labels[c];
    sd.transducer = "synthetic";
    sd.physical_dimension = "uV";
    sd.physical_min = -limit;
    sd.physical_max = limit;
    sd.digital_min = -32767;
    sd.digital_max = 32767;
    sd.prefilter = "";
    sd.samples_per_record = rate;
    rec.signals.push_back(sd);

    std::vector<std::int16_t> digital(channels[c].size());
    for (std::size_t i = 0; i < channels[c].size(); ++i) {
      // Clip to the declared physical range, then quantize.
      const double clipped = std::clamp(channels[c][i], -limit, limit);
      digital[i] = static_cast<std::int16_t>(std::lround(clipped / limit * 32767.0));
    }
    rec.samples.push_back(std::move(digital));
  }
  return rec;
}

}  // namespace

// ============================================================
// Spec handling
// ============================================================

void validate_spec(const DatabaseSpec& spec) {
  auto fail = [](const std::string& msg) { throw InvalidSpec(msg); };
  if (spec.dataset_id.empty()) fail("dataset_id must not be empty");
  if (spec.n_recordings < 1) fail("n_recordings must be >= 1");
  if (spec.epochs_per_recording < 1) fail("epochs_per_recording must be >= 1");
  double prior_sum = 0.0;
  for (double p : spec.class_priors) {
    if (p < 0.0) fail("class priors must be non-negative");
    prior_sum += p;
  }
  if (std::fabs(prior_sum - 1.0) > 1e-6) fail("class priors must sum to 1");
  for (double r : spec.channel_rates_hz) {
    if (r < 16.0 || r > 4096.0) fail("channel rates must be within 16..4096 Hz");
    if (r != std::floor(r)) fail("channel rates must be integer-valued");
  }
  if (spec.amplitude_gain <= 0.0) fail("amplitude_gain must be positive");
  if (spec.mains_hz <= 0.0) fail("mains_hz must be positive");
  if (spec.mains_amplitude < 0.0) fail("mains_amplitude must be non-negative");
  if (spec.noise_std < 0.0) fail("noise_std must be non-negative");
  if (spec.ecg_coupling < 0.0) fail("ecg_coupling must be non-negative");
  if (spec.label_noise_p < 0.0 || spec.label_noise_p >= 1.0) {
    fail("label_noise_p must be in [0, 1)");
  }
  if (std::fabs(spec.spectral_shift_hz) > 3.0) {
    fail("spectral_shift_hz must stay within +-3 Hz to keep stages distinct");
  }
}

std::string spec_to_json(const DatabaseSpec& s) {
  json j;
  j["dataset_id"] = s.dataset_id;
  j["n_recordings"] = s.n_recordings;
  j["epochs_per_recording"] = s.epochs_per_recording;
  j["class_priors"] = s.class_priors;
  j["channel_rates_hz"] = s.channel_rates_hz;
  j["amplitude_gain"] = s.amplitude_gain;
  j["mains_hz"] = s.mains_hz;
  j["mains_amplitude"] = s.mains_amplitude;
  j["noise_std"] = s.noise_std;
  j["ecg_coupling"] = s.ecg_coupling;
  j["label_noise_p"] = s.label_noise_p;
  j["spectral_shift_hz"] = s.spectral_shift_hz;
  j["seed"] = s.seed;
  return j.dump(2);
}

DatabaseSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidSpec("spec must be a JSON object");
  DatabaseSpec s;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      if (key == "dataset_id") s.dataset_id = it.value().get<std::string>();
      else if (key == "n_recordings") s.n_recordings = it.value().get<int>();
      else if (key == "epochs_per_recording") s.epochs_per_recording = it.value().get<int>();
      else if (key == "class_priors") {
        const auto v = it.value().get<std::vector<double>>();
        if (v.size() != kNumStages) throw InvalidSpec("class_priors needs 5 entries");
        std::copy(v.begin(), v.end(), s.class_priors.begin());
      } else if (key == "channel_rates_hz") {
        const auto v = it.value().get<std::vector<double>>();
        if (v.size() != 5) throw InvalidSpec("channel_rates_hz needs 5 entries");
        std::copy(v.begin(), v.end(), s.channel_rates_hz.begin());
      }
      else if (key == "amplitude_gain") s.amplitude_gain = it.value().get<double>();
      else if (key == "mains_hz") s.mains_hz = it.value().get<double>();
      else if (key == "mains_amplitude") s.mains_amplitude = it.value().get<double>();
      else if (key == "noise_std") s.noise_std = it.value().get<double>();
      else if (key == "ecg_coupling") s.ecg_coupling = it.value().get<double>();
      else if (key == "label_noise_p") s.label_noise_p = it.value().get<double>();
      else if (key == "spectral_shift_hz") s.spectral_shift_hz = it.value().get<double>();
      else if (key == "seed") s.seed = it.value().get<std::uint64_t>();
      else throw InvalidSpec("unknown spec key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("spec field has the wrong type: ") + e.what());
  }
  validate_spec(s);
  return s;
}

// ============================================================
// Generation
// ============================================================

GeneratedRecording generate_recording(const DatabaseSpec& spec, int index) {
  validate_spec(spec);
  Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(index)));

  // Recording-wide draws first, then stages, then per-epoch realizations,
  // then samples. The order is part of the reproducibility contract.
  const double beat_period = 60.0 / rng.uniform(55.0, 75.0);
  const double beat_t0 = rng.uniform(0.0, beat_period);
  const double mains_phase = rng.uniform(0.0, kTwoPi);

  const int n_epochs = spec.epochs_per_recording;
  const std::vector<double> priors(spec.class_priors.begin(), spec.class_priors.end());
  std::vector<SleepStage> truth(n_epochs);
  for (int e = 0; e < n_epochs; ++e) {
    truth[e] = static_cast<SleepStage>(rng.categorical(priors));
  }

  std::vector<EpochModel> models;
  models.reserve(n_epochs);
  for (int e = 0; e < n_epochs; ++e) {
    models.push_back(draw_epoch_model(rng, truth[e], spec.spectral_shift_hz));
  }

  const bool has_ecg = spec.ecg_coupling > 0.0;
  const std::size_t n_channels = has_ecg ? 5 : 4;
  std::vector<std::vector<double>> channels(n_channels);
  for (std::size_t c = 0; c < n_channels; ++c) {
    const int rate = static_cast<int>(spec.channel_rates_hz[c]);
    const std::size_t per_epoch = static_cast<std::size_t>(rate) * 30;
    channels[c].resize(per_epoch * static_cast<std::size_t>(n_epochs));
    for (int e = 0; e < n_epochs; ++e) {
      const EpochModel& m = models[e];
      const StageTemplate& tpl = stage_template(m.stage);
      for (std::size_t i = 0; i < per_epoch; ++i) {
        const double t_in = static_cast<double>(i) / rate;
        const double t = e * kEpochSeconds + t_in;
        double v = 0.0;
        switch (c) {
          case 0:
            v = eval_components(m.eeg1, t) + eval_spindles(m.spindles, t_in, t);
            break;
          case 1:
            v = eval_components(m.eeg2, t) + eval_spindles(m.spindles, t_in, t);
            break;
          case 2:
            v = tpl.emg_tone * std::sin(kTwoPi * kEmgToneHz * t + m.emg_tone_phase) +
                tpl.emg_rms * rng.normal();
            break;
          case 3:
            v = m.eog.amp * std::sin(kTwoPi * m.eog.freq * t + m.eog.phase) +
                m.eog_leak.amp * std::sin(kTwoPi * m.eog_leak.freq * t + m.eog_leak.phase);
            break;
          case 4:
            v = kEcgPeak * eval_pulse(t, beat_t0, beat_period) + kEcgNoise * rng.normal();
            break;
        }
        if (c < 4) {
          v += spec.noise_std * rng.normal();
          if (has_ecg) v += spec.ecg_coupling * eval_pulse(t, beat_t0, beat_period);
        }
        v += spec.mains_amplitude * std::sin(kTwoPi * spec.mains_hz * t + mains_phase);
        channels[c][e * per_epoch + i] = v * spec.amplitude_gain;
      }
    }
  }

  // The recorded hypnogram may disagree with the signals: each label flips
  // to one of the other stages with probability label_noise_p.
  std::vector<SleepStage> recorded = truth;
  if (spec.label_noise_p > 0.0) {
    for (int e = 0; e < n_epochs; ++e) {
      if (rng.next_double() < spec.label_noise_p) {
        const std::size_t shift = 1 + rng.next_below(kNumStages - 1);
        recorded[e] = static_cast<SleepStage>(
            (static_cast<std::size_t>(truth[e]) + shift) % kNumStages);
      }
    }
  }

  std::vector<std::string> labels = {"EEG1", "EEG2", "EMG", "EOG"};
  if (has_ecg) labels.push_back("ECG");

  GeneratedRecording out;
  out.recording = encode(spec, index, channels, labels);
  out.true_stages = std::move(truth);
  out.recorded_stages = std::move(recorded);
  return out;
}

void generate_database(const DatabaseSpec& spec, const std::string& out_dir) {
  validate_spec(spec);
  std::filesystem::create_directories(out_dir);

  json manifest;
  manifest["dataset_id"] = spec.dataset_id;
  manifest["mains_hz"] = spec.mains_hz;
  manifest["spec"] = json::parse(spec_to_json(spec));
  json recordings = json::array();

  for (int r = 0; r < spec.n_recordings; ++r) {
    const GeneratedRecording gen = generate_recording(spec, r);
    char base[64];
    std::snprintf(base, sizeof(base), "%s_r%03d", spec.dataset_id.c_str(), r);
    const std::string edf_name = std::string(base) + ".edf";
    const std::string csv_name = std::string(base) + ".csv";
    edf::write_file(gen.recording, out_dir + "/" + edf_name);

    std::ofstream csv(out_dir + "/" + csv_name, std::ios::trunc);
    if (!csv) throw Error("cannot create '" + csv_name + "'");
    csv << "epoch_index,stage\n";
    for (std::size_t e = 0; e < gen.recorded_stages.size(); ++e) {
      csv << e << "," << stage_name(gen.recorded_stages[e]) << "\n";
    }
    recordings.push_back({{"edf", edf_name}, {"hypnogram", csv_name}});
  }
  manifest["recordings"] = recordings;

  std::ofstream mf(out_dir + "/dataset.json", std::ios::trunc);
  if (!mf) throw Error("cannot create dataset.json");
  mf << manifest.dump(2) << "\n";
}

}  // namespace somnus::synth
