#include "somnus/dsp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "somnus/kernels.hpp"

namespace somnus {

// ============================================================
// Stage vocabulary (lives here because epoch assembly owns it)
// ============================================================

const char* stage_name(SleepStage s) {
  switch (s) {
    case SleepStage::W: return "W";
    case SleepStage::N1: return "N1";
    case SleepStage::N2: return "N2";
    case SleepStage::N3: return "N3";
    case SleepStage::R: return "R";
    default: return "EXCLUDED";
  }
}

SleepStage map_stage(const std::string& raw_label) {
  std::string s;
  s.reserve(raw_label.size());
  for (char c : raw_label) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
  }
  if (s == "W" || s == "WAKE" || s == "AWAKE") return SleepStage::W;
  if (s == "N1" || s == "S1" || s == "STAGE1") return SleepStage::N1;
  if (s == "N2" || s == "S2" || s == "STAGE2") return SleepStage::N2;
  // The older six-stage scheme splits deep sleep in two; both halves fold
  // into N3.
  if (s == "N3" || s == "S3" || s == "S4" || s == "STAGE3" || s == "STAGE4" || s == "SWS") {
    return SleepStage::N3;
  }
  if (s == "R" || s == "REM" || s == "STAGER") return SleepStage::R;
  return SleepStage::Excluded;
}

}  // namespace somnus

namespace somnus::dsp {
namespace {

// ============================================================
// IIR building blocks (recursive, so they stay scalar)
// ============================================================

struct Biquad {
  double b0, b1, b2, a1, a2;  // a0 normalized to 1
};

std::vector<double> run_biquad(const Biquad& f, const std::vector<double>& x) {
  // Direct form II transposed, zero initial state.
  std::vector<double> y(x.size());
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double out = f.b0 * x[n] + s1;
    s1 = f.b1 * x[n] - f.a1 * out + s2;
    s2 = f.b2 * x[n] - f.a2 * out;
    y[n] = out;
  }
  return y;
}

}  // namespace

SampleSeries notch(const SampleSeries& in, double mains_hz, bool* skipped) {
  if (skipped) *skipped = false;
  if (in.rate_hz <= 0.0) throw RateMismatch("notch: sampling rate must be positive");
  if (mains_hz <= 0.0) throw NyquistViolation("notch: mains frequency must be positive");
  if (mains_hz >= in.rate_hz / 2.0) {
    // No such filter exists at this rate; report and pass through.
    if (skipped) *skipped = true;
    return in;
  }
  constexpr double kQ = 30.0;
  const double w0 = 2.0 * M_PI * mains_hz / in.rate_hz;
  const double alpha = std::sin(w0) / (2.0 * kQ);
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha;
  const Biquad f = {1.0 / a0, -2.0 * cw / a0, 1.0 / a0, -2.0 * cw / a0, (1.0 - alpha) / a0};
  SampleSeries out;
  out.rate_hz = in.rate_hz;
  out.samples = run_biquad(f, in.samples);
  return out;
}

SampleSeries highpass_emg(const SampleSeries& in) {
  constexpr double kCutoffHz = 15.0;
  if (in.rate_hz <= 2.0 * kCutoffHz) {
    throw NyquistViolation("high-pass: cutoff 15 Hz needs a rate above 30 Hz, got " +
                           std::to_string(in.rate_hz));
  }
  // Bilinear transform of H(s) = s / (s + wc), prewarped so the -3 dB point
  // lands exactly on the cutoff.
  const double k = std::tan(M_PI * kCutoffHz / in.rate_hz);
  const double b0 = 1.0 / (1.0 + k);
  SampleSeries out;
  out.rate_hz = in.rate_hz;
  out.samples.resize(in.samples.size());
  const double a1 = (k - 1.0) / (k + 1.0);
  double prev_x = 0.0, prev_y = 0.0;
  for (std::size_t n = 0; n < in.samples.size(); ++n) {
    const double y = b0 * (in.samples[n] - prev_x) - a1 * prev_y;
    prev_x = in.samples[n];
    prev_y = y;
    out.samples[n] = y;
  }
  return out;
}

SampleSeries ecg_cancel(const SampleSeries& in, const SampleSeries& ecg) {
  if (ecg.samples.empty()) return in;  // no reference, nothing to cancel
  if (std::fabs(ecg.rate_hz - in.rate_hz) > 1e-9) {
    throw RateMismatch("ecg_cancel: reference rate " + std::to_string(ecg.rate_hz) +
                       " differs from channel rate " + std::to_string(in.rate_hz));
  }
  if (ecg.samples.size() != in.samples.size()) {
    throw LengthMismatch("ecg_cancel: reference and channel lengths differ");
  }

  constexpr std::size_t kTaps = 32;
  constexpr double kMu = 0.01;
  // Taps are centered on zero lag so the filter can absorb alignment error
  // in either direction (about +/-100 ms at typical PSG rates).
  constexpr std::size_t kLead = kTaps / 2;

  // Padded reference so every window is a contiguous read.
  const std::size_t n = in.samples.size();
  std::vector<double> pad(n + kTaps, 0.0);
  std::copy(ecg.samples.begin(), ecg.samples.end(), pad.begin() + (kTaps - kLead - 1));

  // The NLMS denominator is floored with a fraction of the mean window
  // energy. A per-window epsilon alone is treacherous here: between beats
  // the reference is nearly silent, and once the window energy drifts down
  // to the epsilon's scale the normalized update mu*err*x/(eps+E) kicks the
  // taps by orders of magnitude, which the next beat then amplifies into
  // huge output spikes. Windows far below the typical energy carry no
  // usable artifact information, so their updates are damped away instead.
  const double floor =
      0.03 * (kTaps * kern::sumsq(ecg.samples.data(), n) / static_cast<double>(n)) + 1e-12;

  std::vector<double> w(kTaps, 0.0);
  SampleSeries out;
  out.rate_hz = in.rate_hz;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* window = pad.data() + i;  // ecg[i-15 .. i+16]
    const double est = kern::dot(w.data(), window, kTaps);
    const double err = in.samples[i] - est;
    out.samples[i] = err;
    const double energy = kern::sumsq(window, kTaps);
    kern::axpy(kMu * err / (floor + energy), window, w.data(), kTaps);
  }
  return out;
}

// ============================================================
// Polyphase resampler
// ============================================================

namespace {

// Best rational approximation of a positive ratio by continued fractions.
void to_rational(double ratio, std::uint64_t& p, std::uint64_t& q) {
  constexpr std::uint64_t kMaxDen = 4096;
  std::uint64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double x = ratio;
  for (int iter = 0; iter < 64; ++iter) {
    const double fl = std::floor(x);
    const std::uint64_t a = static_cast<std::uint64_t>(fl);
    const std::uint64_t p2 = a * p1 + p0;
    const std::uint64_t q2 = a * q1 + q0;
    if (q2 > kMaxDen) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    const double frac = x - fl;
    if (frac < 1e-12) break;
    x = 1.0 / frac;
  }
  p = p1;
  q = q1;
  if (p == 0 || q == 0 || std::fabs(static_cast<double>(p) / static_cast<double>(q) - ratio) >
                              1e-9 * ratio) {
    throw RateMismatch("resample: rate ratio has no small rational form");
  }
}

double bessel_i0(double x) {
  // Power series; converges quickly for the beta values used here.
  double term = 1.0, sum = 1.0;
  const double hx = 0.5 * x;
  for (int k = 1; k < 64; ++k) {
    term *= (hx / k) * (hx / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

}  // namespace

SampleSeries resample_to(const SampleSeries& in, double target_hz) {
  if (in.rate_hz <= 0.0 || target_hz <= 0.0) {
    throw RateMismatch("resample: rates must be positive");
  }
  if (in.rate_hz == target_hz) return in;  // strict pass-through

  std::uint64_t p = 0, q = 0;
  to_rational(target_hz / in.rate_hz, p, q);

  constexpr std::size_t kTapsPerPhase = 64;
  constexpr double kBeta = 7.857;  // Kaiser, ~80 dB stopband
  const std::size_t proto_len = kTapsPerPhase * static_cast<std::size_t>(p);
  const double center = 0.5 * static_cast<double>(proto_len - 1);
  const double cutoff = 1.0 / (2.0 * static_cast<double>(std::max(p, q)));  // at upsampled rate

  // Kaiser-windowed sinc prototype, gain p to offset zero stuffing.
  std::vector<double> proto(proto_len);
  const double i0b = bessel_i0(kBeta);
  for (std::size_t k = 0; k < proto_len; ++k) {
    const double t = static_cast<double>(k) - center;
    const double x = 2.0 * cutoff * t;
    const double sinc = x == 0.0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
    const double u = t / center;
    const double win = bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0b;
    proto[k] = 2.0 * cutoff * static_cast<double>(p) * sinc * win;
  }

  // Split into p phases, reverse each so output taps align with an ascending
  // input window, and normalize each phase to unit sum so constants survive
  // resampling exactly.
  std::vector<std::vector<double>> phase(p, std::vector<double>(kTapsPerPhase, 0.0));
  for (std::uint64_t r = 0; r < p; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < kTapsPerPhase; ++j) {
      const std::size_t k = r + p * j;
      const double tap = k < proto_len ? proto[k] : 0.0;
      phase[r][kTapsPerPhase - 1 - j] = tap;
      s += tap;
    }
    if (s != 0.0) {
      for (double& tap : phase[r]) tap /= s;
    }
  }

  const std::size_t len_in = in.samples.size();
  const std::size_t len_out =
      static_cast<std::size_t>((2 * static_cast<std::uint64_t>(len_in) * p + q) / (2 * q));
  SampleSeries out;
  out.rate_hz = target_hz;
  out.samples.resize(len_out);
  if (len_in == 0) return out;

  const std::int64_t delay = static_cast<std::int64_t>((proto_len - 1) / 2);
  const std::int64_t t = static_cast<std::int64_t>(kTapsPerPhase);
  for (std::size_t m = 0; m < len_out; ++m) {
    const std::uint64_t l = static_cast<std::uint64_t>(m) * q + static_cast<std::uint64_t>(delay);
    const std::int64_t n0 = static_cast<std::int64_t>(l / p);
    const std::uint64_t r = l % p;
    const std::int64_t first = n0 - t + 1;  // ascending window [first, n0]
    if (first >= 0 && n0 < static_cast<std::int64_t>(len_in)) {
      out.samples[m] = kern::dot(phase[r].data(), in.samples.data() + first, kTapsPerPhase);
    } else {
      // Edge: clamp indices (hold the boundary value).
      double acc = 0.0;
      for (std::int64_t j = 0; j < t; ++j) {
        const std::int64_t idx =
            std::clamp<std::int64_t>(first + j, 0, static_cast<std::int64_t>(len_in) - 1);
        acc += phase[r][static_cast<std::size_t>(j)] * in.samples[static_cast<std::size_t>(idx)];
      }
      out.samples[m] = acc;
    }
  }
  return out;
}

// ============================================================
// Epoch assembly and the end-to-end pipeline
// ============================================================

std::vector<Epoch> build_epochs(const std::vector<SampleSeries>& channels,
                                const std::vector<SleepStage>& hypnogram,
                                const std::string& dataset_id,
                                const std::string& recording_id) {
  if (channels.size() != kEpochChannels) {
    throw ChannelCountMismatch("expected " + std::to_string(kEpochChannels) + " channels, got " +
                               std::to_string(channels.size()));
  }
  for (const SampleSeries& ch : channels) {
    if (std::fabs(ch.rate_hz - kTargetRateHz) > 1e-9) {
      throw RateMismatch("epoch assembly expects " + std::to_string(kTargetRateHz) + " Hz input");
    }
    if (ch.samples.size() < hypnogram.size() * kEpochSamples) {
      throw ChannelTooShort("channel holds " + std::to_string(ch.samples.size()) +
                            " samples, hypnogram needs " +
                            std::to_string(hypnogram.size() * kEpochSamples));
    }
  }

  std::vector<Epoch> epochs;
  epochs.reserve(hypnogram.size());
  for (std::size_t i = 0; i < hypnogram.size(); ++i) {
    if (hypnogram[i] == SleepStage::Excluded) continue;
    Epoch e;
    e.cols = kEpochSamples;
    e.data.resize(kEpochChannels * kEpochSamples);
    for (std::size_t ch = 0; ch < kEpochChannels; ++ch) {
      const double* src = channels[ch].samples.data() + i * kEpochSamples;
      std::copy(src, src + kEpochSamples, e.row(ch));
    }
    e.label = hypnogram[i];
    e.dataset_id = dataset_id;
    e.recording_id = recording_id;
    e.index_in_recording = i;
    epochs.push_back(std::move(e));
  }
  return epochs;
}

std::array<SampleSeries, kEpochChannels> condition_channels(const ConditionInput& in,
                                                            bool filtering_enabled,
                                                            std::vector<std::string>* notes) {
  std::array<const SampleSeries*, kEpochChannels> raw = {&in.eeg1, &in.eeg2, &in.emg, &in.eog};
  static const char* kNames[kEpochChannels] = {"EEG1", "EEG2", "EMG", "EOG"};
  std::array<SampleSeries, kEpochChannels> out;

  SampleSeries ecg_ref;
  if (filtering_enabled && in.ecg && !in.ecg->samples.empty()) {
    bool skipped = false;
    ecg_ref = notch(*in.ecg, in.mains_hz, &skipped);
    if (skipped && notes) {
      notes->push_back("notch skipped on ECG: mains at or above Nyquist");
    }
  }

  for (std::size_t c = 0; c < kEpochChannels; ++c) {
    SampleSeries ch = *raw[c];
    if (filtering_enabled) {
      bool skipped = false;
      ch = notch(ch, in.mains_hz, &skipped);
      if (skipped && notes) {
        notes->push_back(std::string("notch skipped on ") + kNames[c] +
                         ": mains at or above Nyquist");
      }
      if (c == 2) ch = highpass_emg(ch);  // EMG only
      if (!ecg_ref.samples.empty()) {
        ch = ecg_cancel(ch, resample_to(ecg_ref, ch.rate_hz));
      }
    }
    out[c] = resample_to(ch, kTargetRateHz);
  }
  return out;
}

}  // namespace somnus::dsp
