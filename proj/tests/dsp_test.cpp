#include <doctest.h>

#include <cmath>
#include <tuple>
#include <vector>

#include "somnus/dsp.hpp"
#include "somnus/rng.hpp"

using namespace somnus;

namespace {

constexpr double kPi = 3.14159265358979323846;

SampleSeries sine(double freq, double rate, std::size_t n, double amp = 1.0, double phase = 0.0) {
  SampleSeries s;
  s.rate_hz = rate;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.samples[i] = amp * std::sin(2.0 * kPi * freq * static_cast<double>(i) / rate + phase);
  }
  return s;
}

// Steady-state amplitude by quadrature projection over the signal's tail,
// independent of the filter's phase shift.
double tone_amplitude(const SampleSeries& s, double freq, std::size_t skip) {
  double a = 0.0, b = 0.0;
  const std::size_t n = s.samples.size();
  REQUIRE(skip < n);
  const std::size_t m = n - skip;
  for (std::size_t i = skip; i < n; ++i) {
    const double t = static_cast<double>(i) / s.rate_hz;
    a += s.samples[i] * std::sin(2.0 * kPi * freq * t);
    b += s.samples[i] * std::cos(2.0 * kPi * freq * t);
  }
  a *= 2.0 / static_cast<double>(m);
  b *= 2.0 / static_cast<double>(m);
  return std::sqrt(a * a + b * b);
}

double db(double ratio) { return 20.0 * std::log10(ratio); }

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace

TEST_SUITE("dsp") {

TEST_CASE("stage label aliases collapse to the five-stage scheme") {
  CHECK(map_stage("W") == SleepStage::W);
  CHECK(map_stage(" wake ") == SleepStage::W);
  CHECK(map_stage("AWAKE") == SleepStage::W);
  CHECK(map_stage("N1") == SleepStage::N1);
  CHECK(map_stage("s1") == SleepStage::N1);
  CHECK(map_stage("Stage 1") == SleepStage::N1);
  CHECK(map_stage("n2") == SleepStage::N2);
  CHECK(map_stage("S3") == SleepStage::N3);
  CHECK(map_stage("S4") == SleepStage::N3);
  CHECK(map_stage("SWS") == SleepStage::N3);
  CHECK(map_stage("REM") == SleepStage::R);
  CHECK(map_stage("stage r") == SleepStage::R);
  CHECK(map_stage("movement") == SleepStage::Excluded);
  CHECK(map_stage("?") == SleepStage::Excluded);
  for (auto s : {SleepStage::W, SleepStage::N1, SleepStage::N2, SleepStage::N3, SleepStage::R}) {
    CHECK(map_stage(stage_name(s)) == s);
  }
}

TEST_CASE("notch attenuates the mains tone by 40 dB and spares its neighbors") {
  const double fs = 200.0;
  const std::size_t n = 8000;
  bool skipped = true;
  const SampleSeries at_mains = dsp::notch(sine(50.0, fs, n), 50.0, &skipped);
  CHECK_FALSE(skipped);
  CHECK(db(tone_amplitude(at_mains, 50.0, n / 2)) <= -40.0);

  for (double f : {45.0, 55.0}) {
    const SampleSeries near = dsp::notch(sine(f, fs, n), 50.0, nullptr);
    CHECK(db(tone_amplitude(near, f, n / 2)) >= -1.0);
  }
}

TEST_CASE("notch skips and reports when mains reaches Nyquist") {
  const SampleSeries in = sine(7.0, 64.0, 640);
  bool skipped = false;
  const SampleSeries out = dsp::notch(in, 50.0, &skipped);
  CHECK(skipped);
  CHECK(out.samples == in.samples);

  skipped = false;
  const SampleSeries edge = dsp::notch(sine(7.0, 100.0, 500), 50.0, &skipped);
  CHECK(skipped);  // 50 Hz at a 100 Hz rate sits exactly on Nyquist
}

TEST_CASE("muscle high-pass is 3 dB down at its 15 Hz corner") {
  const double fs = 100.0;
  const std::size_t n = 6000;
  const double at_corner = db(tone_amplitude(dsp::highpass_emg(sine(15.0, fs, n)), 15.0, n / 2));
  CHECK(at_corner <= -2.5);
  CHECK(at_corner >= -3.5);
  // Passband barely touched, stopband strongly attenuated.
  CHECK(db(tone_amplitude(dsp::highpass_emg(sine(40.0, fs, n)), 40.0, n / 2)) >= -0.5);
  CHECK(db(tone_amplitude(dsp::highpass_emg(sine(2.0, fs, n)), 2.0, n / 2)) <= -12.0);
}

TEST_CASE("high-pass refuses rates at or below twice its corner") {
  CHECK_THROWS_AS(dsp::highpass_emg(sine(5.0, 30.0, 300)), dsp::NyquistViolation);
  CHECK_NOTHROW(dsp::highpass_emg(sine(5.0, 64.0, 300)));
}

TEST_CASE("resampler preserves an in-band tone within 1 percent") {
  const SampleSeries out = dsp::resample_to(sine(10.0, 200.0, 4000), 100.0);
  CHECK(out.rate_hz == doctest::Approx(100.0));
  CHECK(out.samples.size() == 2000);
  const double amp = tone_amplitude(out, 10.0, 200);
  CHECK(amp == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("resampler handles non-integer ratios and keeps DC exact") {
  const SampleSeries out = dsp::resample_to(sine(8.0, 256.0, 2560), 100.0);
  CHECK(out.samples.size() == 1000);
  CHECK(tone_amplitude(out, 8.0, 128) == doctest::Approx(1.0).epsilon(0.01));

  SampleSeries flat;
  flat.rate_hz = 256.0;
  flat.samples.assign(2560, 3.25);
  const SampleSeries dc = dsp::resample_to(flat, 100.0);
  for (double v : dc.samples) CHECK(v == doctest::Approx(3.25).epsilon(1e-9));
}

TEST_CASE("resampling to the native rate is a bitwise pass-through") {
  Rng rng(0x7273);
  SampleSeries s;
  s.rate_hz = 128.0;
  s.samples.resize(777);
  for (auto& v : s.samples) v = rng.uniform(-5.0, 5.0);
  const SampleSeries out = dsp::resample_to(s, 128.0);
  CHECK(out.samples == s.samples);
}

TEST_CASE("output length follows the rounded rational ratio") {
  const std::vector<std::tuple<std::size_t, double, double>> cases = {
      {1000, 200.0, 100.0}, {2001, 200.0, 100.0}, {999, 256.0, 100.0}, {500, 100.0, 256.0}};
  for (auto [len, from, to] : cases) {
    SampleSeries s;
    s.rate_hz = from;
    s.samples.assign(len, 0.0);
    const double exact = static_cast<double>(len) * to / from;
    const auto expected = static_cast<std::size_t>(std::floor(exact + 0.5));
    CHECK(dsp::resample_to(s, to).samples.size() == expected);
  }
}

TEST_CASE("adaptive cancellation strips a coupled cardiac artifact") {
  const double fs = 128.0;
  const std::size_t n = static_cast<std::size_t>(fs) * 120;
  // Reference pulse train at 72 bpm; the contaminated channel sees a scaled,
  // slightly lagged copy on top of a clean 9 Hz tone. Run once with a
  // noiseless reference and once with sensor noise on it.
  for (double ref_noise : {0.0, 2.0}) {
    CAPTURE(ref_noise);
    Rng noise_rng(0x6563);
    SampleSeries ref;
    ref.rate_hz = fs;
    ref.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double beat = t - std::floor(t / (60.0 / 72.0)) * (60.0 / 72.0);
      const double u = (beat - 0.2) / 0.012;
      ref.samples[i] = 800.0 * std::exp(-0.5 * u * u) + ref_noise * noise_rng.normal();
    }
    const SampleSeries clean = sine(9.0, fs, n, 30.0);
    SampleSeries dirty = clean;
    for (std::size_t i = 2; i < n; ++i) dirty.samples[i] += 0.05 * ref.samples[i - 2];

    const SampleSeries fixed = dsp::ecg_cancel(dirty, ref);
    REQUIRE(fixed.samples.size() == n);
    // Judge on the second half, after the adaptive taps have converged, and
    // demand the output never blows past the input's own scale.
    std::vector<double> b2, a2;
    double peak_in = 0.0, peak_out = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      peak_in = std::max(peak_in, std::fabs(dirty.samples[i]));
      peak_out = std::max(peak_out, std::fabs(fixed.samples[i]));
    }
    for (std::size_t i = n / 2; i < n; ++i) {
      b2.push_back(dirty.samples[i] - clean.samples[i]);
      a2.push_back(fixed.samples[i] - clean.samples[i]);
    }
    CHECK(rms(a2) < (ref_noise == 0.0 ? 0.35 : 0.5) * rms(b2));
    CHECK(peak_out < 2.0 * peak_in);
  }
}

TEST_CASE("cancellation with an empty reference is the identity") {
  const SampleSeries x = sine(3.0, 100.0, 500);
  SampleSeries empty;
  empty.rate_hz = 100.0;
  const SampleSeries out = dsp::ecg_cancel(x, empty);
  CHECK(out.samples == x.samples);
}

TEST_CASE("cancellation enforces matching geometry") {
  const SampleSeries x = sine(3.0, 100.0, 500);
  CHECK_THROWS_AS(dsp::ecg_cancel(x, sine(3.0, 128.0, 500)), dsp::RateMismatch);
  CHECK_THROWS_AS(dsp::ecg_cancel(x, sine(3.0, 100.0, 499)), dsp::LengthMismatch);
}

TEST_CASE("epoch builder slices, labels and drops excluded entries") {
  std::vector<SampleSeries> chans(4);
  for (std::size_t c = 0; c < 4; ++c) {
    chans[c].rate_hz = 100.0;
    chans[c].samples.resize(3000 * 3 + 50);  // a trailing partial window
    for (std::size_t i = 0; i < chans[c].samples.size(); ++i) {
      chans[c].samples[i] = static_cast<double>(c * 100000 + i);
    }
  }
  const std::vector<SleepStage> hyp = {SleepStage::W, SleepStage::Excluded, SleepStage::N2};
  const auto epochs = dsp::build_epochs(chans, hyp, "DB", "rec7");
  REQUIRE(epochs.size() == 2);
  CHECK(epochs[0].label == SleepStage::W);
  CHECK(epochs[0].index_in_recording == 0);
  CHECK(epochs[1].label == SleepStage::N2);
  CHECK(epochs[1].index_in_recording == 2);
  CHECK(epochs[0].dataset_id == "DB");
  CHECK(epochs[0].recording_id == "rec7");
  // Row 2 of epoch 1 starts at sample 2*3000 of channel 2.
  CHECK(epochs[1].row(2)[0] == doctest::Approx(200000.0 + 6000.0));
}

TEST_CASE("epoch builder verifies channel geometry") {
  std::vector<SampleSeries> chans(4);
  for (auto& c : chans) {
    c.rate_hz = 100.0;
    c.samples.resize(3000);
  }
  const std::vector<SleepStage> one = {SleepStage::W};
  SUBCASE("channel count") {
    std::vector<SampleSeries> three(chans.begin(), chans.begin() + 3);
    CHECK_THROWS_AS(dsp::build_epochs(three, one, "", ""), dsp::ChannelCountMismatch);
  }
  SUBCASE("rate") {
    chans[1].rate_hz = 128.0;
    CHECK_THROWS_AS(dsp::build_epochs(chans, one, "", ""), dsp::RateMismatch);
  }
  SUBCASE("length") {
    const std::vector<SleepStage> two = {SleepStage::W, SleepStage::N2};
    CHECK_THROWS_AS(dsp::build_epochs(chans, two, "", ""), dsp::ChannelTooShort);
  }
}

TEST_CASE("conditioning pipeline lands all channels on the target rate") {
  dsp::ConditionInput in;
  in.eeg1 = sine(9.0, 256.0, 2560, 20.0);
  in.eeg2 = sine(11.0, 256.0, 2560, 20.0);
  in.emg = sine(30.0, 64.0, 640, 10.0);
  in.eog = sine(0.7, 128.0, 1280, 50.0);
  in.mains_hz = 50.0;
  std::vector<std::string> notes;
  const auto out = dsp::condition_channels(in, true, &notes);
  for (const auto& ch : out) {
    CHECK(ch.rate_hz == doctest::Approx(100.0));
    CHECK(ch.samples.size() == 1000);
  }
  // The 64 Hz muscle channel cannot host a 50 Hz notch.
  REQUIRE(notes.size() == 1);
  CHECK(notes[0].find("notch") != std::string::npos);

  std::vector<std::string> no_notes;
  const auto raw = dsp::condition_channels(in, false, &no_notes);
  CHECK(no_notes.empty());
  CHECK(raw[0].samples.size() == 1000);
}

}  // TEST_SUITE
