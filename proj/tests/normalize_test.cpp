#include <doctest.h>

#include <cmath>
#include <vector>

#include "somnus/normalize.hpp"
#include "somnus/rng.hpp"

using namespace somnus;

namespace {

Epoch random_epoch(Rng& rng, std::size_t cols = kEpochSamples) {
  Epoch e;
  e.cols = cols;
  e.data.resize(kEpochChannels * cols);
  for (std::size_t ch = 0; ch < kEpochChannels; ++ch) {
    const double center = rng.uniform(-40.0, 40.0);
    const double spread = rng.uniform(0.5, 30.0);
    for (std::size_t i = 0; i < cols; ++i) {
      e.data[ch * cols + i] = center + spread * rng.normal();
    }
  }
  return e;
}

void row_stats(const Epoch& e, std::size_t ch, double* mean, double* sd) {
  double s = 0.0;
  for (std::size_t i = 0; i < e.cols; ++i) s += e.data[ch * e.cols + i];
  *mean = s / static_cast<double>(e.cols);
  double q = 0.0;
  for (std::size_t i = 0; i < e.cols; ++i) {
    const double d = e.data[ch * e.cols + i] - *mean;
    q += d * d;
  }
  *sd = std::sqrt(q / static_cast<double>(e.cols));
}

}  // namespace

TEST_SUITE("normalize") {

TEST_CASE("strategy names round-trip") {
  using norm::Strategy;
  for (auto s : {Strategy::None, Strategy::TrBased, Strategy::EpochBased}) {
    CHECK(norm::strategy_from_name(norm::strategy_name(s)) == s);
  }
  CHECK(std::string(norm::strategy_name(Strategy::TrBased)) == "TR_BASED");
  CHECK_THROWS_AS(norm::strategy_from_name("BANANA"), Error);
}

TEST_CASE("per-epoch standardization zeroes means and units stddevs") {
  Rng rng(0x6e31);
  for (int i = 0; i < 5; ++i) {
    const Epoch e = norm::apply(random_epoch(rng, 600), norm::Strategy::EpochBased);
    for (std::size_t ch = 0; ch < kEpochChannels; ++ch) {
      double m = 0.0, sd = 0.0;
      row_stats(e, ch, &m, &sd);
      CHECK(std::fabs(m) < 1e-9);
      CHECK(std::fabs(sd - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("per-epoch standardization cancels any positive affine distortion") {
  Rng rng(0x6e32);
  const Epoch base = random_epoch(rng, 500);
  Epoch scaled = base;
  for (std::size_t ch = 0; ch < kEpochChannels; ++ch) {
    const double a = 0.01 + 10.0 * static_cast<double>(ch + 1);
    const double b = -75.0 + 50.0 * static_cast<double>(ch);
    for (std::size_t i = 0; i < scaled.cols; ++i) {
      scaled.data[ch * scaled.cols + i] = a * base.data[ch * base.cols + i] + b;
    }
  }
  const Epoch na = norm::apply(base, norm::Strategy::EpochBased);
  const Epoch nb = norm::apply(scaled, norm::Strategy::EpochBased);
  for (std::size_t i = 0; i < na.data.size(); ++i) {
    CHECK(std::fabs(na.data[i] - nb.data[i]) < 1e-6);
  }
}

TEST_CASE("constant rows become zero rows, never NaN") {
  Epoch e;
  e.cols = 100;
  e.data.assign(kEpochChannels * e.cols, 7.5);
  const Epoch out = norm::apply(e, norm::Strategy::EpochBased);
  for (double v : out.data) {
    CHECK(v == 0.0);
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("training-set statistics pool across epochs") {
  // Two tiny epochs with hand-checkable pooled stats per channel.
  Epoch a, b;
  a.cols = b.cols = 2;
  a.data = {1.0, 3.0, 10.0, 10.0, -2.0, 2.0, 0.0, 4.0};
  b.data = {5.0, 7.0, 10.0, 10.0, 2.0, -2.0, 8.0, 4.0};
  const auto stats = norm::fit_channel_stats({a, b});
  // Channel 0 pools {1,3,5,7}: mean 4, population var 5.
  CHECK(stats.mean[0] == doctest::Approx(4.0));
  CHECK(stats.stddev[0] == doctest::Approx(std::sqrt(5.0)));
  // Channel 1 is constant.
  CHECK(stats.mean[1] == doctest::Approx(10.0));
  CHECK(stats.stddev[1] == doctest::Approx(0.0));
  // Channel 3 pools {0,4,8,4}: mean 4, var 8.
  CHECK(stats.mean[3] == doctest::Approx(4.0));
  CHECK(stats.stddev[3] == doctest::Approx(std::sqrt(8.0)));

  const Epoch c = norm::apply(a, norm::Strategy::TrBased, stats);
  CHECK(c.data[0] == doctest::Approx((1.0 - 4.0) / std::sqrt(5.0)));
  CHECK(c.data[1] == doctest::Approx((3.0 - 4.0) / std::sqrt(5.0)));
  // Zero-spread channel collapses to zero instead of dividing by zero.
  CHECK(c.data[2] == 0.0);
  CHECK(c.data[3] == 0.0);
}

TEST_CASE("pooled stats match a naive two-pass oracle on random data") {
  Rng rng(0x6e35);
  std::vector<Epoch> set;
  for (int i = 0; i < 6; ++i) set.push_back(random_epoch(rng, 250));
  const auto stats = norm::fit_channel_stats(set);
  for (std::size_t ch = 0; ch < kEpochChannels; ++ch) {
    std::vector<double> pool;
    for (const auto& e : set) {
      pool.insert(pool.end(), e.row(ch), e.row(ch) + e.cols);
    }
    double m = 0.0;
    for (double v : pool) m += v;
    m /= static_cast<double>(pool.size());
    double q = 0.0;
    for (double v : pool) q += (v - m) * (v - m);
    const double sd = std::sqrt(q / static_cast<double>(pool.size()));
    CHECK(stats.mean[ch] == doctest::Approx(m).epsilon(1e-12));
    CHECK(stats.stddev[ch] == doctest::Approx(sd).epsilon(1e-12));
  }
}

TEST_CASE("whole-set application matches epoch-by-epoch application") {
  Rng rng(0x6e33);
  std::vector<Epoch> set;
  for (int i = 0; i < 4; ++i) set.push_back(random_epoch(rng, 300));
  const auto stats = norm::fit_channel_stats(set);
  const auto bulk = norm::apply_all(set, norm::Strategy::TrBased, stats);
  REQUIRE(bulk.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Epoch one = norm::apply(set[i], norm::Strategy::TrBased, stats);
    CHECK(bulk[i].data == one.data);
  }
}

TEST_CASE("the no-op strategy copies data untouched and errors stay typed") {
  Rng rng(0x6e34);
  Epoch e = random_epoch(rng, 128);
  e.label = SleepStage::N2;
  e.recording_id = "r001";
  e.index_in_recording = 9;
  const Epoch out = norm::apply(e, norm::Strategy::None);
  CHECK(out.data == e.data);
  CHECK(out.label == e.label);
  CHECK(out.recording_id == e.recording_id);
  CHECK(out.index_in_recording == e.index_in_recording);

  CHECK_THROWS_AS(norm::apply(e, norm::Strategy::TrBased), norm::MissingStats);
  CHECK_THROWS_AS(norm::fit_channel_stats({}), norm::EmptyTrainingSet);
}

}  // TEST_SUITE
