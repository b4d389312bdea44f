#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "somnus/metrics.hpp"
#include "somnus/rng.hpp"

using namespace somnus;

namespace {

const SleepStage kStages[5] = {SleepStage::W, SleepStage::N1, SleepStage::N2,
                               SleepStage::N3, SleepStage::R};

// Brute-force kappa straight off the defining sums, no shared code with the
// library implementation.
struct NaiveKappa {
  double po = 0.0;
  double pe = 0.0;
  bool defined = false;
  double kappa = 0.0;
};

NaiveKappa naive_kappa(const std::vector<SleepStage>& ref,
                       const std::vector<SleepStage>& pred) {
  double counts[5][5] = {};
  for (std::size_t i = 0; i < ref.size(); ++i) {
    counts[static_cast<int>(ref[i])][static_cast<int>(pred[i])] += 1.0;
  }
  const double n = static_cast<double>(ref.size());
  NaiveKappa out;
  for (int i = 0; i < 5; ++i) out.po += counts[i][i] / n;
  for (int i = 0; i < 5; ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < 5; ++j) {
      row += counts[i][j];
      col += counts[j][i];
    }
    out.pe += (row / n) * (col / n);
  }
  out.defined = out.pe != 1.0;
  if (out.defined) out.kappa = (out.po - out.pe) / (1.0 - out.pe);
  return out;
}

std::vector<SleepStage> random_stages(Rng& rng, std::size_t n, int num_classes) {
  std::vector<SleepStage> v(n);
  for (auto& s : v) s = kStages[rng.next_below(static_cast<std::uint64_t>(num_classes))];
  return v;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("confusion matrix counts a tiny hand example") {
  using S = SleepStage;
  const std::vector<S> ref = {S::W, S::W, S::N2, S::R, S::N3, S::N2};
  const std::vector<S> pred = {S::W, S::N1, S::N2, S::R, S::N2, S::N2};
  const auto m = metrics::confusion(ref, pred);
  CHECK(m.total == 6);
  CHECK(m.cells[0][0] == 1);  // W as W
  CHECK(m.cells[0][1] == 1);  // W as N1
  CHECK(m.cells[2][2] == 2);  // N2 as N2
  CHECK(m.cells[3][2] == 1);  // N3 as N2
  CHECK(m.cells[4][4] == 1);  // R as R
  CHECK(m.trace() == 4);
  CHECK(m.row_total(0) == 2);
  CHECK(m.col_total(2) == 3);
  CHECK(metrics::accuracy(m) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("confusion rejects mismatched lengths, excluded labels, empty input") {
  using S = SleepStage;
  CHECK_THROWS_AS(metrics::confusion({S::W}, {S::W, S::N1}),
                  metrics::LengthMismatch);
  CHECK_THROWS_AS(metrics::confusion({S::Excluded}, {S::W}),
                  metrics::ExcludedLabelPresent);
  CHECK_THROWS_AS(metrics::confusion({S::W}, {S::Excluded}),
                  metrics::ExcludedLabelPresent);
  CHECK_THROWS_AS(metrics::confusion({}, {}), metrics::EmptyInput);
}

TEST_CASE("kappa matches a brute-force oracle on random label pairs") {
  Rng rng(0x106f);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.next_below(400);
    const int classes = 1 + static_cast<int>(rng.next_below(5));
    const auto ref = random_stages(rng, n, classes);
    // Mix of independent labels and copies so agreement varies widely.
    std::vector<SleepStage> pred = random_stages(rng, n, classes);
    if (trial % 3 == 0) {
      for (std::size_t i = 0; i < n; i += 2) pred[i] = ref[i];
    }
    const auto got = metrics::cohen_kappa(ref, pred);
    const auto want = naive_kappa(ref, pred);
    CHECK(got.observed_agreement == doctest::Approx(want.po).epsilon(1e-12));
    CHECK(got.chance_agreement == doctest::Approx(want.pe).epsilon(1e-12));
    REQUIRE(got.kappa.has_value() == want.defined);
    if (want.defined) {
      CHECK(*got.kappa == doctest::Approx(want.kappa).epsilon(1e-12));
    }
  }
}

TEST_CASE("a worked two-class table lands on exactly 0.40 at two decimals") {
  // 100 epochs, two raters using W and N1 only:
  //   both W: 40, ref W pred N1: 10, ref N1 pred W: 20, both N1: 30.
  // p_o = 0.7; marginals give p_e = 0.5*0.6 + 0.5*0.4 = 0.5; kappa = 0.4 in
  // exact arithmetic, and the double result sits within 1e-12 of it.
  using S = SleepStage;
  std::vector<S> ref, pred;
  auto add = [&](S r, S p, int k) {
    for (int i = 0; i < k; ++i) {
      ref.push_back(r);
      pred.push_back(p);
    }
  };
  add(S::W, S::W, 40);
  add(S::W, S::N1, 10);
  add(S::N1, S::W, 20);
  add(S::N1, S::N1, 30);
  const auto rep = metrics::cohen_kappa(ref, pred);
  CHECK(rep.observed_agreement == doctest::Approx(0.7).epsilon(1e-12));
  // Marginals: ref W 0.5, pred W 0.6; ref N1 0.5, pred N1 0.4.
  CHECK(rep.chance_agreement == doctest::Approx(0.5).epsilon(1e-12));
  REQUIRE(rep.kappa.has_value());
  CHECK(std::fabs(*rep.kappa - 0.4) < 1e-12);
  CHECK(metrics::format_kappa(rep, 2) == "0.40");
}

TEST_CASE("perfect agreement over several classes scores exactly 1") {
  Rng rng(0x1070);
  const auto ref = random_stages(rng, 300, 5);
  const auto rep = metrics::cohen_kappa(ref, ref);
  CHECK(rep.observed_agreement == 1.0);
  REQUIRE(rep.kappa.has_value());
  CHECK(*rep.kappa == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kappa is undefined when both raters are constant and equal") {
  const std::vector<SleepStage> all_w(25, SleepStage::W);
  const auto rep = metrics::cohen_kappa(all_w, all_w);
  CHECK(rep.observed_agreement == 1.0);
  CHECK(rep.chance_agreement == 1.0);
  CHECK_FALSE(rep.kappa.has_value());
  CHECK(metrics::format_kappa(rep, 2) == "undef");
}

TEST_CASE("disagreeing constant raters give kappa 0") {
  // Rater A says W everywhere, rater B says N1 everywhere: p_o = 0 and
  // p_e = 0, so kappa = 0 rather than undefined.
  const std::vector<SleepStage> a(10, SleepStage::W);
  const std::vector<SleepStage> b(10, SleepStage::N1);
  const auto rep = metrics::cohen_kappa(a, b);
  CHECK(rep.observed_agreement == 0.0);
  CHECK(rep.chance_agreement == 0.0);
  REQUIRE(rep.kappa.has_value());
  CHECK(*rep.kappa == 0.0);
}

TEST_CASE("independent raters hover near kappa 0") {
  // Large sample of independent uniform labels: kappa concentrates near 0.
  Rng rng(0x1071);
  const auto ref = random_stages(rng, 60000, 5);
  const auto pred = random_stages(rng, 60000, 5);
  const auto rep = metrics::cohen_kappa(ref, pred);
  REQUIRE(rep.kappa.has_value());
  CHECK(std::fabs(*rep.kappa) < 0.02);
}

TEST_CASE("matrix-based and label-based entry points agree") {
  Rng rng(0x1072);
  const auto ref = random_stages(rng, 500, 5);
  auto pred = ref;
  for (std::size_t i = 0; i < pred.size(); i += 3) {
    pred[i] = kStages[rng.next_below(5)];
  }
  const auto m = metrics::confusion(ref, pred);
  const auto a = metrics::cohen_kappa(m);
  const auto b = metrics::cohen_kappa(ref, pred);
  CHECK(a.observed_agreement == b.observed_agreement);
  CHECK(a.chance_agreement == b.chance_agreement);
  REQUIRE(a.kappa.has_value());
  REQUIRE(b.kappa.has_value());
  CHECK(*a.kappa == *b.kappa);
  CHECK(metrics::accuracy(m) == a.observed_agreement);
}

TEST_CASE("formatting is fixed-point with the requested precision") {
  metrics::KappaReport r;
  r.kappa = 0.746231;
  CHECK(metrics::format_kappa(r, 2) == "0.75");
  CHECK(metrics::format_kappa(r, 4) == "0.7462");
  r.kappa = -0.126;
  CHECK(metrics::format_kappa(r, 2) == "-0.13");
}

}  // TEST_SUITE
