#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "somnus/common.hpp"
#include "somnus/types.hpp"

// Agreement scoring: 5x5 confusion matrices and Cohen's kappa.

namespace somnus::metrics {

SOMNUS_DEFINE_ERROR(LengthMismatch);
SOMNUS_DEFINE_ERROR(ExcludedLabelPresent);
SOMNUS_DEFINE_ERROR(EmptyInput);

struct ConfusionMatrix {
  // cells[reference][prediction], stage order W, N1, N2, N3, R.
  std::array<std::array<std::uint64_t, kNumStages>, kNumStages> cells = {};
  std::uint64_t total = 0;

  std::uint64_t row_total(std::size_t i) const;
  std::uint64_t col_total(std::size_t j) const;
  std::uint64_t trace() const;
};

ConfusionMatrix confusion(const std::vector<SleepStage>& reference,
                          const std::vector<SleepStage>& prediction);

// Kappa is undefined when the chance agreement p_e is exactly 1 (both raters
// constant on the same class); `kappa` is empty in that case.
struct KappaReport {
  double observed_agreement = 0.0;  // p_o
  double chance_agreement = 0.0;    // p_e
  std::optional<double> kappa;
};

KappaReport cohen_kappa(const ConfusionMatrix& m);
KappaReport cohen_kappa(const std::vector<SleepStage>& reference,
                        const std::vector<SleepStage>& prediction);

double accuracy(const ConfusionMatrix& m);  // same as observed agreement

// "0.74" or "undef" for table rendering.
std::string format_kappa(const KappaReport& r, int decimals);

}  // namespace somnus::metrics
