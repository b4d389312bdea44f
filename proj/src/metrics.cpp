#include "somnus/metrics.hpp"

#include <cstdio>

namespace somnus::metrics {

std::uint64_t ConfusionMatrix::row_total(std::size_t i) const {
  std::uint64_t t = 0;
  for (std::size_t j = 0; j < kNumStages; ++j) t += cells[i][j];
  return t;
}

std::uint64_t ConfusionMatrix::col_total(std::size_t j) const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < kNumStages; ++i) t += cells[i][j];
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < kNumStages; ++i) t += cells[i][i];
  return t;
}

ConfusionMatrix confusion(const std::vector<SleepStage>& reference,
                          const std::vector<SleepStage>& prediction) {
  if (reference.size() != prediction.size()) {
    throw LengthMismatch("reference has " + std::to_string(reference.size()) +
                         " labels, prediction has " + std::to_string(prediction.size()));
  }
  if (reference.empty()) throw EmptyInput("cannot score an empty label sequence");
  ConfusionMatrix m;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    if (reference[k] == SleepStage::Excluded || prediction[k] == SleepStage::Excluded) {
      throw ExcludedLabelPresent("excluded epochs must be dropped before scoring (position " +
                                 std::to_string(k) + ")");
    }
    ++m.cells[static_cast<std::size_t>(reference[k])][static_cast<std::size_t>(prediction[k])];
    ++m.total;
  }
  return m;
}

KappaReport cohen_kappa(const ConfusionMatrix& m) {
  if (m.total == 0) throw EmptyInput("cannot score an empty confusion matrix");
  const double n = static_cast<double>(m.total);
  KappaReport r;
  r.observed_agreement = static_cast<double>(m.trace()) / n;
  double pe = 0.0;
  for (std::size_t i = 0; i < kNumStages; ++i) {
    pe += (static_cast<double>(m.row_total(i)) / n) * (static_cast<double>(m.col_total(i)) / n);
  }
  r.chance_agreement = pe;
  if (pe == 1.0) {
    r.kappa.reset();  // degenerate marginals, kappa undefined
  } else {
    r.kappa = (r.observed_agreement - pe) / (1.0 - pe);
  }
  return r;
}

KappaReport cohen_kappa(const std::vector<SleepStage>& reference,
                        const std::vector<SleepStage>& prediction) {
  return cohen_kappa(confusion(reference, prediction));
}

double accuracy(const ConfusionMatrix& m) {
  if (m.total == 0) throw EmptyInput("cannot score an empty confusion matrix");
  return static_cast<double>(m.trace()) / static_cast<double>(m.total);
}

std::string format_kappa(const KappaReport& r, int decimals) {
  if (!r.kappa) return "undef";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, *r.kappa);
  return buf;
}

}  // namespace somnus::metrics
