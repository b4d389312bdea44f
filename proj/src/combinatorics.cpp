#include "somnus/combinatorics.hpp"

namespace somnus::comb {

namespace {

void check_n(unsigned n) {
  if (n < 1) throw InvalidCount("database count must be at least 1");
  if (n > 62) throw TooLarge("database count " + std::to_string(n) + " overflows exact counts");
}

std::vector<unsigned> mask_to_indices(std::uint64_t mask) {
  std::vector<unsigned> idx;
  for (unsigned b = 0; mask != 0; ++b, mask >>= 1) {
    if (mask & 1) idx.push_back(b);
  }
  return idx;
}

}  // namespace

std::uint64_t binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t result = 1;
  for (unsigned i = 1; i <= k; ++i) {
    // Exact at every step: result * (n-k+i) is divisible by i here.
    result = result * (n - k + i) / i;
  }
  return result;
}

std::uint64_t single_model_count(unsigned n) {
  check_n(n);
  const std::uint64_t pow2 = std::uint64_t{1} << n;
  return (pow2 - 1) * pow2;
}

std::uint64_t ensemble_count(unsigned n) {
  check_n(n);
  std::uint64_t total = 0;
  for (unsigned k = 1; k <= n; ++k) {
    std::uint64_t inner = 1;  // the empty validation choice
    for (unsigned j = 1; j <= k; ++j) inner += binomial(k, j);
    total += binomial(n, k) * inner;
  }
  return total;
}

std::uint64_t ensemble_training_count(unsigned n) {
  check_n(n);
  return 2ULL * n;
}

std::vector<Combo> enumerate(unsigned n, Mode mode) {
  check_n(n);
  if (n > 12) {
    throw TooLarge("refusing to enumerate " + std::to_string(n) +
                   " databases; use the closed-form counts");
  }
  const std::uint64_t pow2 = std::uint64_t{1} << n;
  std::vector<Combo> out;
  for (std::uint64_t tr = 1; tr < pow2; ++tr) {
    if (mode == Mode::SingleModel) {
      for (std::uint64_t val = 0; val < pow2; ++val) {
        out.push_back({mask_to_indices(tr), mask_to_indices(val)});
      }
    } else {
      // Validation data must come from inside the training selection.
      // Iterating sub-masks of tr in ascending order:
      std::uint64_t val = 0;
      while (true) {
        out.push_back({mask_to_indices(tr), mask_to_indices(val)});
        if (val == tr) break;
        val = (val - tr) & tr;  // next subset of tr
      }
    }
  }
  return out;
}

std::string combo_to_string(const Combo& c) {
  std::string s;
  auto letters = [&s](const std::vector<unsigned>& idx, const char* suffix) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i) s += ",";
      s += static_cast<char>('A' + idx[i]);
      s += suffix;
    }
  };
  letters(c.train, "_TR");
  s += " | ";
  if (c.validate.empty()) {
    s += "-";
  } else {
    letters(c.validate, "_VAL");
  }
  return s;
}

}  // namespace somnus::comb
