#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "somnus/common.hpp"

// Closed-form counts and explicit enumeration of the training/validation
// combination spaces over N databases. Exact integer arithmetic throughout.

namespace somnus::comb {

SOMNUS_DEFINE_ERROR(TooLarge);
SOMNUS_DEFINE_ERROR(InvalidCount);

enum class Mode { SingleModel, Ensemble };

std::uint64_t binomial(unsigned n, unsigned k);

// Single-model space: any non-empty training subset crossed with any
// validation subset, (2^N - 1) * 2^N.
std::uint64_t single_model_count(unsigned n);

// Ensemble evaluation space: every non-empty training subset, each with
// every validation subset drawn from inside it (empty allowed),
// sum_k C(N,k) * (sum_j C(k,j) + 1).
std::uint64_t ensemble_count(unsigned n);

// Trainings actually needed for the leave-one-database-out protocol: one
// model without validation plus one with, per database.
std::uint64_t ensemble_training_count(unsigned n);

// One training/validation combination, as indices 0..N-1 into the database
// list. Sorted ascending.
struct Combo {
  std::vector<unsigned> train;
  std::vector<unsigned> validate;

  bool operator==(const Combo&) const = default;
};

// All combinations for the given mode, deterministic order (training subset
// mask ascending, then validation mask ascending). N is capped at 12; above
// that the listing is astronomically large and only the counts are useful.
std::vector<Combo> enumerate(unsigned n, Mode mode);

// "A_TR,B_TR | A_VAL" style rendering using letters for database indices.
std::string combo_to_string(const Combo& c);

}  // namespace somnus::comb
