#pragma once

#include <array>
#include <optional>
#include <vector>

#include "somnus/common.hpp"
#include "somnus/types.hpp"

// Amplitude normalization strategies applied to epochs before the network
// sees them. TR_BASED carries training-set statistics along with the model;
// EPOCH_BASED is self-contained per epoch; NONE passes data through.

namespace somnus::norm {

SOMNUS_DEFINE_ERROR(EmptyTrainingSet);
SOMNUS_DEFINE_ERROR(MissingStats);

enum class Strategy { None, TrBased, EpochBased };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// Per-channel mean and population standard deviation pooled over a
// training set.
struct ChannelStats {
  std::array<double, kEpochChannels> mean = {};
  std::array<double, kEpochChannels> stddev = {};
};

ChannelStats fit_channel_stats(const std::vector<Epoch>& training_epochs);

// Returns a normalized copy. stats is required (and only consulted) for
// TR_BASED. A channel row with standard deviation below 1e-12 normalizes to
// all zeros rather than dividing by it.
Epoch apply(const Epoch& e, Strategy strategy,
            const std::optional<ChannelStats>& stats = std::nullopt);

std::vector<Epoch> apply_all(const std::vector<Epoch>& epochs, Strategy strategy,
                             const std::optional<ChannelStats>& stats = std::nullopt);

}  // namespace somnus::norm
