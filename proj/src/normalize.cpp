#include "somnus/normalize.hpp"

#include <cmath>

#include "somnus/kernels.hpp"

namespace somnus::norm {

namespace {
constexpr double kStdFloor = 1e-12;
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::None: return "NONE";
    case Strategy::TrBased: return "TR_BASED";
    case Strategy::EpochBased: return "EPOCH_BASED";
  }
  return "NONE";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "NONE") return Strategy::None;
  if (name == "TR_BASED") return Strategy::TrBased;
  if (name == "EPOCH_BASED") return Strategy::EpochBased;
  throw Error("unknown normalization strategy '" + name + "'");
}

ChannelStats fit_channel_stats(const std::vector<Epoch>& training_epochs) {
  if (training_epochs.empty()) {
    throw EmptyTrainingSet("cannot fit channel statistics on an empty training set");
  }
  ChannelStats st;
  // Two passes: exact mean first, then centered second moment. Avoids the
  // cancellation a single-pass sum-of-squares would suffer on offset data.
  for (std::size_t ch = 0; ch < kEpochChannels; ++ch) {
    double total = 0.0;
    std::size_t count = 0;
    for (const Epoch& e : training_epochs) {
      total += kern::sum(e.row(ch), e.cols);
      count += e.cols;
    }
    const double mean = total / static_cast<double>(count);
    double sq = 0.0;
    for (const Epoch& e : training_epochs) {
      const double* x = e.row(ch);
      for (std::size_t i = 0; i < e.cols; ++i) {
        const double d = x[i] - mean;
        sq += d * d;
      }
    }
    st.mean[ch] = mean;
    st.stddev[ch] = std::sqrt(sq / static_cast<double>(count));  // population
  }
  return st;
}

Epoch apply(const Epoch& e, Strategy strategy, const std::optional<ChannelStats>& stats) {
  Epoch out = e;
  switch (strategy) {
    case Strategy::None:
      return out;
    case Strategy::TrBased: {
      if (!stats) throw MissingStats("TR_BASED normalization needs fitted channel statistics");
      for (std::size_t ch = 0; ch < kEpochChannels; ++ch) {
        const double sd = stats->stddev[ch];
        if (sd < kStdFloor) {
          kern::scale(0.0, out.row(ch), out.cols);
        } else {
          kern::affine(e.row(ch), 1.0 / sd, -stats->mean[ch] / sd, out.row(ch), out.cols);
        }
      }
      return out;
    }
    case Strategy::EpochBased: {
      for (std::size_t ch = 0; ch < kEpochChannels; ++ch) {
        const double* x = e.row(ch);
        const double n = static_cast<double>(e.cols);
        const double mean = kern::sum(x, e.cols) / n;
        double sq = 0.0;
        for (std::size_t i = 0; i < e.cols; ++i) {
          const double d = x[i] - mean;
          sq += d * d;
        }
        const double sd = std::sqrt(sq / n);
        if (sd < kStdFloor) {
          kern::scale(0.0, out.row(ch), out.cols);
        } else {
          kern::affine(x, 1.0 / sd, -mean / sd, out.row(ch), out.cols);
        }
      }
      return out;
    }
  }
  return out;
}

std::vector<Epoch> apply_all(const std::vector<Epoch>& epochs, Strategy strategy,
                             const std::optional<ChannelStats>& stats) {
  std::vector<Epoch> out;
  out.reserve(epochs.size());
  for (const Epoch& e : epochs) out.push_back(apply(e, strategy, stats));
  return out;
}

}  // namespace somnus::norm
