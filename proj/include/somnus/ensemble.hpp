#pragma once

#include <optional>
#include <string>
#include <vector>

#include "somnus/cnn.hpp"
#include "somnus/common.hpp"
#include "somnus/types.hpp"

// Majority voting over independently trained models. Each member applies
// its own normalization before inference, then per-epoch votes are tallied;
// ties fall back to the greatest summed posterior, then to the fixed
// W < N1 < N2 < N3 < R stage order.

namespace somnus::ens {

SOMNUS_DEFINE_ERROR(EmptyEnsemble);
SOMNUS_DEFINE_ERROR(MixedClassCounts);

struct Ensemble {
  std::vector<cnn::TrainedModel> members;
  // id of the database whose model was left out (the evaluation target)
  std::optional<std::string> excluded_dataset;
};

// All models except the one trained on dataset_id.
Ensemble build_excluding(const std::vector<cnn::TrainedModel>& models,
                         const std::string& dataset_id);

// One epoch's decision from the members' predictions for it.
SleepStage vote(const std::vector<cnn::Prediction>& member_predictions);

// Votes across whole prediction tracks: member_tracks[m][e] is member m's
// prediction for epoch e. All tracks must be equally long.
std::vector<SleepStage> vote_tracks(const std::vector<std::vector<cnn::Prediction>>& member_tracks);

// Runs every member over the raw epochs and votes. This is the convenience
// path; the experiment harness feeds cached per-member tracks into
// vote_tracks instead so votes never force a re-prediction.
std::vector<SleepStage> ensemble_predict(const Ensemble& e, const std::vector<Epoch>& raw_epochs);

// JSON manifest (list of member model paths plus the excluded dataset id)
// used by the command-line tool.
struct Manifest {
  std::vector<std::string> model_paths;
  std::optional<std::string> excluded_dataset;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

}  // namespace somnus::ens
