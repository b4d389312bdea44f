#include "somnus/ensemble.hpp"

#include <array>

#include <json.hpp>

namespace somnus::ens {

using json = nlohmann::json;

Ensemble build_excluding(const std::vector<cnn::TrainedModel>& models,
                         const std::string& dataset_id) {
  Ensemble e;
  e.excluded_dataset = dataset_id;
  for (const cnn::TrainedModel& m : models) {
    if (m.provenance.dataset_id != dataset_id) e.members.push_back(m);
  }
  if (e.members.empty()) {
    throw EmptyEnsemble("excluding '" + dataset_id + "' leaves no members");
  }
  return e;
}

SleepStage vote(const std::vector<cnn::Prediction>& member_predictions) {
  if (member_predictions.empty()) throw EmptyEnsemble("vote needs at least one member");
  std::array<int, kNumStages> counts = {};
  std::array<double, kNumStages> posterior_sum = {};
  for (const cnn::Prediction& p : member_predictions) {
    const std::size_t idx = static_cast<std::size_t>(p.stage);
    if (idx >= kNumStages) throw EmptyEnsemble("member predicted an unknown stage");
    if (p.posterior.size() != kNumStages) {
      throw MixedClassCounts("member posteriors must cover all " + std::to_string(kNumStages) +
                             " stages");
    }
    ++counts[idx];
    for (std::size_t s = 0; s < kNumStages; ++s) posterior_sum[s] += p.posterior[s];
  }
  // Majority first; among tied counts the greater summed posterior wins;
  // a remaining tie resolves to the earliest stage in the fixed order.
  std::size_t best = 0;
  for (std::size_t s = 1; s < kNumStages; ++s) {
    if (counts[s] > counts[best] ||
        (counts[s] == counts[best] && posterior_sum[s] > posterior_sum[best])) {
      best = s;
    }
  }
  return static_cast<SleepStage>(best);
}

std::vector<SleepStage> vote_tracks(
    const std::vector<std::vector<cnn::Prediction>>& member_tracks) {
  if (member_tracks.empty()) throw EmptyEnsemble("vote needs at least one member track");
  const std::size_t n = member_tracks.front().size();
  for (const auto& track : member_tracks) {
    if (track.size() != n) throw MixedClassCounts("member tracks differ in length");
  }
  std::vector<SleepStage> out;
  out.reserve(n);
  std::vector<cnn::Prediction> column(member_tracks.size());
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t m = 0; m < member_tracks.size(); ++m) column[m] = member_tracks[m][e];
    out.push_back(vote(column));
  }
  return out;
}

std::vector<SleepStage> ensemble_predict(const Ensemble& e, const std::vector<Epoch>& raw_epochs) {
  if (e.members.empty()) throw EmptyEnsemble("ensemble has no members");
  for (const cnn::TrainedModel& m : e.members) {
    if (m.config.num_classes != static_cast<int>(kNumStages)) {
      throw MixedClassCounts("ensemble members must predict all " + std::to_string(kNumStages) +
                             " stages");
    }
  }
  std::vector<std::vector<cnn::Prediction>> tracks;
  tracks.reserve(e.members.size());
  for (const cnn::TrainedModel& m : e.members) {
    tracks.push_back(cnn::predict(m, raw_epochs));  // member-specific normalization inside
  }
  return vote_tracks(tracks);
}

std::string manifest_to_json(const Manifest& m) {
  json j;
  j["members"] = m.model_paths;
  if (m.excluded_dataset) {
    j["excluded_dataset"] = *m.excluded_dataset;
  } else {
    j["excluded_dataset"] = nullptr;
  }
  return j.dump(2);
}

Manifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("ensemble manifest is not valid JSON: ") + e.what());
  }
  Manifest m;
  try {
    m.model_paths = j.at("members").get<std::vector<std::string>>();
    if (j.contains("excluded_dataset") && !j.at("excluded_dataset").is_null()) {
      m.excluded_dataset = j.at("excluded_dataset").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(std::string("ensemble manifest missing fields: ") + e.what());
  }
  if (m.model_paths.empty()) throw EmptyEnsemble("ensemble manifest lists no members");
  return m;
}

}  // namespace somnus::ens
