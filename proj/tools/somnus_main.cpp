// Command-line front end: synthetic database generation, training,
// prediction, ensembling, agreement scoring, combination counting and the
// full experiment protocol.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "somnus/cnn.hpp"
#include "somnus/combinatorics.hpp"
#include "somnus/common.hpp"
#include "somnus/ensemble.hpp"
#include "somnus/harness.hpp"
#include "somnus/metrics.hpp"
#include "somnus/synthdata.hpp"

namespace {

using namespace somnus;

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot create '" + path + "'");
  f << text;
}

// SOMNUS_SEED replaces every model-config seed so CI can pin runs without
// editing config files.
bool env_seed(std::uint64_t* out) {
  const char* v = std::getenv("SOMNUS_SEED");
  if (v == nullptr || *v == '\0') return false;
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(v, &end, 10);
  if (end == v || *end != '\0') throw Error("SOMNUS_SEED is not an unsigned integer");
  *out = static_cast<std::uint64_t>(parsed);
  return true;
}

std::vector<cnn::ModelConfig> load_configs(const std::string& path) {
  const std::string text = slurp(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config file is not valid JSON: ") + e.what());
  }
  std::vector<cnn::ModelConfig> configs;
  if (j.is_array()) {
    for (const auto& item : j) configs.push_back(cnn::config_from_json(item.dump()));
  } else {
    configs.push_back(cnn::config_from_json(text));
  }
  std::uint64_t seed = 0;
  if (env_seed(&seed)) {
    for (auto& c : configs) c.seed = seed;
  }
  return configs;
}

// Reference labels aligned with a whole-dataset prediction track.
std::string reference_csv(const harness::Dataset& ds) {
  std::string out = "epoch_index,stage\n";
  std::size_t i = 0;
  for (const auto& rec : ds.recordings) {
    for (const Epoch& e : rec.epochs) {
      out += std::to_string(i++) + "," + stage_name(e.label) + "\n";
    }
  }
  return out;
}

// Accepts either a 2-column hypnogram or a 7-column prediction track.
std::vector<SleepStage> stages_from_csv(const std::string& path) {
  const std::string text = slurp(path);
  if (text.rfind("epoch_index,stage,p_W", 0) == 0) {
    return harness::track_from_csv(text).stages;
  }
  return harness::read_hypnogram_csv(path);
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const synth::DatabaseSpec spec = synth::spec_from_json(slurp(spec_path));
  synth::generate_database(spec, out_dir);
  std::printf("wrote %d recordings (%d epochs each) to %s\n", spec.n_recordings,
              spec.epochs_per_recording, out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_path, std::uint64_t split_seed) {
  const auto configs = load_configs(config_path);
  if (configs.size() != 1) throw Error("train expects exactly one config");
  const cnn::ModelConfig& cfg = configs[0];

  const harness::Dataset ds = harness::load_dataset(data_dir, cfg.filtering_enabled);
  const harness::DataSplit split =
      harness::split_recordings(static_cast<int>(ds.recordings.size()), split_seed, ds.id);
  const cnn::TrainedModel model = cnn::train(harness::gather(ds, split.train),
                                             harness::gather(ds, split.validate), cfg, ds.id);
  const auto parent = std::filesystem::path(out_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  cnn::save_model(model, out_path);

  const auto ts = harness::gather(ds, split.test);
  const harness::Track track = harness::predict_track(model, ts);
  const auto kappa = metrics::cohen_kappa(metrics::confusion(harness::labels_of(ts), track.stages));
  std::printf("trained on %s: %llu iterations over %d epochs, TS kappa %s\n", ds.id.c_str(),
              static_cast<unsigned long long>(model.provenance.training_iterations),
              model.provenance.epochs_run, metrics::format_kappa(kappa, 4).c_str());
  std::printf("model written to %s\n", out_path.c_str());
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_dir,
                const std::string& out_path, const std::string& ref_out) {
  const cnn::TrainedModel model = cnn::load_model(model_path);
  const harness::Dataset ds = harness::load_dataset(data_dir, model.config.filtering_enabled);
  std::vector<int> all(ds.recordings.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const harness::Track track = harness::predict_track(model, harness::gather(ds, all));
  spit(out_path, harness::track_to_csv(track));
  if (!ref_out.empty()) spit(ref_out, reference_csv(ds));
  std::printf("predicted %zu epochs of %s -> %s\n", track.stages.size(), ds.id.c_str(),
              out_path.c_str());
  return 0;
}

int cmd_ensemble(const std::string& manifest_path, const std::string& data_dir,
                 const std::string& out_path, const std::string& ref_out) {
  const ens::Manifest manifest = ens::manifest_from_json(slurp(manifest_path));
  const auto manifest_dir = std::filesystem::path(manifest_path).parent_path();

  std::vector<cnn::TrainedModel> members;
  for (const std::string& p : manifest.model_paths) {
    std::filesystem::path mp(p);
    if (mp.is_relative()) mp = manifest_dir / mp;  // paths relative to the manifest
    members.push_back(cnn::load_model(mp.string()));
  }
  if (manifest.excluded_dataset) {
    members = ens::build_excluding(members, *manifest.excluded_dataset).members;
  }

  // Members may disagree on filtering; condition the data per member.
  std::vector<std::vector<cnn::Prediction>> member_tracks;
  std::optional<harness::Dataset> filtered, raw;
  std::string ref_csv;
  for (const cnn::TrainedModel& m : members) {
    auto& slot = m.config.filtering_enabled ? filtered : raw;
    if (!slot) slot = harness::load_dataset(data_dir, m.config.filtering_enabled);
    std::vector<int> all(slot->recordings.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    const auto epochs = harness::gather(*slot, all);
    member_tracks.push_back(cnn::predict(m, epochs));
    if (ref_csv.empty()) ref_csv = reference_csv(*slot);
  }
  const std::vector<SleepStage> votes = ens::vote_tracks(member_tracks);

  // The stage column is the majority vote; the posterior columns report the
  // across-member average, which does not necessarily argmax to the vote.
  harness::Track out;
  out.stages = votes;
  out.posteriors.assign(votes.size(), {});
  for (const auto& member : member_tracks) {
    for (std::size_t e = 0; e < votes.size(); ++e) {
      for (std::size_t s = 0; s < kNumStages; ++s) {
        out.posteriors[e][s] += member[e].posterior[s] / static_cast<double>(members.size());
      }
    }
  }
  spit(out_path, harness::track_to_csv(out));
  if (!ref_out.empty()) spit(ref_out, ref_csv);
  std::printf("ensemble of %zu models voted on %zu epochs -> %s\n", members.size(),
              votes.size(), out_path.c_str());
  return 0;
}

int cmd_evaluate(const std::string& ref_path, const std::string& pred_path) {
  const std::vector<SleepStage> ref_all = stages_from_csv(ref_path);
  const std::vector<SleepStage> pred_all = stages_from_csv(pred_path);
  if (ref_all.size() != pred_all.size()) {
    throw Error("reference has " + std::to_string(ref_all.size()) + " rows, prediction has " +
                std::to_string(pred_all.size()));
  }
  // Reference rows scored as unknown/excluded do not count toward agreement.
  std::vector<SleepStage> ref, pred;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < ref_all.size(); ++i) {
    if (ref_all[i] == SleepStage::Excluded) {
      ++dropped;
      continue;
    }
    ref.push_back(ref_all[i]);
    pred.push_back(pred_all[i]);
  }
  const auto cm = metrics::confusion(ref, pred);
  const auto kappa = metrics::cohen_kappa(cm);
  std::printf("epochs scored: %zu (excluded: %zu)\n", ref.size(), dropped);
  std::printf("observed agreement: %.4f\n", kappa.observed_agreement);
  std::printf("chance agreement:   %.4f\n", kappa.chance_agreement);
  std::printf("kappa:              %s\n", metrics::format_kappa(kappa, 4).c_str());
  return 0;
}

int cmd_combinatorics(int n, const std::string& mode_name, bool enumerate) {
  const comb::Mode mode =
      mode_name == "ensemble" ? comb::Mode::Ensemble : comb::Mode::SingleModel;
  const unsigned un = static_cast<unsigned>(n);
  std::printf("datasets: %d\n", n);
  if (mode == comb::Mode::SingleModel) {
    std::printf("single-model combinations: %llu\n",
                static_cast<unsigned long long>(comb::single_model_count(un)));
  } else {
    std::printf("ensemble combinations: %llu\n",
                static_cast<unsigned long long>(comb::ensemble_count(un)));
    std::printf("ensemble trainings:    %llu\n",
                static_cast<unsigned long long>(comb::ensemble_training_count(un)));
  }
  if (enumerate) {
    for (const comb::Combo& c : comb::enumerate(un, mode)) {
      std::printf("%s\n", comb::combo_to_string(c).c_str());
    }
  }
  return 0;
}

int cmd_experiment(const std::vector<std::string>& dataset_dirs, const std::string& config_path,
                   const std::string& out_path, const std::string& format_name,
                   const std::string& cache_dir, std::uint64_t split_seed, bool fresh,
                   bool ensemble_only) {
  harness::RunOptions options;
  options.split_seed = split_seed;
  options.cache_dir = cache_dir;
  options.reuse_cache = !fresh;
  options.ensemble_only = ensemble_only;

  const auto report =
      harness::run_experiments(dataset_dirs, load_configs(config_path), options);
  const auto format =
      format_name == "markdown" ? harness::ReportFormat::Markdown : harness::ReportFormat::Tsv;
  const std::string text = harness::render_report(report, format);
  if (out_path.empty() || out_path == "-") {
    std::fputs(text.c_str(), stdout);
  } else {
    spit(out_path, text);
    std::printf("report written to %s (%zu models trained this run)\n", out_path.c_str(),
                report.trained.size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-database sleep staging toolkit"};
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic database");
  synth_cmd->add_option("--spec", spec_path, "Database spec JSON file")->required();
  synth_cmd->add_option("--out", out_dir, "Output directory")->required();

  std::string data_dir, config_path, model_out;
  std::uint64_t split_seed = 1;
  auto* train_cmd = app.add_subcommand("train", "Train a model on one database");
  train_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  train_cmd->add_option("--config", config_path, "Model config JSON file")->required();
  train_cmd->add_option("--out", model_out, "Output model file")->required();
  train_cmd->add_option("--seed", split_seed, "Recording split seed");

  std::string model_path, pred_out, ref_out;
  auto* predict_cmd = app.add_subcommand("predict", "Predict a whole database with one model");
  predict_cmd->add_option("--model", model_path, "Trained model file")->required();
  predict_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  predict_cmd->add_option("--out", pred_out, "Prediction CSV")->required();
  predict_cmd->add_option("--ref-out", ref_out, "Also write the aligned reference labels CSV");

  std::string manifest_path;
  auto* ens_cmd = app.add_subcommand("ensemble", "Vote an ensemble over a database");
  ens_cmd->add_option("--manifest", manifest_path, "Ensemble manifest JSON")->required();
  ens_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  ens_cmd->add_option("--out", pred_out, "Prediction CSV")->required();
  ens_cmd->add_option("--ref-out", ref_out, "Also write the aligned reference labels CSV");

  std::string ref_path, pred_path;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against a reference");
  eval_cmd->add_option("--ref", ref_path, "Reference CSV (hypnogram or track)")->required();
  eval_cmd->add_option("--pred", pred_path, "Prediction CSV (hypnogram or track)")->required();

  int comb_n = 2;
  std::string comb_mode = "single";
  bool comb_enum = false;
  auto* comb_cmd = app.add_subcommand("combinatorics", "Training-set combination counts");
  comb_cmd->add_option("--n", comb_n, "Number of datasets")->required();
  comb_cmd->add_option("--mode", comb_mode, "single or ensemble")
      ->check(CLI::IsMember({"single", "ensemble"}));
  comb_cmd->add_flag("--enumerate", comb_enum, "List every combination (n <= 12)");

  std::vector<std::string> dataset_dirs;
  std::string report_out, report_format = "tsv", cache_dir;
  bool fresh = false, ensemble_only = false;
  auto* exp_cmd = app.add_subcommand("experiment", "Run the full three-part protocol");
  exp_cmd->add_option("--datasets", dataset_dirs, "Dataset directories")->required();
  exp_cmd->add_option("--configs", config_path, "Config JSON file (object or array)")->required();
  exp_cmd->add_option("--out", report_out, "Report file ('-' for stdout)");
  exp_cmd->add_option("--format", report_format, "tsv or markdown")
      ->check(CLI::IsMember({"tsv", "markdown"}));
  exp_cmd->add_option("--cache", cache_dir, "Cache directory for models and tracks");
  exp_cmd->add_option("--seed", split_seed, "Recording split seed");
  exp_cmd->add_flag("--fresh", fresh, "Ignore cached models and tracks");
  exp_cmd->add_flag("--ensemble-only", ensemble_only,
                    "Recompute only the ensemble part from cached models");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return cmd_synth(spec_path, out_dir);
    if (train_cmd->parsed()) return cmd_train(data_dir, config_path, model_out, split_seed);
    if (predict_cmd->parsed()) return cmd_predict(model_path, data_dir, pred_out, ref_out);
    if (ens_cmd->parsed()) return cmd_ensemble(manifest_path, data_dir, pred_out, ref_out);
    if (eval_cmd->parsed()) return cmd_evaluate(ref_path, pred_path);
    if (comb_cmd->parsed()) return cmd_combinatorics(comb_n, comb_mode, comb_enum);
    if (exp_cmd->parsed()) {
      return cmd_experiment(dataset_dirs, config_path, report_out, report_format, cache_dir,
                            split_seed, fresh, ensemble_only);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
