#include "somnus/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "somnus/dsp.hpp"
#include "somnus/edf.hpp"
#include "somnus/ensemble.hpp"
#include "somnus/rng.hpp"

namespace somnus::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Cache file stems must survive arbitrary config and dataset names.
std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? std::string("x") : out;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot create '" + path + "'");
  f << text;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

// ============================================================
// Datasets on disk
// ============================================================

std::size_t Dataset::total_epochs() const {
  std::size_t n = 0;
  for (const auto& r : recordings) n += r.epochs.size();
  return n;
}

std::vector<SleepStage> read_hypnogram_csv(const std::string& path) {
  const std::string text = slurp(path);
  const auto lines = split_lines(text);
  if (lines.empty() || split_fields(lines[0], ',')[0] != "epoch_index") {
    throw BadDatasetDir("hypnogram '" + path + "' lacks the epoch_index,stage header");
  }
  std::vector<SleepStage> stages;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_fields(lines[i], ',');
    if (fields.size() < 2) {
      throw BadDatasetDir("hypnogram '" + path + "' line " + std::to_string(i + 1) +
                          " is not epoch_index,stage");
    }
    stages.push_back(map_stage(fields[1]));
  }
  return stages;
}

namespace {

bool has_label(const edf::Recording& rec, const std::string& label) {
  for (const auto& sd : rec.signals) {
    std::string t = sd.label;
    while (!t.empty() && t.back() == ' ') t.pop_back();
    if (t == label) return true;
  }
  return false;
}

}  // namespace

Dataset load_dataset(const std::string& dir, bool filtering_enabled) {
  const std::string manifest_path = dir + "/dataset.json";
  json manifest;
  try {
    manifest = json::parse(slurp(manifest_path));
  } catch (const std::exception& e) {
    throw BadDatasetDir("cannot read dataset manifest '" + manifest_path + "': " + e.what());
  }

  Dataset ds;
  std::string eeg1 = "EEG1", eeg2 = "EEG2", emg = "EMG", eog = "EOG", ecg = "ECG";
  try {
    ds.id = manifest.at("dataset_id").get<std::string>();
    ds.mains_hz = manifest.at("mains_hz").get<double>();
    if (manifest.contains("channels")) {
      const json& ch = manifest.at("channels");
      if (ch.contains("eeg1")) eeg1 = ch.at("eeg1").get<std::string>();
      if (ch.contains("eeg2")) eeg2 = ch.at("eeg2").get<std::string>();
      if (ch.contains("emg")) emg = ch.at("emg").get<std::string>();
      if (ch.contains("eog")) eog = ch.at("eog").get<std::string>();
      if (ch.contains("ecg")) ecg = ch.at("ecg").get<std::string>();
    }
    std::set<std::string> note_set;
    for (const json& entry : manifest.at("recordings")) {
      const std::string edf_name = entry.at("edf").get<std::string>();
      const std::string hyp_name = entry.at("hypnogram").get<std::string>();
      const edf::Recording rec = edf::read_file(dir + "/" + edf_name);
      const std::vector<SleepStage> hyp = read_hypnogram_csv(dir + "/" + hyp_name);

      dsp::ConditionInput in;
      in.eeg1 = edf::extract_channel(rec, eeg1);
      in.eeg2 = edf::extract_channel(rec, eeg2);
      in.emg = edf::extract_channel(rec, emg);
      in.eog = edf::extract_channel(rec, eog);
      if (has_label(rec, ecg)) in.ecg = edf::extract_channel(rec, ecg);
      in.mains_hz = ds.mains_hz;

      std::vector<std::string> notes;
      const auto conditioned = condition_channels(in, filtering_enabled, &notes);
      for (const std::string& n : notes) note_set.insert(ds.id + ": " + n);

      LoadedRecording lr;
      lr.name = fs::path(edf_name).stem().string();
      lr.epochs = dsp::build_epochs(
          {conditioned[0], conditioned[1], conditioned[2], conditioned[3]}, hyp, ds.id, lr.name);
      ds.recordings.push_back(std::move(lr));
    }
    ds.notes.assign(note_set.begin(), note_set.end());
  } catch (const json::exception& e) {
    throw BadDatasetDir("dataset manifest '" + manifest_path + "' is malformed: " + e.what());
  }
  if (ds.recordings.empty()) throw BadDatasetDir("dataset '" + dir + "' lists no recordings");
  return ds;
}

// ============================================================
// Recording-level split
// ============================================================

namespace {

// 20% with round-half-up, in integers.
int fifth_rounded(int n) { return (2 * n + 5) / 10; }

}  // namespace

DataSplit split_recordings(int n_recordings, std::uint64_t seed, const std::string& dataset_id) {
  if (n_recordings < 5) {
    throw TooFewRecordings("need at least 5 recordings to split, got " +
                           std::to_string(n_recordings));
  }
  std::vector<int> idx(static_cast<std::size_t>(n_recordings));
  for (int i = 0; i < n_recordings; ++i) idx[static_cast<std::size_t>(i)] = i;
  Rng rng(mix_seed(seed, fnv1a64(dataset_id)));
  rng.shuffle(idx);

  const int n_ts = fifth_rounded(n_recordings);
  const int n_val = fifth_rounded(n_recordings - n_ts);
  DataSplit s;
  s.test.assign(idx.begin(), idx.begin() + n_ts);
  s.validate.assign(idx.begin() + n_ts, idx.begin() + n_ts + n_val);
  s.train.assign(idx.begin() + n_ts + n_val, idx.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.validate.begin(), s.validate.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<Epoch> gather(const Dataset& ds, const std::vector<int>& recordings) {
  std::vector<Epoch> out;
  for (int r : recordings) {
    const auto& rec = ds.recordings.at(static_cast<std::size_t>(r));
    out.insert(out.end(), rec.epochs.begin(), rec.epochs.end());
  }
  return out;
}

std::vector<SleepStage> labels_of(const std::vector<Epoch>& epochs) {
  std::vector<SleepStage> out;
  out.reserve(epochs.size());
  for (const Epoch& e : epochs) out.push_back(e.label);
  return out;
}

// ============================================================
// Prediction tracks
// ============================================================

Track predict_track(const cnn::TrainedModel& model, const std::vector<Epoch>& epochs) {
  const std::vector<cnn::Prediction> preds = cnn::predict(model, epochs);
  Track t;
  t.stages.reserve(preds.size());
  t.posteriors.reserve(preds.size());
  for (const auto& p : preds) {
    if (p.posterior.size() != kNumStages) {
      throw BadTrackFile("model emits " + std::to_string(p.posterior.size()) +
                         " posteriors, tracks need " + std::to_string(kNumStages));
    }
    t.stages.push_back(p.stage);
    std::array<double, kNumStages> row{};
    std::copy(p.posterior.begin(), p.posterior.end(), row.begin());
    t.posteriors.push_back(row);
  }
  return t;
}

std::string track_to_csv(const Track& t) {
  std::string out = "epoch_index,stage,p_W,p_N1,p_N2,p_N3,p_R\n";
  char buf[32];
  for (std::size_t i = 0; i < t.stages.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += stage_name(t.stages[i]);
    for (double p : t.posteriors[i]) {
      // Shortest round-trippable form keeps reloaded tracks voting identically.
      std::snprintf(buf, sizeof(buf), "%.17g", p);
      out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Track track_from_csv(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != "epoch_index,stage,p_W,p_N1,p_N2,p_N3,p_R") {
    throw BadTrackFile("prediction track lacks the expected header");
  }
  Track t;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_fields(lines[i], ',');
    if (fields.size() != 2 + kNumStages) {
      throw BadTrackFile("track line " + std::to_string(i + 1) + " has " +
                         std::to_string(fields.size()) + " fields, expected 7");
    }
    const SleepStage s = map_stage(fields[1]);
    if (s == SleepStage::Excluded) {
      throw BadTrackFile("track line " + std::to_string(i + 1) + " has unknown stage '" +
                         fields[1] + "'");
    }
    std::array<double, kNumStages> row{};
    for (std::size_t c = 0; c < kNumStages; ++c) {
      const std::string& f = fields[2 + c];
      char* end = nullptr;
      row[c] = std::strtod(f.c_str(), &end);
      if (end != f.c_str() + f.size() || f.empty()) {
        throw BadTrackFile("track line " + std::to_string(i + 1) + " has a non-numeric posterior");
      }
    }
    t.stages.push_back(s);
    t.posteriors.push_back(row);
  }
  return t;
}

// ============================================================
// Experiment protocol
// ============================================================

namespace {

std::vector<std::size_t> recording_offsets(const Dataset& ds) {
  std::vector<std::size_t> off(ds.recordings.size() + 1, 0);
  for (std::size_t r = 0; r < ds.recordings.size(); ++r) {
    off[r + 1] = off[r] + ds.recordings[r].epochs.size();
  }
  return off;
}

std::vector<std::size_t> epoch_indices(const std::vector<std::size_t>& offsets,
                                       const std::vector<int>& recordings) {
  std::vector<std::size_t> idx;
  for (int r : recordings) {
    for (std::size_t i = offsets[static_cast<std::size_t>(r)];
         i < offsets[static_cast<std::size_t>(r) + 1]; ++i) {
      idx.push_back(i);
    }
  }
  return idx;
}

std::vector<SleepStage> all_labels(const Dataset& ds) {
  std::vector<SleepStage> out;
  out.reserve(ds.total_epochs());
  for (const auto& rec : ds.recordings) {
    for (const Epoch& e : rec.epochs) out.push_back(e.label);
  }
  return out;
}

std::vector<int> all_recording_ids(const Dataset& ds) {
  std::vector<int> ids(ds.recordings.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return ids;
}

template <typename T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v.at(i));
  return out;
}

std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// State for one configuration's pass over all datasets: lazily trained or
// cache-loaded models, lazily computed or cache-loaded prediction tracks.
struct ConfigRun {
  const std::vector<Dataset>* datasets = nullptr;
  cnn::ModelConfig config;
  std::string config_name;
  RunOptions options;
  std::vector<DataSplit> splits;
  std::vector<std::optional<cnn::TrainedModel>> models;
  std::vector<std::vector<std::optional<Track>>> tracks;
  std::vector<std::string>* trained = nullptr;

  std::string model_path(std::size_t k) const {
    const Dataset& ds = (*datasets)[k];
    const std::uint64_t key =
        fnv1a64(ds.id + "\n" + cnn::config_to_json(config) + "\nsplit" +
                std::to_string(options.split_seed));
    return options.cache_dir + "/models/" + sanitize(config_name) + "_" + sanitize(ds.id) +
           "_" + hex16(key) + ".model";
  }

  std::string track_path(std::size_t k, std::size_t j) const {
    const Dataset& model_ds = (*datasets)[k];
    const Dataset& target = (*datasets)[j];
    const std::uint64_t key =
        fnv1a64(model_ds.id + "\n" + cnn::config_to_json(config) + "\nsplit" +
                std::to_string(options.split_seed) + "\non\n" + target.id);
    return options.cache_dir + "/tracks/" + sanitize(config_name) + "_" +
           sanitize(model_ds.id) + "_on_" + sanitize(target.id) + "_" + hex16(key) + ".csv";
  }

  const cnn::TrainedModel& model(std::size_t k) {
    if (models[k]) return *models[k];
    const bool cache = !options.cache_dir.empty();
    const std::string path = cache ? model_path(k) : std::string();
    if (cache && options.reuse_cache && fs::exists(path)) {
      models[k] = cnn::load_model(path);
      return *models[k];
    }
    const Dataset& ds = (*datasets)[k];
    cnn::ModelConfig cfg = config;
    cfg.name = config_name;
    models[k] = cnn::train(gather(ds, splits[k].train), gather(ds, splits[k].validate), cfg,
                           ds.id);
    trained->push_back(config_name + "/" + ds.id);
    if (cache) {
      fs::create_directories(fs::path(path).parent_path());
      cnn::save_model(*models[k], path);
    }
    return *models[k];
  }

  const Track& track(std::size_t k, std::size_t j) {
    if (tracks[k][j]) return *tracks[k][j];
    const bool cache = !options.cache_dir.empty();
    const std::string path = cache ? track_path(k, j) : std::string();
    if (cache && options.reuse_cache && fs::exists(path)) {
      tracks[k][j] = track_from_csv(slurp(path));
    } else {
      const Dataset& target = (*datasets)[j];
      tracks[k][j] = predict_track(model(k), gather(target, all_recording_ids(target)));
      if (cache) spit(path, track_to_csv(*tracks[k][j]));
    }
    if (tracks[k][j]->stages.size() != (*datasets)[j].total_epochs()) {
      throw BadTrackFile("track for " + (*datasets)[k].id + " on " + (*datasets)[j].id +
                         " covers " + std::to_string(tracks[k][j]->stages.size()) +
                         " epochs, dataset has " +
                         std::to_string((*datasets)[j].total_epochs()));
    }
    return *tracks[k][j];
  }
};

}  // namespace

ExperimentReport run_experiments(const std::vector<std::string>& dataset_dirs,
                                 const std::vector<cnn::ModelConfig>& configs,
                                 const RunOptions& options) {
  if (dataset_dirs.empty()) throw BadDatasetDir("no dataset directories given");

  ExperimentReport report;
  std::map<bool, std::vector<Dataset>> variants;
  auto datasets_for = [&](bool filtering) -> const std::vector<Dataset>& {
    auto it = variants.find(filtering);
    if (it == variants.end()) {
      std::vector<Dataset> loaded;
      for (const std::string& dir : dataset_dirs) {
        loaded.push_back(load_dataset(dir, filtering));
      }
      it = variants.emplace(filtering, std::move(loaded)).first;
      for (const Dataset& ds : it->second) {
        report.notes.insert(report.notes.end(), ds.notes.begin(), ds.notes.end());
      }
      if (report.dataset_ids.empty()) {
        for (const Dataset& ds : it->second) report.dataset_ids.push_back(ds.id);
      }
    }
    return it->second;
  };

  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    cnn::validate_config(configs[ci]);
    const std::string name =
        configs[ci].name.empty() ? "config" + std::to_string(ci + 1) : configs[ci].name;
    report.config_names.push_back(name);

    const std::vector<Dataset>& ds = datasets_for(configs[ci].filtering_enabled);
    const std::size_t K = ds.size();
    if (options.ensemble_only && K < 2) {
      throw NeedTwoDatasets("the ensemble part needs at least 2 datasets");
    }

    ConfigRun run;
    run.datasets = &ds;
    run.config = configs[ci];
    run.config_name = name;
    run.options = options;
    run.trained = &report.trained;
    run.models.resize(K);
    run.tracks.assign(K, std::vector<std::optional<Track>>(K));
    for (std::size_t k = 0; k < K; ++k) {
      run.splits.push_back(
          split_recordings(static_cast<int>(ds[k].recordings.size()), options.split_seed,
                           ds[k].id));
    }

    std::vector<std::vector<std::size_t>> offsets;
    std::vector<std::vector<SleepStage>> labels;
    for (std::size_t k = 0; k < K; ++k) {
      offsets.push_back(recording_offsets(ds[k]));
      labels.push_back(all_labels(ds[k]));
    }

    // Local rows: slice the model's whole-dataset track by split partition.
    std::vector<std::optional<double>> local_ts(K);
    if (!options.ensemble_only) {
      for (std::size_t k = 0; k < K; ++k) {
        const Track& self = run.track(k, k);
        LocalRow row;
        row.config_name = name;
        row.dataset_id = ds[k].id;
        const auto part_kappa = [&](const std::vector<int>& recs) {
          const auto idx = epoch_indices(offsets[k], recs);
          return metrics::cohen_kappa(
              metrics::confusion(take(labels[k], idx), take(self.stages, idx)));
        };
        row.tr = part_kappa(run.splits[k].train);
        row.val = part_kappa(run.splits[k].validate);
        row.ts = part_kappa(run.splits[k].test);
        row.training_iterations = run.model(k).provenance.training_iterations;
        row.epochs_run = run.model(k).provenance.epochs_run;
        local_ts[k] = row.ts.kappa;
        report.local.push_back(row);
      }

      if (K >= 2) {
        CrossMatrix cm;
        cm.config_name = name;
        cm.cells.resize(K, std::vector<metrics::KappaReport>(K));
        for (std::size_t k = 0; k < K; ++k) {
          for (std::size_t j = 0; j < K; ++j) {
            cm.cells[k][j] =
                metrics::cohen_kappa(metrics::confusion(labels[j], run.track(k, j).stages));
          }
        }
        report.cross.push_back(std::move(cm));
      }
    }

    if (K >= 2) {
      std::vector<double> col_local, col_external, col_ensemble;
      for (std::size_t k = 0; k < K; ++k) {
        EnsembleRow row;
        row.config_name = name;
        row.dataset_id = ds[k].id;
        row.local_ref = options.ensemble_only ? std::nullopt : local_ts[k];

        std::vector<double> external;
        std::vector<std::vector<cnn::Prediction>> member_tracks;
        for (std::size_t j = 0; j < K; ++j) {
          if (j == k) continue;
          const Track& t = run.track(j, k);
          const auto rep = metrics::cohen_kappa(metrics::confusion(labels[k], t.stages));
          if (rep.kappa) external.push_back(*rep.kappa);
          std::vector<cnn::Prediction> member(t.stages.size());
          for (std::size_t e = 0; e < t.stages.size(); ++e) {
            member[e].stage = t.stages[e];
            member[e].posterior.assign(t.posteriors[e].begin(), t.posteriors[e].end());
          }
          member_tracks.push_back(std::move(member));
        }
        if (!external.empty()) {
          row.external_min = *std::min_element(external.begin(), external.end());
          row.external_max = *std::max_element(external.begin(), external.end());
          row.external_avg = mean_of(external);
        }
        const std::vector<SleepStage> votes = ens::vote_tracks(member_tracks);
        const auto ens_rep = metrics::cohen_kappa(metrics::confusion(labels[k], votes));
        row.ensemble = ens_rep.kappa;

        if (row.local_ref) col_local.push_back(*row.local_ref);
        if (row.external_avg) col_external.push_back(*row.external_avg);
        if (row.ensemble) col_ensemble.push_back(*row.ensemble);
        report.ensemble.push_back(std::move(row));
      }

      SummaryRow sum;
      sum.config_name = name;
      sum.local_avg = mean_of(col_local);
      sum.external_avg = mean_of(col_external);
      sum.ensemble_avg = mean_of(col_ensemble);
      if (sum.local_avg && sum.external_avg) sum.i_vs_ii = *sum.external_avg - *sum.local_avg;
      if (sum.local_avg && sum.ensemble_avg) sum.i_vs_iii = *sum.ensemble_avg - *sum.local_avg;
      if (sum.external_avg && sum.ensemble_avg) {
        sum.ii_vs_iii = *sum.ensemble_avg - *sum.external_avg;
      }
      report.summary.push_back(sum);
    } else {
      report.notes.push_back(name + ": single dataset, cross-database and ensemble parts skipped");
    }
  }
  return report;
}

// ============================================================
// Rendering
// ============================================================

namespace {

std::string fmt_fixed(double v, int decimals) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v, int decimals) {
  return v ? fmt_fixed(*v, decimals) : std::string("undef");
}

std::string fmt_rep(const metrics::KappaReport& r, int decimals) {
  return metrics::format_kappa(r, decimals);
}

struct TableWriter {
  ReportFormat format;
  std::string out;

  void title(const std::string& text) {
    out += (format == ReportFormat::Markdown) ? "## " + text + "\n\n" : "# " + text + "\n";
  }
  void row(const std::vector<std::string>& cells, bool header = false) {
    if (format == ReportFormat::Markdown) {
      out += "|";
      for (const auto& c : cells) out += " " + c + " |";
      out += "\n";
      if (header) {
        out += "|";
        for (std::size_t i = 0; i < cells.size(); ++i) out += " --- |";
        out += "\n";
      }
    } else {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += "\t";
        out += cells[i];
      }
      out += "\n";
    }
  }
  void gap() { out += "\n"; }
  void line(const std::string& text) { out += text + "\n"; }
};

}  // namespace

std::string render_report(const ExperimentReport& r, ReportFormat format) {
  TableWriter w{format, {}};

  if (format == ReportFormat::Markdown) {
    w.line("# Experiment report");
    w.gap();
    std::string ids;
    for (const auto& id : r.dataset_ids) {
      if (!ids.empty()) ids += ", ";
      ids += id;
    }
    w.line("Databases: " + (ids.empty() ? "(none)" : ids));
    w.gap();
  }

  // Per-database local performance, one row per (config, database).
  w.title("Local performance");
  w.row({"config", "database", "TR", "VAL", "TS", "iterations", "epochs"}, true);
  for (const LocalRow& row : r.local) {
    w.row({row.config_name, row.dataset_id, fmt_rep(row.tr, 2), fmt_rep(row.val, 2),
           fmt_rep(row.ts, 2), std::to_string(row.training_iterations),
           std::to_string(row.epochs_run)});
  }
  w.gap();

  // Cross-database matrices, one per config. Diagonal cells are computed on
  // data the model trained on; they stay in the table but wear brackets.
  for (const CrossMatrix& cm : r.cross) {
    w.title("Cross-database agreement: " + cm.config_name +
            " (bracketed diagonal cells are biased)");
    std::vector<std::string> head = {"model"};
    head.insert(head.end(), r.dataset_ids.begin(), r.dataset_ids.end());
    w.row(head, true);
    for (std::size_t k = 0; k < cm.cells.size(); ++k) {
      std::vector<std::string> cells = {"M(" + r.dataset_ids[k] + ")"};
      for (std::size_t j = 0; j < cm.cells[k].size(); ++j) {
        const std::string v = fmt_rep(cm.cells[k][j], 2);
        cells.push_back(k == j ? "[" + v + "]" : v);
      }
      w.row(cells);
    }
    w.gap();
  }

  // Per-target comparison of local reference, external singles, ensemble.
  w.title("Ensemble comparison");
  w.row({"config", "target", "local_ref", "external_min", "external_max", "external_avg",
         "ensemble"},
        true);
  for (const EnsembleRow& row : r.ensemble) {
    w.row({row.config_name, row.dataset_id, fmt_opt(row.local_ref, 2),
           fmt_opt(row.external_min, 2), fmt_opt(row.external_max, 2),
           fmt_opt(row.external_avg, 2), fmt_opt(row.ensemble, 2)});
  }
  w.gap();

  // Averages across databases per config, with pairwise differences
  // (later scenario minus earlier, so negative means the later one is worse).
  w.title("Configuration summary");
  w.row({"config", "local_I", "external_II", "ensemble_III", "I_vs_II", "I_vs_III",
         "II_vs_III"},
        true);
  for (const SummaryRow& row : r.summary) {
    w.row({row.config_name, fmt_opt(row.local_avg, 4), fmt_opt(row.external_avg, 4),
           fmt_opt(row.ensemble_avg, 4), fmt_opt(row.i_vs_ii, 4), fmt_opt(row.i_vs_iii, 4),
           fmt_opt(row.ii_vs_iii, 4)});
  }
  w.gap();

  w.title("Notes");
  if (r.notes.empty()) {
    w.line(format == ReportFormat::Markdown ? "(none)" : "(none)");
  } else {
    for (const std::string& n : r.notes) w.line("- " + n);
  }
  return w.out;
}

}  // namespace somnus::harness
