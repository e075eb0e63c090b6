#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include "metrics.hpp"

namespace tslstm {
namespace commands {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCodeVersion = "tslstm 0.1.0";

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

const std::vector<std::string>& split_ids(const Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train_ids;
  if (split == "val") return ds.val_ids;
  if (split == "test") return ds.test_ids;
  throw ConfigError("unknown split \"" + split + "\" (expected train, val or test)");
}

nlohmann::json caption_split(const Checkpoint& ck, const Dataset& ds,
                             const std::vector<std::string>& ids, const DecodeConfig& decode) {
  decode.validate();
  nlohmann::json captions = nlohmann::json::object();
  nlohmann::json log_probs = nlohmann::json::object();
  for (const auto& id : ids) {
    const VideoSample& v = ds.video(id);
    Vector y = encode_video(v.features, ck.best, ck.model_config.n_e);
    DecodeResult r =
        beam_search(y, ck.best, decode.beam_width, decode.max_len, decode.length_normalize);
    captions[id] = decode_tokens(r.tokens, ck.vocab);
    log_probs[id] = r.log_prob;
  }
  nlohmann::json out;
  out["captions"] = captions;
  out["log_probs"] = log_probs;
  out["config"] = decode.to_json();
  out["code_version"] = kCodeVersion;
  return out;
}

}  // namespace

nlohmann::json cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  Dataset ds = generate_synthetic(cfg.synth);
  save_dataset(ds, out_dir);
  std::size_t total_frames = 0;
  for (const auto& v : ds.videos) total_frames += v.features.cols();
  nlohmann::json summary;
  summary["manifest"] = (fs::path(out_dir) / "manifest.json").string();
  summary["n_videos"] = ds.videos.size();
  summary["feature_dim"] = ds.feature_dim;
  summary["total_frames"] = total_frames;
  summary["splits"] = {{"train", ds.train_ids.size()},
                       {"val", ds.val_ids.size()},
                       {"test", ds.test_ids.size()}};
  summary["config"] = cfg.to_json()["synth"];
  summary["code_version"] = kCodeVersion;
  return summary;
}

nlohmann::json cmd_train(const RunConfig& cfg, const std::string& manifest_path,
                         const std::string& out_dir, const std::string& resume_path) {
  Dataset ds = load_dataset(manifest_path);
  Checkpoint resume;
  const bool resuming = !resume_path.empty();
  if (resuming) resume = Checkpoint::load(resume_path);

  TrainResult result = train(ds, cfg.train, resuming ? &resume : nullptr);

  fs::create_directories(out_dir);
  result.checkpoint.save((fs::path(out_dir) / "checkpoint.json").string());

  nlohmann::json log;
  log["code_version"] = kCodeVersion;
  log["config"] = cfg.to_json();
  log["dataset"] = manifest_path;
  log["stopped_early"] = result.stopped_early;
  log["epochs"] = nlohmann::json::array();
  for (const auto& rec : result.log) {
    log["epochs"].push_back({{"epoch", rec.epoch},
                             {"train_loss", rec.train_loss},
                             {"train_perplexity", rec.train_perplexity},
                             {"val_loss", rec.val_loss},
                             {"val_perplexity", rec.val_perplexity},
                             {"wall_seconds", rec.wall_seconds},
                             {"improved", rec.improved}});
  }
  write_json(fs::path(out_dir) / "train_log.json", log);

  nlohmann::json summary;
  summary["checkpoint"] = (fs::path(out_dir) / "checkpoint.json").string();
  summary["train_log"] = (fs::path(out_dir) / "train_log.json").string();
  summary["epochs_run"] = result.log.size();
  summary["best_val_loss"] = result.checkpoint.best_val_loss;
  if (!result.log.empty()) {
    summary["final_train_perplexity"] = result.log.back().train_perplexity;
  }
  return summary;
}

nlohmann::json cmd_gradcheck(const RunConfig& cfg, bool mutate) {
  GradCheckReport report = gradient_check(
      cfg.gradcheck.model_config(), cfg.seed, cfg.gradcheck.n_v, cfg.gradcheck.caption_len,
      mutate ? BackwardMutation::drop_prev_cell : BackwardMutation::none);
  nlohmann::json j = report.to_json();
  j["mutated"] = mutate;
  j["config"] = cfg.gradcheck.to_json();
  j["code_version"] = kCodeVersion;
  return j;
}

nlohmann::json cmd_caption(const std::string& checkpoint_path, const std::string& manifest_path,
                           const std::string& split, const DecodeConfig& decode,
                           const std::string& out_path) {
  Checkpoint ck = Checkpoint::load(checkpoint_path);
  Dataset ds = load_dataset(manifest_path);
  if (ds.feature_dim != ck.model_config.feature_dim) {
    throw IoError("checkpoint expects feature_dim " +
                  std::to_string(ck.model_config.feature_dim) + " but dataset has " +
                  std::to_string(ds.feature_dim));
  }
  nlohmann::json out = caption_split(ck, ds, split_ids(ds, split), decode);
  if (!out_path.empty()) write_json(out_path, out);
  return out;
}

nlohmann::json cmd_caption_features(const std::string& checkpoint_path,
                                    const std::string& features_path,
                                    const DecodeConfig& decode) {
  decode.validate();
  Checkpoint ck = Checkpoint::load(checkpoint_path);
  FeatureMatrix features = load_features(features_path);
  if (features.rows() != ck.model_config.feature_dim) {
    throw IoError("checkpoint expects feature_dim " +
                  std::to_string(ck.model_config.feature_dim) + " but file has " +
                  std::to_string(features.rows()));
  }
  Vector y = encode_video(features, ck.best, ck.model_config.n_e);
  DecodeResult r =
      beam_search(y, ck.best, decode.beam_width, decode.max_len, decode.length_normalize);
  nlohmann::json out;
  out["caption"] = decode_tokens(r.tokens, ck.vocab);
  out["log_prob"] = r.log_prob;
  out["features"] = features_path;
  return out;
}

nlohmann::json cmd_eval(const std::string& captions_path, const std::string& manifest_path,
                        const std::string& split) {
  std::ifstream f(captions_path);
  if (!f) throw IoError("cannot open captions file: " + captions_path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed captions file " + captions_path + ": " + e.what());
  }
  const nlohmann::json& caps = j.contains("captions") ? j.at("captions") : j;
  std::map<std::string, std::string> outputs;
  for (const auto& [id, caption] : caps.items()) outputs[id] = caption.get<std::string>();

  Dataset ds = load_dataset(manifest_path);
  metrics::MetricReport report = metrics::evaluate(outputs, ds, split_ids(ds, split));
  nlohmann::json out = report.to_json();
  out["split"] = split;
  out["code_version"] = kCodeVersion;
  return out;
}

std::string format_metric_row(const nlohmann::json& metrics, const std::string& label) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-24s B@1 %.3f  B@2 %.3f  B@3 %.3f  B@4 %.3f  C %.3f",
                label.c_str(), metrics.at("bleu1").get<double>(),
                metrics.at("bleu2").get<double>(), metrics.at("bleu3").get<double>(),
                metrics.at("bleu4").get<double>(), metrics.at("cider").get<double>());
  return buf;
}

nlohmann::json cmd_ablate_ne(const RunConfig& cfg, const std::vector<std::size_t>& ne_values,
                             const std::string& manifest_path, const std::string& out_dir) {
  if (ne_values.empty()) throw ConfigError("ablate-ne: need at least one N_e value");
  Dataset ds = load_dataset(manifest_path);
  std::size_t min_frames = SIZE_MAX;
  for (const auto& v : ds.videos) min_frames = std::min(min_frames, v.features.cols());
  for (std::size_t ne : ne_values) {
    if (ne == 0 || ne > min_frames) {
      throw ConfigError("ablate-ne: N_e = " + std::to_string(ne) +
                        " not usable with minimum frame count " + std::to_string(min_frames));
    }
  }

  fs::create_directories(out_dir);
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t ne : ne_values) {
    RunConfig run = cfg;
    run.train.n_e = ne;
    const fs::path run_dir = fs::path(out_dir) / ("ne_" + std::to_string(ne));
    cmd_train(run, manifest_path, run_dir.string());
    cmd_caption((run_dir / "checkpoint.json").string(), manifest_path, "test", run.decode,
                (run_dir / "captions.json").string());
    nlohmann::json report =
        cmd_eval((run_dir / "captions.json").string(), manifest_path, "test");
    write_json(run_dir / "eval.json", report);
    nlohmann::json row;
    row["n_e"] = ne;
    row["metrics"] = report.at("metrics");
    rows.push_back(row);
  }

  nlohmann::json table;
  table["rows"] = rows;
  table["config"] = cfg.to_json();
  table["dataset"] = manifest_path;
  table["code_version"] = kCodeVersion;
  std::string text;
  for (const auto& row : rows) {
    text += format_metric_row(row.at("metrics"),
                              "TS-LSTM(N_e=" + std::to_string(row.at("n_e").get<std::size_t>()) +
                                  ")") +
            "\n";
  }
  table["text"] = text;
  write_json(fs::path(out_dir) / "ablation.json", table);
  return table;
}

}  // namespace commands
}  // namespace tslstm
