// Command-line front end. Links only the C API of libtslstm.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tslstm/tslstm.h"

namespace {

// Load the config file (or start from an empty document) and apply flag
// overrides. Flags win over file values.
std::string effective_config(const std::string& config_path, long long seed, long long ne) {
  nlohmann::json j = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) {
      std::cerr << "error: cannot open config file: " << config_path << "\n";
      std::exit(1);
    }
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: malformed config " << config_path << ": " << e.what() << "\n";
      std::exit(1);
    }
  }
  if (seed >= 0) j["seed"] = seed;
  if (ne > 0) j["model"]["n_e"] = ne;
  return j.dump();
}

struct CtxGuard {
  tslstm_ctx* ctx = tslstm_ctx_new();
  ~CtxGuard() { tslstm_ctx_free(ctx); }
};

int report(const CtxGuard& guard, int status, char* output, bool print_output = true) {
  if (output) {
    if (print_output) std::cout << output << "\n";
    tslstm_string_free(output);
  }
  if (status != TSLSTM_OK) {
    std::cerr << "error: " << tslstm_last_error(guard.ctx) << "\n";
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TS-LSTM video captioning: temporal-pooling encoder, stacked "
               "multi-modal LSTM decoder, adadelta training, beam search"};
  app.require_subcommand(1);
  app.fallthrough();  // allow --config/--seed after the subcommand name

  std::string config_path, out_dir, manifest, checkpoint, captions_file, split = "test";
  std::string resume, features_path;
  long long seed = -1, ne = 0;
  int beam_width = 0, max_len = 0;
  std::vector<std::size_t> ne_values;

  app.add_option("--config", config_path, "Run configuration JSON file")->capture_default_str();
  app.add_option("--seed", seed, "Override the config seed");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic event-structured dataset");
  synth->add_option("--out", out_dir, "Output dataset directory")->required();

  auto* train = app.add_subcommand("train", "Train a captioning model");
  train->add_option("--data", manifest, "Dataset manifest.json")->required();
  train->add_option("--out", out_dir, "Output directory for checkpoint and log")->required();
  train->add_option("--ne", ne, "Override the segment count N_e");
  train->add_option("--resume", resume, "Checkpoint to resume from");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  bool mutate = false;
  gradcheck->add_flag("--mutate", mutate,
                      "Run with a deliberately broken LSTM backward pass (must fail)");

  auto* caption = app.add_subcommand("caption", "Caption a dataset split or a feature file");
  caption->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  caption->add_option("--data", manifest, "Dataset manifest.json");
  caption->add_option("--split", split, "Split to caption (train/val/test)")
      ->capture_default_str();
  caption->add_option("--features", features_path, "Single binary feature file");
  caption->add_option("--beam-width", beam_width, "Beam width (default 5)");
  caption->add_option("--max-len", max_len, "Maximum caption length (default 30)");
  caption->add_option("--out", out_dir, "Output captions JSON path");

  auto* eval = app.add_subcommand("eval", "Score a captions file against references");
  eval->add_option("--captions", captions_file, "Captions JSON from the caption command")
      ->required();
  eval->add_option("--data", manifest, "Dataset manifest.json")->required();
  eval->add_option("--split", split, "Split to score against")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate-ne", "Train/evaluate once per segment count");
  ablate->add_option("--data", manifest, "Dataset manifest.json")->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_option("--values", ne_values, "N_e values (e.g. 1 3 30)")
      ->expected(-1)
      ->required();

  CLI11_PARSE(app, argc, argv);

  CtxGuard guard;
  const std::string config = effective_config(config_path, seed, ne);
  char* output = nullptr;

  if (synth->parsed()) {
    return report(guard, tslstm_synth(guard.ctx, config.c_str(), out_dir.c_str(), &output),
                  output);
  }
  if (train->parsed()) {
    return report(guard,
                  tslstm_train(guard.ctx, config.c_str(), manifest.c_str(), out_dir.c_str(),
                               resume.empty() ? nullptr : resume.c_str(), &output),
                  output);
  }
  if (gradcheck->parsed()) {
    return report(guard,
                  tslstm_gradcheck(guard.ctx, config.c_str(), mutate ? 1 : 0, &output),
                  output);
  }
  if (caption->parsed()) {
    tslstm_model* model = tslstm_model_load(guard.ctx, checkpoint.c_str());
    if (!model) {
      std::cerr << "error: " << tslstm_last_error(guard.ctx) << "\n";
      return 2;
    }
    int status;
    if (!features_path.empty()) {
      status = tslstm_model_caption_features(guard.ctx, model, features_path.c_str(),
                                             beam_width, max_len, &output);
    } else if (!manifest.empty()) {
      status = tslstm_model_caption_split(guard.ctx, model, manifest.c_str(), split.c_str(),
                                          beam_width, max_len,
                                          out_dir.empty() ? nullptr : out_dir.c_str(),
                                          &output);
    } else {
      std::cerr << "error: caption needs --data or --features\n";
      tslstm_model_free(model);
      return 1;
    }
    tslstm_model_free(model);
    return report(guard, status, output);
  }
  if (eval->parsed()) {
    const int status = tslstm_eval(guard.ctx, captions_file.c_str(), manifest.c_str(),
                                   split.c_str(), &output);
    if (status == TSLSTM_OK && output) {
      // Compact metric row alongside the JSON report.
      const auto metrics = nlohmann::json::parse(output).at("metrics");
      std::printf("%-12s B@1 %.3f  B@2 %.3f  B@3 %.3f  B@4 %.3f  C %.3f\n", split.c_str(),
                  metrics.at("bleu1").get<double>(), metrics.at("bleu2").get<double>(),
                  metrics.at("bleu3").get<double>(), metrics.at("bleu4").get<double>(),
                  metrics.at("cider").get<double>());
    }
    return report(guard, status, output);
  }
  if (ablate->parsed()) {
    const int status =
        tslstm_ablate_ne(guard.ctx, config.c_str(), ne_values.data(), ne_values.size(),
                         manifest.c_str(), out_dir.c_str(), &output);
    if (status == TSLSTM_OK && output) {
      std::cout << nlohmann::json::parse(output).at("text").get<std::string>();
    }
    return report(guard, status, output, false);
  }
  return 1;
}
