#include "tslstm/tslstm.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "commands.hpp"
#include "metrics.hpp"

using namespace tslstm;

struct tslstm_ctx {
  std::string last_error;
};

struct tslstm_model {
  Checkpoint checkpoint;
};

namespace {

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_output(char** out, const nlohmann::json& j) {
  if (out) *out = dup_string(j.dump(2));
}

RunConfig parse_config(const char* config_json) {
  if (!config_json) throw ConfigError("config_json is null");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  return RunConfig::from_json(j);
}

std::string require(const char* arg, const char* name) {
  if (!arg) throw ConfigError(std::string(name) + " is null");
  return arg;
}

template <typename Fn>
int guard(tslstm_ctx* ctx, Fn&& fn) {
  if (!ctx) return TSLSTM_ERR_CONFIG;
  ctx->last_error.clear();
  try {
    return fn();
  } catch (const ConfigError& e) {
    ctx->last_error = e.what();
    return TSLSTM_ERR_CONFIG;
  } catch (const VocabError& e) {
    ctx->last_error = e.what();
    return TSLSTM_ERR_CONFIG;
  } catch (const MetricError& e) {
    ctx->last_error = e.what();
    return TSLSTM_ERR_CONFIG;
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return TSLSTM_ERR_RUNTIME;
  }
}

DecodeConfig decode_config(int beam_width, int max_len) {
  DecodeConfig d;
  if (beam_width > 0) d.beam_width = static_cast<std::size_t>(beam_width);
  if (max_len > 0) d.max_len = static_cast<std::size_t>(max_len);
  return d;
}

}  // namespace

extern "C" {

tslstm_ctx* tslstm_ctx_new(void) { return new tslstm_ctx(); }

void tslstm_ctx_free(tslstm_ctx* ctx) { delete ctx; }

const char* tslstm_last_error(const tslstm_ctx* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

void tslstm_string_free(char* s) { std::free(s); }

int tslstm_synth(tslstm_ctx* ctx, const char* config_json, const char* out_dir,
                 char** summary_json) {
  return guard(ctx, [&] {
    nlohmann::json summary =
        commands::cmd_synth(parse_config(config_json), require(out_dir, "out_dir"));
    set_output(summary_json, summary);
    return TSLSTM_OK;
  });
}

int tslstm_train(tslstm_ctx* ctx, const char* config_json, const char* manifest_path,
                 const char* out_dir, const char* resume_checkpoint, char** summary_json) {
  return guard(ctx, [&] {
    nlohmann::json summary = commands::cmd_train(
        parse_config(config_json), require(manifest_path, "manifest_path"),
        require(out_dir, "out_dir"), resume_checkpoint ? resume_checkpoint : "");
    set_output(summary_json, summary);
    return TSLSTM_OK;
  });
}

int tslstm_gradcheck(tslstm_ctx* ctx, const char* config_json, int mutate,
                     char** report_json) {
  return guard(ctx, [&] {
    nlohmann::json report = commands::cmd_gradcheck(parse_config(config_json), mutate != 0);
    set_output(report_json, report);
    if (!report.at("passed").get<bool>()) {
      ctx->last_error = "gradient check failed";
      return static_cast<int>(TSLSTM_ERR_GRADCHECK);
    }
    return static_cast<int>(TSLSTM_OK);
  });
}

tslstm_model* tslstm_model_load(tslstm_ctx* ctx, const char* checkpoint_path) {
  tslstm_model* model = nullptr;
  guard(ctx, [&] {
    auto handle = std::make_unique<tslstm_model>();
    handle->checkpoint = Checkpoint::load(require(checkpoint_path, "checkpoint_path"));
    model = handle.release();
    return TSLSTM_OK;
  });
  return model;
}

void tslstm_model_free(tslstm_model* model) { delete model; }

int tslstm_model_caption_split(tslstm_ctx* ctx, tslstm_model* model,
                               const char* manifest_path, const char* split, int beam_width,
                               int max_len, const char* out_path, char** captions_json) {
  return guard(ctx, [&] {
    if (!model) throw ConfigError("model is null");
    // Route through the command layer so the on-disk output matches the CLI.
    Dataset ds = load_dataset(require(manifest_path, "manifest_path"));
    if (ds.feature_dim != model->checkpoint.model_config.feature_dim) {
      throw IoError("checkpoint/dataset feature_dim mismatch");
    }
    const DecodeConfig decode = decode_config(beam_width, max_len);
    const std::string split_name = require(split, "split");
    const std::vector<std::string>* ids;
    if (split_name == "train") ids = &ds.train_ids;
    else if (split_name == "val") ids = &ds.val_ids;
    else if (split_name == "test") ids = &ds.test_ids;
    else throw ConfigError("unknown split \"" + split_name + "\"");

    nlohmann::json captions = nlohmann::json::object();
    nlohmann::json log_probs = nlohmann::json::object();
    for (const auto& id : *ids) {
      const VideoSample& v = ds.video(id);
      Vector y = encode_video(v.features, model->checkpoint.best,
                              model->checkpoint.model_config.n_e);
      DecodeResult r = beam_search(y, model->checkpoint.best, decode.beam_width,
                                   decode.max_len, decode.length_normalize);
      captions[id] = decode_tokens(r.tokens, model->checkpoint.vocab);
      log_probs[id] = r.log_prob;
    }
    nlohmann::json out;
    out["captions"] = captions;
    out["log_probs"] = log_probs;
    out["config"] = decode.to_json();
    if (out_path) {
      std::ofstream f(out_path);
      if (!f) throw IoError(std::string("cannot write ") + out_path);
      f << out.dump(2) << "\n";
    }
    set_output(captions_json, out);
    return TSLSTM_OK;
  });
}

int tslstm_model_caption_features(tslstm_ctx* ctx, tslstm_model* model,
                                  const char* features_path, int beam_width, int max_len,
                                  char** caption_json) {
  return guard(ctx, [&] {
    if (!model) throw ConfigError("model is null");
    FeatureMatrix features = load_features(require(features_path, "features_path"));
    if (features.rows() != model->checkpoint.model_config.feature_dim) {
      throw IoError("checkpoint/features feature_dim mismatch");
    }
    const DecodeConfig decode = decode_config(beam_width, max_len);
    Vector y = encode_video(features, model->checkpoint.best,
                            model->checkpoint.model_config.n_e);
    DecodeResult r = beam_search(y, model->checkpoint.best, decode.beam_width, decode.max_len,
                                 decode.length_normalize);
    nlohmann::json out;
    out["caption"] = decode_tokens(r.tokens, model->checkpoint.vocab);
    out["log_prob"] = r.log_prob;
    set_output(caption_json, out);
    return TSLSTM_OK;
  });
}

int tslstm_eval(tslstm_ctx* ctx, const char* captions_path, const char* manifest_path,
                const char* split, char** report_json) {
  return guard(ctx, [&] {
    nlohmann::json report =
        commands::cmd_eval(require(captions_path, "captions_path"),
                           require(manifest_path, "manifest_path"), require(split, "split"));
    set_output(report_json, report);
    return TSLSTM_OK;
  });
}

int tslstm_ablate_ne(tslstm_ctx* ctx, const char* config_json, const size_t* ne_values,
                     size_t n_values, const char* manifest_path, const char* out_dir,
                     char** table_json) {
  return guard(ctx, [&] {
    if (!ne_values || n_values == 0) throw ConfigError("ne_values is empty");
    std::vector<std::size_t> values(ne_values, ne_values + n_values);
    nlohmann::json table = commands::cmd_ablate_ne(
        parse_config(config_json), values, require(manifest_path, "manifest_path"),
        require(out_dir, "out_dir"));
    set_output(table_json, table);
    return TSLSTM_OK;
  });
}

}  // extern "C"
