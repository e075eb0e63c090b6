#include "config.hpp"

#include <fstream>

namespace tslstm {

namespace {

// Reject unknown keys so typos never silently fall back to defaults.
void check_keys(const nlohmann::json& j, const char* section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      if (key == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError(std::string(section) + ": unknown key \"" + key + "\"");
  }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

}  // namespace

void DecodeConfig::validate() const {
  if (beam_width == 0 || max_len == 0) {
    throw ConfigError("decode: beam_width and max_len must be >= 1");
  }
}

nlohmann::json DecodeConfig::to_json() const {
  return {{"beam_width", beam_width},
          {"max_len", max_len},
          {"length_normalize", length_normalize}};
}

ModelConfig GradcheckConfig::model_config() const {
  ModelConfig c;
  c.feature_dim = feature_dim;
  c.enc_hidden = hidden;
  c.word_hidden = hidden;
  c.mm_hidden = hidden;
  c.embed_dim = embed_dim;
  c.vocab_size = vocab_words + kNumReserved;
  c.n_e = n_e;
  return c;
}

nlohmann::json GradcheckConfig::to_json() const {
  return {{"feature_dim", feature_dim}, {"hidden", hidden},   {"embed_dim", embed_dim},
          {"vocab_words", vocab_words}, {"n_v", n_v},         {"n_e", n_e},
          {"caption_len", caption_len}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "config", {"seed", "model", "train", "synth", "decode", "gradcheck"});
  RunConfig c;
  maybe(j, "seed", c.seed);

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model", {"enc_hidden", "word_hidden", "mm_hidden", "embed_dim", "n_e"});
    maybe(m, "enc_hidden", c.train.enc_hidden);
    maybe(m, "word_hidden", c.train.word_hidden);
    maybe(m, "mm_hidden", c.train.mm_hidden);
    maybe(m, "embed_dim", c.train.embed_dim);
    maybe(m, "n_e", c.train.n_e);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, "train",
               {"batch_size", "max_epochs", "patience", "clip_threshold", "dropout_rate",
                "encoder_dropout", "lr_scale", "rho", "epsilon", "max_caption_len",
                "vocab_min_count", "target_train_perplexity"});
    maybe(t, "batch_size", c.train.batch_size);
    maybe(t, "max_epochs", c.train.max_epochs);
    maybe(t, "patience", c.train.patience);
    maybe(t, "clip_threshold", c.train.clip_threshold);
    maybe(t, "dropout_rate", c.train.dropout_rate);
    maybe(t, "encoder_dropout", c.train.encoder_dropout);
    maybe(t, "lr_scale", c.train.lr_scale);
    maybe(t, "rho", c.train.rho);
    maybe(t, "epsilon", c.train.epsilon);
    maybe(t, "max_caption_len", c.train.max_caption_len);
    maybe(t, "vocab_min_count", c.train.vocab_min_count);
    if (t.contains("target_train_perplexity") && !t.at("target_train_perplexity").is_null()) {
      c.train.target_train_perplexity = t.at("target_train_perplexity").get<double>();
    }
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    check_keys(s, "synth",
               {"n_videos", "n_subjects", "n_verbs", "events_min", "events_max", "frames_min",
                "frames_max", "feature_dim", "noise_std", "share_splits"});
    maybe(s, "n_videos", c.synth.n_videos);
    maybe(s, "n_subjects", c.synth.n_subjects);
    maybe(s, "n_verbs", c.synth.n_verbs);
    maybe(s, "events_min", c.synth.events_min);
    maybe(s, "events_max", c.synth.events_max);
    maybe(s, "frames_min", c.synth.frames_min);
    maybe(s, "frames_max", c.synth.frames_max);
    maybe(s, "feature_dim", c.synth.feature_dim);
    maybe(s, "noise_std", c.synth.noise_std);
    maybe(s, "share_splits", c.synth.share_splits);
  }
  if (j.contains("decode")) {
    const auto& d = j.at("decode");
    check_keys(d, "decode", {"beam_width", "max_len", "length_normalize"});
    maybe(d, "beam_width", c.decode.beam_width);
    maybe(d, "max_len", c.decode.max_len);
    maybe(d, "length_normalize", c.decode.length_normalize);
  }
  if (j.contains("gradcheck")) {
    const auto& g = j.at("gradcheck");
    check_keys(g, "gradcheck",
               {"feature_dim", "hidden", "embed_dim", "vocab_words", "n_v", "n_e",
                "caption_len"});
    maybe(g, "feature_dim", c.gradcheck.feature_dim);
    maybe(g, "hidden", c.gradcheck.hidden);
    maybe(g, "embed_dim", c.gradcheck.embed_dim);
    maybe(g, "vocab_words", c.gradcheck.vocab_words);
    maybe(g, "n_v", c.gradcheck.n_v);
    maybe(g, "n_e", c.gradcheck.n_e);
    maybe(g, "caption_len", c.gradcheck.caption_len);
  }

  c.train.seed = c.seed;
  c.synth.seed = c.seed;
  c.train.validate();
  c.synth.validate();
  c.decode.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["model"] = {{"enc_hidden", train.enc_hidden},
                {"word_hidden", train.word_hidden},
                {"mm_hidden", train.mm_hidden},
                {"embed_dim", train.embed_dim},
                {"n_e", train.n_e}};
  j["train"] = train.to_json();
  j["synth"] = {{"n_videos", synth.n_videos},   {"n_subjects", synth.n_subjects},
                {"n_verbs", synth.n_verbs},     {"events_min", synth.events_min},
                {"events_max", synth.events_max}, {"frames_min", synth.frames_min},
                {"frames_max", synth.frames_max}, {"feature_dim", synth.feature_dim},
                {"noise_std", synth.noise_std}, {"share_splits", synth.share_splits}};
  j["decode"] = decode.to_json();
  j["gradcheck"] = gradcheck.to_json();
  return j;
}

}  // namespace tslstm
