#include "training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace tslstm {

void clip_gradients(ModelGrads& grads, double threshold) {
  if (threshold <= 0.0) throw ConfigError("clip_gradients: threshold must be > 0");
  for (NamedTensor& t : named_tensors(grads)) {
    for (std::size_t i = 0; i < t.size; ++i) {
      t.data[i] = std::clamp(t.data[i], -threshold, threshold);
    }
  }
}

AdadeltaState AdadeltaState::init(const ModelConfig& cfg, double rho, double epsilon,
                                  double lr_scale) {
  AdadeltaState s;
  s.sq_grad = ModelParams::zeros(cfg);
  s.sq_delta = ModelParams::zeros(cfg);
  s.rho = rho;
  s.epsilon = epsilon;
  s.lr_scale = lr_scale;
  return s;
}

void adadelta_step(ModelParams& params, const ModelGrads& grads, AdadeltaState& state) {
  auto p_view = named_tensors(params);
  auto g_view = named_tensors(grads);
  auto eg_view = named_tensors(state.sq_grad);
  auto ed_view = named_tensors(state.sq_delta);
  for (std::size_t t = 0; t < p_view.size(); ++t) {
    if (g_view[t].size != p_view[t].size) {
      throw ShapeError("adadelta_step: gradient shape mismatch for " + p_view[t].name);
    }
    double* p = p_view[t].data;
    const double* g = g_view[t].data;
    double* eg = eg_view[t].data;
    double* ed = ed_view[t].data;
    for (std::size_t i = 0; i < p_view[t].size; ++i) {
      eg[i] = state.rho * eg[i] + (1.0 - state.rho) * g[i] * g[i];
      const double dx =
          -state.lr_scale * std::sqrt(ed[i] + state.epsilon) / std::sqrt(eg[i] + state.epsilon) * g[i];
      ed[i] = state.rho * ed[i] + (1.0 - state.rho) * dx * dx;
      p[i] += dx;
    }
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0 || max_epochs == 0 || max_caption_len == 0) {
    throw ConfigError("TrainConfig: batch_size, max_epochs and max_caption_len must be >= 1");
  }
  if (clip_threshold <= 0.0) throw ConfigError("TrainConfig: clip_threshold must be > 0");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("TrainConfig: dropout_rate must be in [0, 1)");
  }
  if (lr_scale <= 0.0 || rho <= 0.0 || rho >= 1.0 || epsilon <= 0.0) {
    throw ConfigError("TrainConfig: invalid adadelta settings");
  }
  if (enc_hidden == 0 || word_hidden == 0 || mm_hidden == 0 || embed_dim == 0 || n_e == 0) {
    throw ConfigError("TrainConfig: model dimensions must be >= 1");
  }
  if (vocab_min_count < 0) throw ConfigError("TrainConfig: vocab_min_count must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["batch_size"] = batch_size;
  j["max_epochs"] = max_epochs;
  j["patience"] = patience;
  j["clip_threshold"] = clip_threshold;
  j["dropout_rate"] = dropout_rate;
  j["encoder_dropout"] = encoder_dropout;
  j["lr_scale"] = lr_scale;
  j["rho"] = rho;
  j["epsilon"] = epsilon;
  j["max_caption_len"] = max_caption_len;
  j["vocab_min_count"] = vocab_min_count;
  j["target_train_perplexity"] =
      target_train_perplexity ? nlohmann::json(*target_train_perplexity) : nlohmann::json();
  j["seed"] = seed;
  j["enc_hidden"] = enc_hidden;
  j["word_hidden"] = word_hidden;
  j["mm_hidden"] = mm_hidden;
  j["embed_dim"] = embed_dim;
  j["n_e"] = n_e;
  j["clip_after_batch_average"] = true;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.clip_threshold = j.at("clip_threshold").get<double>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.encoder_dropout = j.at("encoder_dropout").get<bool>();
  c.lr_scale = j.at("lr_scale").get<double>();
  c.rho = j.at("rho").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.max_caption_len = j.at("max_caption_len").get<std::size_t>();
  c.vocab_min_count = j.at("vocab_min_count").get<int>();
  if (!j.at("target_train_perplexity").is_null()) {
    c.target_train_perplexity = j.at("target_train_perplexity").get<double>();
  }
  c.seed = j.at("seed").get<unsigned long long>();
  c.enc_hidden = j.at("enc_hidden").get<std::size_t>();
  c.word_hidden = j.at("word_hidden").get<std::size_t>();
  c.mm_hidden = j.at("mm_hidden").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.n_e = j.at("n_e").get<std::size_t>();
  return c;
}

namespace {

constexpr const char* kCodeVersion = "tslstm 0.1.0";
constexpr int kCheckpointVersion = 1;

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"feature_dim", c.feature_dim}, {"enc_hidden", c.enc_hidden},
          {"word_hidden", c.word_hidden}, {"mm_hidden", c.mm_hidden},
          {"embed_dim", c.embed_dim},     {"vocab_size", c.vocab_size},
          {"n_e", c.n_e}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.enc_hidden = j.at("enc_hidden").get<std::size_t>();
  c.word_hidden = j.at("word_hidden").get<std::size_t>();
  c.mm_hidden = j.at("mm_hidden").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.n_e = j.at("n_e").get<std::size_t>();
  return c;
}

nlohmann::json params_to_json(const ModelParams& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const NamedTensor& t : named_tensors(p)) {
    j[t.name] = std::vector<double>(t.data, t.data + t.size);
  }
  return j;
}

ModelParams params_from_json(const nlohmann::json& j, const ModelConfig& cfg) {
  ModelParams p = ModelParams::zeros(cfg);
  for (NamedTensor& t : named_tensors(p)) {
    const auto values = j.at(t.name).get<std::vector<double>>();
    if (values.size() != t.size) {
      throw IoError("checkpoint tensor " + t.name + " has " + std::to_string(values.size()) +
                    " entries, expected " + std::to_string(t.size));
    }
    std::copy(values.begin(), values.end(), t.data);
  }
  return p;
}

}  // namespace

nlohmann::json Checkpoint::to_json() const {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["code_version"] = kCodeVersion;
  j["model_config"] = model_config_to_json(model_config);
  j["train_config"] = train_config.to_json();
  j["vocab"] = {{"min_count", vocab.min_count}, {"tokens", vocab.tokens}};
  j["current"] = params_to_json(current);
  j["best"] = params_to_json(best);
  j["optimizer"] = {{"rho", optimizer.rho},
                    {"epsilon", optimizer.epsilon},
                    {"lr_scale", optimizer.lr_scale},
                    {"sq_grad", params_to_json(optimizer.sq_grad)},
                    {"sq_delta", params_to_json(optimizer.sq_delta)}};
  j["epoch"] = epoch;
  j["best_val_loss"] = best_val_loss;
  j["epochs_without_improvement"] = epochs_without_improvement;
  j["rng_state"] = rng_state;
  return j;
}

Checkpoint Checkpoint::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != kCheckpointVersion) {
    throw IoError("unsupported checkpoint format version");
  }
  Checkpoint c;
  c.model_config = model_config_from_json(j.at("model_config"));
  c.train_config = TrainConfig::from_json(j.at("train_config"));
  c.vocab.min_count = j.at("vocab").at("min_count").get<int>();
  c.vocab.tokens = j.at("vocab").at("tokens").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < c.vocab.tokens.size(); ++i) {
    c.vocab.index[c.vocab.tokens[i]] = static_cast<int>(i);
  }
  c.current = params_from_json(j.at("current"), c.model_config);
  c.best = params_from_json(j.at("best"), c.model_config);
  const auto& opt = j.at("optimizer");
  c.optimizer.rho = opt.at("rho").get<double>();
  c.optimizer.epsilon = opt.at("epsilon").get<double>();
  c.optimizer.lr_scale = opt.at("lr_scale").get<double>();
  c.optimizer.sq_grad = params_from_json(opt.at("sq_grad"), c.model_config);
  c.optimizer.sq_delta = params_from_json(opt.at("sq_delta"), c.model_config);
  c.epoch = j.at("epoch").get<std::size_t>();
  c.best_val_loss = j.at("best_val_loss").get<double>();
  c.epochs_without_improvement = j.at("epochs_without_improvement").get<std::size_t>();
  c.rng_state = j.at("rng_state").get<std::string>();
  return c;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  f << to_json().dump() << "\n";
  if (!f) throw IoError("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    f >> j;
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path + ": " + e.what());
  }
}

namespace {

struct EncodedSample {
  std::size_t video_index;
  std::vector<int> caption;
};

std::vector<EncodedSample> collect_samples(const Dataset& ds,
                                           const std::vector<std::string>& ids,
                                           const Vocabulary& vocab,
                                           std::size_t max_caption_len) {
  std::vector<EncodedSample> out;
  for (const auto& id : ids) {
    const std::size_t idx = ds.by_id.at(id);
    for (const auto& caption : ds.videos[idx].captions) {
      const auto words = tokenize(caption);
      if (words.size() > max_caption_len) continue;
      out.push_back({idx, encode_caption(words, vocab)});
    }
  }
  return out;
}

void check_finite_grads(const ModelGrads& grads, std::size_t epoch) {
  for (const NamedTensor& t : named_tensors(grads)) {
    for (std::size_t i = 0; i < t.size; ++i) {
      if (!std::isfinite(t.data[i])) {
        throw std::runtime_error("non-finite gradient in tensor " + t.name + " at epoch " +
                                 std::to_string(epoch));
      }
    }
  }
}

// Per-token negative log-likelihood over a sample set in eval mode.
double eval_loss(const Dataset& ds, const std::vector<EncodedSample>& samples,
                 const ModelParams& params, const ForwardOptions& opt) {
  double total_nll = 0.0;
  std::size_t total_tokens = 0;
  for (const auto& s : samples) {
    SampleForward fwd =
        sample_loss(ds.videos[s.video_index].features, s.caption, params, opt, nullptr);
    const std::size_t n = s.caption.size() - 1;
    total_nll += fwd.loss * static_cast<double>(n);
    total_tokens += n;
  }
  return total_nll / static_cast<double>(total_tokens);
}

}  // namespace

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const Checkpoint* resume) {
  cfg.validate();
  if (ds.train_ids.empty() || ds.val_ids.empty()) {
    throw ConfigError("train: dataset needs non-empty train and val splits");
  }
  for (const auto& id : ds.train_ids) {
    if (ds.video(id).features.cols() < cfg.n_e) {
      throw ConfigError("train: n_e = " + std::to_string(cfg.n_e) + " exceeds frame count of " +
                        id);
    }
  }

  // Vocabulary comes from the training split only.
  Vocabulary vocab;
  if (resume) {
    vocab = resume->vocab;
  } else {
    std::vector<std::vector<std::string>> corpus;
    for (const auto& id : ds.train_ids) {
      for (const auto& caption : ds.video(id).captions) corpus.push_back(tokenize(caption));
    }
    vocab = Vocabulary::build(corpus, cfg.vocab_min_count);
  }

  const auto train_samples = collect_samples(ds, ds.train_ids, vocab, cfg.max_caption_len);
  const auto val_samples = collect_samples(ds, ds.val_ids, vocab, cfg.max_caption_len);
  if (train_samples.empty() || val_samples.empty()) {
    throw ConfigError("train: no usable samples after caption-length filtering");
  }

  ModelConfig mc;
  mc.feature_dim = ds.feature_dim;
  mc.enc_hidden = cfg.enc_hidden;
  mc.word_hidden = cfg.word_hidden;
  mc.mm_hidden = cfg.mm_hidden;
  mc.embed_dim = cfg.embed_dim;
  mc.vocab_size = vocab.size();
  mc.n_e = cfg.n_e;
  mc.validate();

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  std::mt19937_64 rng(cfg.seed);
  if (resume) {
    if (!(resume->model_config == mc)) {
      throw ConfigError("train: resume checkpoint has a different model configuration");
    }
    ck = *resume;
    ck.train_config = cfg;  // the checkpoint records the run that produced it
    std::istringstream is(resume->rng_state);
    is >> rng;
  } else {
    ck.model_config = mc;
    ck.train_config = cfg;
    ck.vocab = vocab;
    ck.current = ModelParams::init(mc, rng);
    ck.best = ck.current;
    ck.optimizer = AdadeltaState::init(mc, cfg.rho, cfg.epsilon, cfg.lr_scale);
    ck.epoch = 0;
    ck.best_val_loss = std::numeric_limits<double>::infinity();
    ck.epochs_without_improvement = 0;
  }

  ForwardOptions train_opt{cfg.n_e, cfg.dropout_rate, cfg.encoder_dropout, Mode::train};
  ForwardOptions eval_opt{cfg.n_e, 0.0, cfg.encoder_dropout, Mode::eval};

  std::vector<std::size_t> order(train_samples.size());

  for (std::size_t epoch = ck.epoch + 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Shuffle from the identity each epoch so the permutation depends only
    // on the current generator state and resumed runs stay on trajectory.
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    double total_nll = 0.0;
    std::size_t total_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      ModelGrads grads = ModelParams::zeros(mc);
      for (std::size_t k = start; k < end; ++k) {
        const EncodedSample& s = train_samples[order[k]];
        SampleForward fwd = sample_loss(ds.videos[s.video_index].features, s.caption,
                                        ck.current, train_opt, &rng);
        if (!std::isfinite(fwd.loss)) {
          throw std::runtime_error("non-finite loss on sample " + ds.videos[s.video_index].id +
                                   " at epoch " + std::to_string(epoch));
        }
        const std::size_t n = s.caption.size() - 1;
        total_nll += fwd.loss * static_cast<double>(n);
        total_tokens += n;
        sample_backward(fwd, ds.videos[s.video_index].features, s.caption, ck.current, grads);
      }
      // Average over the batch so clipping is batch-size independent.
      const double inv = 1.0 / static_cast<double>(end - start);
      for (NamedTensor& t : named_tensors(grads)) {
        for (std::size_t i = 0; i < t.size; ++i) t.data[i] *= inv;
      }
      check_finite_grads(grads, epoch);
      clip_gradients(grads, cfg.clip_threshold);
      adadelta_step(ck.current, grads, ck.optimizer);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total_nll / static_cast<double>(total_tokens);
    rec.train_perplexity = std::exp(rec.train_loss);
    rec.val_loss = eval_loss(ds, val_samples, ck.current, eval_opt);
    rec.val_perplexity = std::exp(rec.val_loss);
    rec.improved = rec.val_loss < ck.best_val_loss;
    if (rec.improved) {
      ck.best_val_loss = rec.val_loss;
      ck.best = ck.current;
      ck.epochs_without_improvement = 0;
    } else {
      ++ck.epochs_without_improvement;
    }
    ck.epoch = epoch;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);

    if (cfg.target_train_perplexity && rec.train_perplexity < *cfg.target_train_perplexity) {
      break;
    }
    if (ck.epochs_without_improvement > cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }

  std::ostringstream os;
  os << rng;
  ck.rng_state = os.str();
  return result;
}

nlohmann::json GradCheckReport::to_json() const {
  nlohmann::json j;
  j["tolerance"] = tolerance;
  j["passed"] = passed;
  j["features_max_rel_err"] = features_max_rel_err;
  j["tensors"] = nlohmann::json::array();
  for (const auto& e : entries) {
    j["tensors"].push_back({{"tensor", e.tensor}, {"max_rel_err", e.max_rel_err}});
  }
  return j;
}

GradCheckReport gradient_check(const ModelConfig& cfg, unsigned long long seed,
                               std::size_t n_v, std::size_t caption_len,
                               BackwardMutation mut) {
  cfg.validate();
  if (n_v < cfg.n_e) throw ConfigError("gradient_check: n_v must be >= n_e");
  std::mt19937_64 rng(seed);
  ModelParams params = ModelParams::init(cfg, rng);

  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureMatrix features(cfg.feature_dim, n_v);
  for (double& x : features.raw()) x = normal(rng);

  std::vector<int> caption;
  caption.push_back(kBos);
  std::uniform_int_distribution<int> word(kNumReserved, static_cast<int>(cfg.vocab_size) - 1);
  for (std::size_t i = 0; i < caption_len; ++i) caption.push_back(word(rng));
  caption.push_back(kEos);  // a zero-length caption still scores EOS

  const ForwardOptions opt{cfg.n_e, 0.0, true, Mode::eval};
  auto loss_at = [&]() {
    return sample_loss(features, caption, params, opt, nullptr).loss;
  };

  ModelGrads analytic = ModelParams::zeros(cfg);
  Matrix d_features;
  {
    SampleForward fwd = sample_loss(features, caption, params, opt, nullptr);
    sample_backward(fwd, features, caption, params, analytic, &d_features, mut);
  }

  constexpr double kEps = 1e-5;
  auto rel_err = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-5});
  };

  GradCheckReport report;
  auto p_view = named_tensors(params);
  auto a_view = named_tensors(analytic);
  for (std::size_t t = 0; t < p_view.size(); ++t) {
    double worst = 0.0;
    for (std::size_t i = 0; i < p_view[t].size; ++i) {
      const double saved = p_view[t].data[i];
      p_view[t].data[i] = saved + kEps;
      const double up = loss_at();
      p_view[t].data[i] = saved - kEps;
      const double down = loss_at();
      p_view[t].data[i] = saved;
      worst = std::max(worst, rel_err(a_view[t].data[i], (up - down) / (2.0 * kEps)));
    }
    report.entries.push_back({p_view[t].name, worst});
  }

  for (std::size_t i = 0; i < features.size(); ++i) {
    const double saved = features.raw()[i];
    features.raw()[i] = saved + kEps;
    const double up = loss_at();
    features.raw()[i] = saved - kEps;
    const double down = loss_at();
    features.raw()[i] = saved;
    report.features_max_rel_err =
        std::max(report.features_max_rel_err, rel_err(d_features.raw()[i], (up - down) / (2.0 * kEps)));
  }

  report.passed = report.features_max_rel_err < report.tolerance;
  for (const auto& e : report.entries) {
    if (e.max_rel_err >= report.tolerance) report.passed = false;
  }
  return report;
}

}  // namespace tslstm
