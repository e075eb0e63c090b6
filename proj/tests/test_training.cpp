#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "config.hpp"
#include "training.hpp"

using namespace tslstm;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.feature_dim = 4;
  cfg.enc_hidden = 3;
  cfg.word_hidden = 3;
  cfg.mm_hidden = 3;
  cfg.embed_dim = 3;
  cfg.vocab_size = 8;
  cfg.n_e = 2;
  return cfg;
}

TrainConfig fast_train(unsigned long long seed) {
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 3;
  cfg.patience = 50;
  cfg.dropout_rate = 0.0;
  cfg.vocab_min_count = 0;
  cfg.seed = seed;
  cfg.enc_hidden = 4;
  cfg.word_hidden = 4;
  cfg.mm_hidden = 4;
  cfg.embed_dim = 4;
  cfg.n_e = 2;
  return cfg;
}

Dataset tiny_dataset(unsigned long long seed = 3) {
  SynthConfig s;
  s.n_videos = 8;
  s.feature_dim = 5;
  s.frames_min = 3;
  s.frames_max = 5;
  s.seed = seed;
  s.share_splits = true;
  return generate_synthetic(s);
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("tslstm_train_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("clip_gradients clamps element-wise") {
  ModelConfig mc = tiny_model();
  ModelGrads g = ModelParams::zeros(mc);
  g.output.b[0] = 25.0;
  g.output.b[1] = -25.0;
  g.output.b[2] = 3.0;
  g.encoder.w_xf(0, 0) = -11.5;
  clip_gradients(g, 10.0);
  CHECK(g.output.b[0] == 10.0);
  CHECK(g.output.b[1] == -10.0);
  CHECK(g.output.b[2] == 3.0);
  CHECK(g.encoder.w_xf(0, 0) == -10.0);
  // Idempotent.
  ModelGrads again = g;
  clip_gradients(again, 10.0);
  for (std::size_t t = 0; t < named_tensors(g).size(); ++t) {
    auto a = named_tensors(g)[t];
    auto b = named_tensors(again)[t];
    for (std::size_t i = 0; i < a.size; ++i) CHECK(a.data[i] == b.data[i]);
  }
  CHECK_THROWS_AS(clip_gradients(g, 0.0), ConfigError);
}

TEST_CASE("adadelta first step matches the closed form") {
  ModelConfig mc = tiny_model();
  ModelParams p = ModelParams::zeros(mc);
  ModelGrads g = ModelParams::zeros(mc);
  const double grad = 0.37;
  g.output.b[1] = grad;
  AdadeltaState st = AdadeltaState::init(mc, 0.95, 1e-6, 1.0);

  adadelta_step(p, g, st);
  const double eg = 0.05 * grad * grad;
  const double dx = -std::sqrt(1e-6) / std::sqrt(eg + 1e-6) * grad;
  CHECK(p.output.b[1] == doctest::Approx(dx).epsilon(1e-14));
  CHECK(st.sq_grad.output.b[1] == doctest::Approx(eg).epsilon(1e-14));
  CHECK(st.sq_delta.output.b[1] == doctest::Approx(0.05 * dx * dx).epsilon(1e-14));
  // Untouched entries stay at zero.
  CHECK(p.output.b[0] == 0.0);
  CHECK(p.embedding.w(0, 0) == 0.0);
}

TEST_CASE("adadelta moves against the gradient and scales with lr_scale") {
  ModelConfig mc = tiny_model();
  std::mt19937_64 rng(1);
  ModelParams p = ModelParams::init(mc, rng);
  ModelGrads g = ModelParams::zeros(mc);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (NamedTensor& t : named_tensors(g)) {
    for (std::size_t i = 0; i < t.size; ++i) t.data[i] = unif(rng);
  }
  ModelParams p1 = p;
  AdadeltaState s1 = AdadeltaState::init(mc, 0.95, 1e-6, 1.0);
  adadelta_step(p1, g, s1);
  ModelParams p2 = p;
  AdadeltaState s2 = AdadeltaState::init(mc, 0.95, 1e-6, 0.5);
  adadelta_step(p2, g, s2);

  auto before = named_tensors(p);
  auto after1 = named_tensors(p1);
  auto after2 = named_tensors(p2);
  auto grads = named_tensors(g);
  for (std::size_t t = 0; t < before.size(); ++t) {
    for (std::size_t i = 0; i < before[t].size; ++i) {
      const double d1 = after1[t].data[i] - before[t].data[i];
      const double d2 = after2[t].data[i] - before[t].data[i];
      CHECK(d1 * grads[t].data[i] <= 0.0);
      CHECK(d2 == doctest::Approx(0.5 * d1).epsilon(1e-12));
    }
  }
}

TEST_CASE("train config JSON round-trip and validation") {
  TrainConfig cfg = fast_train(9);
  cfg.target_train_perplexity = 1.5;
  TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.target_train_perplexity.has_value());
  CHECK(*back.target_train_perplexity == 1.5);

  TrainConfig bad = cfg;
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.rho = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("training is deterministic under a fixed seed") {
  Dataset ds = tiny_dataset();
  TrainConfig cfg = fast_train(11);
  TrainResult a = train(ds, cfg);
  TrainResult b = train(ds, cfg);
  CHECK(a.checkpoint.to_json() == b.checkpoint.to_json());
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
    CHECK(a.log[i].val_loss == b.log[i].val_loss);
  }

  TrainConfig other = cfg;
  other.seed = 12;
  TrainResult c = train(ds, other);
  CHECK(c.log.back().train_loss != a.log.back().train_loss);
}

TEST_CASE("dropout changes the training trajectory but not evaluation") {
  Dataset ds = tiny_dataset();
  TrainConfig cfg = fast_train(13);
  TrainConfig dropped = cfg;
  dropped.dropout_rate = 0.5;
  TrainResult a = train(ds, cfg);
  TrainResult b = train(ds, dropped);
  CHECK(a.log.back().train_loss != b.log.back().train_loss);
}

TEST_CASE("resumed training reproduces an uninterrupted run exactly") {
  Dataset ds = tiny_dataset();
  TrainConfig full_cfg = fast_train(17);
  full_cfg.max_epochs = 4;
  TrainResult full = train(ds, full_cfg);

  TrainConfig half_cfg = full_cfg;
  half_cfg.max_epochs = 2;
  TrainResult half = train(ds, half_cfg);
  CHECK(half.checkpoint.epoch == 2);

  TempDir tmp;
  const std::string path = (tmp.path / "ck.json").string();
  half.checkpoint.save(path);
  Checkpoint loaded = Checkpoint::load(path);

  TrainResult resumed = train(ds, full_cfg, &loaded);
  CHECK(resumed.checkpoint.epoch == 4);
  CHECK(resumed.checkpoint.to_json() == full.checkpoint.to_json());
}

TEST_CASE("checkpoint JSON survives a save/load round-trip bit-exactly") {
  Dataset ds = tiny_dataset();
  TrainConfig cfg = fast_train(19);
  cfg.max_epochs = 1;
  TrainResult r = train(ds, cfg);
  TempDir tmp;
  const std::string path = (tmp.path / "ck.json").string();
  r.checkpoint.save(path);
  Checkpoint back = Checkpoint::load(path);
  CHECK(back.to_json() == r.checkpoint.to_json());
  CHECK(back.vocab.tokens == r.checkpoint.vocab.tokens);
  CHECK(back.rng_state == r.checkpoint.rng_state);

  CHECK_THROWS_AS(Checkpoint::load((tmp.path / "missing.json").string()), IoError);
}

TEST_CASE("early stopping fires after patience epochs without improvement") {
  Dataset ds = tiny_dataset();
  TrainConfig cfg = fast_train(23);
  cfg.max_epochs = 200;
  cfg.patience = 0;  // stop at the first non-improving epoch
  TrainResult r = train(ds, cfg);
  CHECK(r.log.size() < 200);
  CHECK(r.stopped_early);
  CHECK(r.checkpoint.epochs_without_improvement > 0);
}

TEST_CASE("target train perplexity stops an overfit run") {
  Dataset ds = tiny_dataset();
  TrainConfig cfg = fast_train(29);
  cfg.max_epochs = 300;
  cfg.patience = 300;
  cfg.target_train_perplexity = 1000.0;  // trivially reached
  TrainResult r = train(ds, cfg);
  CHECK(r.log.size() == 1);
  CHECK_FALSE(r.stopped_early);
}

TEST_CASE("train rejects impossible segment counts") {
  Dataset ds = tiny_dataset();
  TrainConfig cfg = fast_train(31);
  cfg.n_e = 100;  // more segments than any video has frames
  CHECK_THROWS_AS(train(ds, cfg), ConfigError);
}

TEST_CASE("train builds the vocabulary from the training split only") {
  SynthConfig s;
  s.n_videos = 10;
  s.feature_dim = 4;
  s.frames_min = 3;
  s.frames_max = 4;
  s.seed = 5;
  Dataset ds = generate_synthetic(s);
  // Give a test-only video a unique word; it must not enter the vocab.
  const std::string test_id = ds.test_ids.front();
  ds.videos[ds.by_id.at(test_id)].captions = {"zyzzyva is gleeping"};
  TrainConfig cfg = fast_train(37);
  cfg.max_epochs = 1;
  TrainResult r = train(ds, cfg);
  CHECK(r.checkpoint.vocab.lookup("zyzzyva") == kUnk);
  CHECK(r.checkpoint.vocab.lookup("is") != kUnk);
}

TEST_CASE("gradient check passes on a miniature model") {
  GradcheckConfig gc;
  GradCheckReport report = gradient_check(gc.model_config(), 42, gc.n_v, gc.caption_len);
  CHECK(report.passed);
  CHECK(report.entries.size() > 20);  // every parameter tensor reported
  for (const auto& e : report.entries) CHECK(e.max_rel_err < report.tolerance);
  CHECK(report.features_max_rel_err < report.tolerance);
}

TEST_CASE("gradient check catches a deliberately broken backward pass") {
  GradcheckConfig gc;
  GradCheckReport report = gradient_check(gc.model_config(), 42, gc.n_v, gc.caption_len,
                                          BackwardMutation::drop_prev_cell);
  CHECK_FALSE(report.passed);
}

TEST_CASE("run config parses JSON with strict keys") {
  nlohmann::json j;
  j["seed"] = 7;
  j["model"] = {{"n_e", 2}};
  j["train"] = {{"batch_size", 8}};
  j["decode"] = {{"beam_width", 3}};
  RunConfig cfg = RunConfig::from_json(j);
  CHECK(cfg.seed == 7);
  CHECK(cfg.train.batch_size == 8);
  CHECK(cfg.train.n_e == 2);
  CHECK(cfg.train.seed == 7);  // top-level seed propagates
  CHECK(cfg.synth.seed == 7);
  CHECK(cfg.decode.beam_width == 3);
  CHECK(cfg.decode.max_len == 30);  // untouched default

  nlohmann::json bad = j;
  bad["train"]["no_such_option"] = 1;
  CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
  nlohmann::json bad2 = j;
  bad2["mystery_section"] = nlohmann::json::object();
  CHECK_THROWS_AS(RunConfig::from_json(bad2), ConfigError);
}
