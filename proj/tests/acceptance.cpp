// End-to-end acceptance suite. Each check prints one PASS/FAIL line; the
// process exits nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "training.hpp"
#include "tslstm/tslstm.h"

using namespace tslstm;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, const std::string& desc, bool ok, double seconds) {
  std::printf("%s criterion %d: %s (%.1fs)\n", ok ? "PASS" : "FAIL", n, desc.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

void run(int n, const std::string& desc, const std::function<bool()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = fn();
  } catch (const std::exception& e) {
    std::printf("  exception: %s\n", e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(n, desc, ok, secs);
}

fs::path make_temp_dir() {
  fs::path p = fs::temp_directory_path() /
               ("tslstm_accept_" + std::to_string(std::random_device{}()));
  fs::create_directories(p);
  return p;
}

std::uniform_real_distribution<double> unif(-0.5, 0.5);

LstmParams random_lstm(std::size_t hidden, std::size_t input, std::mt19937_64& rng) {
  LstmParams p = LstmParams::zeros(hidden, input);
  auto fill = [&](Matrix& m) {
    for (double& x : m.raw()) x = unif(rng);
  };
  fill(p.w_xf);
  fill(p.w_xi);
  fill(p.w_xo);
  fill(p.w_xg);
  fill(p.w_hf);
  fill(p.w_hi);
  fill(p.w_ho);
  fill(p.w_hg);
  for (double& x : p.b_f) x = unif(rng);
  for (double& x : p.b_i) x = unif(rng);
  for (double& x : p.b_o) x = unif(rng);
  for (double& x : p.b_g) x = unif(rng);
  return p;
}

// ---- 1: gradient oracle + mutation test ------------------------------------

bool check_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckConfig gc;  // feature dim 6, hiddens 3, 4 words + 4 reserved, 6 frames
  for (std::size_t n_e : {1, 2, 3}) {
    ModelConfig mc = gc.model_config();
    mc.n_e = n_e;
    GradCheckReport rep = gradient_check(mc, 42, gc.n_v, gc.caption_len);
    if (!rep.passed) {
      std::printf("  gradient check failed at n_e=%zu\n", n_e);
      return false;
    }
    for (const auto& e : rep.entries) {
      if (e.max_rel_err >= 1e-4) return false;
    }
  }
  GradCheckReport broken = gradient_check(gc.model_config(), 42, gc.n_v, gc.caption_len,
                                          BackwardMutation::drop_prev_cell);
  if (broken.passed) {
    std::printf("  mutated backward pass went undetected\n");
    return false;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return secs < 60.0;
}

// ---- 2: overfit a 10-video dataset and reproduce its captions --------------

bool check_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthConfig sc;
  sc.n_videos = 10;
  sc.events_min = 2;
  sc.events_max = 2;
  sc.noise_std = 0.02;
  sc.seed = 100;
  sc.share_splits = true;
  Dataset ds = generate_synthetic(sc);

  TrainConfig tc;
  tc.batch_size = 10;
  tc.max_epochs = 2000;
  tc.patience = 2000;
  tc.dropout_rate = 0.0;
  tc.lr_scale = 1.0;
  tc.vocab_min_count = 0;
  tc.target_train_perplexity = 1.05;
  tc.seed = 100;
  tc.enc_hidden = 64;
  tc.word_hidden = 64;
  tc.mm_hidden = 64;
  tc.embed_dim = 64;
  tc.n_e = 2;

  TrainResult r = train(ds, tc);
  const double final_ppl = r.log.back().train_perplexity;
  if (final_ppl >= 1.05) {
    std::printf("  perplexity %.4f after %zu epochs\n", final_ppl, r.log.size());
    return false;
  }

  std::map<std::string, std::string> outputs;
  for (const auto& v : ds.videos) {
    Vector y = encode_video(v.features, r.checkpoint.current, tc.n_e);
    DecodeResult d = greedy_decode(y, r.checkpoint.current, 30);
    outputs[v.id] = decode_tokens(d.tokens, r.checkpoint.vocab);
    if (outputs[v.id] != v.captions[0]) {
      std::printf("  %s: got \"%s\", want \"%s\"\n", v.id.c_str(), outputs[v.id].c_str(),
                  v.captions[0].c_str());
      return false;
    }
  }
  metrics::MetricReport rep = metrics::evaluate(outputs, ds, ds.train_ids);
  if (!(rep.bleu[3] > 0.99 && rep.cider > 9.5)) {
    std::printf("  B@4 %.4f CIDEr %.4f\n", rep.bleu[3], rep.cider);
    return false;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return secs < 600.0;
}

// ---- 3: pooling identities -------------------------------------------------

bool check_pooling_identities() {
  std::mt19937_64 rng(3);
  for (std::size_t n_v = 1; n_v <= 100; ++n_v) {
    Matrix v(3, n_v);
    for (double& x : v.raw()) x = unif(rng);
    if (!(temporal_pool(v, n_v) == v)) return false;
    Matrix pooled = temporal_pool(v, 1);
    Vector mean = mean_columns(v);
    for (std::size_t r = 0; r < 3; ++r) {
      if (pooled(r, 0) != mean[r]) return false;
    }
  }
  return true;
}

// ---- 4: segment invariance and sensitivity ---------------------------------

bool check_segment_invariance() {
  std::mt19937_64 rng(4);
  const std::size_t d = 4, n_v = 12, n_e = 3, hidden = 3;
  std::uniform_int_distribution<int> dyadic(-512, 512);
  std::uniform_int_distribution<std::size_t> pick_seg(0, n_e - 1);

  for (int rep = 0; rep < 100; ++rep) {
    LstmParams enc = random_lstm(hidden, d, rng);
    // Dyadic rationals make segment sums exact under any addition order.
    Matrix v(d, n_v);
    for (double& x : v.raw()) x = dyadic(rng) / 256.0;

    EncodeResult base = encode(v, n_e, enc);

    // Permute the frames inside one segment: output must be identical.
    const std::size_t seg = pick_seg(rng);
    auto [lo, hi] = segment_bounds(seg, n_v, n_e);
    std::vector<std::size_t> order(hi - lo);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = lo + i;
    std::shuffle(order.begin(), order.end(), rng);
    Matrix permuted = v;
    for (std::size_t i = 0; i < order.size(); ++i) {
      permuted.set_column(lo + i, v.column(order[i]));
    }
    EncodeResult shuffled = encode(permuted, n_e, enc);
    for (std::size_t t = 0; t < n_e; ++t) {
      if (shuffled.h[t] != base.h[t]) return false;
    }

    // Swap the contents of two segments with distinct means: output must move.
    Matrix swapped = v;
    auto [lo0, hi0] = segment_bounds(0, n_v, n_e);
    auto [lo2, hi2] = segment_bounds(2, n_v, n_e);
    for (std::size_t i = 0; i < hi0 - lo0; ++i) {
      swapped.set_column(lo0 + i, v.column(lo2 + i));
      swapped.set_column(lo2 + i, v.column(lo0 + i));
    }
    if (base.segment_means.column(0) == base.segment_means.column(2)) continue;
    EncodeResult moved = encode(swapped, n_e, enc);
    double max_diff = 0.0;
    for (std::size_t t = 0; t < n_e; ++t) {
      for (std::size_t k = 0; k < hidden; ++k) {
        max_diff = std::max(max_diff, std::abs(moved.h[t][k] - base.h[t][k]));
      }
    }
    if (!(max_diff > 1e-8)) return false;
  }
  return true;
}

// ---- 5: beam search correctness --------------------------------------------

bool check_beam() {
  std::mt19937_64 rng(5);
  ModelConfig cfg;
  cfg.feature_dim = 4;
  cfg.enc_hidden = 3;
  cfg.word_hidden = 3;
  cfg.mm_hidden = 3;
  cfg.embed_dim = 3;
  cfg.vocab_size = kNumReserved + 4;  // four real words
  cfg.n_e = 2;

  auto random_context = [&]() {
    Vector y(cfg.context_dim());
    for (double& x : y) x = unif(rng);
    return y;
  };

  for (int rep = 0; rep < 50; ++rep) {
    ModelParams p = ModelParams::init(cfg, rng);
    for (double& b : p.output.b) b = 3.0 * unif(rng);
    Vector y = random_context();

    double best = -1e100;
    std::vector<int> emittable{kEos, 4, 5, 6, 7};
    std::function<void(std::vector<int>&, double, const DecoderState&)> walk =
        [&](std::vector<int>& tokens, double score, const DecoderState& state) {
          const std::size_t depth = tokens.size() - 1;
          StepResult step = decode_step(tokens.back(), state, y, p, 0.0, Mode::eval, nullptr);
          for (int t : emittable) {
            const double s = score + std::log(step.prob[t]);
            if (t == kEos || depth + 1 == 3) {
              best = std::max(best, s);
            } else {
              tokens.push_back(t);
              walk(tokens, s, step.state);
              tokens.pop_back();
            }
          }
        };
    std::vector<int> start{kBos};
    walk(start, 0.0, DecoderState::zeros(cfg));

    DecodeResult r = beam_search(y, p, 64, 3);
    if (std::abs(r.log_prob - best) > 1e-10) {
      std::printf("  beam %.12f vs exhaustive %.12f\n", r.log_prob, best);
      return false;
    }
  }

  for (int rep = 0; rep < 100; ++rep) {
    ModelParams p = ModelParams::init(cfg, rng);
    for (double& b : p.output.b) b = 3.0 * unif(rng);
    Vector y = random_context();
    DecodeResult greedy = greedy_decode(y, p, 5);
    DecodeResult beam1 = beam_search(y, p, 1, 5);
    if (beam1.tokens != greedy.tokens) return false;
  }
  return true;
}

// ---- 6: metric oracles -----------------------------------------------------

using Gram = std::vector<std::string>;
using GramCounts = std::map<Gram, double>;

GramCounts grams(const metrics::TokenList& t, int n) {
  GramCounts out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    out[Gram(t.begin() + i, t.begin() + i + n)] += 1.0;
  }
  return out;
}

std::vector<double> bleu_oracle(const std::vector<metrics::TokenList>& cands,
                                const std::vector<metrics::RefSet>& refs, int max_n) {
  std::vector<double> clipped(max_n, 0.0), total(max_n, 0.0);
  double c_len = 0.0, r_len = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    c_len += cands[i].size();
    std::size_t best = refs[i][0].size();
    auto gap = [&](std::size_t len) {
      return std::llabs(static_cast<long long>(len) - static_cast<long long>(cands[i].size()));
    };
    for (const auto& r : refs[i]) {
      if (gap(r.size()) < gap(best) || (gap(r.size()) == gap(best) && r.size() < best)) {
        best = r.size();
      }
    }
    r_len += best;
    for (int n = 1; n <= max_n; ++n) {
      GramCounts rmax;
      for (const auto& r : refs[i]) {
        for (const auto& [g, c] : grams(r, n)) rmax[g] = std::max(rmax[g], c);
      }
      for (const auto& [g, c] : grams(cands[i], n)) {
        auto it = rmax.find(g);
        clipped[n - 1] += std::min(c, it == rmax.end() ? 0.0 : it->second);
        total[n - 1] += c;
      }
    }
  }
  const double bp = c_len < r_len ? std::exp(1.0 - r_len / c_len) : 1.0;
  std::vector<double> out(max_n, 0.0);
  for (int n = 1; n <= max_n; ++n) {
    double logs = 0.0;
    bool dead = false;
    for (int k = 1; k <= n; ++k) {
      if (clipped[k - 1] == 0.0 || total[k - 1] == 0.0) dead = true;
      if (!dead) logs += std::log(clipped[k - 1] / total[k - 1]) / n;
    }
    out[n - 1] = dead ? 0.0 : bp * std::exp(logs);
  }
  return out;
}

double cider_oracle(const std::vector<metrics::TokenList>& cands,
                    const std::vector<metrics::RefSet>& refs, int max_n) {
  const double n_docs = static_cast<double>(cands.size());
  double acc = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    GramCounts df;
    for (const auto& rset : refs) {
      std::set<Gram> seen;
      for (const auto& r : rset) {
        for (const auto& [g, c] : grams(r, n)) seen.insert(g);
      }
      for (const auto& g : seen) df[g] += 1.0;
    }
    auto weight = [&](const GramCounts& raw) {
      GramCounts out;
      for (const auto& [g, c] : raw) {
        auto it = df.find(g);
        out[g] = c * std::log(n_docs / std::max(it == df.end() ? 0.0 : it->second, 1.0));
      }
      return out;
    };
    auto cosine = [](const GramCounts& a, const GramCounts& b) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (const auto& [g, x] : a) {
        na += x * x;
        auto it = b.find(g);
        if (it != b.end()) dot += x * it->second;
      }
      for (const auto& [g, x] : b) nb += x * x;
      return (na == 0.0 || nb == 0.0) ? 0.0 : dot / std::sqrt(na * nb);
    };
    for (std::size_t i = 0; i < cands.size(); ++i) {
      GramCounts cg = grams(cands[i], n);
      GramCounts cw = weight(cg);
      double mean = 0.0;
      for (const auto& r : refs[i]) {
        GramCounts rg = grams(r, n);
        GramCounts rw = weight(rg);
        double s = cosine(cw, rw);
        if (s == 0.0 && !cg.empty() && !rg.empty()) {
          bool all_zero = true;
          for (const auto& [g, x] : cw) all_zero = all_zero && x == 0.0;
          for (const auto& [g, x] : rw) all_zero = all_zero && x == 0.0;
          if (all_zero) s = cosine(cg, rg);
        }
        mean += s;
      }
      acc += mean / static_cast<double>(refs[i].size()) / n_docs;
    }
  }
  return 10.0 * acc / max_n;
}

bool check_metric_oracles() {
  {
    metrics::TokenList cand{"the", "the", "the", "the"};
    metrics::TokenList ref{"the", "cat"};
    auto b = metrics::bleu({cand}, {{ref}}, 1);
    if (b[0] != 0.25) return false;
  }
  std::mt19937_64 rng(6);
  const std::vector<std::string> words{"a", "b", "c", "d", "e"};
  std::uniform_int_distribution<std::size_t> n_items(1, 6), n_refs(1, 3), len(1, 8),
      pick(0, words.size() - 1);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<metrics::TokenList> cands;
    std::vector<metrics::RefSet> refs;
    const std::size_t items = n_items(rng);
    for (std::size_t i = 0; i < items; ++i) {
      metrics::TokenList c(len(rng));
      for (auto& w : c) w = words[pick(rng)];
      cands.push_back(c);
      metrics::RefSet rs;
      const std::size_t nr = n_refs(rng);
      for (std::size_t r = 0; r < nr; ++r) {
        metrics::TokenList t(len(rng));
        for (auto& w : t) w = words[pick(rng)];
        rs.push_back(t);
      }
      refs.push_back(rs);
    }
    auto got = metrics::bleu(cands, refs, 4);
    auto want = bleu_oracle(cands, refs, 4);
    for (int n = 0; n < 4; ++n) {
      if (std::abs(got[n] - want[n]) > 1e-12) return false;
    }
    if (std::abs(metrics::cider(cands, refs, 4) - cider_oracle(cands, refs, 4)) > 1e-12) {
      return false;
    }
  }
  return true;
}

// ---- 7: uniform-model loss -------------------------------------------------

bool check_uniform_loss() {
  for (std::size_t vocab : {5, 8, 17}) {
    ModelConfig cfg;
    cfg.feature_dim = 3;
    cfg.enc_hidden = 2;
    cfg.word_hidden = 2;
    cfg.mm_hidden = 2;
    cfg.embed_dim = 2;
    cfg.vocab_size = vocab;
    cfg.n_e = 1;
    ModelParams p = ModelParams::zeros(cfg);
    Vector y(cfg.context_dim(), 0.0);
    std::vector<int> caption{kBos, 4, kEos};
    DecoderLoss r = teacher_forced_loss(caption, y, p, 0.0, Mode::eval, nullptr);
    if (std::abs(r.loss - std::log(static_cast<double>(vocab))) > 1e-12) return false;
  }
  return true;
}

// ---- 8: segment-count ablation through the C interface ---------------------

bool check_ablation() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path tmp = make_temp_dir();
  tslstm_ctx* ctx = tslstm_ctx_new();
  bool ok = false;
  const char* config = R"({
    "seed": 8,
    "model": {"enc_hidden": 16, "word_hidden": 16, "mm_hidden": 16, "embed_dim": 16},
    "train": {"batch_size": 16, "max_epochs": 2, "patience": 10, "dropout_rate": 0.5,
              "vocab_min_count": 0},
    "synth": {"n_videos": 200, "frames_min": 15, "frames_max": 15},
    "decode": {"beam_width": 2, "max_len": 12}
  })";
  do {
    char* out = nullptr;
    if (tslstm_synth(ctx, config, (tmp / "data").string().c_str(), &out) != TSLSTM_OK) {
      std::printf("  synth: %s\n", tslstm_last_error(ctx));
      break;
    }
    tslstm_string_free(out);
    const std::string manifest = (tmp / "data" / "manifest.json").string();
    const size_t ne_values[] = {1, 3, 30};
    char* table_str = nullptr;
    if (tslstm_ablate_ne(ctx, config, ne_values, 3, manifest.c_str(),
                         (tmp / "ablate").string().c_str(), &table_str) != TSLSTM_OK) {
      std::printf("  ablate: %s\n", tslstm_last_error(ctx));
      break;
    }
    nlohmann::json table = nlohmann::json::parse(table_str);
    tslstm_string_free(table_str);
    const auto& rows = table.at("rows");
    if (rows.size() != 3) break;
    bool rows_ok = true;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& m = rows[i].at("metrics");
      rows_ok = rows_ok && rows[i].at("n_e") == ne_values[i] && m.contains("bleu1") &&
                m.contains("bleu2") && m.contains("bleu3") && m.contains("bleu4") &&
                m.contains("cider");
    }
    if (!rows_ok) break;
    if (!table.contains("text") || table.at("text").get<std::string>().empty()) break;
    std::printf("  result (recorded, not asserted):\n%s",
                table.at("text").get<std::string>().c_str());
    ok = true;
  } while (false);
  tslstm_ctx_free(ctx);
  fs::remove_all(tmp);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return ok && secs < 1800.0;
}

// ---- 9: bit-identical training runs ----------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

bool check_determinism() {
  const fs::path tmp = make_temp_dir();
  tslstm_ctx* ctx = tslstm_ctx_new();
  bool ok = false;
  const char* config = R"({
    "seed": 9,
    "model": {"enc_hidden": 8, "word_hidden": 8, "mm_hidden": 8, "embed_dim": 8, "n_e": 2},
    "train": {"batch_size": 4, "max_epochs": 3, "dropout_rate": 0.5, "vocab_min_count": 0},
    "synth": {"n_videos": 12, "feature_dim": 6, "frames_min": 3, "frames_max": 5,
              "share_splits": true}
  })";
  do {
    char* out = nullptr;
    if (tslstm_synth(ctx, config, (tmp / "data").string().c_str(), &out) != TSLSTM_OK) break;
    tslstm_string_free(out);
    const std::string manifest = (tmp / "data" / "manifest.json").string();
    if (tslstm_train(ctx, config, manifest.c_str(), (tmp / "a").string().c_str(), nullptr,
                     nullptr) != TSLSTM_OK) {
      std::printf("  train: %s\n", tslstm_last_error(ctx));
      break;
    }
    if (tslstm_train(ctx, config, manifest.c_str(), (tmp / "b").string().c_str(), nullptr,
                     nullptr) != TSLSTM_OK) {
      break;
    }
    const std::string a = slurp(tmp / "a" / "checkpoint.json");
    const std::string b = slurp(tmp / "b" / "checkpoint.json");
    ok = !a.empty() && a == b;
  } while (false);
  tslstm_ctx_free(ctx);
  fs::remove_all(tmp);
  return ok;
}

}  // namespace

int main() {
  run(1, "analytic gradients match finite differences; mutation detected", check_gradients);
  run(2, "10-video overfit reproduces every training caption", check_overfit);
  run(3, "temporal pooling identity and full-mean cases are exact", check_pooling_identities);
  run(4, "encoder invariant within segments, sensitive across them", check_segment_invariance);
  run(5, "beam search is exhaustive when wide, greedy at width one", check_beam);
  run(6, "BLEU and CIDEr match independent oracles", check_metric_oracles);
  run(7, "zero-parameter model scores ln(vocab) per token", check_uniform_loss);
  run(8, "segment-count ablation harness completes with a full table", check_ablation);
  run(9, "identical seeds give bit-identical checkpoints", check_determinism);

  if (failures == 0) {
    std::printf("all acceptance checks passed\n");
    return 0;
  }
  std::printf("%d acceptance check(s) failed\n", failures);
  return 1;
}
