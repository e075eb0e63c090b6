#include "model.hpp"

namespace tslstm {

void ModelConfig::validate() const {
  if (feature_dim == 0 || enc_hidden == 0 || word_hidden == 0 || mm_hidden == 0 ||
      embed_dim == 0 || n_e == 0) {
    throw ConfigError("ModelConfig: all dimensions must be >= 1");
  }
  if (vocab_size <= 4) {
    throw ConfigError("ModelConfig: vocab_size must exceed the 4 reserved tokens");
  }
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  ModelParams p;
  p.encoder = LstmParams::zeros(cfg.enc_hidden, cfg.feature_dim);
  p.embedding.w = Matrix(cfg.embed_dim, cfg.vocab_size);
  p.word_lstm = LstmParams::zeros(cfg.word_hidden, cfg.embed_dim);
  p.mm_lstm = MlstmParams::zeros(cfg.mm_hidden, cfg.word_hidden, cfg.context_dim());
  p.output.w = Matrix(cfg.vocab_size, cfg.mm_hidden);
  p.output.b = Vector(cfg.vocab_size, 0.0);
  return p;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::mt19937_64& rng) {
  ModelParams p = zeros(cfg);
  std::uniform_real_distribution<double> unif(-0.08, 0.08);
  for (NamedTensor& t : named_tensors(p)) {
    // Biases start at zero except the forget gates, which get +1.
    if (t.name.ends_with(".b_f")) {
      for (std::size_t i = 0; i < t.size; ++i) t.data[i] = 1.0;
    } else if (t.name.find(".b_") != std::string::npos || t.name == "output.b") {
      continue;
    } else {
      for (std::size_t i = 0; i < t.size; ++i) t.data[i] = unif(rng);
    }
  }
  return p;
}

namespace {

void push_lstm(std::vector<NamedTensor>& out, const std::string& prefix, LstmParams& p) {
  auto add_m = [&](const char* n, Matrix& m) {
    out.push_back({prefix + n, m.data(), m.size()});
  };
  auto add_v = [&](const char* n, Vector& v) {
    out.push_back({prefix + n, v.data(), v.size()});
  };
  add_m(".w_xf", p.w_xf);
  add_m(".w_xi", p.w_xi);
  add_m(".w_xo", p.w_xo);
  add_m(".w_xg", p.w_xg);
  add_m(".w_hf", p.w_hf);
  add_m(".w_hi", p.w_hi);
  add_m(".w_ho", p.w_ho);
  add_m(".w_hg", p.w_hg);
  add_v(".b_f", p.b_f);
  add_v(".b_i", p.b_i);
  add_v(".b_o", p.b_o);
  add_v(".b_g", p.b_g);
}

}  // namespace

std::vector<NamedTensor> named_tensors(ModelParams& p) {
  std::vector<NamedTensor> out;
  push_lstm(out, "encoder", p.encoder);
  out.push_back({"embedding.w", p.embedding.w.data(), p.embedding.w.size()});
  push_lstm(out, "word_lstm", p.word_lstm);
  push_lstm(out, "mm_lstm", p.mm_lstm.base);
  out.push_back({"mm_lstm.w_yf", p.mm_lstm.w_yf.data(), p.mm_lstm.w_yf.size()});
  out.push_back({"mm_lstm.w_yi", p.mm_lstm.w_yi.data(), p.mm_lstm.w_yi.size()});
  out.push_back({"mm_lstm.w_yo", p.mm_lstm.w_yo.data(), p.mm_lstm.w_yo.size()});
  out.push_back({"mm_lstm.w_yg", p.mm_lstm.w_yg.data(), p.mm_lstm.w_yg.size()});
  out.push_back({"output.w", p.output.w.data(), p.output.w.size()});
  out.push_back({"output.b", p.output.b.data(), p.output.b.size()});
  return out;
}

std::vector<NamedTensor> named_tensors(const ModelParams& p) {
  return named_tensors(const_cast<ModelParams&>(p));
}

}  // namespace tslstm
