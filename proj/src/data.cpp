#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include <json.hpp>

namespace tslstm {

namespace {

bool is_word_char(unsigned char c) {
  // Non-ASCII bytes are treated as word characters.
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

const std::array<std::string, 4> kReserved = {"<pad>", "<bos>", "<eos>", "<unk>"};

const char* kSubjects[] = {"man",   "woman", "dog",  "cat",  "bird",
                           "child", "robot", "horse", "clown", "chef"};
const char* kVerbs[] = {"running",  "jumping",  "eating",  "dancing", "singing",
                        "sleeping", "swimming", "cooking", "reading", "flying"};

std::string subject_name(std::size_t i) {
  return i < std::size(kSubjects) ? kSubjects[i] : "subject" + std::to_string(i);
}
std::string verb_name(std::size_t i) {
  return i < std::size(kVerbs) ? kVerbs[i] : "verb" + std::to_string(i);
}

}  // namespace

std::vector<std::string> tokenize(const std::string& sentence) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : sentence) {
    if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             int min_count) {
  if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");
  std::map<std::string, long long> freq;
  for (const auto& sentence : corpus) {
    for (const auto& token : sentence) ++freq[token];
  }
  std::vector<std::pair<long long, std::string>> kept;
  for (const auto& [token, count] : freq) {
    if (count > min_count &&
        std::find(kReserved.begin(), kReserved.end(), token) == kReserved.end()) {
      kept.emplace_back(count, token);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  Vocabulary v;
  v.min_count = min_count;
  v.tokens.assign(kReserved.begin(), kReserved.end());
  for (auto& [count, token] : kept) v.tokens.push_back(token);
  for (std::size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = static_cast<int>(i);
  return v;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t i) const {
  if (i >= tokens.size()) {
    throw VocabError("token index " + std::to_string(i) + " out of range for vocabulary of " +
                     std::to_string(tokens.size()));
  }
  return tokens[i];
}

std::vector<int> encode_caption(const std::vector<std::string>& words, const Vocabulary& vocab) {
  std::vector<int> out;
  out.reserve(words.size() + 2);
  out.push_back(kBos);
  for (const auto& w : words) out.push_back(vocab.lookup(w));
  out.push_back(kEos);
  return out;
}

std::string decode_tokens(const std::vector<int>& indices, const Vocabulary& vocab) {
  std::string out;
  for (int i : indices) {
    if (i == kBos || i == kEos || i == kPad) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(static_cast<std::size_t>(i));
  }
  return out;
}

const VideoSample& Dataset::video(const std::string& id) const {
  auto it = by_id.find(id);
  if (it == by_id.end()) throw IoError("unknown video id: " + id);
  return videos[it->second];
}

void Dataset::rebuild_index() {
  by_id.clear();
  for (std::size_t i = 0; i < videos.size(); ++i) by_id[videos[i].id] = i;
}

namespace {

constexpr char kMagic[4] = {'T', 'S', 'L', 'F'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t read_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_features(const std::string& path, const FeatureMatrix& features) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write feature file: " + path);
  f.write(kMagic, 4);
  write_u32(f, kFormatVersion);
  write_u32(f, static_cast<std::uint32_t>(features.rows()));
  write_u32(f, static_cast<std::uint32_t>(features.cols()));
  for (std::size_t c = 0; c < features.cols(); ++c) {
    for (std::size_t r = 0; r < features.rows(); ++r) {
      float v = static_cast<float>(features(r, c));
      if (!std::isfinite(v)) {
        throw IoError("non-finite feature for " + path + " at frame " + std::to_string(c) +
                      " dim " + std::to_string(r));
      }
      f.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  if (!f) throw IoError("write failed: " + path);
}

FeatureMatrix load_features(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open feature file: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("bad magic in feature file: " + path);
  }
  const std::uint32_t version = read_u32(f);
  if (version != kFormatVersion) {
    throw IoError("unsupported feature file version " + std::to_string(version) + ": " + path);
  }
  const std::uint32_t d_v = read_u32(f);
  const std::uint32_t n_v = read_u32(f);
  if (!f || d_v == 0 || n_v == 0) throw IoError("malformed header in feature file: " + path);
  FeatureMatrix m(d_v, n_v);
  for (std::uint32_t c = 0; c < n_v; ++c) {
    for (std::uint32_t r = 0; r < d_v; ++r) {
      float v = 0.0f;
      f.read(reinterpret_cast<char*>(&v), sizeof(v));
      if (!f) {
        throw IoError("truncated feature file " + path + " at frame " + std::to_string(c));
      }
      if (!std::isfinite(v)) {
        throw IoError("non-finite feature in " + path + " at frame " + std::to_string(c) +
                      " dim " + std::to_string(r));
      }
      m(r, c) = static_cast<double>(v);
    }
  }
  return m;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "features");
  nlohmann::json manifest;
  manifest["name"] = ds.name;
  manifest["feature_dim"] = ds.feature_dim;
  manifest["features_dir"] = "features";
  manifest["splits"] = {{"train", ds.train_ids}, {"val", ds.val_ids}, {"test", ds.test_ids}};
  nlohmann::json captions = nlohmann::json::object();
  for (const auto& v : ds.videos) {
    captions[v.id] = v.captions;
    save_features((fs::path(dir) / "features" / (v.id + ".bin")).string(), v.features);
  }
  manifest["captions"] = captions;
  std::ofstream f(fs::path(dir) / "manifest.json");
  if (!f) throw IoError("cannot write manifest under " + dir);
  f << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot open manifest: " + manifest_path);
  nlohmann::json manifest;
  try {
    f >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + manifest_path + ": " + e.what());
  }
  Dataset ds;
  try {
    ds.name = manifest.at("name").get<std::string>();
    ds.feature_dim = manifest.at("feature_dim").get<std::size_t>();
    ds.train_ids = manifest.at("splits").at("train").get<std::vector<std::string>>();
    ds.val_ids = manifest.at("splits").at("val").get<std::vector<std::string>>();
    ds.test_ids = manifest.at("splits").at("test").get<std::vector<std::string>>();
    const fs::path base =
        fs::path(manifest_path).parent_path() / manifest.at("features_dir").get<std::string>();
    for (const auto& [id, caps] : manifest.at("captions").items()) {
      VideoSample v;
      v.id = id;
      v.captions = caps.get<std::vector<std::string>>();
      if (v.captions.empty()) throw IoError("video " + id + " has no captions");
      v.features = load_features((base / (id + ".bin")).string());
      if (v.features.rows() != ds.feature_dim) {
        throw IoError("video " + id + " feature width " + std::to_string(v.features.rows()) +
                      " != dataset feature_dim " + std::to_string(ds.feature_dim));
      }
      ds.videos.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + manifest_path + ": " + e.what());
  }
  std::sort(ds.videos.begin(), ds.videos.end(),
            [](const VideoSample& a, const VideoSample& b) { return a.id < b.id; });
  ds.rebuild_index();
  for (const auto& id : ds.train_ids) ds.video(id);
  for (const auto& id : ds.val_ids) ds.video(id);
  for (const auto& id : ds.test_ids) ds.video(id);
  return ds;
}

std::array<std::size_t, 3> msvd_split_sizes(std::size_t total) {
  const auto train =
      static_cast<std::size_t>(std::llround(static_cast<double>(total) * 1200.0 / 1970.0));
  const auto val =
      static_cast<std::size_t>(std::llround(static_cast<double>(total) * 100.0 / 1970.0));
  return {train, val, total - train - val};
}

void SynthConfig::validate() const {
  if (n_videos == 0 || n_subjects == 0 || n_verbs == 0 || feature_dim == 0) {
    throw ConfigError("SynthConfig: counts must be positive");
  }
  if (events_min == 0 || events_min > events_max || frames_min == 0 ||
      frames_min > frames_max) {
    throw ConfigError("SynthConfig: invalid event/frame ranges");
  }
  if (noise_std < 0.0) throw ConfigError("SynthConfig: noise_std must be >= 0");
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // One fixed prototype feature vector per (subject, verb) pair.
  std::vector<Vector> prototypes(cfg.n_subjects * cfg.n_verbs);
  for (auto& proto : prototypes) {
    proto.resize(cfg.feature_dim);
    for (double& x : proto) x = normal(rng);
  }

  std::uniform_int_distribution<std::size_t> n_events_dist(cfg.events_min, cfg.events_max);
  std::uniform_int_distribution<std::size_t> n_frames_dist(cfg.frames_min, cfg.frames_max);
  std::uniform_int_distribution<std::size_t> subject_dist(0, cfg.n_subjects - 1);
  std::uniform_int_distribution<std::size_t> verb_dist(0, cfg.n_verbs - 1);

  Dataset ds;
  ds.name = "synthetic";
  ds.feature_dim = cfg.feature_dim;
  for (std::size_t i = 0; i < cfg.n_videos; ++i) {
    const std::size_t n_events = n_events_dist(rng);
    std::vector<std::pair<std::size_t, std::size_t>> events(n_events);
    std::vector<std::size_t> frames(n_events);
    std::size_t n_v = 0;
    for (std::size_t e = 0; e < n_events; ++e) {
      events[e] = {subject_dist(rng), verb_dist(rng)};
      frames[e] = n_frames_dist(rng);
      n_v += frames[e];
    }
    VideoSample v;
    char id[16];
    std::snprintf(id, sizeof(id), "vid%04zu", i);
    v.id = id;
    v.features = FeatureMatrix(cfg.feature_dim, n_v);
    std::string caption;
    std::size_t col = 0;
    for (std::size_t e = 0; e < n_events; ++e) {
      const Vector& proto = prototypes[events[e].first * cfg.n_verbs + events[e].second];
      for (std::size_t k = 0; k < frames[e]; ++k, ++col) {
        for (std::size_t r = 0; r < cfg.feature_dim; ++r) {
          v.features(r, col) = proto[r] + cfg.noise_std * normal(rng);
        }
      }
      if (e > 0) caption += " then ";
      caption += subject_name(events[e].first) + " is " + verb_name(events[e].second);
    }
    v.captions.push_back(caption);
    ds.videos.push_back(std::move(v));
  }
  ds.rebuild_index();

  std::vector<std::string> ids;
  for (const auto& v : ds.videos) ids.push_back(v.id);
  if (cfg.share_splits) {
    ds.train_ids = ds.val_ids = ds.test_ids = ids;
  } else {
    auto [n_train, n_val, n_test] = msvd_split_sizes(ids.size());
    ds.train_ids.assign(ids.begin(), ids.begin() + n_train);
    ds.val_ids.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    ds.test_ids.assign(ids.begin() + n_train + n_val, ids.end());
  }
  return ds;
}

}  // namespace tslstm
