#include "guidecap/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "guidecap/errors.hpp"
#include "guidecap/rng.hpp"

namespace guidecap {

using numeric::Array;
using ordered_json = nlohmann::ordered_json;

namespace {

// Seed-stream tags. Scene i draws from mix_seed(seed, kSceneTag + i) so a
// scene can be regenerated without replaying its predecessors.
constexpr std::uint64_t kSceneTag = 1000;
constexpr std::uint64_t kMixingTag = 77;
constexpr std::uint64_t kSplitTag = 5917;

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool is_slot(const std::string& tok, int* idx) {
  if (tok.size() == 3 && tok.front() == '{' && tok.back() == '}' && tok[1] >= '0' && tok[1] <= '9') {
    *idx = tok[1] - '0';
    return true;
  }
  return false;
}

int template_arity(const std::string& tmpl) {
  int arity = 0;
  for (const auto& tok : split_ws(tmpl)) {
    int idx = 0;
    if (is_slot(tok, &idx)) arity = std::max(arity, idx + 1);
  }
  return arity;
}

std::vector<std::string> fill_template(const std::string& tmpl, const std::vector<std::string>& objs) {
  std::vector<std::string> out;
  for (const auto& tok : split_ws(tmpl)) {
    int idx = 0;
    if (is_slot(tok, &idx)) {
      out.push_back(objs.at(idx));
    } else {
      out.push_back(tok);
    }
  }
  return out;
}

void check_surface(const std::string& s, const char* what) {
  if (s.empty()) throw ConfigError(std::string(what) + " must not be empty");
  for (char c : s) {
    if (!((c >= 'a' && c <= 'z') || c == '<' || c == '>' || c == '_')) {
      throw ConfigError(std::string(what) + " '" + s + "' must be lowercase letters");
    }
  }
}

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

double round_to_file_precision(double v) {
  return std::strtod(format_g9(v).c_str(), nullptr);
}

WorldConfig default_world_config() {
  WorldConfig cfg;
  cfg.categories = {"apple", "banana", "bird", "boat",  "bowl",  "bus",   "car",   "cat",
                    "chair", "couch",  "cup",  "dog",   "horse", "table", "zebra", "pizza"};
  cfg.similar = {{"apple", "banana"}, {"banana", "apple"}, {"bird", "cat"},   {"boat", "bus"},
                 {"bowl", "cup"},     {"bus", "car"},      {"car", "bus"},    {"cat", "dog"},
                 {"chair", "couch"},  {"couch", "chair"},  {"cup", "bowl"},   {"dog", "cat"},
                 {"horse", "dog"},    {"table", "chair"},  {"zebra", "horse"}, {"pizza", "apple"}};
  cfg.salient = {"zebra", "pizza"};
  cfg.templates = {
      // arity 1
      "there is a {0} in the picture",
      "a {0} sits near the window",
      "you can see a {0} here",
      "the {0} rests in the corner",
      "a small {0} appears in view",
      "one {0} stands in the light",
      "the picture shows a {0}",
      "a {0} waits by the door",
      // arity 2
      "a {0} and a {1} share the scene",
      "there is a {0} next to a {1}",
      "a {0} sits beside a {1}",
      "the {0} appears near the {1}",
      "you can spot a {0} with a {1}",
      "a {0} rests close to a {1}",
      "the scene holds a {0} and a {1}",
      "a {0} stands behind a {1}",
      // arity 3
      "a {0} joins a {1} and a {2}",
      "the {0} sits with a {1} and a {2}",
      "you can see a {0} a {1} and a {2}",
      "a {0} a {1} and a {2} fill the room",
  };
  // Every non-slot word the default templates use.
  std::set<std::string> words;
  for (const auto& t : cfg.templates) {
    for (const auto& tok : split_ws(t)) {
      int idx = 0;
      if (!is_slot(tok, &idx)) words.insert(tok);
    }
  }
  cfg.fillers.assign(words.begin(), words.end());
  return cfg;
}

void validate_world_config(const WorldConfig& cfg) {
  if (cfg.categories.empty()) throw ConfigError("world has no object categories");
  std::set<std::string> cats;
  for (const auto& c : cfg.categories) {
    check_surface(c, "category");
    if (!cats.insert(c).second) throw ConfigError("duplicate category '" + c + "'");
  }
  for (const auto& f : cfg.fillers) {
    check_surface(f, "filler");
    if (cats.count(f)) throw ConfigError("filler '" + f + "' collides with a category");
  }
  std::set<std::string> fillers(cfg.fillers.begin(), cfg.fillers.end());
  for (const auto& s : cfg.salient) {
    if (!cats.count(s)) throw ConfigError("salient object '" + s + "' is not a category");
  }
  for (const auto& [k, v] : cfg.similar) {
    if (!cats.count(k)) throw ConfigError("similar-map key '" + k + "' is not a category");
    if (!cats.count(v)) throw ConfigError("similar-map value '" + v + "' is not a category");
    if (k == v) throw ConfigError("category '" + k + "' marked similar to itself");
  }

  bool have_arity[4] = {false, false, false, false};
  for (const auto& t : cfg.templates) {
    auto toks = split_ws(t);
    if (toks.empty()) throw ConfigError("empty caption template");
    int arity = template_arity(t);
    if (arity < 1 || arity > 3) throw ConfigError("template '" + t + "' must use slots {0}..{2}");
    int seen[3] = {0, 0, 0};
    for (const auto& tok : toks) {
      int idx = 0;
      if (is_slot(tok, &idx)) {
        ++seen[idx];
      } else if (!fillers.count(tok)) {
        throw ConfigError("template word '" + tok + "' is not a registered filler");
      }
    }
    for (int i = 0; i < arity; ++i) {
      if (seen[i] != 1) throw ConfigError("template '" + t + "' must use each slot exactly once");
    }
    if (static_cast<int>(toks.size()) >= cfg.max_caption_len) {
      throw ConfigError("template '" + t + "' exceeds max_caption_len");
    }
    have_arity[arity] = true;
  }
  if (!have_arity[1] || !have_arity[2]) {
    throw ConfigError("templates must cover arity 1 and arity 2");
  }

  int num_salient = static_cast<int>(cfg.salient.size());
  int num_plain = static_cast<int>(cfg.categories.size()) - num_salient;
  if (cfg.scenes < 1) throw ConfigError("scenes must be positive");
  if (cfg.min_objects < 2) throw ConfigError("scenes need at least two objects");
  if (cfg.max_objects < cfg.min_objects) throw ConfigError("max_objects below min_objects");
  // Each scene holds at most one salient object, so the rest must fit in the
  // plain categories, and one plain object per scene goes unmentioned.
  if (cfg.max_objects > num_plain + 1) {
    throw ConfigError("max_objects exceeds available non-salient categories plus one");
  }
  if (cfg.captions_per_scene < cfg.max_objects) {
    throw ConfigError("captions_per_scene too small to cover every mentioned object");
  }
  if (cfg.feature_dim < static_cast<int>(cfg.categories.size())) {
    throw ConfigError("feature_dim must be at least the category count for full-rank features");
  }
  if (cfg.feature_scale <= 0.0) throw ConfigError("feature_scale must be positive");
  if (cfg.feature_noise < 0.0) throw ConfigError("feature_noise must not be negative");
  if (cfg.max_caption_len < 4) throw ConfigError("max_caption_len too small for any template");
  if (cfg.min_count < 1) throw ConfigError("min_count must be positive");
}

Array world_mixing_matrix(const WorldConfig& cfg, std::uint64_t seed) {
  validate_world_config(cfg);
  const int d = cfg.feature_dim;
  const int c = static_cast<int>(cfg.categories.size());
  Rng rng(mix_seed(seed, kMixingTag));
  Array a = Array::zeros({d, c});
  for (int j = 0; j < c; ++j) {
    // Draw a random direction, remove the span of earlier columns, normalize.
    // Redraw on near-collinearity; with d >= c that is vanishingly rare.
    for (int attempt = 0; attempt < 100; ++attempt) {
      std::vector<double> v(d);
      for (int i = 0; i < d; ++i) v[i] = rng.normal();
      for (int k = 0; k < j; ++k) {
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += v[i] * a.at(i, k);
        for (int i = 0; i < d; ++i) v[i] -= dot * a.at(i, k);
      }
      double norm = 0.0;
      for (int i = 0; i < d; ++i) norm += v[i] * v[i];
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (int i = 0; i < d; ++i) a.at(i, j) = v[i] / norm;
        break;
      }
      if (attempt == 99) throw NumericError("could not orthonormalize feature mixing matrix");
    }
  }
  for (std::size_t i = 0; i < a.numel(); ++i) a.data()[i] *= cfg.feature_scale;
  return a;
}

namespace {

Scene generate_scene_with(const WorldConfig& cfg, const Array& mixing, std::uint64_t seed, int scene_id) {
  Rng rng(mix_seed(seed, kSceneTag + static_cast<std::uint64_t>(scene_id)));
  const int c = static_cast<int>(cfg.categories.size());
  std::set<std::string> salient(cfg.salient.begin(), cfg.salient.end());

  const int span = cfg.max_objects - cfg.min_objects + 1;
  const int n = cfg.min_objects + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span)));

  // Rejection-sample the object set: at most one salient category per scene.
  std::vector<int> chosen;
  std::vector<int> all(c);
  for (int i = 0; i < c; ++i) all[i] = i;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 1000) throw ContractError("object sampling failed to satisfy scene constraints");
    std::vector<int> pool = all;
    rng.shuffle(pool);
    chosen.assign(pool.begin(), pool.begin() + n);
    int num_salient = 0;
    for (int idx : chosen) num_salient += salient.count(cfg.categories[idx]) ? 1 : 0;
    if (num_salient <= 1) break;
  }
  std::sort(chosen.begin(), chosen.end());

  Scene scene;
  scene.id = scene_id;
  for (int idx : chosen) scene.objects.push_back(cfg.categories[idx]);

  // Exactly one non-salient object goes unmentioned, drawn uniformly.
  std::vector<std::string> plain;
  for (const auto& obj : scene.objects) {
    if (!salient.count(obj)) plain.push_back(obj);
  }
  const std::string victim = plain[rng.uniform_int(plain.size())];
  std::vector<std::string> mention;
  for (const auto& obj : scene.objects) {
    if (obj != victim) mention.push_back(obj);
  }
  rng.shuffle(mention);
  const int m = static_cast<int>(mention.size());

  // features = mixing * presence + noise, stored at file precision so the
  // in-memory corpus matches its serialized form bit for bit.
  std::vector<char> present(c, 0);
  for (int idx : chosen) present[idx] = 1;
  scene.features.resize(cfg.feature_dim);
  for (int i = 0; i < cfg.feature_dim; ++i) {
    double x = 0.0;
    for (int j = 0; j < c; ++j) {
      if (present[j]) x += mixing.at(i, j);
    }
    x += cfg.feature_noise * rng.normal();
    scene.features[i] = round_to_file_precision(x);
  }

  std::vector<std::string> by_arity[4];
  for (const auto& t : cfg.templates) by_arity[template_arity(t)].push_back(t);

  // Two ordering variants of the same two-object template come first, then a
  // cyclic cursor walks the mention list so every mentioned object appears.
  int cursor = 0;
  if (m >= 2) {
    const std::string& t = by_arity[2][rng.uniform_int(by_arity[2].size())];
    scene.captions.push_back(fill_template(t, {mention[0], mention[1]}));
    scene.captions.push_back(fill_template(t, {mention[1], mention[0]}));
    cursor = 2 % m;
  }
  while (static_cast<int>(scene.captions.size()) < cfg.captions_per_scene) {
    std::vector<int> arities;
    for (int a = 1; a <= 3; ++a) {
      if (!by_arity[a].empty() && a <= m) arities.push_back(a);
    }
    const int a = arities[rng.uniform_int(arities.size())];
    std::vector<std::string> objs;
    for (int i = 0; i < a; ++i) objs.push_back(mention[(cursor + i) % m]);
    const std::string& t = by_arity[a][rng.uniform_int(by_arity[a].size())];
    scene.captions.push_back(fill_template(t, objs));
    cursor = (cursor + a) % m;
  }
  return scene;
}

}  // namespace

Scene generate_scene(const WorldConfig& cfg, std::uint64_t seed, int scene_id) {
  if (scene_id < 0 || scene_id >= cfg.scenes) throw ConfigError("scene id out of range");
  return generate_scene_with(cfg, world_mixing_matrix(cfg, seed), seed, scene_id);
}

std::vector<Scene> generate_world(const WorldConfig& cfg, std::uint64_t seed) {
  Array mixing = world_mixing_matrix(cfg, seed);
  std::vector<Scene> scenes;
  scenes.reserve(cfg.scenes);
  for (int i = 0; i < cfg.scenes; ++i) {
    scenes.push_back(generate_scene_with(cfg, mixing, seed, i));
  }
  return scenes;
}

std::set<std::string> mentioned_categories(const Scene& scene, const std::vector<std::string>& inventory) {
  std::set<std::string> cats(inventory.begin(), inventory.end());
  std::set<std::string> out;
  for (const auto& cap : scene.captions) {
    for (const auto& tok : cap) {
      if (cats.count(tok)) out.insert(tok);
    }
  }
  return out;
}

Vocab::Vocab(std::vector<std::string> tokens, std::vector<CategoryEntry> categories, int min_count)
    : tokens_(std::move(tokens)), categories_(std::move(categories)), min_count_(min_count) {
  if (tokens_.size() < 3 || tokens_[0] != "<start>" || tokens_[1] != "<end>" || tokens_[2] != "<unk>") {
    throw DataError("vocabulary must begin with <start>, <end>, <unk>");
  }
  rebuild_index();
  for (const auto& cat : categories_) {
    if (cat.vocab_id >= 0) {
      if (cat.vocab_id >= size() || tokens_[cat.vocab_id] != cat.surface) {
        throw DataError("category '" + cat.surface + "' does not match its vocabulary entry");
      }
      object_token_[cat.vocab_id] = 1;
    }
  }
}

void Vocab::rebuild_index() {
  index_.clear();
  for (int i = 0; i < size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
  object_token_.assign(tokens_.size(), 0);
}

int Vocab::id_of(const std::string& surface) const {
  auto it = index_.find(surface);
  return it == index_.end() ? -1 : it->second;
}

int Vocab::id_or_unk(const std::string& surface) const {
  int id = id_of(surface);
  return id < 0 ? kUnk : id;
}

const std::string& Vocab::surface_of(int id) const {
  if (id < 0 || id >= size()) throw DataError("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

int Vocab::category_index(const std::string& surface) const {
  for (int i = 0; i < num_categories(); ++i) {
    if (categories_[i].surface == surface) return i;
  }
  return -1;
}

std::vector<int> Vocab::object_ids() const {
  std::vector<int> out;
  for (const auto& cat : categories_) {
    if (cat.vocab_id >= 0) out.push_back(cat.vocab_id);
  }
  return out;
}

bool Vocab::is_object_token(int id) const {
  return id >= 0 && id < size() && object_token_[id];
}

std::vector<std::string> Vocab::novel_candidates() const {
  std::vector<std::string> out;
  for (const auto& cat : categories_) {
    if (cat.vocab_id < 0) out.push_back(cat.surface);
  }
  return out;
}

Vocab build_vocab(const std::vector<Scene>& scenes, int min_count,
                  const std::vector<std::string>& inventory,
                  const std::map<std::string, std::string>& similar) {
  if (min_count < 1) throw ConfigError("min_count must be positive");
  std::map<std::string, int> counts;
  for (const auto& scene : scenes) {
    for (const auto& cap : scene.captions) {
      for (const auto& tok : cap) ++counts[tok];
    }
  }
  std::vector<std::string> tokens = {"<start>", "<end>", "<unk>"};
  for (const auto& [word, count] : counts) {
    if (word.front() == '<') throw DataError("caption token '" + word + "' collides with special tokens");
    if (count >= min_count) tokens.push_back(word);  // map iteration is sorted
  }
  std::vector<CategoryEntry> categories;
  std::set<std::string> seen_cats;
  for (const auto& surface : inventory) {
    if (!seen_cats.insert(surface).second) throw ConfigError("duplicate category '" + surface + "'");
    CategoryEntry entry;
    entry.surface = surface;
    auto it = std::find(tokens.begin(), tokens.end(), surface);
    entry.vocab_id = it == tokens.end() ? -1 : static_cast<int>(it - tokens.begin());
    auto sim = similar.find(surface);
    entry.similar = sim == similar.end() ? std::string() : sim->second;
    categories.push_back(std::move(entry));
  }
  return Vocab(std::move(tokens), std::move(categories), min_count);
}

DatasetSplit make_novel_split(const std::vector<Scene>& scenes, const std::vector<std::string>& inventory,
                              const std::vector<std::string>& novel, double val_frac, double test_frac,
                              std::uint64_t seed) {
  if (scenes.empty()) throw DataError("cannot split an empty corpus");
  if (val_frac < 0.0 || test_frac < 0.0 || val_frac + test_frac >= 1.0) {
    throw ConfigError("val and test fractions must be non-negative and sum below one");
  }
  std::set<std::string> cats(inventory.begin(), inventory.end());
  std::set<std::string> novel_set;
  for (const auto& s : novel) {
    if (!cats.count(s)) throw ConfigError("novel object '" + s + "' is not a category");
    novel_set.insert(s);
  }

  const int n = static_cast<int>(scenes.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = scenes[i].id;
  Rng rng(mix_seed(seed, kSplitTag));
  rng.shuffle(order);

  const int n_test = static_cast<int>(std::llround(test_frac * n));
  const int n_val = static_cast<int>(std::llround(val_frac * n));

  DatasetSplit split;
  split.test.assign(order.begin(), order.begin() + n_test);
  split.val.assign(order.begin() + n_test, order.begin() + n_test + n_val);
  split.train_full.assign(order.begin() + n_test + n_val, order.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.train_full.begin(), split.train_full.end());

  std::map<int, const Scene*> by_id;
  for (const auto& scene : scenes) by_id[scene.id] = &scene;
  for (int id : split.train_full) {
    auto mentioned = mentioned_categories(*by_id.at(id), inventory);
    bool has_novel = false;
    for (const auto& s : novel_set) {
      if (mentioned.count(s)) {
        has_novel = true;
        break;
      }
    }
    if (!has_novel) split.train.push_back(id);
  }
  if (split.train.empty()) {
    throw SplitError("no training scenes remain after removing novel-object mentions");
  }
  split.novel_objects.assign(novel_set.begin(), novel_set.end());
  return split;
}

// ---------------------------------------------------------------------------
// File layer.

void save_scenes(const std::string& path, const std::vector<Scene>& scenes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (const auto& scene : scenes) {
    out << "{\"id\":" << scene.id << ",\"objects\":[";
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      out << (i ? "," : "") << '"' << json_escape(scene.objects[i]) << '"';
    }
    out << "],\"features\":[";
    for (std::size_t i = 0; i < scene.features.size(); ++i) {
      out << (i ? "," : "") << format_g9(scene.features[i]);
    }
    out << "],\"captions\":[";
    for (std::size_t i = 0; i < scene.captions.size(); ++i) {
      out << (i ? ",[" : "[");
      for (std::size_t j = 0; j < scene.captions[i].size(); ++j) {
        out << (j ? "," : "") << '"' << json_escape(scene.captions[i][j]) << '"';
      }
      out << "]";
    }
    out << "]}\n";
  }
  if (!out) throw DataError("failed writing " + path);
}

std::vector<Scene> load_scenes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<Scene> scenes;
  std::set<int> ids;
  std::string line;
  int lineno = 0;
  std::size_t feature_dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + " line " + std::to_string(lineno);
    ordered_json rec;
    try {
      rec = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError(where + ": malformed scene record: " + e.what());
    }
    try {
      Scene scene;
      scene.id = rec.at("id").get<int>();
      for (const auto& obj : rec.at("objects")) scene.objects.push_back(obj.get<std::string>());
      for (const auto& f : rec.at("features")) scene.features.push_back(f.get<double>());
      for (const auto& cap : rec.at("captions")) {
        std::vector<std::string> words;
        for (const auto& w : cap) words.push_back(w.get<std::string>());
        scene.captions.push_back(std::move(words));
      }
      if (!ids.insert(scene.id).second) throw DataError("duplicate scene id " + std::to_string(scene.id));
      if (scene.objects.empty()) throw DataError("scene has no objects");
      std::set<std::string> distinct(scene.objects.begin(), scene.objects.end());
      if (distinct.size() != scene.objects.size()) throw DataError("scene lists a duplicate object");
      if (scenes.empty()) {
        feature_dim = scene.features.size();
      } else if (scene.features.size() != feature_dim) {
        throw DataError("inconsistent feature dimension");
      }
      if (scene.captions.empty()) throw DataError("scene has no captions");
      for (const auto& cap : scene.captions) {
        if (cap.empty()) throw DataError("scene has an empty caption");
      }
      scenes.push_back(std::move(scene));
    } catch (const DataError& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const ordered_json::exception& e) {
      throw ParseError(where + ": malformed scene record: " + e.what());
    }
  }
  if (scenes.empty()) throw DataError(path + " holds no scenes");
  return scenes;
}

void save_vocab(const std::string& path, const Vocab& vocab) {
  ordered_json doc;
  doc["format"] = "guidecap-vocab";
  doc["version"] = 1;
  doc["min_count"] = vocab.min_count();
  doc["tokens"] = vocab.tokens();
  doc["categories"] = ordered_json::array();
  for (const auto& cat : vocab.categories()) {
    ordered_json entry;
    entry["surface"] = cat.surface;
    entry["vocab_id"] = cat.vocab_id;
    entry["similar"] = cat.similar;
    doc["categories"].push_back(std::move(entry));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw DataError("failed writing " + path);
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "guidecap-vocab") {
      throw DataError("not a vocabulary file");
    }
    if (doc.at("version").get<int>() != 1) throw DataError("unsupported vocabulary version");
    std::vector<std::string> tokens;
    for (const auto& t : doc.at("tokens")) tokens.push_back(t.get<std::string>());
    std::vector<CategoryEntry> categories;
    for (const auto& c : doc.at("categories")) {
      CategoryEntry entry;
      entry.surface = c.at("surface").get<std::string>();
      entry.vocab_id = c.at("vocab_id").get<int>();
      entry.similar = c.at("similar").get<std::string>();
      categories.push_back(std::move(entry));
    }
    return Vocab(std::move(tokens), std::move(categories), doc.at("min_count").get<int>());
  } catch (const ordered_json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_split(const std::string& path, const DatasetSplit& split) {
  ordered_json doc;
  doc["format"] = "guidecap-split";
  doc["version"] = 1;
  doc["novel_objects"] = split.novel_objects;
  doc["train"] = split.train;
  doc["train_full"] = split.train_full;
  doc["val"] = split.val;
  doc["test"] = split.test;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw DataError("failed writing " + path);
}

DatasetSplit load_split(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "guidecap-split") {
      throw DataError("not a split file");
    }
    if (doc.at("version").get<int>() != 1) throw DataError("unsupported split version");
    DatasetSplit split;
    for (const auto& s : doc.at("novel_objects")) split.novel_objects.push_back(s.get<std::string>());
    for (const auto& i : doc.at("train")) split.train.push_back(i.get<int>());
    for (const auto& i : doc.at("train_full")) split.train_full.push_back(i.get<int>());
    for (const auto& i : doc.at("val")) split.val.push_back(i.get<int>());
    for (const auto& i : doc.at("test")) split.test.push_back(i.get<int>());
    return split;
  } catch (const ordered_json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

const Scene& Corpus::scene_by_id(int id) const {
  for (const auto& scene : scenes) {
    if (scene.id == id) return scene;
  }
  throw DataError("scene id " + std::to_string(id) + " not in corpus");
}

void save_corpus(const std::string& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  save_scenes(dir + "/scenes.jsonl", corpus.scenes);
  save_vocab(dir + "/vocab.json", corpus.vocab);
  save_split(dir + "/split.json", corpus.split);
}

Corpus load_corpus(const std::string& dir) {
  Corpus corpus;
  corpus.scenes = load_scenes(dir + "/scenes.jsonl");
  corpus.vocab = load_vocab(dir + "/vocab.json");
  corpus.split = load_split(dir + "/split.json");
  return corpus;
}

}  // namespace guidecap
