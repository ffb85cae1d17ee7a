#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "guidecap/array.hpp"

namespace guidecap {

// Synthetic world description. Category order fixes the classifier's output
// axis; salient categories are always mentioned when present (at most one is
// placed per scene), every other present category risks being the scene's one
// unmentioned object, which is what keeps caption labels a strict subset of
// detection labels.
struct WorldConfig {
  std::vector<std::string> categories;
  std::map<std::string, std::string> similar;  // category -> in-kind stand-in
  std::vector<std::string> salient;
  std::vector<std::string> fillers;
  std::vector<std::string> templates;  // "a {0} and a {1}" style, arity 1..3

  int scenes = 1000;
  int captions_per_scene = 5;
  // At least four objects keeps every non-salient category's mention rate
  // well above one half (one uniformly chosen object goes unmentioned), so
  // presence stays learnable from caption labels at the 0.5 cut.
  int min_objects = 4;
  int max_objects = 5;
  int feature_dim = 32;
  double feature_scale = 3.0;
  double feature_noise = 0.05;
  int max_caption_len = 20;
  int min_count = 5;
};

WorldConfig default_world_config();
void validate_world_config(const WorldConfig& cfg);

struct Scene {
  int id = 0;
  std::vector<std::string> objects;  // distinct category surfaces, inventory order
  std::vector<double> features;
  std::vector<std::vector<std::string>> captions;

  // Detection labels never omit an object; they are the object set itself.
  const std::vector<std::string>& detection_labels() const { return objects; }
};

// Scene i depends only on (cfg, seed, i), so generation is parallelizable
// across scenes; the sequential loop below must match scene-wise calls.
std::vector<Scene> generate_world(const WorldConfig& cfg, std::uint64_t seed);
Scene generate_scene(const WorldConfig& cfg, std::uint64_t seed, int scene_id);

// D x C feature mixing matrix: orthonormal columns scaled by feature_scale,
// drawn deterministically from the seed. Full column rank by construction,
// so with zero noise presence is exactly recoverable from features.
numeric::Array world_mixing_matrix(const WorldConfig& cfg, std::uint64_t seed);

// Category surfaces mentioned anywhere in the scene's captions.
std::set<std::string> mentioned_categories(const Scene& scene, const std::vector<std::string>& inventory);

// One object-category row of the vocabulary registry. vocab_id is -1 when the
// surface never reached min_count in the training captions; such categories
// are the novel-word candidates and carry a seen stand-in in `similar`.
struct CategoryEntry {
  std::string surface;
  int vocab_id = -1;
  std::string similar;
};

class Vocab {
 public:
  static constexpr int kStart = 0;
  static constexpr int kEnd = 1;
  static constexpr int kUnk = 2;

  Vocab() = default;
  Vocab(std::vector<std::string> tokens, std::vector<CategoryEntry> categories, int min_count);

  int size() const { return static_cast<int>(tokens_.size()); }
  int min_count() const { return min_count_; }

  int id_of(const std::string& surface) const;      // -1 when absent
  int id_or_unk(const std::string& surface) const;  // falls back to <unk>
  const std::string& surface_of(int id) const;
  bool is_special(int id) const { return id >= 0 && id < 3; }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<CategoryEntry>& categories() const { return categories_; }
  int num_categories() const { return static_cast<int>(categories_.size()); }
  int category_index(const std::string& surface) const;  // -1 when not a category

  std::vector<int> object_ids() const;  // in-vocab category token ids
  bool is_object_token(int id) const;
  std::vector<std::string> novel_candidates() const;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
  std::vector<CategoryEntry> categories_;
  std::vector<char> object_token_;
  int min_count_ = 1;

  void rebuild_index();
};

// Vocabulary over the given scenes' captions: specials always present, words
// kept iff their frequency >= min_count, inventory categories registered with
// their vocab id or as novel candidates when filtered out / unseen.
Vocab build_vocab(const std::vector<Scene>& scenes, int min_count,
                  const std::vector<std::string>& inventory,
                  const std::map<std::string, std::string>& similar);

struct DatasetSplit {
  std::vector<int> train;       // LM training scenes; no caption mentions a novel object
  std::vector<int> train_full;  // classifier pool: all train-assigned scenes
  std::vector<int> val;
  std::vector<int> test;
  std::vector<std::string> novel_objects;
};

// Assigns scenes to train/val/test by seeded shuffle, then drops every
// train-assigned scene whose captions mention a novel object from `train`
// (val/test keep all their scenes). Empty novel list reduces to a plain
// split with train == train_full.
DatasetSplit make_novel_split(const std::vector<Scene>& scenes, const std::vector<std::string>& inventory,
                              const std::vector<std::string>& novel, double val_frac, double test_frac,
                              std::uint64_t seed);

// File layer. Scenes are line-delimited JSON records (one scene per line,
// features printed at 9 significant digits); vocab and split are single JSON
// manifests. All files UTF-8 with LF line endings; save(load(x)) is
// byte-identical.
void save_scenes(const std::string& path, const std::vector<Scene>& scenes);
std::vector<Scene> load_scenes(const std::string& path);
void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);
void save_split(const std::string& path, const DatasetSplit& split);
DatasetSplit load_split(const std::string& path);

// Directory bundle used by the CLI: scenes.jsonl + vocab.json + split.json.
struct Corpus {
  std::vector<Scene> scenes;
  Vocab vocab;
  DatasetSplit split;

  const Scene& scene_by_id(int id) const;
};

void save_corpus(const std::string& dir, const Corpus& corpus);
Corpus load_corpus(const std::string& dir);

// Rounds through the 9-significant-digit decimal representation used by the
// scene files, so in-memory features equal their serialized form.
double round_to_file_precision(double v);

}  // namespace guidecap
