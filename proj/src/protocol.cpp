#include "guidecap/protocol.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "guidecap/errors.hpp"

namespace guidecap {

using numeric::Array;
using ordered_json = nlohmann::ordered_json;

CaptionRecord caption_guided(LmParams& lstm_l, LmParams& lstm_r, const Vocab& vocab,
                             const Scene& scene, const std::vector<std::string>& s_words,
                             const std::string& guiding, const DecodeConfig& cfg) {
  validate_decode_config(cfg);
  GuidingSpec spec = make_guiding_spec(vocab, s_words, guiding);
  CaptionResult res =
      caption_with_guidance(lstm_l, lstm_r, vocab, Array::from_vector(scene.features), spec, cfg);
  CaptionRecord rec;
  rec.scene_id = scene.id;
  rec.mode = "guided";
  rec.guiding = res.guiding_surface;
  rec.s_seq = s_words;
  rec.left = ids_to_surfaces(vocab, res.left);
  rec.right = ids_to_surfaces(vocab, res.right);
  rec.surface = res.surface;
  rec.score = res.score;
  rec.beam = cfg.beam;
  return rec;
}

CaptionRecord caption_plain(LmParams& lstm_r, const Vocab& vocab, const Scene& scene,
                            const DecodeConfig& cfg) {
  validate_decode_config(cfg);
  CaptionResult res = caption_unguided(lstm_r, vocab, Array::from_vector(scene.features), cfg);
  CaptionRecord rec;
  rec.scene_id = scene.id;
  rec.mode = "unguided";
  rec.right = ids_to_surfaces(vocab, res.right);
  rec.surface = res.surface;
  rec.score = res.score;
  rec.beam = cfg.beam;
  return rec;
}

std::vector<CaptionRecord> caption_topk(LmParams& lstm_l, LmParams& lstm_r,
                                        const ClassifierParams& clf, const Vocab& vocab,
                                        const Scene& scene, int k, const DecodeConfig& cfg) {
  const auto probs = predict_object_probs(clf, Array::from_vector(scene.features));
  std::vector<CaptionRecord> out;
  for (int c : select_top_k(probs, k)) {
    const std::string& surface = vocab.categories()[static_cast<std::size_t>(c)].surface;
    CaptionRecord rec = caption_guided(lstm_l, lstm_r, vocab, scene, {}, surface, cfg);
    rec.mode = "topk";
    out.push_back(std::move(rec));
  }
  return out;
}

CaptionRecord caption_threshold(LmParams& lstm_l, LmParams& lstm_r, const ClassifierParams& clf,
                                const Vocab& vocab, const Scene& scene, double p_o,
                                bool novel_only, const DecodeConfig& cfg) {
  if (!(p_o >= 0.0 && p_o <= 1.0)) throw ConfigError("p_o must lie in [0, 1]");
  const auto probs = predict_object_probs(clf, Array::from_vector(scene.features));
  std::vector<int> candidates;
  for (int c = 0; c < vocab.num_categories(); ++c) {
    if (!novel_only || vocab.categories()[static_cast<std::size_t>(c)].vocab_id < 0) {
      candidates.push_back(c);
    }
  }
  const auto kept = select_by_threshold(probs, p_o, candidates);
  if (kept.empty()) {
    CaptionRecord rec = caption_plain(lstm_r, vocab, scene, cfg);
    rec.mode = "threshold";
    return rec;
  }
  const std::string& surface = vocab.categories()[static_cast<std::size_t>(kept[0])].surface;
  CaptionRecord rec = caption_guided(lstm_l, lstm_r, vocab, scene, {}, surface, cfg);
  rec.mode = "threshold";
  return rec;
}

std::vector<CaptionRecord> caption_diversity(LmParams& lstm_l, LmParams& lstm_r,
                                             const ClassifierParams& clf, const Vocab& vocab,
                                             const Scene& scene, const DecodeConfig& cfg) {
  if (vocab.num_categories() < 2) throw DataError("diversity mode needs at least two categories");
  const auto probs = predict_object_probs(clf, Array::from_vector(scene.features));
  const auto top = select_top_k(probs, 2);
  const std::string& guiding = vocab.categories()[static_cast<std::size_t>(top[0])].surface;
  const std::string& other = vocab.categories()[static_cast<std::size_t>(top[1])].surface;

  std::vector<CaptionRecord> out;
  for (const auto& s_words : {std::vector<std::string>{}, std::vector<std::string>{other}}) {
    CaptionRecord rec = caption_guided(lstm_l, lstm_r, vocab, scene, s_words, guiding, cfg);
    rec.mode = "diversity";
    out.push_back(std::move(rec));
  }
  return out;
}

void save_caption_records(const std::string& path, const std::vector<CaptionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (const auto& rec : records) {
    ordered_json doc;
    doc["scene_id"] = rec.scene_id;
    doc["mode"] = rec.mode;
    doc["guiding"] = rec.guiding;
    doc["s_seq"] = rec.s_seq;
    doc["left"] = rec.left;
    doc["right"] = rec.right;
    doc["surface"] = rec.surface;
    doc["score"] = rec.score;
    doc["beam"] = rec.beam;
    out << doc.dump() << "\n";
  }
  if (!out) throw DataError("failed writing " + path);
}

std::vector<CaptionRecord> load_caption_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<CaptionRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no += 1;
    if (line.empty()) continue;
    try {
      ordered_json doc = ordered_json::parse(line);
      CaptionRecord rec;
      rec.scene_id = doc.at("scene_id").get<int>();
      rec.mode = doc.at("mode").get<std::string>();
      rec.guiding = doc.at("guiding").get<std::string>();
      rec.s_seq = doc.at("s_seq").get<std::vector<std::string>>();
      rec.left = doc.at("left").get<std::vector<std::string>>();
      rec.right = doc.at("right").get<std::vector<std::string>>();
      rec.surface = doc.at("surface").get<std::vector<std::string>>();
      rec.score = doc.at("score").get<double>();
      rec.beam = doc.at("beam").get<int>();
      records.push_back(std::move(rec));
    } catch (const ordered_json::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace guidecap
