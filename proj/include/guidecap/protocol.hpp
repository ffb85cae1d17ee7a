#pragma once

#include <string>
#include <vector>

#include "guidecap/classifier.hpp"
#include "guidecap/corpus.hpp"
#include "guidecap/decoder.hpp"

namespace guidecap {

// One captioning outcome, the unit written by the captioning commands. An
// empty guiding surface marks an unguided caption (plain mode, or a threshold
// run where no category cleared the bar); otherwise surface contains the
// guiding word at index left.size().
struct CaptionRecord {
  int scene_id = -1;
  std::string mode;
  std::string guiding;
  std::vector<std::string> s_seq;
  std::vector<std::string> left;
  std::vector<std::string> right;
  std::vector<std::string> surface;
  double score = 0.0;
  int beam = 1;
};

// Explicit guidance: the caller names the conditioning objects and the
// guiding word (novel surfaces allowed, resolved through the registry).
CaptionRecord caption_guided(LmParams& lstm_l, LmParams& lstm_r, const Vocab& vocab,
                             const Scene& scene, const std::vector<std::string>& s_words,
                             const std::string& guiding, const DecodeConfig& cfg);

// Plain left-to-right generation, no guiding word.
CaptionRecord caption_plain(LmParams& lstm_r, const Vocab& vocab, const Scene& scene,
                            const DecodeConfig& cfg);

// One guided caption per top-k classifier category, highest probability
// first, each conditioned on an empty object sequence.
std::vector<CaptionRecord> caption_topk(LmParams& lstm_l, LmParams& lstm_r,
                                        const ClassifierParams& clf, const Vocab& vocab,
                                        const Scene& scene, int k, const DecodeConfig& cfg);

// Guided by the most probable category above p_o (novel candidates only when
// novel_only), falling back to an unguided caption when none qualifies.
CaptionRecord caption_threshold(LmParams& lstm_l, LmParams& lstm_r, const ClassifierParams& clf,
                                const Vocab& vocab, const Scene& scene, double p_o,
                                bool novel_only, const DecodeConfig& cfg);

// Fixed guiding object (the classifier's top category), two conditioning
// variants: an empty object sequence, and the runner-up category alone.
// The pair of surfaces measures how much S steers the left side.
std::vector<CaptionRecord> caption_diversity(LmParams& lstm_l, LmParams& lstm_r,
                                             const ClassifierParams& clf, const Vocab& vocab,
                                             const Scene& scene, const DecodeConfig& cfg);

// Line-delimited JSON, one record per line, keyed by field name. save(load)
// is byte-identical.
void save_caption_records(const std::string& path, const std::vector<CaptionRecord>& records);
std::vector<CaptionRecord> load_caption_records(const std::string& path);

}  // namespace guidecap
