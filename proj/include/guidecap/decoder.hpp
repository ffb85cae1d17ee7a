#pragma once

#include <string>
#include <vector>

#include "guidecap/corpus.hpp"
#include "guidecap/lstm.hpp"

namespace guidecap {

// Guidance resolved against a vocabulary. Words that the language model was
// never trained to emit (novel categories) are encoded through the embedding
// of their registered similar word, while the surface form of the output
// keeps the original word. s_ids may be empty: a guiding word alone is a
// valid conditioning sequence.
struct GuidingSpec {
  std::vector<int> s_ids;          // conditioning objects, encode-side token ids
  int guiding_encode_id = -1;      // embedding row fed for the guiding word
  int guiding_vocab_id = -1;       // emission id, or -1 when out of vocabulary
  std::string guiding_surface;
};

GuidingSpec make_guiding_spec(const Vocab& vocab, const std::vector<std::string>& s_words,
                              const std::string& guiding);

struct DecodeConfig {
  int max_left = 10;      // generation caps, per side
  int max_right = 12;
  int max_unguided = 20;
  int beam = 1;
  bool reverse_s = true;  // feed the object sequence back-to-front
};

void validate_decode_config(const DecodeConfig& cfg);

// One beam-search hypothesis. seq holds generated token ids in generation
// order; the end token never appears in seq, but choosing it adds its
// log-probability to the score. A hypothesis that reaches the length cap
// without choosing the end token is returned with finished == false.
struct BeamCandidate {
  std::vector<int> seq;
  double score = 0.0;
  bool finished = false;
};

// Advances the state over the image features, the object sequence (reversed
// when asked), and finally the guiding word. Predictions made along the way
// are discarded; this is pure conditioning, shared by training and decoding.
LstmState encode_guidance(numeric::Graph& g, const LmVars& v, const numeric::Array& features,
                          const GuidingSpec& spec, bool reverse_s);

// Greedy continuation from a state: at each step take the highest-probability
// token (smallest id on ties, banned ids skipped); the end token terminates,
// and at most max_len tokens are emitted.
BeamCandidate greedy_decode(numeric::Graph& g, const LmVars& v, LstmState state, int max_len,
                            const std::vector<int>& banned);

// Beam search with the same step semantics. Each step extends every active
// hypothesis with every allowed token, then keeps the best `beam` entries of
// the pool; an entry that chose the end token retires as finished. Returned
// candidates are ranked finished before capped, then score descending, then
// token sequence ascending. A beam of one reproduces greedy_decode exactly.
std::vector<BeamCandidate> beam_search(numeric::Graph& g, const LmVars& v, LstmState state, int max_len,
                                       int beam, const std::vector<int>& banned);

struct CaptionResult {
  std::vector<int> left;   // reading order, immediately before the guiding word
  std::vector<int> right;
  std::string guiding_surface;   // empty for unguided captions
  int guiding_vocab_id = -1;
  double score = 0.0;            // sum of both sides' generated log-probs
  bool left_capped = false;
  bool right_capped = false;
  std::vector<std::string> surface;  // assembled caption words
};

// Two-pass guided decoding. The left model generates the words before the
// guiding word right-to-left, conditioned on the object sequence and the
// guiding word; the right model then re-reads the realized prefix in reading
// order and generates the rest. The guiding word sits at index left.size()
// of the assembled caption by construction.
CaptionResult caption_with_guidance(LmParams& lstm_l, LmParams& lstm_r, const Vocab& vocab,
                                    const numeric::Array& features, const GuidingSpec& spec,
                                    const DecodeConfig& cfg);

// Baseline: the right model generating from the image alone. The tokens land
// in `right`; left stays empty and no guiding word is inserted.
CaptionResult caption_unguided(LmParams& lstm_r, const Vocab& vocab, const numeric::Array& features,
                               const DecodeConfig& cfg);

std::vector<std::string> ids_to_surfaces(const Vocab& vocab, const std::vector<int>& ids);

}  // namespace guidecap
