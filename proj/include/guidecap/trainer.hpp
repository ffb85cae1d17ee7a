#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "guidecap/corpus.hpp"
#include "guidecap/lstm.hpp"
#include "guidecap/rng.hpp"

namespace guidecap {

// One guided training example cut from a caption: the guiding word is a
// uniformly chosen object-token occurrence, the conditioning sequence holds
// the object tokens strictly to its right, in caption order.
struct TrainingTuple {
  int scene_id = -1;
  std::vector<int> left_gt;       // ids before the guiding occurrence, sentence order
  int guiding = -1;               // object token id
  std::vector<int> s_seq;         // object ids right of the guiding occurrence
  std::vector<int> full_caption;  // <start> words... <end>

  // Guiding position within the inner caption; also the mask cut for the
  // right model's loss on this tuple.
  int k() const { return static_cast<int>(left_gt.size()); }
};

// Caption words wrapped as <start> ids... <end>, unknown words mapped to <unk>.
std::vector<int> wrap_caption_ids(const Vocab& vocab, const std::vector<std::string>& words);

// Empty when the caption holds no object token (such captions still train the
// right model on the full sentence, they just cannot anchor a guiding word).
std::optional<TrainingTuple> extract_tuple(const Vocab& vocab, int scene_id,
                                           const std::vector<std::string>& words, Rng& rng);

// Left-context loss: encode the object sequence (reversed when reverse_s) and
// the guiding word without scoring, then teacher-force the left words
// right-to-left; the final target is the end token, marking the sentence
// start. The sum runs over the scored steps only.
numeric::Var lstm_l_loss(numeric::Graph& g, const LmVars& v, const numeric::Array& features,
                         const TrainingTuple& tuple, bool reverse_s = true);

// Full-sentence teacher-forced cross entropy: the step-0 prediction comes
// from the image-conditioned state and targets the first word; the last term
// targets the end token. caption must be <start> ... <end> wrapped.
numeric::Var lstm_r_full_loss(numeric::Graph& g, const LmVars& v, const numeric::Array& features,
                              const std::vector<int>& caption);

// Same pass with positions t <= k contributing nothing (they are never built,
// so their gradients are structurally zero). k ranges over [-1, T] where T is
// the inner caption length; k = -1 is bit-equal to the full loss and k = T
// yields an exact zero.
numeric::Var lstm_r_masked_loss(numeric::Graph& g, const LmVars& v, const numeric::Array& features,
                                const std::vector<int>& caption, int k);

struct TrainConfig {
  int epochs_l = 80;
  int epochs_r = 40;
  double base_lr = 1e-4;
  double lr_decay = 0.1;
  int lr_period = 20;
  int batch_size = 16;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  bool reverse_s = true;
};

void validate_train_config(const TrainConfig& cfg);

// Adam over minibatches of per-example loss sums (one graph per batch, mean
// loss node, global-norm clipping). Scene order and tuple draws are
// re-sampled every epoch from epoch-indexed seeds, so runs are deterministic
// given (data, seed). One JSON line per epoch goes to loss_log when given:
// {"model":...,"epoch":...,"lr":...,"mean_loss":...}.
void train_lstm_l(LmParams& p, const std::vector<const Scene*>& scenes, const Vocab& vocab,
                  const TrainConfig& cfg, std::ostream* loss_log);
void train_lstm_r(LmParams& p, const std::vector<const Scene*>& scenes, const Vocab& vocab,
                  const TrainConfig& cfg, std::ostream* loss_log);

}  // namespace guidecap
