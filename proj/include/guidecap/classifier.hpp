#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "guidecap/corpus.hpp"
#include "guidecap/graph.hpp"
#include "guidecap/optim.hpp"

namespace guidecap {

// Per-category sigmoid classifier over scene features. The output axis is the
// full category registry (vocab.categories()), novel candidates included, so
// objects the language model has never produced still get a probability.
struct ClassifierParams {
  numeric::Param w;  // [D, C]
  numeric::Param b;  // [C]

  ClassifierParams(int feature_dim, int num_categories);
  std::vector<numeric::Param*> all() { return {&w, &b}; }
  std::vector<const numeric::Param*> all() const { return {&w, &b}; }

  int feature_dim() const { return w.value.dim(0); }
  int num_categories() const { return w.value.dim(1); }
};

// Tape node for training: logits[c] = sum_d w[d,c] * features[d] + b[c].
numeric::Var classifier_logits(numeric::Graph& g, ClassifierParams& p, const numeric::Array& features);

// Forward-only probabilities for selection at decode time.
std::vector<double> predict_object_probs(const ClassifierParams& p, const numeric::Array& features);

struct ClassifierTrainConfig {
  int epochs = 15;
  numeric::LrSchedule schedule{1e-4, 0.1, 10};
  std::uint64_t seed = 0;
};

// Per-scene SGD on the binary cross entropy against caption mentions: the
// label for category c is 1 iff the scene's captions mention it. Scene order
// is reshuffled every epoch. Writes one JSON line per epoch to loss_log when
// given: {"model":"clf","epoch":e,"lr":...,"mean_loss":...}.
void train_classifier(ClassifierParams& p, const std::vector<const Scene*>& scenes, const Vocab& vocab,
                      const ClassifierTrainConfig& cfg, std::ostream* loss_log);

// Caption-derived multi-hot labels on the category axis.
std::vector<double> mention_labels(const Scene& scene, const Vocab& vocab);

// Category indices with the k highest probabilities, in descending
// probability order; ties broken toward the smaller category index.
std::vector<int> select_top_k(const std::vector<double>& probs, int k);

// Category indices with probability strictly above the threshold, ordered as
// in select_top_k. The restricted form only considers `candidates`.
std::vector<int> select_by_threshold(const std::vector<double>& probs, double threshold);
std::vector<int> select_by_threshold(const std::vector<double>& probs, double threshold,
                                     const std::vector<int>& candidates);

}  // namespace guidecap
