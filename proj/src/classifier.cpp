#include "guidecap/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "guidecap/errors.hpp"
#include "guidecap/rng.hpp"

namespace guidecap {

using numeric::Array;
using numeric::Graph;
using numeric::Param;
using numeric::Var;

namespace {
constexpr std::uint64_t kEpochTag = 40000;
}

ClassifierParams::ClassifierParams(int feature_dim, int num_categories) {
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  if (num_categories < 1) throw ConfigError("classifier needs at least one category");
  w = Param("clf/w", Array::zeros({feature_dim, num_categories}));
  b = Param("clf/b", Array::zeros({num_categories}));
}

Var classifier_logits(Graph& g, ClassifierParams& p, const Array& features) {
  if (features.rank() != 1 || features.dim(0) != p.feature_dim()) {
    throw DimensionError("features must be a vector of length " + std::to_string(p.feature_dim()));
  }
  return g.add(g.matmul_tn(g.param(p.w), g.constant(features)), g.param(p.b));
}

std::vector<double> predict_object_probs(const ClassifierParams& p, const Array& features) {
  if (features.rank() != 1 || features.dim(0) != p.feature_dim()) {
    throw DimensionError("features must be a vector of length " + std::to_string(p.feature_dim()));
  }
  std::vector<double> probs(static_cast<std::size_t>(p.num_categories()));
  for (int c = 0; c < p.num_categories(); ++c) {
    double z = p.b.value.at(c);
    for (int d = 0; d < p.feature_dim(); ++d) z += p.w.value.at(d, c) * features.at(d);
    // Stable logistic: exp argument kept non-positive.
    probs[static_cast<std::size_t>(c)] =
        z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  return probs;
}

std::vector<double> mention_labels(const Scene& scene, const Vocab& vocab) {
  std::vector<std::string> inventory;
  for (const auto& cat : vocab.categories()) inventory.push_back(cat.surface);
  auto mentioned = mentioned_categories(scene, inventory);
  std::vector<double> labels(inventory.size(), 0.0);
  for (std::size_t c = 0; c < inventory.size(); ++c) {
    if (mentioned.count(inventory[c])) labels[c] = 1.0;
  }
  return labels;
}

void train_classifier(ClassifierParams& p, const std::vector<const Scene*>& scenes, const Vocab& vocab,
                      const ClassifierTrainConfig& cfg, std::ostream* loss_log) {
  if (scenes.empty()) throw DataError("classifier training needs at least one scene");
  if (cfg.epochs < 1) throw ConfigError("epochs must be positive");
  const int c = p.num_categories();
  if (c != vocab.num_categories()) {
    throw DimensionError("classifier category axis does not match the vocabulary registry");
  }

  std::vector<std::vector<double>> labels;
  labels.reserve(scenes.size());
  for (const Scene* scene : scenes) labels.push_back(mention_labels(*scene, vocab));

  numeric::SgdState sgd{cfg.schedule};
  auto params = p.all();
  std::vector<std::size_t> order(scenes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, kEpochTag + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t idx : order) {
      const Scene& scene = *scenes[idx];
      Graph g;
      Var logits = classifier_logits(g, p, Array::from_vector(scene.features));
      Var loss = g.sigmoid_bce(logits, Array::from_vector(labels[idx]));
      total += g.value(loss).at(0);
      g.backward(loss);
      sgd_step(sgd, params, epoch);
    }
    if (loss_log) {
      *loss_log << "{\"model\":\"clf\",\"epoch\":" << epoch << ",\"lr\":" << cfg.schedule.lr_at(epoch)
                << ",\"mean_loss\":" << total / static_cast<double>(scenes.size()) << "}\n";
    }
  }
}

std::vector<int> select_top_k(const std::vector<double>& probs, int k) {
  if (k < 0) throw ConfigError("k must not be negative");
  std::vector<int> idx(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) idx[i] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
  });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(k)));
  return idx;
}

std::vector<int> select_by_threshold(const std::vector<double>& probs, double threshold) {
  std::vector<int> all(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) all[i] = static_cast<int>(i);
  return select_by_threshold(probs, threshold, all);
}

std::vector<int> select_by_threshold(const std::vector<double>& probs, double threshold,
                                     const std::vector<int>& candidates) {
  std::vector<int> kept;
  for (int c : candidates) {
    if (c < 0 || static_cast<std::size_t>(c) >= probs.size()) {
      throw DataError("candidate category index out of range");
    }
    if (probs[static_cast<std::size_t>(c)] > threshold) kept.push_back(c);
  }
  std::stable_sort(kept.begin(), kept.end(), [&](int a, int b) {
    return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
  });
  return kept;
}

}  // namespace guidecap
