#include "guidecap/trainer.hpp"

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <string>

#include "guidecap/decoder.hpp"
#include "guidecap/errors.hpp"
#include "guidecap/optim.hpp"

namespace guidecap {

using numeric::Array;
using numeric::Graph;
using numeric::Var;

namespace {
constexpr std::uint64_t kLeftEpochTag = 50000;
constexpr std::uint64_t kRightEpochTag = 60000;
}  // namespace

std::vector<int> wrap_caption_ids(const Vocab& vocab, const std::vector<std::string>& words) {
  std::vector<int> ids;
  ids.reserve(words.size() + 2);
  ids.push_back(Vocab::kStart);
  for (const auto& w : words) ids.push_back(vocab.id_or_unk(w));
  ids.push_back(Vocab::kEnd);
  return ids;
}

std::optional<TrainingTuple> extract_tuple(const Vocab& vocab, int scene_id,
                                           const std::vector<std::string>& words, Rng& rng) {
  std::vector<int> inner;
  inner.reserve(words.size());
  for (const auto& w : words) inner.push_back(vocab.id_or_unk(w));

  std::vector<std::size_t> occurrences;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (vocab.is_object_token(inner[i])) occurrences.push_back(i);
  }
  if (occurrences.empty()) return std::nullopt;

  std::size_t pick = occurrences[static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::uint64_t>(occurrences.size())))];

  TrainingTuple t;
  t.scene_id = scene_id;
  t.left_gt.assign(inner.begin(), inner.begin() + static_cast<std::ptrdiff_t>(pick));
  t.guiding = inner[pick];
  for (std::size_t i = pick + 1; i < inner.size(); ++i) {
    if (vocab.is_object_token(inner[i])) t.s_seq.push_back(inner[i]);
  }
  t.full_caption = wrap_caption_ids(vocab, words);
  return t;
}

Var lstm_l_loss(Graph& g, const LmVars& v, const Array& features, const TrainingTuple& tuple,
                bool reverse_s) {
  if (tuple.guiding < 0) throw ContractError("training tuple has no guiding word");

  GuidingSpec spec;
  spec.s_ids = tuple.s_seq;
  spec.guiding_encode_id = tuple.guiding;
  LstmState state = encode_guidance(g, v, features, spec, reverse_s);

  // Scored right-to-left: the first target is the word adjacent to the
  // guiding word, the last is the end token standing for the sentence start.
  std::vector<int> targets(tuple.left_gt.rbegin(), tuple.left_gt.rend());
  targets.push_back(Vocab::kEnd);

  Var loss = g.softmax_cross_entropy(token_logits(g, v, state), targets[0]);
  for (std::size_t i = 1; i < targets.size(); ++i) {
    state = lstm_step(g, v, state, token_embedding(g, v, targets[i - 1]));
    loss = g.add(loss, g.softmax_cross_entropy(token_logits(g, v, state), targets[i]));
  }
  return loss;
}

Var lstm_r_masked_loss(Graph& g, const LmVars& v, const Array& features,
                       const std::vector<int>& caption, int k) {
  if (caption.size() < 2 || caption.front() != Vocab::kStart || caption.back() != Vocab::kEnd) {
    throw DataError("caption must be wrapped as <start> words... <end>");
  }
  for (std::size_t i = 1; i + 1 < caption.size(); ++i) {
    if (caption[i] == Vocab::kStart || caption[i] == Vocab::kEnd) {
      throw DataError("start/end tokens may only wrap the caption");
    }
  }
  const int t_len = static_cast<int>(caption.size()) - 2;
  if (k < -1 || k > t_len) {
    throw ContractError("mask index " + std::to_string(k) + " outside [-1, " +
                        std::to_string(t_len) + "]");
  }

  // targets[i] is the word predicted at step i; the final one is the end
  // token. Steps at or below the cut advance the state but build no loss
  // term, so nothing upstream of their predictions receives gradient.
  std::vector<int> targets(caption.begin() + 1, caption.end());
  LstmState state = initial_state(g, v, features);
  Var loss;
  bool have_term = false;
  for (int i = 0; i <= t_len; ++i) {
    if (i > 0) state = lstm_step(g, v, state, token_embedding(g, v, caption[static_cast<std::size_t>(i)]));
    if (i > k) {
      Var term = g.softmax_cross_entropy(token_logits(g, v, state),
                                         targets[static_cast<std::size_t>(i)]);
      loss = have_term ? g.add(loss, term) : term;
      have_term = true;
    }
  }
  if (!have_term) loss = g.constant(Array::zeros({1}));
  return loss;
}

Var lstm_r_full_loss(Graph& g, const LmVars& v, const Array& features,
                     const std::vector<int>& caption) {
  return lstm_r_masked_loss(g, v, features, caption, -1);
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.epochs_l < 1 || cfg.epochs_r < 1) throw ConfigError("epoch counts must be positive");
  if (cfg.base_lr <= 0.0) throw ConfigError("base_lr must be positive");
  if (cfg.lr_decay <= 0.0) throw ConfigError("lr_decay must be positive");
  if (cfg.lr_period < 1) throw ConfigError("lr_period must be positive");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (cfg.clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
}

namespace {

struct Example {
  const Scene* scene;
  std::size_t caption;
};

std::vector<Example> all_examples(const std::vector<const Scene*>& scenes) {
  std::vector<Example> out;
  for (const Scene* scene : scenes) {
    for (std::size_t c = 0; c < scene->captions.size(); ++c) out.push_back({scene, c});
  }
  return out;
}

// Per-epoch loop shared by both models: shuffle examples, realize this
// epoch's per-example work items, then take Adam steps on minibatch means.
template <typename Item, typename Realize, typename BuildLoss>
void run_epochs(LmParams& p, const std::vector<const Scene*>& scenes, const TrainConfig& cfg,
                int epochs, std::uint64_t tag, const char* name, std::ostream* loss_log,
                Realize realize, BuildLoss build_loss) {
  validate_train_config(cfg);
  if (scenes.empty()) throw DataError("training needs at least one scene");

  numeric::LrSchedule schedule{cfg.base_lr, cfg.lr_decay, cfg.lr_period};
  numeric::AdamState adam;
  adam.schedule = schedule;
  auto params = p.all();
  adam.init(params);
  std::vector<Example> examples = all_examples(scenes);
  if (examples.empty()) throw DataError("training needs at least one caption");

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, tag + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(examples);

    std::vector<Item> items;
    items.reserve(examples.size());
    for (const Example& ex : examples) realize(ex, rng, items);
    if (items.empty()) throw DataError("no caption yields a training example");

    double total = 0.0;
    for (std::size_t begin = 0; begin < items.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(items.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      Graph g;
      LmVars v = bind_lm(g, p);
      Var batch_sum;
      for (std::size_t i = begin; i < end; ++i) {
        Var loss = build_loss(g, v, items[i]);
        total += g.value(loss).at(0);
        batch_sum = i == begin ? loss : g.add(batch_sum, loss);
      }
      Var batch_mean = g.scale(batch_sum, 1.0 / static_cast<double>(end - begin));
      g.backward(batch_mean);
      numeric::clip_global_norm(params, cfg.clip_norm);
      numeric::adam_step(adam, params, epoch);
    }

    if (loss_log) {
      *loss_log << "{\"model\":\"" << name << "\",\"epoch\":" << epoch
                << ",\"lr\":" << schedule.lr_at(epoch)
                << ",\"mean_loss\":" << total / static_cast<double>(items.size()) << "}\n";
    }
  }
}

}  // namespace

void train_lstm_l(LmParams& p, const std::vector<const Scene*>& scenes, const Vocab& vocab,
                  const TrainConfig& cfg, std::ostream* loss_log) {
  struct LeftItem {
    const Scene* scene;
    TrainingTuple tuple;
  };
  run_epochs<LeftItem>(
      p, scenes, cfg, cfg.epochs_l, kLeftEpochTag, "lstm_l", loss_log,
      [&](const Example& ex, Rng& rng, std::vector<LeftItem>& items) {
        auto t = extract_tuple(vocab, ex.scene->id, ex.scene->captions[ex.caption], rng);
        if (t) items.push_back({ex.scene, std::move(*t)});
      },
      [&](Graph& g, const LmVars& v, const LeftItem& item) {
        return lstm_l_loss(g, v, Array::from_vector(item.scene->features), item.tuple,
                           cfg.reverse_s);
      });
}

void train_lstm_r(LmParams& p, const std::vector<const Scene*>& scenes, const Vocab& vocab,
                  const TrainConfig& cfg, std::ostream* loss_log) {
  run_epochs<Example>(
      p, scenes, cfg, cfg.epochs_r, kRightEpochTag, "lstm_r", loss_log,
      [&](const Example& ex, Rng&, std::vector<Example>& items) { items.push_back(ex); },
      [&](Graph& g, const LmVars& v, const Example& item) {
        return lstm_r_full_loss(g, v, Array::from_vector(item.scene->features),
                                wrap_caption_ids(vocab, item.scene->captions[item.caption]));
      });
}

}  // namespace guidecap
