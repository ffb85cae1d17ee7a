#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "guidecap/errors.hpp"
#include "guidecap/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/hand_lstm.hpp"

using namespace guidecap;
using numeric::Array;
using numeric::Graph;
using numeric::Var;
using testing_support::hand_embed_row;
using testing_support::hand_image_start;
using testing_support::hand_log_softmax;
using testing_support::hand_logits;
using testing_support::hand_step;
using testing_support::HandState;

namespace {

// Three object categories, all in vocabulary. Token ids: specials 0..2, then
// a=3 and=4 cat=5 couch=6 dog=7 on=8.
Vocab trainer_vocab() {
  Scene s;
  s.id = 0;
  s.objects = {"dog", "cat", "couch"};
  s.features = {0.0};
  s.captions = {{"a", "dog", "and", "a", "cat", "on", "a", "couch"}};
  return build_vocab({s}, 1, {"dog", "cat", "couch"},
                     {{"dog", "cat"}, {"cat", "dog"}, {"couch", "cat"}});
}

LmParams model_for(const Vocab& vocab, std::uint64_t seed, bool randomize, double gain = 1.0) {
  LmConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.feature_dim = 2;
  LmParams p(cfg, "m");
  if (randomize) {
    Rng rng(seed);
    init_lm_params(p, rng);
    for (auto* prm : p.all()) {
      for (std::size_t i = 0; i < prm->value.numel(); ++i) prm->value.data()[i] *= gain;
    }
  }
  return p;
}

// Reference value of the full (or masked) left-to-right loss: one term per
// inner word plus the end token, skipping terms at or below the cut.
std::vector<double> hand_right_terms(const LmParams& p, const std::vector<double>& feat,
                                     const std::vector<int>& caption) {
  std::vector<int> targets(caption.begin() + 1, caption.end());
  std::vector<double> terms;
  HandState st = hand_image_start(p, feat);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (i > 0) st = hand_step(p, st, hand_embed_row(p, caption[i]));
    const auto lp = hand_log_softmax(hand_logits(p, st));
    terms.push_back(-lp[static_cast<std::size_t>(targets[i])]);
  }
  return terms;
}

double hand_left_loss(const LmParams& p, const std::vector<double>& feat, const TrainingTuple& t,
                      bool reverse_s) {
  HandState st = hand_image_start(p, feat);
  std::vector<int> s_order = t.s_seq;
  if (reverse_s) std::reverse(s_order.begin(), s_order.end());
  for (int id : s_order) st = hand_step(p, st, hand_embed_row(p, id));
  st = hand_step(p, st, hand_embed_row(p, t.guiding));

  std::vector<int> targets(t.left_gt.rbegin(), t.left_gt.rend());
  targets.push_back(Vocab::kEnd);
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (i > 0) st = hand_step(p, st, hand_embed_row(p, targets[i - 1]));
    const auto lp = hand_log_softmax(hand_logits(p, st));
    loss -= lp[static_cast<std::size_t>(targets[i])];
  }
  return loss;
}

std::vector<double> parse_mean_losses(const std::string& log, const std::string& model) {
  std::vector<double> out;
  std::istringstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    REQUIRE(line.find("\"model\":\"" + model + "\"") != std::string::npos);
    auto pos = line.find("\"mean_loss\":");
    REQUIRE(pos != std::string::npos);
    out.push_back(std::stod(line.substr(pos + 12)));
  }
  return out;
}

}  // namespace

TEST_CASE("tuple extraction splits a caption around the chosen object occurrence") {
  Vocab vocab = trainer_vocab();
  std::vector<std::string> words = {"a", "dog", "and", "a", "cat", "on", "a", "couch"};
  const int a = vocab.id_of("a"), nd = vocab.id_of("and"), dog = vocab.id_of("dog"),
            cat = vocab.id_of("cat"), couch = vocab.id_of("couch");

  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    Rng rng(seed);
    auto t = extract_tuple(vocab, 42, words, rng);
    REQUIRE(t.has_value());
    CHECK(t->scene_id == 42);
    CHECK(t->full_caption == wrap_caption_ids(vocab, words));
    CHECK(t->k() == static_cast<int>(t->left_gt.size()));
    seen.insert(t->guiding);
    if (t->guiding == cat) {
      CHECK(t->left_gt == std::vector<int>{a, dog, nd, a});
      CHECK(t->s_seq == std::vector<int>{couch});
    } else if (t->guiding == dog) {
      CHECK(t->left_gt == std::vector<int>{a});
      CHECK(t->s_seq == std::vector<int>{cat, couch});
    } else {
      REQUIRE(t->guiding == couch);
      CHECK(t->left_gt == std::vector<int>{a, dog, nd, a, cat, vocab.id_of("on"), a});
      CHECK(t->s_seq.empty());
    }
  }
  CHECK(seen == std::set<int>{cat, couch, dog});

  Rng rng(1);
  CHECK_FALSE(extract_tuple(vocab, 0, {"a", "on", "a"}, rng).has_value());

  // Unknown words map to <unk> and are not object tokens.
  auto t = extract_tuple(vocab, 0, {"weird", "dog"}, rng);
  REQUIRE(t.has_value());
  CHECK(t->left_gt == std::vector<int>{Vocab::kUnk});
  CHECK(t->guiding == dog);
}

TEST_CASE("occurrence choice is uniform across the caption's object tokens") {
  Vocab vocab = trainer_vocab();
  std::vector<std::string> words = {"a", "dog", "and", "a", "cat", "on", "a", "couch"};
  std::map<int, int> counts;
  Rng rng(99);
  const int n = 3000;
  for (int i = 0; i < n; ++i) {
    auto t = extract_tuple(vocab, 0, words, rng);
    REQUIRE(t.has_value());
    counts[t->guiding] += 1;
  }
  REQUIRE(counts.size() == 3);
  const double expected = n / 3.0;
  double chi2 = 0.0;
  for (const auto& [id, c] : counts) {
    const double d = c - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 9.21);  // df = 2, p = 0.01
}

TEST_CASE("zero parameters give the uniform-model loss values exactly") {
  Vocab vocab = trainer_vocab();
  LmParams p = model_for(vocab, 0, false);
  const double lnv = std::log(static_cast<double>(vocab.size()));
  Array feat = Array::from_vector({0.5, -0.25});

  TrainingTuple t;
  t.left_gt = {3, 7, 4, 3};
  t.guiding = 5;
  t.s_seq = {6};
  {
    Graph g;
    LmVars v = bind_lm(g, p);
    CHECK(g.value(lstm_l_loss(g, v, feat, t, true)).at(0) == doctest::Approx(5.0 * lnv).epsilon(1e-12));
  }
  TrainingTuple empty_left;
  empty_left.guiding = 5;
  {
    Graph g;
    LmVars v = bind_lm(g, p);
    CHECK(g.value(lstm_l_loss(g, v, feat, empty_left, true)).at(0) == doctest::Approx(lnv).epsilon(1e-12));
  }
  {
    Graph g;
    LmVars v = bind_lm(g, p);
    std::vector<int> caption = {Vocab::kStart, 3, 7, 4, 3, 5, 8, 3, 6, Vocab::kEnd};
    CHECK(g.value(lstm_r_full_loss(g, v, feat, caption)).at(0) == doctest::Approx(9.0 * lnv).epsilon(1e-12));
  }
  {
    Graph g;
    LmVars v = bind_lm(g, p);
    std::vector<int> caption = {Vocab::kStart, Vocab::kEnd};
    CHECK(g.value(lstm_r_full_loss(g, v, feat, caption)).at(0) == doctest::Approx(lnv).epsilon(1e-12));
  }
}

TEST_CASE("losses match an independent plain-loop computation") {
  Vocab vocab = trainer_vocab();
  LmParams p = model_for(vocab, 314, true);
  std::vector<double> feat = {0.3, -0.7};
  Array feat_a = Array::from_vector(feat);

  std::vector<int> caption = {Vocab::kStart, 3, 7, 4, 5, 8, 6, Vocab::kEnd};
  const auto terms = hand_right_terms(p, feat, caption);
  const int t_len = static_cast<int>(caption.size()) - 2;
  REQUIRE(static_cast<int>(terms.size()) == t_len + 1);

  double full_sum = 0.0;
  for (double x : terms) full_sum += x;
  double full_value = 0.0;
  {
    Graph g;
    LmVars v = bind_lm(g, p);
    full_value = g.value(lstm_r_full_loss(g, v, feat_a, caption)).at(0);
    CHECK(full_value == doctest::Approx(full_sum).epsilon(1e-10));
  }

  for (int k = -1; k <= t_len; ++k) {
    Graph g;
    LmVars v = bind_lm(g, p);
    const double masked = g.value(lstm_r_masked_loss(g, v, feat_a, caption, k)).at(0);
    double tail = 0.0, head = 0.0;
    for (int i = 0; i <= t_len; ++i) (i > k ? tail : head) += terms[static_cast<std::size_t>(i)];
    CHECK(masked == doctest::Approx(tail).epsilon(1e-10));
    // The unmasked loss splits exactly into head and tail at every cut.
    CHECK(masked + head == doctest::Approx(full_value).epsilon(1e-10));
  }
  {
    Graph g;
    LmVars v = bind_lm(g, p);
    CHECK(g.value(lstm_r_masked_loss(g, v, feat_a, caption, -1)).at(0) == full_value);
    CHECK(g.value(lstm_r_masked_loss(g, v, feat_a, caption, t_len)).at(0) == 0.0);
  }

  TrainingTuple t;
  t.left_gt = {3, 7, 4};
  t.guiding = 5;
  t.s_seq = {8, 6};
  for (bool rev : {true, false}) {
    Graph g;
    LmVars v = bind_lm(g, p);
    CHECK(g.value(lstm_l_loss(g, v, feat_a, t, rev)).at(0) ==
          doctest::Approx(hand_left_loss(p, feat, t, rev)).epsilon(1e-10));
  }
  // Feeding the object sequence back-to-front is a different conditioning.
  CHECK(hand_left_loss(p, feat, t, true) != hand_left_loss(p, feat, t, false));
}

TEST_CASE("conditioning steps make predictions that receive no gradient") {
  Vocab vocab = trainer_vocab();
  LmParams p = model_for(vocab, 21, true);
  Array feat = Array::from_vector({0.1, 0.9});
  TrainingTuple t;
  t.left_gt = {3, 7};
  t.guiding = 5;
  t.s_seq = {6, 8};

  // Replica of the left loss that also materializes the logits a decoder
  // would read at each conditioning step. They must stay off the loss path.
  Graph g;
  LmVars v = bind_lm(g, p);
  LstmState st = initial_state(g, v, feat);
  std::vector<Var> cond_preds;
  std::vector<int> encode_order = {8, 6, 5};  // reversed s_seq, then guiding
  for (int id : encode_order) {
    cond_preds.push_back(token_logits(g, v, st));
    st = lstm_step(g, v, st, token_embedding(g, v, id));
  }
  std::vector<int> targets = {7, 3, Vocab::kEnd};
  Var loss = g.softmax_cross_entropy(token_logits(g, v, st), targets[0]);
  for (std::size_t i = 1; i < targets.size(); ++i) {
    st = lstm_step(g, v, st, token_embedding(g, v, targets[i - 1]));
    loss = g.add(loss, g.softmax_cross_entropy(token_logits(g, v, st), targets[i]));
  }
  {
    Graph g2;
    LmVars v2 = bind_lm(g2, p);
    CHECK(g.value(loss).at(0) == g2.value(lstm_l_loss(g2, v2, feat, t, true)).at(0));
  }
  g.backward(loss);
  for (Var pred : cond_preds) CHECK(g.grad(pred).numel() == 0);

  // A fully masked loss is a constant, so every parameter gradient is zero.
  Graph g3;
  LmVars v3 = bind_lm(g3, p);
  std::vector<int> caption = {Vocab::kStart, 3, 7, Vocab::kEnd};
  Var zero = lstm_r_masked_loss(g3, v3, feat, caption, 2);
  g3.backward(zero);
  for (const auto* prm : const_cast<const LmParams&>(p).all()) {
    for (std::size_t i = 0; i < prm->grad.numel(); ++i) CHECK(prm->grad.data()[i] == 0.0);
  }
}

TEST_CASE("loss gradients agree with finite differences") {
  Vocab vocab = trainer_vocab();
  // Boosted init keeps every gradient path above the probe's noise floor;
  // training-scale weights leave long recurrence chains numerically dead.
  LmParams p = model_for(vocab, 2718, true, 4.0);
  Array feat = Array::from_vector({-0.4, 0.6});
  TrainingTuple t;
  t.left_gt = {3, 7, 4};
  t.guiding = 5;
  t.s_seq = {6};
  std::vector<int> caption = {Vocab::kStart, 3, 5, 8, 6, Vocab::kEnd};

  // Wider probe step than the primitive checks: these losses sum many cross
  // entropy terms, so cancellation noise at h = 1e-4 would drown small
  // coordinates.
  auto run = [&](const std::function<Var(Graph&, const LmVars&)>& make) {
    return testing_support::finite_diff_check(
        p.all(),
        [&](Graph& g) {
          LmVars v = bind_lm(g, p);
          return make(g, v);
        },
        1e-3, 1e-4);
  };

  auto r = run([&](Graph& g, const LmVars& v) { return lstm_l_loss(g, v, feat, t, true); });
  CHECK(r.total > 200);
  CHECK(r.over_tol == 0);
  CHECK(r.max_rel < 1e-3);

  r = run([&](Graph& g, const LmVars& v) { return lstm_r_full_loss(g, v, feat, caption); });
  CHECK(r.over_tol == 0);
  CHECK(r.max_rel < 1e-3);

  r = run([&](Graph& g, const LmVars& v) { return lstm_r_masked_loss(g, v, feat, caption, 2); });
  CHECK(r.over_tol == 0);
  CHECK(r.max_rel < 1e-3);
}

TEST_CASE("loss and tuple preconditions are enforced") {
  Vocab vocab = trainer_vocab();
  LmParams p = model_for(vocab, 1, true);
  Array feat = Array::from_vector({0.0, 0.0});
  Graph g;
  LmVars v = bind_lm(g, p);

  std::vector<int> caption = {Vocab::kStart, 3, 7, Vocab::kEnd};
  CHECK_THROWS_AS(lstm_r_masked_loss(g, v, feat, caption, -2), ContractError);
  CHECK_THROWS_AS(lstm_r_masked_loss(g, v, feat, caption, 3), ContractError);
  CHECK_THROWS_AS(lstm_r_full_loss(g, v, feat, {}), DataError);
  CHECK_THROWS_AS(lstm_r_full_loss(g, v, feat, {Vocab::kStart, 3}), DataError);
  CHECK_THROWS_AS(lstm_r_full_loss(g, v, feat, {3, 7, Vocab::kEnd}), DataError);
  CHECK_THROWS_AS(lstm_r_full_loss(g, v, feat, {Vocab::kStart, Vocab::kEnd, Vocab::kEnd}), DataError);

  TrainingTuple bad;
  CHECK_THROWS_AS(lstm_l_loss(g, v, feat, bad, true), ContractError);

  TrainConfig cfg;
  cfg.epochs_l = 0;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.clip_norm = 0.0;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.base_lr = 0.0;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);

  LmParams q = model_for(vocab, 1, true);
  CHECK_THROWS_AS(train_lstm_r(q, {}, vocab, TrainConfig{}, nullptr), DataError);
}

TEST_CASE("training reduces the loss and is reproducible bit for bit") {
  WorldConfig wc = default_world_config();
  wc.scenes = 40;
  auto scenes = generate_world(wc, 11);
  Vocab vocab = build_vocab(scenes, wc.min_count, wc.categories, wc.similar);
  std::vector<const Scene*> ptrs;
  for (const auto& s : scenes) ptrs.push_back(&s);

  LmConfig mc;
  mc.vocab_size = vocab.size();
  mc.embed_dim = 16;
  mc.hidden_dim = 24;
  mc.feature_dim = wc.feature_dim;

  TrainConfig tc;
  tc.epochs_l = 5;
  tc.epochs_r = 5;
  tc.base_lr = 1e-3;
  tc.seed = 21;

  auto fresh = [&](const char* prefix) {
    LmParams p(mc, prefix);
    Rng rng(5);
    init_lm_params(p, rng);
    return p;
  };

  LmParams pl = fresh("lstm_l");
  std::ostringstream log_l;
  train_lstm_l(pl, ptrs, vocab, tc, &log_l);
  auto losses_l = parse_mean_losses(log_l.str(), "lstm_l");
  REQUIRE(losses_l.size() == 5);
  for (std::size_t i = 1; i < losses_l.size(); ++i) CHECK(losses_l[i] < losses_l[i - 1]);
  CHECK(log_l.str().find("\"lr\":0.001") != std::string::npos);

  LmParams pr = fresh("lstm_r");
  std::ostringstream log_r;
  train_lstm_r(pr, ptrs, vocab, tc, &log_r);
  auto losses_r = parse_mean_losses(log_r.str(), "lstm_r");
  REQUIRE(losses_r.size() == 5);
  for (std::size_t i = 1; i < losses_r.size(); ++i) CHECK(losses_r[i] < losses_r[i - 1]);

  // Same data, same seed: identical parameters and identical log.
  LmParams pl2 = fresh("lstm_l");
  std::ostringstream log_l2;
  train_lstm_l(pl2, ptrs, vocab, tc, &log_l2);
  CHECK(log_l2.str() == log_l.str());
  auto a = const_cast<const LmParams&>(pl).all();
  auto b = const_cast<const LmParams&>(pl2).all();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i]->value.numel() == b[i]->value.numel());
    for (std::size_t j = 0; j < a[i]->value.numel(); ++j) {
      CHECK(a[i]->value.data()[j] == b[i]->value.data()[j]);
    }
  }
}
