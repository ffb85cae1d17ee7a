// Command-line surface for the captioning pipeline: corpus generation,
// training, captioning, evaluation, threshold sweeps, and the built-in
// verification battery. Exit codes: 0 success, 1 usage error, 2 data or
// config error, 3 selfcheck failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "guidecap/checkpoint.hpp"
#include "guidecap/classifier.hpp"
#include "guidecap/corpus.hpp"
#include "guidecap/decoder.hpp"
#include "guidecap/errors.hpp"
#include "guidecap/evalkit.hpp"
#include "guidecap/protocol.hpp"
#include "guidecap/rng.hpp"
#include "guidecap/selfcheck.hpp"
#include "guidecap/trainer.hpp"

namespace {

using namespace guidecap;

// Model geometry is recovered from the checkpoint manifest, so captioning
// needs no dimension flags.
LmParams load_lm(const std::string& path_prefix, const std::string& name_prefix) {
  auto pairs = numeric::load_checkpoint(path_prefix);
  const numeric::Array* embed = nullptr;
  const numeric::Array* image_proj = nullptr;
  for (const auto& [name, value] : pairs) {
    if (name == name_prefix + "/embed") embed = &value;
    if (name == name_prefix + "/image_proj") image_proj = &value;
  }
  if (!embed || !image_proj || embed->rank() != 2 || image_proj->rank() != 2) {
    throw DataError(path_prefix + " does not hold " + name_prefix + " parameters");
  }
  LmConfig cfg;
  cfg.vocab_size = embed->dim(0);
  cfg.embed_dim = embed->dim(1);
  cfg.feature_dim = image_proj->dim(1);
  for (const auto& [name, value] : pairs) {
    if (name == name_prefix + "/w_i") cfg.hidden_dim = value.dim(0);
  }
  LmParams p(cfg, name_prefix);
  numeric::load_checkpoint_into(path_prefix, p.all());
  return p;
}

ClassifierParams load_clf(const std::string& path_prefix) {
  auto pairs = numeric::load_checkpoint(path_prefix);
  const numeric::Array* w = nullptr;
  for (const auto& [name, value] : pairs) {
    if (name == "clf/w") w = &value;
  }
  if (!w || w->rank() != 2) throw DataError(path_prefix + " does not hold classifier parameters");
  ClassifierParams p(w->dim(0), w->dim(1));
  numeric::load_checkpoint_into(path_prefix, p.all());
  return p;
}

std::vector<const Scene*> scenes_for_split(const Corpus& corpus, const std::string& split,
                                           const std::vector<int>& explicit_ids) {
  std::vector<const Scene*> out;
  if (!explicit_ids.empty()) {
    for (int id : explicit_ids) out.push_back(&corpus.scene_by_id(id));
    return out;
  }
  const std::vector<int>* ids = nullptr;
  if (split == "train") ids = &corpus.split.train;
  else if (split == "val") ids = &corpus.split.val;
  else if (split == "test") ids = &corpus.split.test;
  else if (split != "all") throw ConfigError("unknown split " + split);
  if (ids) {
    for (int id : *ids) out.push_back(&corpus.scene_by_id(id));
  } else {
    for (const auto& s : corpus.scenes) out.push_back(&s);
  }
  return out;
}

struct GenOpts {
  std::uint64_t seed = 0;
  std::string out;
  WorldConfig world = default_world_config();
  std::vector<std::string> novel = {"zebra", "pizza"};
  double val_frac = 0.1;
  double test_frac = 0.1;
};

void run_gen_corpus(const GenOpts& o) {
  validate_world_config(o.world);
  Corpus corpus;
  corpus.scenes = generate_world(o.world, o.seed);
  corpus.split = make_novel_split(corpus.scenes, o.world.categories, o.novel, o.val_frac,
                                  o.test_frac, o.seed);
  // The vocabulary comes from the training captions alone; that is what
  // leaves the excluded objects without an embedding of their own.
  std::vector<Scene> train_scenes;
  for (int id : corpus.split.train) train_scenes.push_back(corpus.scene_by_id(id));
  corpus.vocab = build_vocab(train_scenes, o.world.min_count, o.world.categories, o.world.similar);
  save_corpus(o.out, corpus);
  std::cout << "wrote " << corpus.scenes.size() << " scenes, vocab " << corpus.vocab.size()
            << " tokens, train " << corpus.split.train.size() << "/" << corpus.split.train_full.size()
            << " val " << corpus.split.val.size() << " test " << corpus.split.test.size() << "\n";
}

struct TrainOpts {
  std::string model;
  std::string corpus;
  std::string out;
  std::string loss_log;
  std::uint64_t seed = 0;
  int epochs = -1;
  int batch_size = 16;
  double base_lr = 1e-4;
  double lr_decay = 0.1;
  int lr_period = -1;
  double clip_norm = 5.0;
  int embed_dim = 48;
  int hidden_dim = 64;
  bool no_reverse_s = false;
};

void run_train(const TrainOpts& o) {
  Corpus corpus = load_corpus(o.corpus);
  if (corpus.scenes.empty()) throw DataError("corpus has no scenes");
  std::ofstream log_file;
  std::ostream* log = nullptr;
  if (!o.loss_log.empty()) {
    log_file.open(o.loss_log, std::ios::binary);
    if (!log_file) throw DataError("cannot open " + o.loss_log + " for writing");
    log = &log_file;
  }

  if (o.model == "classifier") {
    ClassifierParams p(static_cast<int>(corpus.scenes.front().features.size()),
                       corpus.vocab.num_categories());
    ClassifierTrainConfig cfg;
    cfg.epochs = o.epochs > 0 ? o.epochs : 15;
    cfg.schedule = {o.base_lr, o.lr_decay, o.lr_period > 0 ? o.lr_period : 10};
    cfg.seed = o.seed;
    std::vector<const Scene*> pool;
    for (int id : corpus.split.train_full) pool.push_back(&corpus.scene_by_id(id));
    train_classifier(p, pool, corpus.vocab, cfg, log);
    numeric::save_checkpoint(o.out, std::as_const(p).all());
    std::cout << "wrote classifier checkpoint " << o.out << "\n";
    return;
  }

  if (o.model != "lstm-l" && o.model != "lstm-r") {
    throw ConfigError("unknown model " + o.model);
  }
  const bool left = o.model == "lstm-l";
  LmConfig mc;
  mc.vocab_size = corpus.vocab.size();
  mc.embed_dim = o.embed_dim;
  mc.hidden_dim = o.hidden_dim;
  mc.feature_dim = static_cast<int>(corpus.scenes.at(0).features.size());
  LmParams p(mc, left ? "lstm_l" : "lstm_r");
  Rng rng(mix_seed(o.seed, left ? 101 : 102));
  init_lm_params(p, rng);

  TrainConfig cfg;
  cfg.epochs_l = cfg.epochs_r = o.epochs > 0 ? o.epochs : (left ? 80 : 40);
  cfg.base_lr = o.base_lr;
  cfg.lr_decay = o.lr_decay;
  cfg.lr_period = o.lr_period > 0 ? o.lr_period : 20;
  cfg.batch_size = o.batch_size;
  cfg.clip_norm = o.clip_norm;
  cfg.seed = o.seed;
  cfg.reverse_s = !o.no_reverse_s;

  std::vector<const Scene*> pool;
  for (int id : corpus.split.train) pool.push_back(&corpus.scene_by_id(id));
  if (left) {
    train_lstm_l(p, pool, corpus.vocab, cfg, log);
  } else {
    train_lstm_r(p, pool, corpus.vocab, cfg, log);
  }
  numeric::save_checkpoint(o.out, std::as_const(p).all());
  std::cout << "wrote " << o.model << " checkpoint " << o.out << "\n";
}

struct CaptionOpts {
  std::string corpus;
  std::string lstm_l;
  std::string lstm_r;
  std::string clf;
  std::string mode = "topk";
  std::string out;
  std::string split = "test";
  std::vector<int> scene_ids;
  std::string guiding;
  std::vector<std::string> s_seq;
  int k = 5;
  double p_o = 0.5;
  bool novel_first = false;
  DecodeConfig decode;
  bool no_reverse_s = false;
};

void run_caption(const CaptionOpts& o) {
  Corpus corpus = load_corpus(o.corpus);
  DecodeConfig cfg = o.decode;
  cfg.reverse_s = !o.no_reverse_s;
  validate_decode_config(cfg);

  if (o.lstm_r.empty()) throw ConfigError("caption needs --lstm-r");
  LmParams lstm_r = load_lm(o.lstm_r, "lstm_r");
  std::optional<LmParams> lstm_l;
  if (!o.lstm_l.empty()) lstm_l.emplace(load_lm(o.lstm_l, "lstm_l"));
  std::optional<ClassifierParams> clf;
  if (!o.clf.empty()) clf.emplace(load_clf(o.clf));

  const bool needs_l = o.mode != "unguided";
  const bool needs_clf = o.mode == "topk" || o.mode == "threshold" || o.mode == "diversity";
  if (needs_l && !lstm_l) throw ConfigError(o.mode + " mode needs --lstm-l");
  if (needs_clf && !clf) throw ConfigError(o.mode + " mode needs --clf");

  std::vector<CaptionRecord> records;
  for (const Scene* scene : scenes_for_split(corpus, o.split, o.scene_ids)) {
    if (o.mode == "guided") {
      if (o.guiding.empty()) throw ConfigError("guided mode needs --guiding");
      records.push_back(
          caption_guided(*lstm_l, lstm_r, corpus.vocab, *scene, o.s_seq, o.guiding, cfg));
    } else if (o.mode == "unguided") {
      records.push_back(caption_plain(lstm_r, corpus.vocab, *scene, cfg));
    } else if (o.mode == "topk") {
      auto batch = caption_topk(*lstm_l, lstm_r, *clf, corpus.vocab, *scene, o.k, cfg);
      records.insert(records.end(), batch.begin(), batch.end());
    } else if (o.mode == "threshold") {
      records.push_back(caption_threshold(*lstm_l, lstm_r, *clf, corpus.vocab, *scene, o.p_o,
                                          o.novel_first, cfg));
    } else if (o.mode == "diversity") {
      auto batch = caption_diversity(*lstm_l, lstm_r, *clf, corpus.vocab, *scene, cfg);
      records.insert(records.end(), batch.begin(), batch.end());
    } else {
      throw ConfigError("unknown mode " + o.mode);
    }
  }
  save_caption_records(o.out, records);
  std::cout << "wrote " << records.size() << " caption records to " << o.out << "\n";
}

struct EvalOpts {
  std::string predictions;
  std::string corpus;
  std::string report;
  std::string csv;
  bool novel = false;
};

void run_evaluate(const EvalOpts& o) {
  Corpus corpus = load_corpus(o.corpus);
  auto records = load_caption_records(o.predictions);
  if (records.empty()) throw DataError("no caption records in " + o.predictions);

  std::map<int, DescriptionSet> sets;
  std::map<std::pair<int, std::string>, std::vector<std::vector<std::string>>> per_guiding;
  for (const auto& rec : records) {
    const Scene& scene = corpus.scene_by_id(rec.scene_id);  // unknown id -> DataError
    auto& set = sets[scene.id];
    set.scene_id = scene.id;
    set.captions.push_back(rec.surface);
    if (!rec.guiding.empty()) per_guiding[{scene.id, rec.guiding}].push_back(rec.surface);
  }
  std::vector<DescriptionSet> set_list;
  std::map<int, std::vector<std::string>> labels;
  for (const auto& [id, set] : sets) {
    set_list.push_back(set);
    labels[id] = corpus.scene_by_id(id).detection_labels();
  }

  MetricReport report;
  report.avg_num = avg_num(set_list, corpus.vocab);
  RecallReport rec = category_recall(set_list, labels);
  report.avg_recall = rec.macro;
  report.per_category_recall = rec.per_category;
  if (!per_guiding.empty()) {
    double total = 0.0;
    for (const auto& [key, captions] : per_guiding) total += uniqueness(captions);
    report.uniqueness = total / static_cast<double>(per_guiding.size());
  }

  if (o.novel) {
    if (corpus.split.novel_objects.empty()) throw DataError("corpus split has no novel objects");
    std::vector<std::string> inventory;
    for (const auto& cat : corpus.vocab.categories()) inventory.push_back(cat.surface);
    std::map<int, std::vector<std::string>> predictions;
    std::map<int, std::set<std::string>> caption_labels;
    for (const auto& record : records) {
      if (predictions.count(record.scene_id)) {
        throw DataError("novel F1 needs exactly one caption per scene");
      }
      predictions[record.scene_id] = record.surface;
      caption_labels[record.scene_id] =
          mentioned_categories(corpus.scene_by_id(record.scene_id), inventory);
    }
    F1Report f1 = novel_f1(predictions, caption_labels, corpus.split.novel_objects);
    report.macro_f1 = f1.macro;
    report.per_category_f1 = f1.per_category;
  }

  save_report(o.report, report);
  if (!o.csv.empty()) save_report_csv(o.csv, report);
  std::cout << "avg_num " << report.avg_num << " avg_recall " << report.avg_recall << " macro_f1 "
            << report.macro_f1 << " uniqueness " << report.uniqueness << "\n";
}

struct SweepOpts {
  std::string corpus;
  std::string lstm_l;
  std::string lstm_r;
  std::string clf;
  std::string out;
  std::string split = "val";
  std::vector<double> grid = {0.1, 0.3, 0.5, 0.7, 0.9};
  bool novel_first = true;
  DecodeConfig decode;
};

void run_sweep(const SweepOpts& o) {
  Corpus corpus = load_corpus(o.corpus);
  LmParams lstm_l = load_lm(o.lstm_l, "lstm_l");
  LmParams lstm_r = load_lm(o.lstm_r, "lstm_r");
  ClassifierParams clf = load_clf(o.clf);
  if (corpus.split.novel_objects.empty()) throw DataError("corpus split has no novel objects");

  std::vector<std::string> inventory;
  for (const auto& cat : corpus.vocab.categories()) inventory.push_back(cat.surface);
  auto scenes = scenes_for_split(corpus, o.split, {});
  if (scenes.empty()) throw DataError("split " + o.split + " is empty");

  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw DataError("cannot open " + o.out + " for writing");
  double best_f1 = -1.0;
  double best_p = 0.0;
  for (double p_o : o.grid) {
    std::map<int, std::vector<std::string>> predictions;
    std::map<int, std::set<std::string>> labels;
    for (const Scene* scene : scenes) {
      CaptionRecord rec = caption_threshold(lstm_l, lstm_r, clf, corpus.vocab, *scene, p_o,
                                            o.novel_first, o.decode);
      predictions[scene->id] = rec.surface;
      labels[scene->id] = mentioned_categories(*scene, inventory);
    }
    F1Report f1 = novel_f1(predictions, labels, corpus.split.novel_objects);
    out << "{\"p_o\":" << p_o << ",\"macro_f1\":" << f1.macro << "}\n";
    if (f1.macro > best_f1) {
      best_f1 = f1.macro;
      best_p = p_o;
    }
  }
  if (!out) throw DataError("failed writing " + o.out);
  std::cout << "best p_o " << best_p << " macro_f1 " << best_f1 << "\n";
}

int run_selfcheck_cmd(std::uint64_t seed) {
  auto results = run_selfchecks(seed);
  for (const auto& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
  }
  return all_passed(results) ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guided caption generation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // parent options (--config) may follow the subcommand name
  app.set_config("--config")->envname("GUIDECAP_CONFIG");

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  gen_cmd->add_option("--seed", gen.seed, "generation seed");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--scenes", gen.world.scenes, "number of scenes");
  gen_cmd->add_option("--captions-per-scene", gen.world.captions_per_scene, "captions per scene");
  gen_cmd->add_option("--min-objects", gen.world.min_objects, "min objects per scene");
  gen_cmd->add_option("--max-objects", gen.world.max_objects, "max objects per scene");
  gen_cmd->add_option("--feature-dim", gen.world.feature_dim, "feature vector length");
  gen_cmd->add_option("--feature-scale", gen.world.feature_scale, "feature signal scale");
  gen_cmd->add_option("--feature-noise", gen.world.feature_noise, "feature noise stddev");
  gen_cmd->add_option("--min-count", gen.world.min_count, "vocabulary frequency cutoff");
  gen_cmd->add_option("--novel", gen.novel, "categories excluded from LM training");
  gen_cmd->add_option("--val-frac", gen.val_frac, "validation fraction");
  gen_cmd->add_option("--test-frac", gen.test_frac, "test fraction");
  gen_cmd->callback([&]() { run_gen_corpus(gen); });

  TrainOpts train;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--model", train.model, "lstm-l | lstm-r | classifier")->required();
  train_cmd->add_option("--corpus", train.corpus, "corpus directory")->required();
  train_cmd->add_option("--out", train.out, "checkpoint prefix")->required();
  train_cmd->add_option("--loss-log", train.loss_log, "JSONL loss log path");
  train_cmd->add_option("--seed", train.seed, "training seed");
  train_cmd->add_option("--epochs", train.epochs, "epoch count (default per model)");
  train_cmd->add_option("--batch-size", train.batch_size, "minibatch size");
  train_cmd->add_option("--lr", train.base_lr, "base learning rate");
  train_cmd->add_option("--lr-decay", train.lr_decay, "decay factor");
  train_cmd->add_option("--lr-period", train.lr_period, "epochs per decay step");
  train_cmd->add_option("--clip", train.clip_norm, "global gradient norm cap");
  train_cmd->add_option("--embed-dim", train.embed_dim, "embedding width");
  train_cmd->add_option("--hidden-dim", train.hidden_dim, "hidden width");
  train_cmd->add_flag("--no-reverse-s", train.no_reverse_s, "feed S front-to-back");
  train_cmd->callback([&]() { run_train(train); });

  CaptionOpts cap;
  auto* cap_cmd = app.add_subcommand("caption", "generate captions");
  cap_cmd->add_option("--corpus", cap.corpus, "corpus directory")->required();
  cap_cmd->add_option("--lstm-l", cap.lstm_l, "left model checkpoint prefix");
  cap_cmd->add_option("--lstm-r", cap.lstm_r, "right model checkpoint prefix")->required();
  cap_cmd->add_option("--clf", cap.clf, "classifier checkpoint prefix");
  cap_cmd->add_option("--mode", cap.mode, "guided | unguided | topk | threshold | diversity");
  cap_cmd->add_option("--out", cap.out, "output records path")->required();
  cap_cmd->add_option("--split", cap.split, "train | val | test | all");
  cap_cmd->add_option("--scene", cap.scene_ids, "explicit scene ids");
  cap_cmd->add_option("--guiding", cap.guiding, "guiding word for guided mode");
  cap_cmd->add_option("--s-seq", cap.s_seq, "conditioning objects for guided mode");
  cap_cmd->add_option("--k", cap.k, "top-k category count");
  cap_cmd->add_option("--p-o", cap.p_o, "threshold probability");
  cap_cmd->add_flag("--novel-first", cap.novel_first, "threshold over novel candidates only");
  cap_cmd->add_option("--beam", cap.decode.beam, "beam width");
  cap_cmd->add_option("--max-left", cap.decode.max_left, "left generation cap");
  cap_cmd->add_option("--max-right", cap.decode.max_right, "right generation cap");
  cap_cmd->add_option("--max-unguided", cap.decode.max_unguided, "unguided generation cap");
  cap_cmd->add_flag("--no-reverse-s", cap.no_reverse_s, "feed S front-to-back");
  cap_cmd->callback([&]() { run_caption(cap); });

  EvalOpts eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "score caption records");
  eval_cmd->add_option("--predictions", eval.predictions, "caption records path")->required();
  eval_cmd->add_option("--corpus", eval.corpus, "corpus directory")->required();
  eval_cmd->add_option("--report", eval.report, "metric report output path")->required();
  eval_cmd->add_option("--csv", eval.csv, "optional CSV output path");
  eval_cmd->add_flag("--novel-f1", eval.novel, "also score novel-object F1 (one record per scene)");
  eval_cmd->callback([&]() { run_evaluate(eval); });

  SweepOpts sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-threshold", "tune p_o for novel F1");
  sweep_cmd->add_option("--corpus", sweep.corpus, "corpus directory")->required();
  sweep_cmd->add_option("--lstm-l", sweep.lstm_l, "left model checkpoint prefix")->required();
  sweep_cmd->add_option("--lstm-r", sweep.lstm_r, "right model checkpoint prefix")->required();
  sweep_cmd->add_option("--clf", sweep.clf, "classifier checkpoint prefix")->required();
  sweep_cmd->add_option("--out", sweep.out, "sweep results path")->required();
  sweep_cmd->add_option("--split", sweep.split, "split to tune on");
  sweep_cmd->add_option("--grid", sweep.grid, "p_o values to try");
  sweep_cmd->add_flag("--novel-first,!--no-novel-first", sweep.novel_first,
                      "threshold over novel candidates only (on by default)");
  sweep_cmd->add_option("--beam", sweep.decode.beam, "beam width");
  sweep_cmd->callback([&]() { run_sweep(sweep); });

  std::uint64_t selfcheck_seed = 0;
  int exit_code = 0;
  auto* check_cmd = app.add_subcommand("selfcheck", "run the built-in verification battery");
  check_cmd->add_option("--seed", selfcheck_seed, "battery seed");
  check_cmd->callback([&]() { exit_code = run_selfcheck_cmd(selfcheck_seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const guidecap::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}
