// Python surface for the captioning pipeline. Mirrors the CLI's layering:
// corpus generation, the two language models plus the object classifier,
// guided decoding, metric kernels, checkpoints, and the verification battery.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <utility>

#include "guidecap/checkpoint.hpp"
#include "guidecap/classifier.hpp"
#include "guidecap/corpus.hpp"
#include "guidecap/decoder.hpp"
#include "guidecap/errors.hpp"
#include "guidecap/evalkit.hpp"
#include "guidecap/lstm.hpp"
#include "guidecap/protocol.hpp"
#include "guidecap/rng.hpp"
#include "guidecap/selfcheck.hpp"
#include "guidecap/trainer.hpp"

namespace py = pybind11;
using namespace guidecap;

namespace {

// Model geometry is recovered from the checkpoint manifest, so loading needs
// no dimension arguments. Same inference as the CLI's loaders.
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

ClassifierParams load_classifier(const std::string& path_prefix) {
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

std::vector<const Scene*> scene_ptrs(const std::vector<Scene>& scenes) {
  std::vector<const Scene*> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(&s);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Captioning pipeline core: synthetic corpus, left/right language "
            "models, object classifier, guided decoding, metrics.";
  m.attr("__version__") = "0.1.0";

  // Translators run newest-first, so the base class goes in first.
  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<ParseError>(m, "ParseError", base);

  // World and corpus.
  py::class_<WorldConfig>(m, "WorldConfig")
      .def(py::init<>())
      .def_readwrite("categories", &WorldConfig::categories)
      .def_readwrite("similar", &WorldConfig::similar)
      .def_readwrite("salient", &WorldConfig::salient)
      .def_readwrite("fillers", &WorldConfig::fillers)
      .def_readwrite("templates", &WorldConfig::templates)
      .def_readwrite("scenes", &WorldConfig::scenes)
      .def_readwrite("captions_per_scene", &WorldConfig::captions_per_scene)
      .def_readwrite("min_objects", &WorldConfig::min_objects)
      .def_readwrite("max_objects", &WorldConfig::max_objects)
      .def_readwrite("feature_dim", &WorldConfig::feature_dim)
      .def_readwrite("feature_scale", &WorldConfig::feature_scale)
      .def_readwrite("feature_noise", &WorldConfig::feature_noise)
      .def_readwrite("max_caption_len", &WorldConfig::max_caption_len)
      .def_readwrite("min_count", &WorldConfig::min_count);
  m.def("default_world_config", &default_world_config);
  m.def("validate_world_config", &validate_world_config, py::arg("config"));

  py::class_<Scene>(m, "Scene")
      .def(py::init<>())
      .def_readwrite("id", &Scene::id)
      .def_readwrite("objects", &Scene::objects)
      .def_readwrite("features", &Scene::features)
      .def_readwrite("captions", &Scene::captions)
      .def("detection_labels", &Scene::detection_labels,
           "Presence ground truth: the object set itself.");
  m.def("generate_world", &generate_world, py::arg("config"), py::arg("seed"));
  m.def("generate_scene", &generate_scene, py::arg("config"), py::arg("seed"), py::arg("scene_id"));
  m.def("mentioned_categories", &mentioned_categories, py::arg("scene"), py::arg("inventory"),
        "Category surfaces mentioned anywhere in the scene's captions.");

  py::class_<CategoryEntry>(m, "CategoryEntry")
      .def_readwrite("surface", &CategoryEntry::surface)
      .def_readwrite("vocab_id", &CategoryEntry::vocab_id)
      .def_readwrite("similar", &CategoryEntry::similar);

  py::class_<Vocab> vocab(m, "Vocab");
  vocab.def("size", &Vocab::size)
      .def("min_count", &Vocab::min_count)
      .def("id_of", &Vocab::id_of, py::arg("surface"))
      .def("id_or_unk", &Vocab::id_or_unk, py::arg("surface"))
      .def("surface_of", &Vocab::surface_of, py::arg("id"))
      .def("is_special", &Vocab::is_special, py::arg("id"))
      .def("tokens", &Vocab::tokens)
      .def("categories", &Vocab::categories)
      .def("num_categories", &Vocab::num_categories)
      .def("category_index", &Vocab::category_index, py::arg("surface"))
      .def("object_ids", &Vocab::object_ids)
      .def("is_object_token", &Vocab::is_object_token, py::arg("id"))
      .def("novel_candidates", &Vocab::novel_candidates,
           "Registered categories whose surface has no vocabulary id.");
  vocab.attr("START") = int(Vocab::kStart);
  vocab.attr("END") = int(Vocab::kEnd);
  vocab.attr("UNK") = int(Vocab::kUnk);
  m.def("build_vocab", &build_vocab, py::arg("scenes"), py::arg("min_count"), py::arg("inventory"),
        py::arg("similar"),
        "Vocabulary over the given scenes' captions; categories never reaching "
        "min_count become novel candidates.");

  py::class_<DatasetSplit>(m, "DatasetSplit")
      .def(py::init<>())
      .def_readwrite("train", &DatasetSplit::train)
      .def_readwrite("train_full", &DatasetSplit::train_full)
      .def_readwrite("val", &DatasetSplit::val)
      .def_readwrite("test", &DatasetSplit::test)
      .def_readwrite("novel_objects", &DatasetSplit::novel_objects);
  m.def("make_novel_split", &make_novel_split, py::arg("scenes"), py::arg("inventory"),
        py::arg("novel"), py::arg("val_frac"), py::arg("test_frac"), py::arg("seed"),
        "Seeded split; train drops scenes whose captions mention a novel object, "
        "train_full keeps them.");

  py::class_<Corpus>(m, "Corpus")
      .def(py::init<>())
      .def_readwrite("scenes", &Corpus::scenes)
      .def_readwrite("vocab", &Corpus::vocab)
      .def_readwrite("split", &Corpus::split)
      .def("scene_by_id", &Corpus::scene_by_id, py::arg("id"),
           py::return_value_policy::copy);
  m.def("save_corpus", &save_corpus, py::arg("dir"), py::arg("corpus"));
  m.def("load_corpus", &load_corpus, py::arg("dir"));

  // Models.
  py::class_<LmConfig>(m, "LmConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &LmConfig::vocab_size)
      .def_readwrite("embed_dim", &LmConfig::embed_dim)
      .def_readwrite("hidden_dim", &LmConfig::hidden_dim)
      .def_readwrite("feature_dim", &LmConfig::feature_dim);

  py::class_<LmParams>(m, "LmParams")
      .def(py::init<const LmConfig&, const std::string&>(), py::arg("config"), py::arg("prefix"),
           "prefix namespaces checkpoint tensor names; the two decoding "
           "directions use 'lstm_l' and 'lstm_r'.")
      .def_readonly("config", &LmParams::cfg)
      .def("init", [](LmParams& p, std::uint64_t seed) {
        Rng rng(seed);
        init_lm_params(p, rng);
      }, py::arg("seed"), "Seeded weight initialization.");

  py::class_<ClassifierParams>(m, "ClassifierParams")
      .def(py::init<int, int>(), py::arg("feature_dim"), py::arg("num_categories"))
      .def("feature_dim", &ClassifierParams::feature_dim)
      .def("num_categories", &ClassifierParams::num_categories);
  m.def("predict_object_probs",
        [](const ClassifierParams& p, const std::vector<double>& features) {
          return predict_object_probs(p, numeric::Array::from_vector(features));
        },
        py::arg("classifier"), py::arg("features"),
        "Per-category sigmoid probabilities for a feature vector.");
  m.def("select_top_k", &select_top_k, py::arg("probs"), py::arg("k"));
  m.def("select_by_threshold",
        py::overload_cast<const std::vector<double>&, double>(&select_by_threshold),
        py::arg("probs"), py::arg("threshold"));
  m.def("select_by_threshold",
        py::overload_cast<const std::vector<double>&, double, const std::vector<int>&>(
            &select_by_threshold),
        py::arg("probs"), py::arg("threshold"), py::arg("candidates"));

  // Training. Each trainer returns its loss log, one JSON line per epoch.
  py::class_<numeric::LrSchedule>(m, "LrSchedule")
      .def(py::init<>())
      .def_readwrite("base", &numeric::LrSchedule::base)
      .def_readwrite("factor", &numeric::LrSchedule::factor)
      .def_readwrite("period", &numeric::LrSchedule::period)
      .def("lr_at", &numeric::LrSchedule::lr_at, py::arg("epoch"));

  py::class_<ClassifierTrainConfig>(m, "ClassifierTrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &ClassifierTrainConfig::epochs)
      .def_readwrite("schedule", &ClassifierTrainConfig::schedule)
      .def_readwrite("seed", &ClassifierTrainConfig::seed);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs_l", &TrainConfig::epochs_l)
      .def_readwrite("epochs_r", &TrainConfig::epochs_r)
      .def_readwrite("base_lr", &TrainConfig::base_lr)
      .def_readwrite("lr_decay", &TrainConfig::lr_decay)
      .def_readwrite("lr_period", &TrainConfig::lr_period)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("clip_norm", &TrainConfig::clip_norm)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("reverse_s", &TrainConfig::reverse_s);

  m.def("train_classifier",
        [](ClassifierParams& p, const std::vector<Scene>& scenes, const Vocab& vocab,
           const ClassifierTrainConfig& cfg) {
          std::ostringstream log;
          train_classifier(p, scene_ptrs(scenes), vocab, cfg, &log);
          return log.str();
        },
        py::arg("classifier"), py::arg("scenes"), py::arg("vocab"), py::arg("config"));
  m.def("train_lstm_l",
        [](LmParams& p, const std::vector<Scene>& scenes, const Vocab& vocab,
           const TrainConfig& cfg) {
          std::ostringstream log;
          train_lstm_l(p, scene_ptrs(scenes), vocab, cfg, &log);
          return log.str();
        },
        py::arg("lm"), py::arg("scenes"), py::arg("vocab"), py::arg("config"));
  m.def("train_lstm_r",
        [](LmParams& p, const std::vector<Scene>& scenes, const Vocab& vocab,
           const TrainConfig& cfg) {
          std::ostringstream log;
          train_lstm_r(p, scene_ptrs(scenes), vocab, cfg, &log);
          return log.str();
        },
        py::arg("lm"), py::arg("scenes"), py::arg("vocab"), py::arg("config"));

  // Captioning.
  py::class_<DecodeConfig>(m, "DecodeConfig")
      .def(py::init<>())
      .def_readwrite("max_left", &DecodeConfig::max_left)
      .def_readwrite("max_right", &DecodeConfig::max_right)
      .def_readwrite("max_unguided", &DecodeConfig::max_unguided)
      .def_readwrite("beam", &DecodeConfig::beam)
      .def_readwrite("reverse_s", &DecodeConfig::reverse_s);
  m.def("validate_decode_config", &validate_decode_config, py::arg("config"));

  py::class_<CaptionRecord>(m, "CaptionRecord")
      .def(py::init<>())
      .def_readwrite("scene_id", &CaptionRecord::scene_id)
      .def_readwrite("mode", &CaptionRecord::mode)
      .def_readwrite("guiding", &CaptionRecord::guiding)
      .def_readwrite("s_seq", &CaptionRecord::s_seq)
      .def_readwrite("left", &CaptionRecord::left)
      .def_readwrite("right", &CaptionRecord::right)
      .def_readwrite("surface", &CaptionRecord::surface)
      .def_readwrite("score", &CaptionRecord::score)
      .def_readwrite("beam", &CaptionRecord::beam)
      .def("__repr__", [](const CaptionRecord& r) {
        std::string s = "<CaptionRecord scene " + std::to_string(r.scene_id) + ":";
        for (const auto& w : r.surface) s += " " + w;
        return s + ">";
      });

  m.def("caption_guided", &caption_guided, py::arg("lstm_l"), py::arg("lstm_r"), py::arg("vocab"),
        py::arg("scene"), py::arg("s_words"), py::arg("guiding"), py::arg("config"),
        "Guided caption; the guiding word lands at index len(left) of surface.");
  m.def("caption_plain", &caption_plain, py::arg("lstm_r"), py::arg("vocab"), py::arg("scene"),
        py::arg("config"), "Plain left-to-right caption, no guiding word.");
  m.def("caption_topk", &caption_topk, py::arg("lstm_l"), py::arg("lstm_r"), py::arg("classifier"),
        py::arg("vocab"), py::arg("scene"), py::arg("k"), py::arg("config"),
        "One guided caption per top-k classifier category.");
  m.def("caption_threshold", &caption_threshold, py::arg("lstm_l"), py::arg("lstm_r"),
        py::arg("classifier"), py::arg("vocab"), py::arg("scene"), py::arg("p_o"),
        py::arg("novel_only"), py::arg("config"),
        "Guided by the most probable category above p_o, unguided fallback.");
  m.def("caption_diversity", &caption_diversity, py::arg("lstm_l"), py::arg("lstm_r"),
        py::arg("classifier"), py::arg("vocab"), py::arg("scene"), py::arg("config"),
        "Same guiding object under two conditioning sequences.");
  m.def("save_caption_records", &save_caption_records, py::arg("path"), py::arg("records"));
  m.def("load_caption_records", &load_caption_records, py::arg("path"));

  // Checkpoints.
  m.def("save_lm",
        [](const LmParams& p, const std::string& prefix) {
          numeric::save_checkpoint(prefix, p.all());
        },
        py::arg("lm"), py::arg("prefix"), "Writes <prefix>.json and <prefix>.bin.");
  m.def("load_lm", &load_lm, py::arg("prefix"), py::arg("name_prefix"),
        "Model geometry is inferred from the checkpoint manifest.");
  m.def("save_classifier",
        [](const ClassifierParams& p, const std::string& prefix) {
          numeric::save_checkpoint(prefix, p.all());
        },
        py::arg("classifier"), py::arg("prefix"));
  m.def("load_classifier", &load_classifier, py::arg("prefix"));

  // Metrics.
  py::class_<DescriptionSet>(m, "DescriptionSet")
      .def(py::init<>())
      .def_readwrite("scene_id", &DescriptionSet::scene_id)
      .def_readwrite("captions", &DescriptionSet::captions);
  py::class_<RecallReport>(m, "RecallReport")
      .def_readwrite("per_category", &RecallReport::per_category)
      .def_readwrite("macro", &RecallReport::macro);
  py::class_<F1Report>(m, "F1Report")
      .def_readwrite("per_category", &F1Report::per_category)
      .def_readwrite("macro", &F1Report::macro);
  m.def("mentioned_surfaces", &mentioned_surfaces, py::arg("captions"),
        py::arg("category_surfaces"));
  m.def("avg_num", &avg_num, py::arg("sets"), py::arg("vocab"),
        "Mean distinct mentioned categories per image.");
  m.def("category_recall", &category_recall, py::arg("sets"), py::arg("detection_labels"),
        "Per-category recall against detection labels; macro averages the "
        "categories that occur.");
  m.def("novel_f1", &novel_f1, py::arg("predictions"), py::arg("labels"),
        py::arg("novel_categories"),
        "Per-category F1 over single-caption predictions; macro averages the "
        "requested categories.");
  m.def("uniqueness", &uniqueness, py::arg("captions"),
        "Distinct surfaces among captions generated for one guiding object.");

  // Verification battery.
  py::class_<SelfCheckResult>(m, "SelfCheckResult")
      .def_readwrite("name", &SelfCheckResult::name)
      .def_readwrite("passed", &SelfCheckResult::passed)
      .def_readwrite("detail", &SelfCheckResult::detail)
      .def("__repr__", [](const SelfCheckResult& r) {
        return "<" + std::string(r.passed ? "PASS " : "FAIL ") + r.name + ">";
      });
  m.def("run_selfchecks", &run_selfchecks, py::arg("seed"));
  m.def("all_passed", &all_passed, py::arg("results"));

  m.def("mix_seed", &mix_seed, py::arg("seed"), py::arg("tag"),
        "Derives an independent child seed from a master seed and a stream tag.");
}
