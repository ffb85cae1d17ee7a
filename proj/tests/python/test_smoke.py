"""End-to-end smoke of the Python bindings on a small world: corpus
generation, training, guided captioning, checkpoints, metrics."""

import pytest

import guidecap as gc


def tiny_world():
    cfg = gc.default_world_config()
    cfg.scenes = 14
    cfg.captions_per_scene = 5
    cfg.min_count = 3
    return cfg


@pytest.fixture(scope="module")
def corpus():
    cfg = tiny_world()
    c = gc.Corpus()
    c.scenes = gc.generate_world(cfg, 7)
    c.split = gc.make_novel_split(c.scenes, cfg.categories, ["zebra", "pizza"], 0.2, 0.2, 7)
    train_scenes = [c.scene_by_id(i) for i in c.split.train]
    c.vocab = gc.build_vocab(train_scenes, cfg.min_count, cfg.categories, cfg.similar)
    return c


@pytest.fixture(scope="module")
def models(corpus):
    train_scenes = [corpus.scene_by_id(i) for i in corpus.split.train]
    full_scenes = [corpus.scene_by_id(i) for i in corpus.split.train_full]

    clf = gc.ClassifierParams(32, corpus.vocab.num_categories())
    ccfg = gc.ClassifierTrainConfig()
    ccfg.epochs = 3
    ccfg.schedule.base = 0.05
    ccfg.seed = 5
    clf_log = gc.train_classifier(clf, full_scenes, corpus.vocab, ccfg)
    assert '"model":"clf"' in clf_log

    lm_cfg = gc.LmConfig()
    lm_cfg.vocab_size = corpus.vocab.size()
    lm_cfg.embed_dim = 12
    lm_cfg.hidden_dim = 16
    tcfg = gc.TrainConfig()
    tcfg.epochs_l = 2
    tcfg.epochs_r = 2
    tcfg.base_lr = 1e-3
    tcfg.seed = 5

    lml = gc.LmParams(lm_cfg, "lstm_l")
    lml.init(gc.mix_seed(5, 101))
    gc.train_lstm_l(lml, train_scenes, corpus.vocab, tcfg)

    lmr = gc.LmParams(lm_cfg, "lstm_r")
    lmr.init(gc.mix_seed(5, 102))
    log = gc.train_lstm_r(lmr, train_scenes, corpus.vocab, tcfg)
    assert '"epoch":1' in log

    return clf, lml, lmr


def test_corpus_shape(corpus):
    assert len(corpus.scenes) == 14
    ids = corpus.split.train_full + corpus.split.val + corpus.split.test
    assert sorted(ids) == sorted(s.id for s in corpus.scenes)
    assert corpus.vocab.tokens()[:3] == ["<start>", "<end>", "<unk>"]
    cats = [c.surface for c in corpus.vocab.categories()]
    for scene in corpus.scenes:
        mentioned = gc.mentioned_categories(scene, cats)
        assert mentioned <= set(scene.detection_labels())


def test_corpus_roundtrip(corpus, tmp_path):
    gc.save_corpus(str(tmp_path), corpus)
    back = gc.load_corpus(str(tmp_path))
    assert len(back.scenes) == len(corpus.scenes)
    assert back.vocab.tokens() == corpus.vocab.tokens()
    assert back.split.train == corpus.split.train
    assert back.scene_by_id(0).captions == corpus.scene_by_id(0).captions


def test_guided_caption(corpus, models):
    _, lml, lmr = models
    dc = gc.DecodeConfig()
    guiding = next(c.surface for c in corpus.vocab.categories() if c.vocab_id >= 0)
    scene = corpus.scene_by_id(corpus.split.test[0])

    rec = gc.caption_guided(lml, lmr, corpus.vocab, scene, [], guiding, dc)
    assert rec.surface[len(rec.left)] == guiding
    assert rec.surface == rec.left + [guiding] + rec.right

    plain = gc.caption_plain(lmr, corpus.vocab, scene, dc)
    assert plain.guiding == "" and plain.left == []


def test_selection_modes(corpus, models):
    clf, lml, lmr = models
    dc = gc.DecodeConfig()
    scene = corpus.scene_by_id(corpus.split.test[0])

    probs = gc.predict_object_probs(clf, scene.features)
    assert len(probs) == corpus.vocab.num_categories()
    assert all(0.0 <= p <= 1.0 for p in probs)
    assert gc.select_top_k(probs, 2) == sorted(
        range(len(probs)), key=lambda i: (-probs[i], i))[:2]

    recs = gc.caption_topk(lml, lmr, clf, corpus.vocab, scene, 2, dc)
    assert len(recs) == 2
    for rec in recs:
        assert rec.surface[len(rec.left)] == rec.guiding


def test_checkpoint_roundtrip(corpus, models, tmp_path):
    _, lml, lmr = models
    dc = gc.DecodeConfig()
    guiding = next(c.surface for c in corpus.vocab.categories() if c.vocab_id >= 0)
    scene = corpus.scene_by_id(corpus.split.test[0])
    before = gc.caption_guided(lml, lmr, corpus.vocab, scene, [], guiding, dc)

    gc.save_lm(lml, str(tmp_path / "l"))
    gc.save_lm(lmr, str(tmp_path / "r"))
    lml2 = gc.load_lm(str(tmp_path / "l"), "lstm_l")
    lmr2 = gc.load_lm(str(tmp_path / "r"), "lstm_r")
    assert lml2.config.hidden_dim == 16

    after = gc.caption_guided(lml2, lmr2, corpus.vocab, scene, [], guiding, dc)
    assert after.surface == before.surface
    # Checkpoints store float32, so the reloaded score only matches to that
    # precision.
    assert after.score == pytest.approx(before.score, rel=1e-6)

    with pytest.raises(gc.DataError):
        gc.load_lm(str(tmp_path / "l"), "lstm_r")


def test_metric_kernels(corpus):
    assert gc.uniqueness([["a", "cat"], ["a", "cat"], ["the", "cat"]]) == 2

    cats = [c.surface for c in corpus.vocab.categories()]
    both = gc.DescriptionSet()
    both.scene_id = 0
    both.captions = [["a", cats[0]], ["a", cats[1], "here"]]
    none = gc.DescriptionSet()
    none.scene_id = 1
    none.captions = [["nothing", "here"]]
    assert gc.avg_num([both, none], corpus.vocab) == 1.0

    recall = gc.category_recall([both, none], {0: [cats[0], cats[1]], 1: [cats[0]]})
    assert recall.per_category[cats[0]] == 0.5
    assert recall.per_category[cats[1]] == 1.0
    assert recall.macro == 0.75

    f1 = gc.novel_f1(
        {0: ["a", "zebra"], 1: ["a", "zebra"], 2: ["a", "dog"]},
        {0: {"zebra"}, 1: set(), 2: {"zebra"}},
        ["zebra"],
    )
    assert f1.per_category["zebra"] == 0.5


def test_validation_errors():
    with pytest.raises(gc.ConfigError):
        gc.validate_world_config(gc.WorldConfig())
    with pytest.raises(gc.Error):
        gc.load_corpus("/nonexistent/corpus/dir")


def test_selfchecks():
    results = gc.run_selfchecks(7)
    assert len(results) == 5
    assert gc.all_passed(results)
