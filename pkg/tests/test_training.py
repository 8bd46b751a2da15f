import io

import numpy.testing as npt
import pytest

from sekira.checkpoint import load_checkpoint, save_checkpoint
from sekira.corpus import Dataset, LabeledSentence, validate_iob
from sekira.errors import CheckpointError, DataError
from sekira.numerics import Rng
from sekira.training import TrainConfig, build_model, model_from_checkpoint, train


def sent(pairs):
    return LabeledSentence(tokens=[t for t, _ in pairs], tags=[g for _, g in pairs])


def toy_data():
    sents = [
        sent([("Ivan", "B-PER"), ("works", "O"), ("in", "O"), ("Moscow", "B-LOC")]),
        sent([("Anna", "B-PER"), ("Petrova", "I-PER"), ("left", "O")]),
        sent([("Gazprom", "B-ORG"), ("hired", "O"), ("Ivan", "B-PER")]),
        sent([("Moscow", "B-LOC"), ("is", "O"), ("cold", "O")]),
    ]
    tagset = ["B-PER", "O", "B-LOC", "I-PER", "B-ORG"]
    train_ds = Dataset(sentences=sents, tagset=tagset)
    valid_ds = Dataset(sentences=sents[:2], tagset=["B-PER", "O", "B-LOC", "I-PER"])
    return train_ds, valid_ds


def tiny_config(**kw):
    base = dict(
        lr=0.05, dropout=0.0, epochs=2, seed=7, char_dim=3, word_dim=4,
        char_hidden=2, word_hidden=3,
    )
    base.update(kw)
    return TrainConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=0.0)
    with pytest.raises(ValueError):
        TrainConfig(dropout=1.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)
    with pytest.raises(ValueError):
        TrainConfig(decoder="beam")


def test_config_dict_roundtrip():
    cfg = tiny_config(use_char_highway=True, embeddings=None)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_epochs_zero_keeps_initial_parameters():
    train_ds, valid_ds = toy_data()
    cfg = tiny_config(epochs=0)
    ckpt, history = train(cfg, train_ds, valid_ds)
    fresh = build_model(cfg, train_ds, Rng(cfg.seed))
    for name, arr in fresh.parameters().items():
        npt.assert_array_equal(ckpt.tensors[name], arr)
    assert len(history) == 1
    assert history[0].epoch == 0


def test_same_seed_bitwise_identical_checkpoints():
    train_ds, valid_ds = toy_data()
    blobs = []
    for _ in range(2):
        ckpt, _ = train(tiny_config(dropout=0.3), train_ds, valid_ds)
        sink = io.StringIO()
        save_checkpoint(ckpt, sink)
        blobs.append(sink.getvalue())
    assert blobs[0] == blobs[1]


def test_different_seed_changes_parameters():
    train_ds, valid_ds = toy_data()
    ckpt_a, _ = train(tiny_config(seed=1), train_ds, valid_ds)
    ckpt_b, _ = train(tiny_config(seed=2), train_ds, valid_ds)
    assert any(
        ckpt_a.tensors[n].tobytes() != ckpt_b.tensors[n].tobytes() for n in ckpt_a.tensors
    )


def test_single_step_decreases_sentence_loss():
    train_ds, _ = toy_data()
    sentence = train_ds.sentences[0]
    from sekira.numerics import sgd_step

    for seed in range(20):
        cfg = tiny_config(seed=seed, lr=1e-4)
        model = build_model(cfg, train_ds, Rng(seed))
        before, _ = model.sentence_loss(sentence)
        _, grads = model.sentence_loss(sentence, training=True)
        params = {k: model.resolve_param(k) for k in grads}
        sgd_step(params, grads, 1e-4)
        after, _ = model.sentence_loss(sentence)
        assert after < before


def test_best_f1_is_max_over_epochs():
    train_ds, valid_ds = toy_data()
    ckpt, history = train(tiny_config(epochs=4), train_ds, valid_ds)
    assert ckpt.best_f1 == max(h.valid_f1 for h in history)


def test_valid_tag_missing_from_train_errors():
    train_ds, valid_ds = toy_data()
    bad_valid = Dataset(
        sentences=[sent([("x", "B-GPE")])], tagset=["B-GPE"]
    )
    with pytest.raises(DataError, match="B-GPE"):
        train(tiny_config(), train_ds, bad_valid)


def test_empty_train_errors():
    _, valid_ds = toy_data()
    with pytest.raises(DataError, match="empty"):
        train(tiny_config(), Dataset(sentences=[], tagset=[]), valid_ds)


def test_checkpoint_roundtrip_decode_identical():
    train_ds, valid_ds = toy_data()
    ckpt, _ = train(tiny_config(), train_ds, valid_ds)
    sink = io.StringIO()
    save_checkpoint(ckpt, sink)
    loaded = load_checkpoint(io.StringIO(sink.getvalue()))
    model_a = model_from_checkpoint(ckpt)
    model_b = model_from_checkpoint(loaded)
    for s in train_ds.sentences:
        assert model_a.decode(s.tokens) == model_b.decode(s.tokens)


def test_model_from_checkpoint_shape_mismatch():
    train_ds, valid_ds = toy_data()
    ckpt, _ = train(tiny_config(epochs=0), train_ds, valid_ds)
    ckpt.config["word_hidden"] = 5  # declared config no longer matches tensors
    with pytest.raises(CheckpointError, match="shape mismatch"):
        model_from_checkpoint(ckpt)


def test_frozen_embeddings_rows_unchanged():
    from sekira.numerics import sgd_step

    train_ds, _ = toy_data()
    cfg = tiny_config(freeze_embeddings=True)
    model = build_model(cfg, train_ds, Rng(cfg.seed))
    word_before = model.encoder.word_table.weights.copy()
    lstm_before = model.encoder.word_fwd.W_ix.copy()
    _, grads = model.sentence_loss(train_ds.sentences[0], training=True)
    sgd_step({k: model.resolve_param(k) for k in grads}, grads, cfg.lr)
    npt.assert_array_equal(model.encoder.word_table.weights, word_before)
    assert model.encoder.word_fwd.W_ix.tobytes() != lstm_before.tobytes()


def test_pretrained_embeddings_loaded(tmp_path):
    train_ds, valid_ds = toy_data()
    vec = tmp_path / "vectors.txt"
    vec.write_text("2 4\nIvan 1.0 2.0 3.0 4.0\nMoscow -1.0 -2.0 -3.0 -4.0\n", encoding="utf-8")
    cfg = tiny_config(embeddings=str(vec), epochs=0)
    logs = []
    ckpt, _ = train(cfg, train_ds, valid_ds, log=logs.append)
    model = model_from_checkpoint(ckpt)
    row = model.encoder.word_table.weights[model.encoder.word_table.vocab.index_of("Ivan")]
    npt.assert_array_equal(row, [1.0, 2.0, 3.0, 4.0])
    assert any("pretrained" in line for line in logs)


def test_constrained_model_decodes_valid_iob():
    train_ds, valid_ds = toy_data()
    cfg = tiny_config(constrain_transitions=True, epochs=1)
    ckpt, _ = train(cfg, train_ds, valid_ds)
    model = model_from_checkpoint(ckpt)
    for s in train_ds.sentences:
        assert validate_iob(model.decode(s.tokens)) == []


def test_softmax_decoder_runs():
    train_ds, valid_ds = toy_data()
    ckpt, history = train(tiny_config(decoder="softmax", epochs=1), train_ds, valid_ds)
    model = model_from_checkpoint(ckpt)
    tags = model.decode(["Ivan", "works"])
    assert len(tags) == 2
    assert all(t in ckpt.tagset for t in tags)


def test_history_logging(capsys):
    train_ds, valid_ds = toy_data()
    lines = []
    train(tiny_config(epochs=2), train_ds, valid_ds, log=lines.append)
    assert any("epoch 1" in l for l in lines)
    assert any("best epoch" in l for l in lines)
