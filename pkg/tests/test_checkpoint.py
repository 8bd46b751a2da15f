import io

import numpy as np
import pytest

from sekira.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from sekira.embeddings import Vocabulary
from sekira.errors import CheckpointError


def example_checkpoint():
    tensors = {
        "proj.W": np.array([[0.005, -1e30], [1.5, 2.0 ** -1040]]),
        "proj.b": np.array([-0.0, 3.14159]),
        "crf.transitions": np.array([[1.25, -2.5], [0.0, 4.75]]),
    }
    config = {
        "lr": 0.005,
        "epochs": 100,
        "use_char_highway": False,
        "embeddings": None,
        "note": "a value with spaces",
    }
    return Checkpoint(
        version="v1",
        tagset=["O", "B-PER", "I-PER"],
        word_vocab=Vocabulary(["Ivan", "Moscow"]),
        char_vocab=Vocabulary(list("IvanMoscw")),
        tensors=tensors,
        config=config,
        best_f1=87.17,
    )


def roundtrip(ckpt):
    sink = io.StringIO()
    save_checkpoint(ckpt, sink)
    return sink.getvalue(), load_checkpoint(io.StringIO(sink.getvalue()))


def test_roundtrip_exact():
    ckpt = example_checkpoint()
    _, again = roundtrip(ckpt)
    assert again.tagset == ckpt.tagset
    assert again.word_vocab.items == ckpt.word_vocab.items
    assert again.char_vocab.items == ckpt.char_vocab.items
    assert again.config == ckpt.config
    assert again.best_f1 == ckpt.best_f1
    assert set(again.tensors) == set(ckpt.tensors)
    for name, arr in ckpt.tensors.items():
        got = again.tensors[name]
        assert got.shape == arr.shape
        assert got.tobytes() == arr.tobytes()  # bitwise, including -0.0 and denormals


def test_config_types_preserved():
    _, again = roundtrip(example_checkpoint())
    cfg = again.config
    assert isinstance(cfg["epochs"], int)
    assert isinstance(cfg["use_char_highway"], bool)
    assert isinstance(cfg["lr"], float)
    assert cfg["embeddings"] is None
    assert cfg["note"] == "a value with spaces"


def test_save_load_save_is_byte_identical():
    first, again = roundtrip(example_checkpoint())
    sink = io.StringIO()
    save_checkpoint(again, sink)
    assert sink.getvalue() == first


def test_truncated_file():
    text, _ = roundtrip(example_checkpoint())
    cut = text[: len(text) // 2]
    with pytest.raises(CheckpointError, match="corrupt|shape"):
        load_checkpoint(io.StringIO(cut))
    # cutting at a line boundary hits the truncation path specifically
    head = "\n".join(text.splitlines()[:4]) + "\n"
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(io.StringIO(head))


def test_missing_header():
    with pytest.raises(CheckpointError, match="header"):
        load_checkpoint(io.StringIO("not a checkpoint\n"))


def test_unknown_version():
    text, _ = roundtrip(example_checkpoint())
    bumped = text.replace("SEKIRA-CKPT v1", "SEKIRA-CKPT v9", 1)
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(io.StringIO(bumped))


def test_shape_mismatch_reported_distinctly():
    text, _ = roundtrip(example_checkpoint())
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if line.startswith("tensor crf.transitions"):
            lines[i + 1] = lines[i + 1].rsplit(" ", 1)[0]  # drop one value
            break
    with pytest.raises(CheckpointError, match="shape mismatch"):
        load_checkpoint(io.StringIO("\n".join(lines) + "\n"))


def test_corrupt_value():
    text, _ = roundtrip(example_checkpoint())
    bad = text.replace("0x1.47ae147ae147bp-8", "0xnope", 1)
    with pytest.raises(CheckpointError):
        load_checkpoint(io.StringIO(bad))


def test_missing_end_trailer():
    text, _ = roundtrip(example_checkpoint())
    no_end = text[: text.rindex("end\n")]
    with pytest.raises(CheckpointError):
        load_checkpoint(io.StringIO(no_end))
