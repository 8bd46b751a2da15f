"""Model persistence in a line-oriented text container.

Layout: a "SEKIRA-CKPT v1" header, then config entries, the tagset, word and
char vocabularies, the best validation F1, and every parameter tensor with
its shape and values as C99 hexadecimal float literals. Hex floats round-trip
bit-for-bit on any platform, and the serialization is canonical (sorted
config keys and tensor names) so save -> load -> save is byte-identical.
"""

from dataclasses import dataclass

import numpy as np

from .embeddings import Vocabulary
from .errors import CheckpointError

MAGIC = "SEKIRA-CKPT"
VERSION = "v1"


@dataclass
class Checkpoint:
    version: str
    tagset: list
    word_vocab: Vocabulary
    char_vocab: Vocabulary
    tensors: dict  # name -> ndarray
    config: dict   # primitive values: int, float, bool, str, None
    best_f1: float


def _encode_value(v):
    if v is None:
        return "n"
    if isinstance(v, bool):
        return "b " + ("1" if v else "0")
    if isinstance(v, int):
        return f"i {v}"
    if isinstance(v, float):
        return "f " + v.hex()
    if isinstance(v, str):
        return "s " + v
    raise CheckpointError(f"unsupported config value type {type(v).__name__}")


def _decode_value(text):
    kind, _, rest = text.partition(" ")
    if kind == "n":
        return None
    if kind == "b":
        return rest == "1"
    if kind == "s":
        return rest
    if kind in ("i", "f"):
        try:
            return int(rest) if kind == "i" else float.fromhex(rest)
        except ValueError:
            pass
    raise CheckpointError(f"corrupt checkpoint: bad config value {text!r}")


def save_checkpoint(ckpt, sink):
    sink.write(f"{MAGIC} {VERSION}\n")
    sink.write(f"config {len(ckpt.config)}\n")
    for key in sorted(ckpt.config):
        sink.write(f"{key} {_encode_value(ckpt.config[key])}\n")
    sink.write(f"tagset {len(ckpt.tagset)}\n")
    for tag in ckpt.tagset:
        sink.write(tag + "\n")
    for label, vocab in (("word", ckpt.word_vocab), ("char", ckpt.char_vocab)):
        entries = vocab.items[2:]  # reserved UNK/PAD rebuilt on load
        sink.write(f"vocab {label} {len(entries)}\n")
        for item in entries:
            sink.write(item + "\n")
    sink.write("best_f1 " + float(ckpt.best_f1).hex() + "\n")
    sink.write(f"tensors {len(ckpt.tensors)}\n")
    for name in sorted(ckpt.tensors):
        arr = np.asarray(ckpt.tensors[name], dtype=float)
        if arr.ndim not in (1, 2):
            raise CheckpointError(f"tensor {name}: only 1-d and 2-d tensors are stored")
        dims = " ".join(str(d) for d in arr.shape)
        sink.write(f"tensor {name} {arr.ndim} {dims}\n")
        rows = arr[np.newaxis, :] if arr.ndim == 1 else arr
        for row in rows:
            sink.write(" ".join(float(v).hex() for v in row) + "\n")
    sink.write("end\n")


class _Reader:
    def __init__(self, source):
        self._it = iter(source)

    def line(self):
        try:
            return next(self._it).rstrip("\n")
        except StopIteration:
            raise CheckpointError("corrupt checkpoint: truncated file")

    def expect(self, keyword):
        line = self.line()
        fields = line.split()
        if not fields or fields[0] != keyword:
            raise CheckpointError(f"corrupt checkpoint: expected {keyword!r}, got {line!r}")
        return fields[1:]


def _parse_count(fields, what):
    try:
        n = int(fields[-1])
    except (ValueError, IndexError):
        raise CheckpointError(f"corrupt checkpoint: bad {what} header")
    if n < 0:
        raise CheckpointError(f"corrupt checkpoint: bad {what} header")
    return n


def load_checkpoint(source):
    r = _Reader(source)
    header = r.line().split()
    if len(header) != 2 or header[0] != MAGIC:
        raise CheckpointError("corrupt checkpoint: missing header")
    if header[1] != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header[1]!r} (expected {VERSION})")

    config = {}
    for _ in range(_parse_count(r.expect("config"), "config")):
        line = r.line()
        key, _, rest = line.partition(" ")
        if not key or not rest:
            raise CheckpointError(f"corrupt checkpoint: bad config line {line!r}")
        config[key] = _decode_value(rest)

    tagset = [r.line() for _ in range(_parse_count(r.expect("tagset"), "tagset"))]

    vocabs = {}
    for label in ("word", "char"):
        fields = r.expect("vocab")
        if fields[:1] != [label]:
            raise CheckpointError(f"corrupt checkpoint: expected {label} vocabulary")
        vocabs[label] = Vocabulary(r.line() for _ in range(_parse_count(fields, "vocab")))

    fields = r.expect("best_f1")
    try:
        best_f1 = float.fromhex(fields[0])
    except (ValueError, IndexError):
        raise CheckpointError("corrupt checkpoint: bad best_f1")

    tensors = {}
    for _ in range(_parse_count(r.expect("tensors"), "tensors")):
        fields = r.expect("tensor")
        if len(fields) < 3:
            raise CheckpointError("corrupt checkpoint: bad tensor header")
        name = fields[0]
        try:
            ndim = int(fields[1])
            dims = [int(d) for d in fields[2:]]
        except ValueError:
            raise CheckpointError(f"corrupt checkpoint: bad tensor header for {name}")
        if ndim not in (1, 2) or len(dims) != ndim:
            raise CheckpointError(f"corrupt checkpoint: bad tensor header for {name}")
        nrows = 1 if ndim == 1 else dims[0]
        ncols = dims[0] if ndim == 1 else dims[1]
        rows = []
        for i in range(nrows):
            parts = r.line().split()
            if len(parts) != ncols:
                raise CheckpointError(
                    f"shape mismatch in tensor {name}: row {i} has {len(parts)} values, expected {ncols}"
                )
            try:
                rows.append([float.fromhex(p) for p in parts])
            except ValueError:
                raise CheckpointError(f"corrupt checkpoint: bad value in tensor {name}")
        arr = np.array(rows)
        tensors[name] = arr[0] if ndim == 1 else arr

    r.expect("end")
    return Checkpoint(
        version=VERSION,
        tagset=tagset,
        word_vocab=vocabs["word"],
        char_vocab=vocabs["char"],
        tensors=tensors,
        config=config,
        best_f1=best_f1,
    )
