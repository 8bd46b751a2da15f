"""Vocabularies, trainable lookup tables, and pretrained word-vector loading.

The word-vector text format is an optional "<count> <dim>" header followed by
"<token> <f1> ... <fdim>" lines (UTF-8, Unix or Windows newlines). Vocabulary
rows found in the file are copied; everything else, including the reserved
UNK/PAD rows, is initialized uniformly in +-0.5/dim so random and pretrained
rows live at a comparable scale.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EmbeddingError

UNK = "<unk>"
PAD = "<pad>"


class Vocabulary:
    """Ordered string-to-index mapping with reserved UNK (0) and PAD (1)."""

    def __init__(self, items=()):
        self.items = []
        self.index = {}
        self.add(UNK)
        self.add(PAD)
        for item in items:
            self.add(item)

    def add(self, item):
        if item not in self.index:
            self.index[item] = len(self.items)
            self.items.append(item)
        return self.index[item]

    def __len__(self):
        return len(self.items)

    def __contains__(self, item):
        return item in self.index

    def item_of(self, i):
        return self.items[i]

    def index_of(self, item):
        return self.index[item]

    def save(self, sink):
        for item in self.items[2:]:
            sink.write(item + "\n")

    @classmethod
    def load(cls, stream):
        return cls(line.rstrip("\r\n") for line in stream if line.rstrip("\r\n"))


def build_vocab(sentences, min_count=1):
    """Vocabulary of tokens with frequency >= min_count, first-occurrence order."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = {}
    order = []
    for tokens in sentences:
        for tok in tokens:
            if tok not in counts:
                counts[tok] = 0
                order.append(tok)
            counts[tok] += 1
    return Vocabulary(tok for tok in order if counts[tok] >= min_count)


def build_char_vocab(sentences):
    """Vocabulary over every character of every token; no frequency cutoff."""
    seen = set()
    order = []
    for tokens in sentences:
        for tok in tokens:
            for ch in tok:
                if ch not in seen:
                    seen.add(ch)
                    order.append(ch)
    return Vocabulary(order)


@dataclass
class CoverageReport:
    matched: int
    total_unique: int

    @property
    def coverage(self):
        return 100.0 * self.matched / self.total_unique if self.total_unique else 0.0


class EmbeddingTable:
    """Lookup table of shape len(vocab) x dim backed by a dense float64 matrix.

    ``lookup`` falls back to the lowercased token before UNK when
    ``lowercase_fallback`` is set (helps with case-only mismatches between
    corpus and embedding vocabularies); flip it off for exact matching.
    """

    def __init__(self, vocab, dim, rng=None, trainable=True, lowercase_fallback=True):
        if dim < 1:
            raise ValueError("embedding dim must be >= 1")
        self.vocab = vocab
        self.dim = dim
        self.trainable = trainable
        self.lowercase_fallback = lowercase_fallback
        if rng is None:
            self.weights = np.zeros((len(vocab), dim))
        else:
            scale = 0.5 / dim
            self.weights = rng.uniform(-scale, scale, (len(vocab), dim))

    def row_index(self, token):
        idx = self.vocab.index.get(token)
        if idx is None and self.lowercase_fallback:
            idx = self.vocab.index.get(token.lower())
        return 0 if idx is None else idx


def lookup(table, token):
    """Embedding row for a token; unknown tokens share the UNK row."""
    return table.weights[table.row_index(token)]


def load_pretrained(stream, vocab, dim_expected, rng, **table_kwargs):
    """Build an EmbeddingTable from a word-vector text stream.

    Rows for vocabulary tokens present in the file are copied (last
    occurrence wins, with one warning if any token repeats); all other rows
    stay at their random initialization. Returns the table and a
    CoverageReport over the non-reserved vocabulary.
    """
    if dim_expected < 1:
        raise ValueError("dim_expected must be >= 1")
    table = EmbeddingTable(vocab, dim_expected, rng=rng, **table_kwargs)
    matched = set()
    duplicates = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split()
        if lineno == 1 and len(fields) == 2:
            # Optional "<count> <dim>" header; a non-integer first line is data.
            try:
                int(fields[0])
                declared_dim = int(fields[1])
            except ValueError:
                declared_dim = None
            if declared_dim is not None:
                if declared_dim != dim_expected:
                    raise EmbeddingError(
                        f"dimension mismatch: file declares {declared_dim}, expected {dim_expected}"
                    )
                continue
        token = fields[0]
        if len(fields) - 1 != dim_expected:
            raise EmbeddingError(
                f"line {lineno}: expected {dim_expected} values, got {len(fields) - 1}"
            )
        if token not in vocab.index:
            continue  # field count already validated; floats parsed only for rows we keep
        try:
            values = [float(v) for v in fields[1:]]
        except ValueError:
            raise EmbeddingError(f"line {lineno}: unparseable float")
        if token in matched:
            duplicates += 1
        matched.add(token)
        table.weights[vocab.index[token]] = values
    if duplicates:
        warnings.warn(f"{duplicates} duplicate embedding rows; kept the last occurrence of each")
    report = CoverageReport(matched=len(matched), total_unique=len(vocab) - 2)
    return table, report
