"""Column-format corpora: parsing, IOB validation, splitting, statistics.

The on-disk format is one token per line with whitespace-separated fields,
first field the token and last field the tag, blank lines between sentences.
Lines starting with ``-DOCSTART-`` are skipped. Tags follow the IOB2
convention: ``O`` or ``B-TYPE``/``I-TYPE`` with every entity opened by B-.
"""

import re
from dataclasses import dataclass, field

from .errors import CorpusError
from .numerics import Rng

_TAG_RE = re.compile(r"^(?:O|[BI]-.+)$")


@dataclass
class LabeledSentence:
    tokens: list
    tags: list

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError("tokens and tags must have equal length")
        if not self.tokens:
            raise ValueError("sentence must be non-empty")


@dataclass
class Dataset:
    sentences: list
    tagset: list

    def __len__(self):
        return len(self.sentences)


@dataclass
class DatasetStats:
    token_count: int = 0
    word_and_number_count: int = 0
    entity_counts: dict = field(default_factory=dict)


def parse_column_file(stream):
    """Parse a column-format stream into a Dataset.

    ``stream`` is any iterable of lines (an open text file qualifies). Raises
    CorpusError with a 1-based line number on single-field lines and on tags
    that are neither O nor B-/I- prefixed.
    """
    sentences = []
    tagset = []
    seen_tags = set()
    tokens, tags = [], []

    def flush():
        if tokens:
            sentences.append(LabeledSentence(list(tokens), list(tags)))
            tokens.clear()
            tags.clear()

    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("-DOCSTART-"):
            continue
        fields = line.split()
        if len(fields) < 2:
            raise CorpusError(f"line {lineno}: expected at least 2 fields, got {len(fields)}")
        token, tag = fields[0], fields[-1]
        if not _TAG_RE.match(tag):
            raise CorpusError(f"line {lineno}: malformed tag {tag!r}")
        tokens.append(token)
        tags.append(tag)
        if tag not in seen_tags:
            seen_tags.add(tag)
            tagset.append(tag)
    flush()
    return Dataset(sentences, tagset)


def write_column_file(sentences, sink):
    """Serialize sentences as "token tag" lines, blank line between sentences."""
    chunks = []
    for sent in sentences:
        chunks.append("\n".join(f"{tok} {tag}" for tok, tag in zip(sent.tokens, sent.tags)))
    sink.write("\n\n".join(chunks))
    if chunks:
        sink.write("\n")


def validate_iob(tags):
    """Positions where an I- tag is not preceded by B-/I- of the same type."""
    violations = []
    for i, tag in enumerate(tags):
        if not tag.startswith("I-"):
            continue
        prev = tags[i - 1] if i > 0 else None
        if prev not in ("B-" + tag[2:], "I-" + tag[2:]):
            violations.append(i)
    return violations


def iob1_to_iob2(tags):
    """Rewrite IOB1 tags so that every entity opens with B-."""
    out = list(tags)
    for i in validate_iob(tags):
        out[i] = "B-" + tags[i][2:]
    return out


def split_dataset(dataset, ratios, seed):
    """Deterministic shuffle + contiguous split into train/valid/test.

    Sizes are round(n * ratio) for the first two parts, remainder for the
    third, so no sentence is lost or duplicated.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    if len(ratios) != 3:
        raise ValueError("need exactly three ratios")
    if not dataset.sentences:
        raise ValueError("cannot split an empty dataset")
    order = list(range(len(dataset.sentences)))
    Rng(seed).shuffle(order)
    shuffled = [dataset.sentences[i] for i in order]
    n = len(shuffled)
    n_train = round(n * ratios[0])
    n_valid = round(n * ratios[1])
    parts = (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_valid],
        shuffled[n_train + n_valid :],
    )
    return tuple(Dataset(p, list(dataset.tagset)) for p in parts)


def compute_stats(dataset):
    """Token count, word-and-number count, and B- span counts per type.

    A token counts as a word-or-number when it contains at least one letter
    or digit.
    """
    stats = DatasetStats()
    for sent in dataset.sentences:
        stats.token_count += len(sent.tokens)
        for token in sent.tokens:
            if any(ch.isalnum() for ch in token):
                stats.word_and_number_count += 1
        for tag in sent.tags:
            if tag.startswith("B-"):
                kind = tag[2:]
                stats.entity_counts[kind] = stats.entity_counts.get(kind, 0) + 1
    return stats
