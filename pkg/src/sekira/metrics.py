"""Entity-level precision/recall/F1 with exact span matching, plus token-level
confusion matrices. Span extraction follows the ConllEval reading of IOB tags:
B-X opens a span, I-X continues one of the same type, and a bare I-X run with
no opener is still counted as a span.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EntitySpan:
    type: str
    start: int
    end: int  # exclusive


def extract_spans(tags):
    """Maximal entity spans in one tag sequence."""
    spans = []
    cur_type = None
    cur_start = 0
    for i, tag in enumerate(tags):
        if tag == "O":
            if cur_type is not None:
                spans.append(EntitySpan(cur_type, cur_start, i))
                cur_type = None
        elif tag.startswith("B-"):
            if cur_type is not None:
                spans.append(EntitySpan(cur_type, cur_start, i))
            cur_type = tag[2:]
            cur_start = i
        elif tag.startswith("I-"):
            t = tag[2:]
            if cur_type != t:
                if cur_type is not None:
                    spans.append(EntitySpan(cur_type, cur_start, i))
                cur_type = t
                cur_start = i
        else:
            raise ValueError(f"not an IOB tag: {tag!r}")
    if cur_type is not None:
        spans.append(EntitySpan(cur_type, cur_start, len(tags)))
    return spans


@dataclass
class TypeScore:
    precision: float
    recall: float
    f1: float
    gold: int
    predicted: int
    correct: int


def _score(gold, predicted, correct):
    p = 100.0 * correct / predicted if predicted else 0.0
    r = 100.0 * correct / gold if gold else 0.0
    f1 = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
    return TypeScore(precision=p, recall=r, f1=f1, gold=gold, predicted=predicted, correct=correct)


@dataclass
class EvalReport:
    overall: TypeScore
    by_type: dict  # entity type -> TypeScore


def evaluate(gold, pred):
    """Span-exact scores over aligned sentence sequences.

    A span counts as correct only when type, start, and end all match; a
    right-span-wrong-type prediction is both a false positive and a false
    negative.
    """
    gold = list(gold)
    pred = list(pred)
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    counts = {}  # type -> [gold, predicted, correct]
    for n, (g, p) in enumerate(zip(gold, pred)):
        if len(g.tokens) != len(p.tokens):
            raise ValueError(f"sentence {n}: {len(g.tokens)} tokens vs {len(p.tokens)}")
        g_spans = extract_spans(g.tags)
        p_spans = set(extract_spans(p.tags))
        for s in g_spans:
            counts.setdefault(s.type, [0, 0, 0])[0] += 1
            if s in p_spans:
                counts[s.type][2] += 1
        for s in p_spans:
            counts.setdefault(s.type, [0, 0, 0])[1] += 1
    by_type = {t: _score(*c) for t, c in sorted(counts.items())}
    totals = [sum(c[k] for c in counts.values()) for k in range(3)]
    return EvalReport(overall=_score(*totals), by_type=by_type)


@dataclass
class ConfusionMatrix:
    """Token-level gold-by-predicted counts in a fixed display order."""

    tags: list
    counts: np.ndarray  # rows gold, columns predicted

    @classmethod
    def from_pairs(cls, pairs):
        raw = {}
        for g, p in pairs:
            raw[(g, p)] = raw.get((g, p), 0) + 1
        tags = sorted(
            {g for g, _ in raw} | {p for _, p in raw},
            key=lambda t: (-sum(v for (g, _), v in raw.items() if g == t), t),
        )
        idx = {t: i for i, t in enumerate(tags)}
        counts = np.zeros((len(tags), len(tags)), dtype=int)
        for (g, p), v in raw.items():
            counts[idx[g], idx[p]] = v
        return cls(tags=tags, counts=counts)

    def row_total(self, i):
        return int(self.counts[i].sum())

    def row_percent(self, i):
        total = self.row_total(i)
        return 100.0 * self.counts[i, i] / total if total else 0.0


def confusion(gold, pred):
    """Token-level confusion matrix over aligned sentence sequences.

    Rows are ordered by descending gold frequency so the busiest tags come
    first in the rendered table; columns match the rows.
    """
    gold = list(gold)
    pred = list(pred)
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    pairs = []
    for n, (g, p) in enumerate(zip(gold, pred)):
        if len(g.tags) != len(p.tags):
            raise ValueError(f"sentence {n}: {len(g.tags)} tokens vs {len(p.tags)}")
        pairs.extend(zip(g.tags, p.tags))
    return ConfusionMatrix.from_pairs(pairs)


def format_report(report):
    """Human-readable scores, one line per type plus an Overall line."""
    lines = []
    for t, s in report.by_type.items():
        lines.append(
            f"{t}: precision: {s.precision:.2f}%; recall: {s.recall:.2f}%; F1: {s.f1:.2f}%"
        )
    s = report.overall
    lines.append(
        f"Overall: precision: {s.precision:.2f}%; recall: {s.recall:.2f}%; F1: {s.f1:.2f}%"
    )
    return "\n".join(lines) + "\n"


def format_report_kv(report):
    """Flat key-value rendering, one `name.field=value` pair per line."""
    lines = []

    def emit(name, s):
        lines.append(f"{name}.precision={s.precision:.2f}")
        lines.append(f"{name}.recall={s.recall:.2f}")
        lines.append(f"{name}.f1={s.f1:.2f}")
        lines.append(f"{name}.gold={s.gold}")
        lines.append(f"{name}.predicted={s.predicted}")
        lines.append(f"{name}.correct={s.correct}")

    emit("overall", report.overall)
    for t, s in report.by_type.items():
        emit(t, s)
    return "\n".join(lines) + "\n"


def format_confusion(cm):
    """Aligned text table: gold tag, Total, per-predicted-tag counts, Percent."""
    header = ["Named Entity", "Total"] + cm.tags + ["Percent"]
    rows = [header]
    for i, t in enumerate(cm.tags):
        row = [t, str(cm.row_total(i))]
        row += [str(int(c)) for c in cm.counts[i]]
        row.append(f"{cm.row_percent(i):.3f}")
        rows.append(row)
    widths = [max(len(r[j]) for r in rows) for j in range(len(header))]
    out = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [r[j].rjust(widths[j]) for j in range(1, len(r))]
        out.append("  ".join(cells).rstrip())
    return "\n".join(out) + "\n"
