import numpy as np
import pytest

from sekira.corpus import LabeledSentence
from sekira.metrics import (
    ConfusionMatrix,
    EntitySpan,
    confusion,
    evaluate,
    extract_spans,
    format_confusion,
    format_report,
    format_report_kv,
)
from sekira.numerics import Rng


def sent(tags):
    return LabeledSentence(tokens=["w%d" % i for i in range(len(tags))], tags=list(tags))


def spans(tags):
    return [(s.type, s.start, s.end) for s in extract_spans(tags)]


def test_extract_spans_basic():
    assert spans(["B-PER", "I-PER", "O"]) == [("PER", 0, 2)]
    assert spans(["O", "O"]) == []
    assert spans(["B-PER", "B-PER"]) == [("PER", 0, 1), ("PER", 1, 2)]


def test_extract_spans_bare_i_run_counts():
    assert spans(["O", "I-PER", "I-PER"]) == [("PER", 1, 3)]
    assert spans(["I-ORG"]) == [("ORG", 0, 1)]


def test_extract_spans_type_switch_splits():
    assert spans(["B-PER", "I-ORG"]) == [("PER", 0, 1), ("ORG", 1, 2)]
    assert spans(["B-PER", "I-PER", "I-ORG", "I-PER"]) == [
        ("PER", 0, 2),
        ("ORG", 2, 3),
        ("PER", 3, 4),
    ]


def test_extract_spans_runs_to_end():
    assert spans(["O", "B-LOC", "I-LOC"]) == [("LOC", 1, 3)]


def test_extract_spans_rejects_garbage():
    with pytest.raises(ValueError):
        extract_spans(["B-PER", "PERSON"])


def test_evaluate_perfect():
    gold = [sent(["B-PER", "I-PER", "O", "B-ORG"])]
    rep = evaluate(gold, gold)
    assert rep.overall.precision == 100.0
    assert rep.overall.recall == 100.0
    assert rep.overall.f1 == 100.0
    assert rep.by_type["PER"].f1 == 100.0
    assert rep.by_type["ORG"].f1 == 100.0


def test_evaluate_one_of_two_matches():
    gold = [sent(["B-PER", "I-PER", "O", "B-PER", "O", "O"])]
    pred = [sent(["B-PER", "I-PER", "O", "O", "B-PER", "O"])]
    rep = evaluate(gold, pred)
    assert rep.overall.precision == 50.0
    assert rep.overall.recall == 50.0
    assert rep.overall.f1 == 50.0
    assert (rep.overall.gold, rep.overall.predicted, rep.overall.correct) == (2, 2, 1)


def test_evaluate_wrong_type_is_fp_and_fn():
    gold = [sent(["B-PER", "I-PER"])]
    pred = [sent(["B-ORG", "I-ORG"])]
    rep = evaluate(gold, pred)
    assert rep.by_type["PER"].gold == 1
    assert rep.by_type["PER"].correct == 0
    assert rep.by_type["ORG"].predicted == 1
    assert rep.by_type["ORG"].correct == 0
    assert rep.overall.f1 == 0.0


def test_evaluate_misaligned_errors():
    with pytest.raises(ValueError):
        evaluate([sent(["O"])], [sent(["O"]), sent(["O"])])
    with pytest.raises(ValueError):
        evaluate([sent(["O", "O"])], [sent(["O"])])


TAGSET = ["O", "B-PER", "I-PER", "B-ORG", "I-ORG"]


def random_sentences(rng, n):
    return [
        sent([TAGSET[rng.randint(len(TAGSET))] for _ in range(1 + rng.randint(7))])
        for _ in range(n)
    ]


def retag(rng, sentences):
    return [sent([TAGSET[rng.randint(len(TAGSET))] for _ in s.tags]) for s in sentences]


def test_evaluate_swap_swaps_precision_recall():
    rng = Rng(31)
    for _ in range(25):
        a = random_sentences(rng, 4)
        b = retag(rng, a)
        fwd = evaluate(a, b)
        rev = evaluate(b, a)
        assert fwd.overall.precision == rev.overall.recall
        assert fwd.overall.recall == rev.overall.precision


def test_evaluate_micro_sum_and_bounds():
    rng = Rng(32)
    for _ in range(25):
        a = random_sentences(rng, 5)
        b = retag(rng, a)
        rep = evaluate(a, b)
        assert rep.overall.correct == sum(s.correct for s in rep.by_type.values())
        p, r, f = rep.overall.precision, rep.overall.recall, rep.overall.f1
        assert 0.0 <= p <= 100.0 and 0.0 <= r <= 100.0
        assert f <= (p + r) / 2 + 1e-12


def test_confusion_diagonal_when_equal():
    gold = [sent(["B-PER", "O", "O"])]
    cm = confusion(gold, gold)
    assert cm.counts.sum() == 3
    for i in range(len(cm.tags)):
        assert cm.row_percent(i) == 100.0
    assert np.all(cm.counts == np.diag(np.diag(cm.counts)))


def test_confusion_single_miss():
    gold = [sent(["O"])]
    pred = [sent(["I-ORG"])]
    cm = confusion(gold, pred)
    gi = cm.tags.index("O")
    pi = cm.tags.index("I-ORG")
    assert cm.counts[gi, pi] == 1
    assert cm.row_total(gi) == 1
    assert cm.row_percent(gi) == 0.0


def test_confusion_rows_ordered_by_gold_frequency():
    gold = [sent(["O", "O", "O", "B-PER"])]
    pred = [sent(["O", "O", "B-LOC", "B-PER"])]
    cm = confusion(gold, pred)
    assert cm.tags[0] == "O"
    assert cm.tags[1] == "B-PER"
    assert "B-LOC" in cm.tags  # pred-only tag keeps a zero row
    assert cm.row_total(cm.tags.index("B-LOC")) == 0


def test_confusion_table_format_fixture():
    # layout check against the published confusion table for this task:
    # five tags, Total first, per-tag columns, Percent to 3 decimals
    tags = ["O", "I-ORG", "B-ORG", "B-PER", "I-PER"]
    counts = np.array(
        [
            [7647, 19, 22, 0, 0],
            [36, 268, 3, 1, 0],
            [38, 2, 229, 2, 1],
            [3, 1, 0, 88, 0],
            [2, 5, 0, 0, 62],
        ]
    )
    cm = ConfusionMatrix(tags=tags, counts=counts)
    text = format_confusion(cm)
    lines = text.splitlines()
    header = lines[0].split()
    assert header[:3] == ["Named", "Entity", "Total"]
    assert header[3:8] == tags
    assert header[8] == "Percent"
    o_row = lines[1].split()
    assert o_row[0] == "O"
    assert o_row[1] == "7688"
    assert o_row[2] == "7647"
    assert o_row[-1] == "99.467"
    assert lines[2].split()[1] == "308"
    assert lines[2].split()[-1] == "87.013"
    assert lines[5].split()[-1] == "89.855"


def test_format_report_lines():
    gold = [sent(["B-PER", "I-PER", "O", "B-PER", "O", "O"])]
    pred = [sent(["B-PER", "I-PER", "O", "O", "B-PER", "O"])]
    text = format_report(evaluate(gold, pred))
    assert "PER: precision: 50.00%; recall: 50.00%; F1: 50.00%" in text
    assert text.rstrip().splitlines()[-1] == "Overall: precision: 50.00%; recall: 50.00%; F1: 50.00%"


def test_format_report_kv_is_flat():
    gold = [sent(["B-PER", "O"])]
    rep = evaluate(gold, gold)
    text = format_report_kv(rep)
    entries = dict(line.split("=", 1) for line in text.strip().splitlines())
    assert entries["overall.f1"] == "100.00"
    assert entries["PER.gold"] == "1"
    assert entries["PER.correct"] == "1"


def test_span_dataclass_fields():
    s = EntitySpan("PER", 1, 3)
    assert (s.type, s.start, s.end) == ("PER", 1, 3)
