"""Synthetic corpus generators for capacity and decoder-comparison checks.

The transition corpus makes interior entity tokens uninformative on their
own: every entity is a type-revealing opener word followed by nonce interior
tokens drawn from one shared distribution, and test-set nonces are fresh
(out of vocabulary). Getting interior tags right therefore requires the
transition context (which opener type came before), which is exactly what a
CRF's transition table models and a per-token softmax cannot.
"""

from sekira.corpus import Dataset, LabeledSentence
from sekira.numerics import Rng

OPENERS = {
    "PER": ["mr", "dr"],
    "ORG": ["ooo", "zao"],
    "LOC": ["gorod", "selo"],
}
CONTEXT = ["said", "met", "near", "about", "today", "report", "while"]
TAGSET = ["O", "B-PER", "I-PER", "B-ORG", "I-ORG", "B-LOC", "I-LOC"]
TYPES = ["PER", "ORG", "LOC"]


def _nonce(rng):
    return "".join(chr(ord("a") + rng.randint(26)) for _ in range(4 + rng.randint(3)))


def _sentence(rng):
    tokens = []
    tags = []

    def pad():
        for _ in range(rng.randint(3)):
            tokens.append(CONTEXT[rng.randint(len(CONTEXT))])
            tags.append("O")

    for _ in range(1 + rng.randint(2)):
        pad()
        typ = TYPES[rng.randint(len(TYPES))]
        names = OPENERS[typ]
        tokens.append(names[rng.randint(len(names))])
        tags.append("B-" + typ)
        for _ in range(1 + rng.randint(2)):
            tokens.append(_nonce(rng))
            tags.append("I-" + typ)
    pad()
    return LabeledSentence(tokens=tokens, tags=tags)


def transition_corpus(seed, n_train=60, n_test=30):
    """(train, test) datasets; test interiors are fresh nonces (OOV)."""
    rng = Rng(seed)
    train = Dataset(sentences=[_sentence(rng) for _ in range(n_train)], tagset=list(TAGSET))
    test = Dataset(sentences=[_sentence(rng) for _ in range(n_test)], tagset=list(TAGSET))
    return train, test
