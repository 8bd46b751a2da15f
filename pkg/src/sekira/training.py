"""Training loop, tagging model container, and checkpoint conversion.

Training is per-sentence SGD with a fixed epoch count and best-epoch
selection: after every epoch the model is scored on the validation set and
the parameters of the highest overall F1 seen so far (including the
untrained starting point) are what ends up in the returned checkpoint. All
randomness (init, shuffling, dropout) flows from the one config seed.
"""

from dataclasses import asdict, dataclass

from . import crf as crf_mod
from .checkpoint import Checkpoint
from .corpus import LabeledSentence
from .embeddings import build_char_vocab, build_vocab, load_pretrained
from .encoder import Encoder, EncoderConfig
from .errors import CheckpointError, DataError
from .metrics import evaluate
from .numerics import Rng, clip_gradients, sgd_step


@dataclass
class TrainConfig:
    lr: float = 0.005
    dropout: float = 0.5
    epochs: int = 100
    seed: int = 0
    clip_norm: float = 5.0
    char_dim: int = 25
    word_dim: int = 100
    char_hidden: int = 25
    word_hidden: int = 100
    use_char_highway: bool = False
    use_word_highway: bool = False
    constrain_transitions: bool = False
    freeze_embeddings: bool = False
    embeddings: str = None
    decoder: str = "crf"
    min_count: int = 1
    lr_decay: float = 0.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.decoder not in ("crf", "softmax"):
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.clip_norm < 0:
            raise ValueError("clip_norm must be >= 0 (0 disables clipping)")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})

    def encoder_config(self):
        return EncoderConfig(
            char_dim=self.char_dim,
            word_dim=self.word_dim,
            char_hidden=self.char_hidden,
            word_hidden=self.word_hidden,
            use_char_highway=self.use_char_highway,
            use_word_highway=self.use_word_highway,
            dropout_rate=self.dropout,
        )


@dataclass
class EpochStats:
    epoch: int
    train_loss: float  # None for the pre-training baseline row
    valid_f1: float


class TaggerModel:
    """Encoder plus decoding layer (CRF transitions or per-token softmax)."""

    def __init__(self, config, encoder, tagset):
        self.config = config
        self.encoder = encoder
        self.tagset = list(tagset)
        self.tag_index = {t: i for i, t in enumerate(self.tagset)}
        if config.constrain_transitions:
            self.crf = crf_mod.constrained_transitions(self.tagset)
        else:
            self.crf = crf_mod.CrfParams(len(self.tagset))

    def parameters(self):
        out = self.encoder.parameters()
        out["crf.transitions"] = self.crf.transitions
        return out

    def resolve_param(self, key):
        if key == "crf.transitions":
            return self.crf.transitions
        return self.encoder.resolve_param(key)

    def sentence_loss(self, sentence, training=False, rng=None):
        """NLL of the gold tags; returns (loss, gradient dict) when training."""
        tags = [self.tag_index[t] for t in sentence.tags]
        scores, cache = self.encoder.forward(sentence.tokens, training=training, rng=rng)
        if self.config.decoder == "crf":
            loss, d_em, d_tr = crf_mod.nll_loss(self.crf, scores, tags)
        else:
            loss, d_em = crf_mod.softmax_loss(scores, tags)
            d_tr = None
        if not training:
            return loss, None
        grads = self.encoder.backward(cache, d_em)
        if d_tr is not None:
            grads["crf.transitions"] = d_tr
        return loss, grads

    def decode(self, tokens):
        scores, _ = self.encoder.forward(tokens)
        if self.config.decoder == "crf":
            idxs, _ = crf_mod.viterbi_decode(self.crf, scores)
        else:
            idxs = crf_mod.softmax_decode(scores)
        return [self.tagset[i] for i in idxs]

    def decode_dataset(self, dataset):
        return [
            LabeledSentence(tokens=list(s.tokens), tags=self.decode(s.tokens))
            for s in dataset.sentences
        ]

    def valid_f1(self, dataset):
        return evaluate(dataset.sentences, self.decode_dataset(dataset)).overall.f1


def build_model(config, train_dataset, rng, log=None):
    """Fresh model over the training data's vocabularies and tagset."""
    token_seqs = [s.tokens for s in train_dataset.sentences]
    word_vocab = build_vocab(token_seqs, min_count=config.min_count)
    char_vocab = build_char_vocab(token_seqs)
    word_table = None
    if config.embeddings is not None:
        with open(config.embeddings, encoding="utf-8") as stream:
            word_table, report = load_pretrained(stream, word_vocab, config.word_dim, rng)
        if log is not None:
            log(
                f"pretrained vectors: {report.matched}/{report.total_unique} "
                f"unique words matched ({report.coverage:.2f}%)"
            )
    encoder = Encoder(
        config.encoder_config(),
        word_vocab,
        char_vocab,
        num_tags=len(train_dataset.tagset),
        rng=rng,
        word_table=word_table,
    )
    if config.freeze_embeddings:
        encoder.word_table.trainable = False
    return TaggerModel(config, encoder, train_dataset.tagset)


def train(config, train_dataset, valid_dataset, log=None):
    """Train and return (Checkpoint of the best validation epoch, history)."""
    if not train_dataset.sentences:
        raise DataError("training set is empty")
    missing = [t for t in valid_dataset.tagset if t not in train_dataset.tagset]
    if missing:
        raise DataError(f"validation tags absent from training tagset: {', '.join(missing)}")

    rng = Rng(config.seed)
    model = build_model(config, train_dataset, rng, log=log)

    def snapshot():
        return {name: arr.copy() for name, arr in model.parameters().items()}

    best_f1 = model.valid_f1(valid_dataset)
    best_tensors = snapshot()
    best_epoch = 0
    history = [EpochStats(epoch=0, train_loss=None, valid_f1=best_f1)]
    if log is not None:
        log(f"epoch 0 (untrained): valid F1 {best_f1:.2f}")

    sentences = list(train_dataset.sentences)
    for epoch in range(1, config.epochs + 1):
        lr = config.lr / (1.0 + config.lr_decay * (epoch - 1))
        rng.shuffle(sentences)
        total_loss = 0.0
        for sentence in sentences:
            loss, grads = model.sentence_loss(sentence, training=True, rng=rng)
            total_loss += loss
            if config.clip_norm > 0:
                clip_gradients(grads, config.clip_norm)
            params = {k: model.resolve_param(k) for k in grads}
            sgd_step(params, grads, lr)
        mean_loss = total_loss / len(sentences)
        f1 = model.valid_f1(valid_dataset)
        history.append(EpochStats(epoch=epoch, train_loss=mean_loss, valid_f1=f1))
        if log is not None:
            log(f"epoch {epoch}: train loss {mean_loss:.4f}, valid F1 {f1:.2f}")
        if f1 > best_f1:
            best_f1 = f1
            best_tensors = snapshot()
            best_epoch = epoch
    if log is not None:
        log(f"best epoch {best_epoch}: valid F1 {best_f1:.2f}")

    ckpt = Checkpoint(
        version="v1",
        tagset=model.tagset,
        word_vocab=model.encoder.word_table.vocab,
        char_vocab=model.encoder.char_table.vocab,
        tensors=best_tensors,
        config=config.to_dict(),
        best_f1=best_f1,
    )
    return ckpt, history


def model_from_checkpoint(ckpt):
    """Reconstruct a TaggerModel; tensor shapes must match the configuration."""
    config = TrainConfig.from_dict(ckpt.config)
    encoder = Encoder(
        config.encoder_config(),
        ckpt.word_vocab,
        ckpt.char_vocab,
        num_tags=len(ckpt.tagset),
        rng=Rng(0),
    )
    model = TaggerModel(config, encoder, ckpt.tagset)
    params = model.parameters()
    if set(params) != set(ckpt.tensors):
        missing = sorted(set(params) ^ set(ckpt.tensors))
        raise CheckpointError(f"checkpoint tensors do not match model: {', '.join(missing)}")
    for name, arr in ckpt.tensors.items():
        target = params[name]
        if target.shape != arr.shape:
            raise CheckpointError(
                f"shape mismatch for {name}: checkpoint {arr.shape}, model {target.shape}"
            )
        target[...] = arr
    return model
