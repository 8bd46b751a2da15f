"""Neural feature extractor: char Bi-LSTM per word, word Bi-LSTM per sentence,
optional highway layers, and a linear projection to per-tag emission scores.

Forward passes cache every intermediate needed by the hand-derived backward
pass; gradients are returned as a flat dict whose keys name parameter tensors
(e.g. "word_fwd.W_ix") or individual embedding rows ("word_emb.W[17]"), the
same currency consumed by the optimizer helpers in numerics.
"""

import re
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable
from .numerics import dropout_mask, glorot_init, sigmoid, tanh

_ROW_KEY = re.compile(r"^(char_emb|word_emb)\.W\[(\d+)\]$")


@dataclass
class LstmCellParams:
    """One direction's LSTM cell: per-gate input and recurrent weights.

    Matrix shapes are hidden x input for W_*x and hidden x hidden for W_*h;
    biases have length hidden.
    """

    W_ix: np.ndarray
    W_ih: np.ndarray
    W_fx: np.ndarray
    W_fh: np.ndarray
    W_cx: np.ndarray
    W_ch: np.ndarray
    W_ox: np.ndarray
    W_oh: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    @classmethod
    def init(cls, input_dim, hidden_dim, rng):
        def wx():
            return glorot_init(hidden_dim, input_dim, rng)

        def wh():
            return glorot_init(hidden_dim, hidden_dim, rng)

        return cls(
            W_ix=wx(), W_ih=wh(), W_fx=wx(), W_fh=wh(),
            W_cx=wx(), W_ch=wh(), W_ox=wx(), W_oh=wh(),
            b_i=np.zeros(hidden_dim), b_f=np.zeros(hidden_dim),
            b_c=np.zeros(hidden_dim), b_o=np.zeros(hidden_dim),
        )

    @property
    def hidden_dim(self):
        return self.W_ix.shape[0]

    @property
    def input_dim(self):
        return self.W_ix.shape[1]

    def named(self, prefix):
        return {
            prefix + ".W_ix": self.W_ix, prefix + ".W_ih": self.W_ih,
            prefix + ".W_fx": self.W_fx, prefix + ".W_fh": self.W_fh,
            prefix + ".W_cx": self.W_cx, prefix + ".W_ch": self.W_ch,
            prefix + ".W_ox": self.W_ox, prefix + ".W_oh": self.W_oh,
            prefix + ".b_i": self.b_i, prefix + ".b_f": self.b_f,
            prefix + ".b_c": self.b_c, prefix + ".b_o": self.b_o,
        }


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zero(cls, hidden_dim):
        return cls(h=np.zeros(hidden_dim), c=np.zeros(hidden_dim))


def _step(params, x, prev):
    """One LSTM step; returns (state, cache for the backward pass)."""
    if x.shape[0] != params.input_dim:
        raise ValueError(f"input dim {x.shape[0]} != cell input dim {params.input_dim}")
    if prev.h.shape[0] != params.hidden_dim:
        raise ValueError(f"state dim {prev.h.shape[0]} != cell hidden dim {params.hidden_dim}")
    i = sigmoid(params.W_ix @ x + params.W_ih @ prev.h + params.b_i)
    f = sigmoid(params.W_fx @ x + params.W_fh @ prev.h + params.b_f)
    c_new = tanh(params.W_cx @ x + params.W_ch @ prev.h + params.b_c)
    o = sigmoid(params.W_ox @ x + params.W_oh @ prev.h + params.b_o)
    c = f * prev.c + i * c_new
    tc = tanh(c)
    h = o * tc
    cache = (x, prev.h, prev.c, i, f, o, c_new, tc)
    return LstmState(h=h, c=c), cache


def _step_backward(params, cache, dh, dc_in, grads, prefix):
    """Backprop one LSTM step.

    dh is the gradient arriving at h_t (external plus recurrent), dc_in the
    recurrent gradient arriving at c_t. Accumulates parameter gradients into
    grads under prefix; returns (dx, dh_prev, dc_prev).
    """
    x, h_prev, c_prev, i, f, o, c_new, tc = cache
    do = dh * tc
    dc = dc_in + dh * o * (1.0 - tc * tc)
    df = dc * c_prev
    di = dc * c_new
    dc_new = dc * i
    dc_prev = dc * f
    da_i = di * i * (1.0 - i)
    da_f = df * f * (1.0 - f)
    da_o = do * o * (1.0 - o)
    da_c = dc_new * (1.0 - c_new * c_new)

    def acc(name, val):
        grads[prefix + "." + name] = grads.get(prefix + "." + name, 0.0) + val

    acc("W_ix", np.outer(da_i, x))
    acc("W_ih", np.outer(da_i, h_prev))
    acc("W_fx", np.outer(da_f, x))
    acc("W_fh", np.outer(da_f, h_prev))
    acc("W_cx", np.outer(da_c, x))
    acc("W_ch", np.outer(da_c, h_prev))
    acc("W_ox", np.outer(da_o, x))
    acc("W_oh", np.outer(da_o, h_prev))
    acc("b_i", da_i)
    acc("b_f", da_f)
    acc("b_c", da_c)
    acc("b_o", da_o)
    dx = params.W_ix.T @ da_i + params.W_fx.T @ da_f + params.W_cx.T @ da_c + params.W_ox.T @ da_o
    dh_prev = params.W_ih.T @ da_i + params.W_fh.T @ da_f + params.W_ch.T @ da_c + params.W_oh.T @ da_o
    return dx, dh_prev, dc_prev


def lstm_step(params, x_t, prev):
    """Single LSTM cell update; gates via sigmoid, candidate and output via tanh."""
    state, _ = _step(params, np.asarray(x_t, dtype=float), prev)
    return state


def _run(params, inputs):
    """Unrolled LSTM from a zero state; returns (states, step caches)."""
    state = LstmState.zero(params.hidden_dim)
    states = []
    caches = []
    for x in inputs:
        state, cache = _step(params, x, state)
        states.append(state)
        caches.append(cache)
    return states, caches


def lstm_forward(params, inputs, init=None):
    """States from applying the cell left to right; empty input gives []."""
    state = LstmState.zero(params.hidden_dim) if init is None else init
    out = []
    for x in inputs:
        state, _ = _step(params, np.asarray(x, dtype=float), state)
        out.append(state)
    return out


def bilstm_forward(fwd_params, bwd_params, inputs):
    """Per-position concat of forward h_t and backward h_t (run over reversed input)."""
    xs = [np.asarray(x, dtype=float) for x in inputs]
    fwd = lstm_forward(fwd_params, xs)
    bwd = lstm_forward(bwd_params, xs[::-1])[::-1]
    return [np.concatenate([f.h, b.h]) for f, b in zip(fwd, bwd)]


@dataclass
class HighwayParams:
    """Square transform/gate pair: y = tanh(W_H x + b_H) * G + x * (1 - G)."""

    W_H: np.ndarray
    b_H: np.ndarray
    W_G: np.ndarray
    b_G: np.ndarray

    @classmethod
    def init(cls, dim, rng):
        return cls(
            W_H=glorot_init(dim, dim, rng), b_H=np.zeros(dim),
            W_G=glorot_init(dim, dim, rng), b_G=np.zeros(dim),
        )

    def named(self, prefix):
        return {
            prefix + ".W_H": self.W_H, prefix + ".b_H": self.b_H,
            prefix + ".W_G": self.W_G, prefix + ".b_G": self.b_G,
        }


def _highway(params, x):
    if x.shape[0] != params.W_H.shape[1]:
        raise ValueError(f"input dim {x.shape[0]} != highway dim {params.W_H.shape[1]}")
    H = tanh(params.W_H @ x + params.b_H)
    G = sigmoid(params.W_G @ x + params.b_G)
    y = H * G + x * (1.0 - G)
    return y, (x, H, G)


def _highway_backward(params, cache, dy, grads, prefix):
    x, H, G = cache
    dH = dy * G
    dG = dy * (H - x)
    dx = dy * (1.0 - G)
    da_H = dH * (1.0 - H * H)
    da_G = dG * G * (1.0 - G)
    grads[prefix + ".W_H"] = grads.get(prefix + ".W_H", 0.0) + np.outer(da_H, x)
    grads[prefix + ".b_H"] = grads.get(prefix + ".b_H", 0.0) + da_H
    grads[prefix + ".W_G"] = grads.get(prefix + ".W_G", 0.0) + np.outer(da_G, x)
    grads[prefix + ".b_G"] = grads.get(prefix + ".b_G", 0.0) + da_G
    dx = dx + params.W_H.T @ da_H + params.W_G.T @ da_G
    return dx


def highway_forward(params, x):
    """Blend of a tanh transform and the raw input, weighted by a learned gate."""
    y, _ = _highway(params, np.asarray(x, dtype=float))
    return y


@dataclass
class GateParams:
    """Input-conditioned carry gate blending an LSTM output with its own input."""

    W: np.ndarray
    b: np.ndarray

    @classmethod
    def init(cls, dim, rng):
        return cls(W=glorot_init(dim, dim, rng), b=np.zeros(dim))

    def named(self, prefix):
        return {prefix + ".W": self.W, prefix + ".b": self.b}


def highway_bilstm_forward(fwd, bwd, gate_fwd, gate_bwd, inputs):
    """Bi-LSTM where each direction's output is gated against its input.

    Requires input dim == hidden dim per direction; the gate mixes vectors
    elementwise so the shapes must agree.
    """
    xs = [np.asarray(x, dtype=float) for x in inputs]
    for params in (fwd, bwd):
        if params.input_dim != params.hidden_dim:
            raise ValueError(
                f"gated Bi-LSTM needs input dim == hidden dim, got {params.input_dim} != {params.hidden_dim}"
            )
    out_fwd = _gated_direction(fwd, gate_fwd, xs)[0]
    out_bwd = _gated_direction(bwd, gate_bwd, xs[::-1])[0][::-1]
    return [np.concatenate([f, b]) for f, b in zip(out_fwd, out_bwd)]


def _gated_direction(params, gate, xs):
    """One gated direction over xs in processing order; returns (outputs, caches)."""
    states, step_caches = _run(params, xs)
    outs = []
    gate_caches = []
    for x, st in zip(xs, states):
        g = sigmoid(gate.W @ x + gate.b)
        outs.append(g * st.h + (1.0 - g) * x)
        gate_caches.append((x, st.h, g))
    return outs, (step_caches, gate_caches)


def _gated_direction_backward(params, gate, caches, douts, grads, prefix, gate_prefix):
    """Backprop one gated direction; returns per-step input gradients."""
    step_caches, gate_caches = caches
    n = len(gate_caches)
    dh_ext = [None] * n
    dx_ext = [np.zeros_like(gate_caches[0][0]) for _ in range(n)]
    for s in range(n):
        x, h, g = gate_caches[s]
        dout = douts[s]
        dg = dout * (h - x)
        dh_ext[s] = dout * g
        dx_ext[s] += dout * (1.0 - g)
        da = dg * g * (1.0 - g)
        grads[gate_prefix + ".W"] = grads.get(gate_prefix + ".W", 0.0) + np.outer(da, x)
        grads[gate_prefix + ".b"] = grads.get(gate_prefix + ".b", 0.0) + da
        dx_ext[s] += gate.W.T @ da
    dxs = _run_backward(params, step_caches, dh_ext, grads, prefix)
    return [a + b for a, b in zip(dxs, dx_ext)]


def _run_backward(params, caches, dh_ext, grads, prefix):
    """BPTT over one direction; dh_ext[s] is the external gradient at h_s."""
    n = len(caches)
    dxs = [None] * n
    dh_next = np.zeros(params.hidden_dim)
    dc_next = np.zeros(params.hidden_dim)
    for s in reversed(range(n)):
        dh = dh_next + (dh_ext[s] if dh_ext[s] is not None else 0.0)
        dxs[s], dh_next, dc_next = _step_backward(params, caches[s], dh, dc_next, grads, prefix)
    return dxs


def _char_encode(char_table, fwd, bwd, word):
    """Char-level word vector with caches: concat of final fwd and bwd states."""
    if word:
        idxs = [char_table.row_index(ch) for ch in word]
    else:
        idxs = [1]  # empty token encodes as a single PAD character
    xs = [char_table.weights[i] for i in idxs]
    fwd_states, fwd_caches = _run(fwd, xs)
    bwd_states, bwd_caches = _run(bwd, xs[::-1])
    vec = np.concatenate([fwd_states[-1].h, bwd_states[-1].h])
    return vec, (idxs, fwd_caches, bwd_caches)


def char_encode(char_table, fwd, bwd, word):
    """Character Bi-LSTM representation of one word, length 2 x char hidden dim."""
    vec, _ = _char_encode(char_table, fwd, bwd, word)
    return vec


def _char_encode_backward(fwd, bwd, cache, dvec, grads, trainable):
    """Backprop char_encode; accumulates char embedding row grads when trainable."""
    idxs, fwd_caches, bwd_caches = cache
    n = len(idxs)
    hidden = fwd.hidden_dim
    dh_fwd = [None] * n
    dh_fwd[n - 1] = dvec[:hidden]
    dh_bwd = [None] * n
    dh_bwd[n - 1] = dvec[hidden:]
    dxs_f = _run_backward(fwd, fwd_caches, dh_fwd, grads, "char_fwd")
    dxs_b = _run_backward(bwd, bwd_caches, dh_bwd, grads, "char_bwd")
    if not trainable:
        return
    for pos, idx in enumerate(idxs):
        key = f"char_emb.W[{idx}]"
        grads[key] = grads.get(key, 0.0) + dxs_f[pos] + dxs_b[n - 1 - pos]


@dataclass
class EncoderConfig:
    char_dim: int = 25
    word_dim: int = 100
    char_hidden: int = 25
    word_hidden: int = 100
    use_char_highway: bool = False
    use_word_highway: bool = False
    dropout_rate: float = 0.5

    def __post_init__(self):
        for name in ("char_dim", "word_dim", "char_hidden", "word_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def concat_dim(self):
        return 2 * self.char_hidden + self.word_dim


@dataclass
class EmissionMatrix:
    T: int
    K: int
    scores: np.ndarray


class Encoder:
    """Full feature extractor mapping a token sequence to emission scores.

    Construction draws parameters from rng in a fixed order (char table,
    word table, char cells, char highway, word cells, word gates, projection)
    so a seed fully determines the initial model.
    """

    def __init__(self, config, word_vocab, char_vocab, num_tags, rng, word_table=None):
        if num_tags < 1:
            raise ValueError("num_tags must be >= 1")
        if config.use_word_highway and config.concat_dim != config.word_hidden:
            raise ValueError(
                "word-level highway gating needs concat dim == word hidden dim; "
                f"got 2*{config.char_hidden}+{config.word_dim} = {config.concat_dim} "
                f"!= {config.word_hidden}"
            )
        self.config = config
        self.num_tags = num_tags
        self.char_table = EmbeddingTable(char_vocab, config.char_dim, rng=rng, lowercase_fallback=False)
        if word_table is None:
            word_table = EmbeddingTable(word_vocab, config.word_dim, rng=rng)
        elif word_table.dim != config.word_dim:
            raise ValueError(f"word table dim {word_table.dim} != configured {config.word_dim}")
        self.word_table = word_table
        self.char_fwd = LstmCellParams.init(config.char_dim, config.char_hidden, rng)
        self.char_bwd = LstmCellParams.init(config.char_dim, config.char_hidden, rng)
        self.char_hw = HighwayParams.init(2 * config.char_hidden, rng) if config.use_char_highway else None
        self.word_fwd = LstmCellParams.init(config.concat_dim, config.word_hidden, rng)
        self.word_bwd = LstmCellParams.init(config.concat_dim, config.word_hidden, rng)
        if config.use_word_highway:
            self.word_gate_fwd = GateParams.init(config.concat_dim, rng)
            self.word_gate_bwd = GateParams.init(config.concat_dim, rng)
        else:
            self.word_gate_fwd = None
            self.word_gate_bwd = None
        self.proj_W = glorot_init(num_tags, 2 * config.word_hidden, rng)
        self.proj_b = np.zeros(num_tags)
        self._cache = None

    def parameters(self):
        """All dense parameter tensors by name (embedding matrices included)."""
        out = {"char_emb.W": self.char_table.weights, "word_emb.W": self.word_table.weights}
        out.update(self.char_fwd.named("char_fwd"))
        out.update(self.char_bwd.named("char_bwd"))
        if self.char_hw is not None:
            out.update(self.char_hw.named("char_hw"))
        out.update(self.word_fwd.named("word_fwd"))
        out.update(self.word_bwd.named("word_bwd"))
        if self.word_gate_fwd is not None:
            out.update(self.word_gate_fwd.named("word_gate_fwd"))
            out.update(self.word_gate_bwd.named("word_gate_bwd"))
        out["proj.W"] = self.proj_W
        out["proj.b"] = self.proj_b
        return out

    def resolve_param(self, key):
        """Map a gradient key to its parameter array; row keys give row views."""
        m = _ROW_KEY.match(key)
        if m:
            table = self.char_table if m.group(1) == "char_emb" else self.word_table
            return table.weights[int(m.group(2))]
        return self.parameters()[key]

    def forward(self, tokens, training=False, rng=None, dropout_masks=None):
        """Emission scores for a sentence; returns (T x K matrix, backward cache).

        dropout_masks overrides the rng draw (tests pin masks with it); when
        training and the rate is positive, one of the two must be supplied.
        """
        tokens = list(tokens)
        if not tokens:
            raise ValueError("cannot encode an empty sentence")
        cfg = self.config
        char_caches = []
        char_vecs = []
        hw_caches = []
        for tok in tokens:
            vec, cc = _char_encode(self.char_table, self.char_fwd, self.char_bwd, tok)
            char_caches.append(cc)
            if self.char_hw is not None:
                vec, hc = _highway(self.char_hw, vec)
                hw_caches.append(hc)
            char_vecs.append(vec)
        word_idxs = [self.word_table.row_index(tok) for tok in tokens]
        concat = [np.concatenate([cv, self.word_table.weights[i]]) for cv, i in zip(char_vecs, word_idxs)]

        use_dropout = training and cfg.dropout_rate > 0.0
        if dropout_masks is not None:
            masks = [np.asarray(m, dtype=float) for m in dropout_masks]
        elif use_dropout:
            if rng is None:
                raise ValueError("training-mode dropout needs an rng")
            masks = [dropout_mask(cfg.concat_dim, cfg.dropout_rate, rng, training=True) for _ in tokens]
        else:
            masks = None
        xs = [x * m for x, m in zip(concat, masks)] if masks is not None else concat

        if cfg.use_word_highway:
            out_f, caches_f = _gated_direction(self.word_fwd, self.word_gate_fwd, xs)
            out_b, caches_b = _gated_direction(self.word_bwd, self.word_gate_bwd, xs[::-1])
            rows = [np.concatenate([f, b]) for f, b in zip(out_f, out_b[::-1])]
        else:
            fwd_states, fc = _run(self.word_fwd, xs)
            bwd_states, bc = _run(self.word_bwd, xs[::-1])
            caches_f, caches_b = fc, bc
            rows = [
                np.concatenate([f.h, b.h])
                for f, b in zip(fwd_states, bwd_states[::-1])
            ]
        X = np.stack(rows)
        scores = X @ self.proj_W.T + self.proj_b
        cache = {
            "tokens": tokens,
            "char_caches": char_caches,
            "hw_caches": hw_caches,
            "word_idxs": word_idxs,
            "masks": masks,
            "caches_f": caches_f,
            "caches_b": caches_b,
            "X": X,
        }
        return scores, cache

    def backward(self, cache, d_scores):
        """Gradients of a scalar loss given its gradient wrt the emission scores."""
        cfg = self.config
        d_scores = np.asarray(d_scores, dtype=float)
        X = cache["X"]
        n = len(cache["tokens"])
        grads = {}
        grads["proj.W"] = d_scores.T @ X
        grads["proj.b"] = d_scores.sum(axis=0)
        dX = d_scores @ self.proj_W
        H = cfg.word_hidden
        d_fwd_out = [dX[t, :H] for t in range(n)]
        d_bwd_out = [dX[t, H:] for t in range(n)][::-1]  # back to processing order

        if cfg.use_word_highway:
            dxs_f = _gated_direction_backward(
                self.word_fwd, self.word_gate_fwd, cache["caches_f"], d_fwd_out,
                grads, "word_fwd", "word_gate_fwd",
            )
            dxs_b = _gated_direction_backward(
                self.word_bwd, self.word_gate_bwd, cache["caches_b"], d_bwd_out,
                grads, "word_bwd", "word_gate_bwd",
            )
        else:
            dxs_f = _run_backward(self.word_fwd, cache["caches_f"], d_fwd_out, grads, "word_fwd")
            dxs_b = _run_backward(self.word_bwd, cache["caches_b"], d_bwd_out, grads, "word_bwd")
        d_inputs = [dxs_f[t] + dxs_b[n - 1 - t] for t in range(n)]

        if cache["masks"] is not None:
            d_inputs = [d * m for d, m in zip(d_inputs, cache["masks"])]

        ch = 2 * cfg.char_hidden
        for t in range(n):
            d_char = d_inputs[t][:ch]
            d_word = d_inputs[t][ch:]
            if self.word_table.trainable:
                key = f"word_emb.W[{cache['word_idxs'][t]}]"
                grads[key] = grads.get(key, 0.0) + d_word
            if self.char_hw is not None:
                d_char = _highway_backward(self.char_hw, cache["hw_caches"][t], d_char, grads, "char_hw")
            _char_encode_backward(
                self.char_fwd, self.char_bwd, cache["char_caches"][t], d_char,
                grads, self.char_table.trainable,
            )
        return grads


def encode_sentence(model, sentence, training=False, rng=None):
    """Emission scores for one sentence; caches activations on the model for
    a following encoder_backward call (training mutation owns the model)."""
    scores, cache = model.forward(sentence, training=training, rng=rng)
    model._cache = cache
    return EmissionMatrix(T=scores.shape[0], K=scores.shape[1], scores=scores)


def encoder_backward(model, sentence, upstream):
    """Parameter gradients for the most recent encode_sentence on this model."""
    cache = model._cache
    if cache is None or cache["tokens"] != list(sentence):
        raise RuntimeError("no cached forward pass for this sentence")
    model._cache = None
    return model.backward(cache, upstream)
