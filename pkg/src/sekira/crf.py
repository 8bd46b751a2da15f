"""Linear-chain CRF: path scoring, log-partition, loss gradients, Viterbi.

A path through a T x K emission matrix is scored as the sum of per-token
emission scores plus tag-transition scores, with virtual begin/end states so
the first and last tags are scored too. Training minimizes the negative log
likelihood of the gold path; the gradient comes out of forward-backward as
posterior marginals minus gold indicators.
"""

import re

import numpy as np

from .numerics import log_sum_exp

# Finite stand-in for -infinity: keeps log-space arithmetic NaN-free while
# making masked transitions unreachable in practice.
NEG_INF = -1e30

_TAG_RE = re.compile(r"^(?:O|[BI]-.+)$")


class CrfParams:
    """Transition table over ``num_tags`` tags plus begin/end states.

    ``transitions[i, j]`` scores tag j following tag i. Index ``bos``
    (= num_tags) is the virtual sentence-start state and ``eos``
    (= num_tags + 1) the virtual end state. Transitions into bos and out of
    eos are pinned at NEG_INF and marked untrainable, as are any entries
    masked out by :func:`constrained_transitions`.
    """

    def __init__(self, num_tags):
        if num_tags < 1:
            raise ValueError("need at least one tag")
        self.num_tags = num_tags
        n = num_tags + 2
        self.bos = num_tags
        self.eos = num_tags + 1
        self.transitions = np.zeros((n, n))
        self.trainable = np.ones((n, n), dtype=bool)
        self.transitions[:, self.bos] = NEG_INF
        self.transitions[self.eos, :] = NEG_INF
        self.trainable[:, self.bos] = False
        self.trainable[self.eos, :] = False


def _check_instance(params, emissions, tags=None):
    emissions = np.asarray(emissions, dtype=np.float64)
    if emissions.ndim != 2:
        raise ValueError("emissions must be a T x K matrix")
    T, K = emissions.shape
    if T < 1:
        raise ValueError("need at least one token")
    if K != params.num_tags:
        raise ValueError(f"emission width {K} does not match tag count {params.num_tags}")
    if tags is not None:
        tags = [int(t) for t in tags]
        if len(tags) != T:
            raise ValueError(f"tag sequence length {len(tags)} != sentence length {T}")
        if any(t < 0 or t >= K for t in tags):
            raise ValueError("tag index out of range")
    return emissions, tags


def sequence_score(params, emissions, tags):
    """Score of one tag path: boundary + transition + emission terms.

    Accumulation order is begin-transition, then per token its emission
    followed by the outgoing transition; Viterbi scores the winning path in
    the same order, so equal paths give bitwise-equal scores.
    """
    emissions, tags = _check_instance(params, emissions, tags)
    A = params.transitions
    s = float(A[params.bos, tags[0]])
    for i, y in enumerate(tags):
        s += float(emissions[i, y])
        if i + 1 < len(tags):
            s += float(A[y, tags[i + 1]])
    s += float(A[tags[-1], params.eos])
    return s


def log_partition(params, emissions):
    """Log of the sum of exp(score) over all K^T paths (forward algorithm)."""
    emissions, _ = _check_instance(params, emissions)
    T, K = emissions.shape
    A = params.transitions
    alpha = A[params.bos, :K] + emissions[0]
    for t in range(1, T):
        alpha = log_sum_exp(alpha[:, None] + A[:K, :K], axis=0) + emissions[t]
    return log_sum_exp(alpha + A[:K, params.eos])


def _forward_backward(params, emissions):
    T, K = emissions.shape
    A = params.transitions
    alpha = np.empty((T, K))
    alpha[0] = A[params.bos, :K] + emissions[0]
    for t in range(1, T):
        alpha[t] = log_sum_exp(alpha[t - 1][:, None] + A[:K, :K], axis=0) + emissions[t]
    beta = np.empty((T, K))
    beta[T - 1] = A[:K, params.eos]
    for t in range(T - 2, -1, -1):
        beta[t] = log_sum_exp(A[:K, :K] + (emissions[t + 1] + beta[t + 1])[None, :], axis=1)
    log_z = log_sum_exp(alpha[T - 1] + beta[T - 1])
    return alpha, beta, log_z


def nll_loss(params, emissions, tags):
    """Negative log likelihood of the gold path and its gradients.

    Returns ``(loss, d_emissions, d_transitions)`` where the emission
    gradient is posterior marginals minus the gold one-hot rows and the
    transition gradient is expected minus observed transition counts
    (boundary transitions included). Untrainable transition entries get a
    zero gradient.
    """
    emissions, tags = _check_instance(params, emissions, tags)
    T, K = emissions.shape
    A = params.transitions
    alpha, beta, log_z = _forward_backward(params, emissions)
    loss = log_z - sequence_score(params, emissions, tags)

    marginals = np.exp(alpha + beta - log_z)
    d_emissions = marginals.copy()
    d_emissions[np.arange(T), tags] -= 1.0

    d_trans = np.zeros_like(A)
    for t in range(T - 1):
        xi = np.exp(
            alpha[t][:, None] + A[:K, :K] + (emissions[t + 1] + beta[t + 1])[None, :] - log_z
        )
        d_trans[:K, :K] += xi
        d_trans[tags[t], tags[t + 1]] -= 1.0
    d_trans[params.bos, :K] += marginals[0]
    d_trans[params.bos, tags[0]] -= 1.0
    d_trans[:K, params.eos] += marginals[T - 1]
    d_trans[tags[-1], params.eos] -= 1.0
    d_trans[~params.trainable] = 0.0
    return loss, d_emissions, d_trans


def viterbi_decode(params, emissions):
    """Highest-scoring tag path and its score.

    Ties are broken toward the lowest tag index at every backtracking step
    (np.argmax returns the first maximum).
    """
    emissions, _ = _check_instance(params, emissions)
    T, K = emissions.shape
    A = params.transitions
    delta = A[params.bos, :K] + emissions[0]
    backpointers = np.empty((T - 1, K), dtype=np.intp) if T > 1 else None
    for t in range(1, T):
        candidate = delta[:, None] + A[:K, :K]
        best_prev = np.argmax(candidate, axis=0)
        backpointers[t - 1] = best_prev
        delta = candidate[best_prev, np.arange(K)] + emissions[t]
    final = delta + A[:K, params.eos]
    last = int(np.argmax(final))
    score = float(final[last])
    tags = [last]
    for t in range(T - 2, -1, -1):
        tags.append(int(backpointers[t][tags[-1]]))
    tags.reverse()
    return tags, score


def softmax_decode(emissions):
    """Per-token argmax over emission rows (the CRF-free baseline decoder)."""
    emissions = np.asarray(emissions, dtype=np.float64)
    return [int(t) for t in np.argmax(emissions, axis=1)]


def softmax_loss(emissions, tags):
    """Per-token cross-entropy summed over the sentence, with its gradient."""
    emissions = np.asarray(emissions, dtype=np.float64)
    T, K = emissions.shape
    loss = 0.0
    d_emissions = np.empty_like(emissions)
    for t in range(T):
        lse = log_sum_exp(emissions[t])
        loss += lse - float(emissions[t, tags[t]])
        d_emissions[t] = np.exp(emissions[t] - lse)
        d_emissions[t, tags[t]] -= 1.0
    return loss, d_emissions


def constrained_transitions(tag_names):
    """CrfParams whose transition table forbids IOB-invalid tag bigrams.

    I-X may only follow B-X or I-X; in particular a sentence can never start
    with I-X. Forbidden entries are set to NEG_INF and excluded from training
    updates; everything else starts at zero.
    """
    for name in tag_names:
        if not _TAG_RE.match(name):
            raise ValueError(f"not an IOB tag name: {name!r}")
    params = CrfParams(len(tag_names))
    A = params.transitions
    for j, name in enumerate(tag_names):
        if not name.startswith("I-"):
            continue
        allowed = {"B-" + name[2:], "I-" + name[2:]}
        for i, prev in enumerate(tag_names):
            if prev not in allowed:
                A[i, j] = NEG_INF
                params.trainable[i, j] = False
        A[params.bos, j] = NEG_INF
        params.trainable[params.bos, j] = False
    return params
