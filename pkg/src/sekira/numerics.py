"""Dense float64 numerics: activations, RNG, dropout, SGD and gradient checks.

Matrices and vectors are plain ``numpy.float64`` arrays (row-major). Parameter
and gradient *sets* are ``dict[str, np.ndarray]`` with matching keys and
shapes, which keeps SGD, clipping and finite-difference checking uniform
across every layer of the tagger.
"""

import numpy as np

_U64 = np.uint64
_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def _mix64(z):
    """splitmix64 finalizer applied elementwise to a uint64 array."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
        return z ^ (z >> _U64(31))


class Rng:
    """Deterministic counter-based generator (splitmix64).

    Draw number k for seed s is ``mix64(s + k * golden_gamma)`` where mix64 is
    the published splitmix64 output function. The sequence depends only on the
    seed and the number of values drawn so far, so identical seeds reproduce
    identical streams on every platform, and the state is a single counter.
    """

    def __init__(self, seed=0):
        self.seed = int(seed) & _MASK64
        self._drawn = 0

    def next_uint64(self, n):
        """Next n raw 64-bit draws as a uint64 array."""
        n = int(n)
        start = self._drawn + 1
        self._drawn += n
        counters = np.arange(start, start + n, dtype=np.uint64)
        with np.errstate(over="ignore"):
            state = _U64(self.seed) + counters * _U64(_GOLDEN)
        return _mix64(state)

    def random(self, size=None):
        """Uniform float64 draws in [0, 1) with 53-bit resolution."""
        n = 1 if size is None else int(np.prod(size))
        bits = self.next_uint64(n) >> _U64(11)
        vals = bits.astype(np.float64) * (2.0 ** -53)
        return float(vals[0]) if size is None else vals.reshape(size)

    def uniform(self, low, high, size=None):
        return low + (high - low) * self.random(size)

    def randint(self, n):
        """One integer in [0, n). Modulo bias is negligible for n << 2**64."""
        return int(self.next_uint64(1)[0] % _U64(n))

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle of a mutable sequence."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]


def sigmoid(x):
    """Elementwise logistic 1 / (1 + e^-x), overflow-safe on both tails."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x):
    """Elementwise hyperbolic tangent."""
    return np.tanh(np.asarray(x, dtype=np.float64))


def log_sum_exp(x, axis=None):
    """max(x) + log(sum(exp(x - max(x)))), stable for entries up to +-1e300.

    With ``axis`` given, reduces along that axis of a 2-D array; otherwise
    reduces a vector to a scalar.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("log_sum_exp of an empty array")
    m = np.max(x, axis=axis, keepdims=axis is not None)
    s = m + np.log(np.sum(np.exp(x - m), axis=axis, keepdims=axis is not None))
    if axis is None:
        return float(s)
    return np.squeeze(s, axis=axis)


def glorot_init(rows, cols, rng):
    """Uniform init in +-sqrt(6 / (rows + cols)), shape (rows, cols)."""
    if rows < 1 or cols < 1:
        raise ValueError("glorot_init needs rows, cols >= 1")
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, (rows, cols))


def dropout_mask(n, rate, rng, training):
    """Inverted dropout mask: zeros with probability ``rate``, else 1/(1-rate).

    In inference mode (``training=False``) the mask is exactly all ones, so no
    rescaling is ever needed at test time.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return np.ones(n)
    keep = rng.random(n) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def sgd_step(params, grads, lr):
    """In-place SGD update p <- p - lr * g for every key in ``grads``.

    ``params`` must supply a same-shaped array for each gradient key.
    Returns ``params``.
    """
    for name, g in grads.items():
        p = params[name]
        if p.shape != np.shape(g):
            raise ValueError(f"shape mismatch for {name}: {p.shape} vs {np.shape(g)}")
        p -= lr * g
    return params


def global_norm(grads):
    """Global L2 norm over all arrays in a gradient set."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.asarray(g) ** 2))
    return float(np.sqrt(total))


def clip_gradients(grads, max_norm):
    """Scale all gradients by max_norm/norm when the global L2 norm exceeds it."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return grads


def finite_diff_check(f, params, analytic, h=1e-5):
    """Max relative error between analytic gradients and central differences.

    ``f`` is a zero-argument callable returning the scalar loss at the current
    parameter values; ``params`` maps names to the arrays ``f`` reads (views
    are fine), ``analytic`` maps the same names to hand-derived gradients.
    Each coordinate is perturbed in place by +-h. The relative error per
    coordinate is |num - ana| / max(1e-8, |num| + |ana|).
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    worst = 0.0
    for name, ana in analytic.items():
        theta = params[name]
        ana = np.asarray(ana)
        flat_p = theta.reshape(-1)
        flat_a = ana.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            f_plus = f()
            flat_p[i] = orig - h
            f_minus = f()
            flat_p[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise ValueError(f"non-finite loss while perturbing {name}[{i}]")
            num = (f_plus - f_minus) / (2.0 * h)
            err = abs(num - flat_a[i]) / max(1e-8, abs(num) + abs(flat_a[i]))
            if err > worst:
                worst = err
    return worst
