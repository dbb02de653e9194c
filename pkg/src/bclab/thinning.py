"""Dyadic thinning of a weight sequence.

Given weights ``p_n`` in ``[0, 1]`` and coefficients ``a_n >= 0``, produce
``p'_n <= p_n`` whose plain sum keeps growing with the number of occupied
dyadic levels while the weighted sum ``sum p'_n a'_n`` stays below 2.

Coefficients are rounded down to a power of two ``a'_n = 2^-k_n``:
``k = 0`` for ``a >= 1``, ``k >= 1`` for ``a in [2^-k, 2^-k+1)`` and
``k = inf`` for ``a = 0``. Every bucket of equal level whose weight mass
``P_k`` exceeds one is rescaled to unit mass.
"""

import math
from dataclasses import dataclass, field

import numpy as np

INF_LEVEL = math.inf


def dyadic_level(a):
    """Dyadic level ``k`` of a non-negative coefficient ``a``.

    >>> dyadic_level(0.6), dyadic_level(0.25), dyadic_level(1.0)
    (1, 2, 0)
    """
    a = float(a)
    if not a >= 0.0:
        raise ValueError(f"coefficient must be non-negative, got {a!r}")
    if a == 0.0:
        return INF_LEVEL
    if a >= 1.0:
        return 0
    # a = m * 2**e with m in [0.5, 1)  =>  a in [2**(e-1), 2**e)
    _, e = math.frexp(a)
    return 1 - e


def dyadic_levels(a):
    """Vectorised :func:`dyadic_level`, returned as a float array (``inf`` allowed)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 1:
        raise ValueError("coefficients must be one-dimensional")
    if not np.all(a >= 0.0):
        raise ValueError("coefficients must be non-negative")
    _, e = np.frexp(a)
    k = (1 - e).astype(float)
    k[a >= 1.0] = 0.0
    k[a == 0.0] = INF_LEVEL
    return k


def level_value(k):
    """``a' = 2^-k`` for an array of levels; ``inf`` maps to 0."""
    k = np.asarray(k, dtype=float)
    out = np.zeros_like(k)
    finite = np.isfinite(k)
    out[finite] = np.ldexp(1.0, -k[finite].astype(np.int64))
    return out


@dataclass(frozen=True)
class ThinningInput:
    p: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        a = np.asarray(self.a, dtype=float)
        if p.ndim != 1 or a.ndim != 1:
            raise ValueError("p and a must be one-dimensional")
        if p.shape != a.shape:
            raise ValueError(f"length mismatch: len(p)={p.size}, len(a)={a.size}")
        if not np.all((p >= 0.0) & (p <= 1.0)):
            bad = int(np.flatnonzero(~((p >= 0.0) & (p <= 1.0)))[0])
            raise ValueError(f"p[{bad}]={p[bad]!r} outside [0, 1]")
        if not np.all(a >= 0.0):
            bad = int(np.flatnonzero(~(a >= 0.0))[0])
            raise ValueError(f"a[{bad}]={a[bad]!r} is negative")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "a", a)


@dataclass(frozen=True)
class ThinningPlan:
    """Result of :func:`build_plan`.

    ``levels`` holds ``k_n`` (``inf`` for zero coefficients), ``a_prime`` the
    rounded coefficients, ``bucket_mass`` maps each finite level to ``P_k``,
    ``p_thinned`` holds ``p'_n`` and ``q`` the retention ratios ``p'_n / p_n``.
    """

    p: np.ndarray
    a: np.ndarray
    levels: np.ndarray
    a_prime: np.ndarray
    bucket_mass: dict = field(repr=False)
    p_thinned: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)

    def __len__(self):
        return self.p.size

    def weighted_sum(self):
        """``sum p'_n a'_n``, compensated; never exceeds 2."""
        return math.fsum((self.p_thinned * self.a_prime).tolist())

    def thinned_sum(self, horizon=None):
        return math.fsum(self.p_thinned[:horizon].tolist())


def build_plan(p, a=None):
    """Run the dyadic thinning construction on a finite prefix.

    Accepts either a :class:`ThinningInput` or the two sequences.

    >>> plan = build_plan([0.5] * 4, [0.6] * 4)
    >>> plan.p_thinned.tolist(), plan.weighted_sum()
    ([0.25, 0.25, 0.25, 0.25], 0.5)
    """
    inp = p if isinstance(p, ThinningInput) else ThinningInput(p, a)
    p, a = inp.p, inp.a
    levels = dyadic_levels(a)
    a_prime = level_value(levels)

    p_thinned = p.copy()
    bucket_mass = {}
    # stable sort keeps index order inside a bucket, so each fsum runs
    # left to right
    order = np.argsort(levels, kind="stable")
    sorted_levels = levels[order]
    cuts = np.flatnonzero(sorted_levels[1:] != sorted_levels[:-1]) + 1
    starts = np.concatenate(([0], cuts)) if p.size else np.array([], dtype=int)
    stops = np.concatenate((cuts, [p.size])) if p.size else np.array([], dtype=int)
    for lo, hi in zip(starts.tolist(), stops.tolist()):
        k = sorted_levels[lo]
        if not math.isfinite(k):
            continue
        idx = order[lo:hi]
        mass = math.fsum(p[idx].tolist())
        bucket_mass[int(k)] = mass
        if mass > 1.0:
            p_thinned[idx] = p[idx] / mass

    q = np.ones_like(p)
    pos = p > 0.0
    q[pos] = p_thinned[pos] / p[pos]
    return ThinningPlan(p, a, levels, a_prime, bucket_mass, p_thinned, q)
