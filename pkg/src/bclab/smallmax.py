"""A distribution whose partial maxima dip far below their scaling infinitely often.

The df ``G`` on ``(0, inf)`` is defined through the coordinates
``s = -log(1 - G(x))`` and ``t = log x`` by ``t = T0(s) = s / (log log s)^theta``
for ``s >= s_min``, extended linearly below ``s_min``. The scaling ``a(n)``
solves ``1 - G(a(n)) = 1/n``, i.e. ``log a(n) = T0(log n)``.

Checkpoints ``m_n = exp(s_n)`` with ``s_n = 2 n log log sqrt(n)`` are far
beyond floating range, so every quantity lives in ``(s, t)`` coordinates:
``m_n``, ``m'_n = sqrt(m_n m_{n-1})`` and ``x_n = a(m'_n)`` are never
materialised.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import logspace, streams


@dataclass(frozen=True)
class DistParams:
    theta: float = 0.5
    s_min: float = 10.0
    inversion_tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta!r}")
        if not self.s_min >= 10.0:
            raise ValueError("s_min must be >= 10")
        if not self.inversion_tol > 0.0:
            raise ValueError("inversion_tol must be positive")

    @property
    def seam_t(self):
        s = np.longdouble(self.s_min)
        return float(s / np.power(np.log(np.log(s)), np.longdouble(self.theta)))

    @property
    def slope(self):
        """Slope of the linear extension on ``(0, s_min]``."""
        return self.seam_t / self.s_min


def _t0(params, s):
    """Double-precision T0, used where a few ulps do not matter."""
    s = np.asarray(s, dtype=float)
    out = s * params.slope
    hi = s >= params.s_min
    out[hi] = s[hi] / np.power(np.log(np.log(s[hi])), params.theta)
    return out


def _t0_exact(params, s):
    """T0 evaluated in extended precision and rounded once.

    Double evaluation carries about two ulps of error, enough to map
    neighbouring doubles to the same ``t`` near ``s = 1e8``; the rounded
    extended result keeps the map injective wherever its slope allows.
    """
    s = np.asarray(s, dtype=float)
    out = s * params.slope
    hi = s >= params.s_min
    S = s[hi].astype(np.longdouble)
    th = np.longdouble(params.theta)
    out[hi] = (S / np.power(np.log(np.log(S)), th)).astype(float)
    return out


def t0(params, s):
    """Log-observation coordinate ``t`` of the tail coordinate ``s``.

    Accepts scalars or arrays.
    """
    arr = np.asarray(s, dtype=float)
    if np.any(~(arr > 0.0)):
        raise ValueError("s must be positive")
    out = _t0_exact(params, np.atleast_1d(arr))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def t0_inv(params, t):
    """Inverse of :func:`t0` by bracketing and bisection.

    Below the seam the linear extension is inverted exactly. Above it the
    bracket ``[s_min, s_hi]`` is grown by doubling until ``T0(s_hi) >= t`` and
    then halved until its width drops under ``inversion_tol`` or no double
    lies strictly inside; the end point with the closer image is returned.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0.0)) or np.any(~np.isfinite(arr)):
        raise ValueError("t must be positive and finite")
    t_flat = np.atleast_1d(arr).ravel()
    out = t_flat / params.slope
    todo = t_flat > params.seam_t
    if np.any(todo):
        tt = t_flat[todo]
        lo = np.full(tt.shape, params.s_min)
        hi = np.full(tt.shape, 2.0 * params.s_min)
        short = _t0_exact(params, hi) < tt
        while np.any(short):
            lo[short] = hi[short]
            hi[short] *= 2.0
            short = _t0_exact(params, hi) < tt
        active = np.ones(tt.shape, dtype=bool)
        while np.any(active):
            mid = 0.5 * (lo + hi)
            active &= (hi - lo > params.inversion_tol) & (mid > lo) & (mid < hi)
            up = active & (_t0_exact(params, mid) < tt)
            down = active & ~up
            lo[up] = mid[up]
            hi[down] = mid[down]
        err_lo = np.abs(_t0_exact(params, lo) - tt)
        err_hi = np.abs(_t0_exact(params, hi) - tt)
        out[todo] = np.where(err_lo < err_hi, lo, hi)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def log_tail(params, t):
    """``log(1 - G(e^t))``, the log-probability that an observation exceeds ``e^t``."""
    s = t0_inv(params, t)
    return -s


def log_scale(params, log_n):
    """``log a(n)`` from ``log n``; ``1 - G(a(n)) = 1/n``."""
    return t0(params, log_n)


# ---------------------------------------------------------------- schedule


def checkpoint_s(n):
    """``s_n = 2 n log log sqrt(n)``."""
    n = np.asarray(n, dtype=float)
    return 2.0 * n * np.log(0.5 * np.log(n))


def checkpoint_sigma(n):
    """``s_n - s_{n-1}`` without cancellation.

    ``sigma_n = 2 L(n-1) + 2 n (L(n) - L(n-1))`` with ``L(n) = log log sqrt(n)``
    and ``L(n) - L(n-1) = log1p(log1p(1/(n-1)) / log(n-1))``.
    """
    n = np.asarray(n, dtype=float)
    m = n - 1.0
    dL = np.log1p(np.log1p(1.0 / m) / np.log(m))
    return 2.0 * np.log(0.5 * np.log(m)) + 2.0 * n * dL


class ScheduleError(ValueError):
    def __init__(self, message, minimal):
        super().__init__(message)
        self.minimal = minimal


def minimal_n_min(params):
    """Smallest checkpoint index whose ``s_n`` is at least ``s_min``."""
    n = 8  # log log sqrt(n) > 0 needs n > e^2
    while checkpoint_s(n) < params.s_min:
        n += 1
    return n


@dataclass(frozen=True)
class ScheduleRow:
    n: int
    s_n: float
    sigma_n: float
    log_mprime: float
    t_n: float
    t_prime_n: float
    pi_n: float
    logPB_n: float
    PE_bound_n: float


COLUMNS = (
    "n", "s_n", "sigma_n", "log_mprime", "t_n", "t_prime_n", "pi_n", "logPB_n", "PE_bound_n",
)


@dataclass(frozen=True)
class Schedule:
    """Column-oriented checkpoint table; ``rows()`` yields :class:`ScheduleRow`.

    Besides the row fields it carries the log block size
    ``log(m_n - m_{n-1})``, the analytic ``P A_n``, the exact ``P E_n`` and
    ``s_{n_min - 1}``, the size exponent of the first block.
    """

    params: DistParams
    n: np.ndarray
    s_n: np.ndarray
    sigma_n: np.ndarray
    log_mprime: np.ndarray
    t_n: np.ndarray
    t_prime_n: np.ndarray
    pi_n: np.ndarray
    logPB_n: np.ndarray
    PE_bound_n: np.ndarray
    log_block: np.ndarray
    logPA_n: np.ndarray
    PE_n: np.ndarray
    s_first: float

    def __len__(self):
        return self.n.size

    def rows(self):
        cols = [getattr(self, c).tolist() for c in COLUMNS]
        for vals in zip(*cols):
            yield ScheduleRow(*vals)

    def index(self, n):
        i = int(n) - int(self.n[0])
        if not 0 <= i < self.n.size:
            raise KeyError(n)
        return i

    def row(self, n):
        i = self.index(n)
        return ScheduleRow(*(getattr(self, c)[i].item() for c in COLUMNS))


def schedule(params, n_min, n_max):
    """Checkpoint quantities for ``n_min <= n <= n_max``.

    The floor in ``m'_n`` is dropped: ``log m'_n = s_n - sigma_n / 2``.
    """
    n_min, n_max = int(n_min), int(n_max)
    least = minimal_n_min(params)
    if n_min < least:
        raise ScheduleError(
            f"n_min={n_min} too small: s_n must reach s_min={params.s_min}; "
            f"use n_min >= {least}",
            least,
        )
    if n_max < n_min:
        raise ValueError(f"n_max={n_max} < n_min={n_min}")
    n = np.arange(n_min, n_max + 1, dtype=np.int64)
    s = checkpoint_s(n)
    sigma = checkpoint_sigma(n)
    half = 0.5 * sigma
    log_mprime = s - half
    # the seam lies below every log m'_n only once s_{n-1} >= s_min; T0 is
    # defined on the extension too, so the early rows stay exact
    t_n = _t0_exact(params, s)
    t_prime = _t0_exact(params, log_mprime)
    log_block = s + logspace.lp_complement_array(-sigma)
    log_tail = -log_mprime
    logPB = logspace.lp_pow_complement_array(log_tail, s)
    logPA = logspace.lp_pow_complement_array(log_tail, log_block)
    PE = -np.expm1(logspace.lp_pow_complement_array(log_tail, s - sigma))
    return Schedule(
        params=params,
        n=n,
        s_n=s,
        sigma_n=sigma,
        log_mprime=log_mprime,
        t_n=t_n,
        t_prime_n=t_prime,
        pi_n=np.exp(half),
        logPB_n=logPB,
        PE_bound_n=np.exp(-half),
        log_block=log_block,
        logPA_n=logPA,
        PE_n=PE,
        s_first=float(checkpoint_s(n_min - 1)),
    )


# ---------------------------------------------------------------- sampling

_ASYMPTOTIC = math.log(1e-8)


def block_max_s(log_blocksize, u):
    """Tail coordinate of the maximum of ``e^log_blocksize`` observations.

    Inverse transform of ``G^m``: ``s = -log(1 - u^(1/m))``. When
    ``|log(u) / m| < 1e-8`` the asymptotic ``s = log m - log(-log u)`` is used,
    which stays finite for ``m`` beyond floating range.
    """
    u = np.asarray(u, dtype=float)
    L = np.broadcast_to(np.asarray(log_blocksize, dtype=float), u.shape)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise ValueError("u must lie strictly inside (0, 1)")
    if np.any(L < 0.0):
        raise ValueError("log_blocksize must be >= 0")
    nll = np.log(-np.log(u))
    asym = nll - L < _ASYMPTOTIC
    s = np.empty(u.shape)
    s[asym] = L[asym] - nll[asym]
    z = np.log(u[~asym]) * np.exp(-L[~asym])
    s[~asym] = -logspace.lp_complement_array(z)
    return s


def sample_block_max_t(params, log_blocksize, u):
    """Log of the maximum of ``e^log_blocksize`` iid draws from ``G``."""
    s = block_max_s(log_blocksize, u)
    out = _t0(params, np.atleast_1d(s))
    return float(out[0]) if np.ndim(s) == 0 else out.reshape(np.shape(s))


@dataclass(frozen=True)
class MaximaTrial:
    """One trial at every checkpoint: running maximum ``t_M``, the block maxima,
    ``gap = t_M - t_n`` and the indicators ``A_n``, ``E_n``, ``B_n``."""

    n: np.ndarray
    t_max: np.ndarray
    block_t: np.ndarray
    gap: np.ndarray
    A: np.ndarray
    E: np.ndarray
    B: np.ndarray


def _advance(sched, s_prev, u):
    """Checkpoint events for a batch.

    ``s_prev`` has shape ``(trials,)`` (tail coordinate of the maximum before
    the first block of ``sched``), ``u`` shape ``(trials, checkpoints)``.
    T0 is strictly increasing, so comparing maxima in ``s`` is the same as
    comparing them in ``t`` and needs no rounding.
    """
    blk = block_max_s(sched.log_block, u)
    s_max = np.maximum.accumulate(np.concatenate((s_prev[:, None], blk), axis=1), axis=1)
    before = s_max[:, :-1]
    s_max = s_max[:, 1:]
    lm = sched.log_mprime
    A = blk <= lm
    E = before > lm
    B = s_max <= lm
    return blk, s_max, A, E, B


def run_maxima_trial(params, n_min, n_max, rng, sched=None):
    """Simulate the partial maxima of one trial at checkpoints ``n_min..n_max``.

    Draws ``1 + (n_max - n_min + 1)`` uniforms from ``rng``: the first block
    covers ``m_{n_min - 1}`` observations, then one block per checkpoint.
    """
    if sched is None:
        sched = schedule(params, n_min, n_max)
    u = streams.open_uniforms(rng, 1 + len(sched))
    s_first = block_max_s(sched.s_first, u[:1])
    blk, s_max, A, E, B = _advance(sched, s_first, u[None, 1:])
    if not np.array_equal(B, A & ~E):
        raise AssertionError("B_n != A_n and not E_n")
    t_max = _t0(params, s_max[0])
    return MaximaTrial(
        sched.n, t_max, _t0(params, blk[0]), t_max - sched.t_n, A[0], E[0], B[0]
    )


GAP_QUANTILES = (0.05, 0.5, 0.95)
# uniforms held per checkpoint chunk across all trials
CHUNK_BUDGET = 1 << 22


@dataclass
class MaximaSummary:
    """Per-checkpoint empirical frequencies over ``trials`` seeded trials.

    ``below_tn`` counts trials with ``t_M(n) <= t_n`` (the ``e^-1`` law);
    ``b_totals`` holds every trial's count of ``B_n`` over the whole range.
    """

    sched: Schedule
    trials: int
    seed: int
    count_A: np.ndarray
    count_E: np.ndarray
    count_B: np.ndarray
    below_tn: np.ndarray
    gap_mean: np.ndarray
    gap_quantiles: np.ndarray
    b_totals: np.ndarray

    def freq(self, name):
        return getattr(self, name) / self.trials

    def mean_b_count(self, n):
        """Mean cumulative ``B`` count over ``n_min..n``, from the per-index counts."""
        i = self.sched.index(n)
        return int(self.count_B[: i + 1].sum()) / self.trials

    def analytic_b_sum(self, lo, hi):
        """``sum_{lo < n <= hi} P B_n``."""
        i, j = self.sched.index(lo), self.sched.index(hi)
        return math.fsum(np.exp(self.sched.logPB_n[i + 1 : j + 1]).tolist())

    def table(self):
        sc = self.sched
        cols = [
            "n", "pA", "pE", "pB", "PE_bound", "freqA", "freqE", "freqB",
            "freq_below_tn", "gap_mean",
            *(f"gap_q{int(q * 100):02d}" for q in GAP_QUANTILES),
            "mean_B_count", "analytic_B_sum",
        ]
        cum = np.cumsum(self.count_B) / self.trials
        acum = np.cumsum(np.exp(sc.logPB_n))
        data = [
            sc.n, np.exp(sc.logPA_n), sc.PE_n, np.exp(sc.logPB_n), sc.PE_bound_n,
            self.freq("count_A"), self.freq("count_E"), self.freq("count_B"),
            self.freq("below_tn"), self.gap_mean, *self.gap_quantiles.T, cum, acum,
        ]
        return cols, list(zip(*(d.tolist() for d in data)))

    def to_dict(self):
        f = self.freq("below_tn")
        sel = self.sched.n >= 30
        dev = np.abs(f[sel] - math.exp(-1.0)) if sel.any() else np.array([])
        return {
            "theta": self.sched.params.theta,
            "n_min": int(self.sched.n[0]),
            "n_max": int(self.sched.n[-1]),
            "trials": self.trials,
            "seed": self.seed,
            "inverse_e_law": {
                "target": math.exp(-1.0),
                "band_4sigma": 4.0 * math.sqrt(math.exp(-1) * (1 - math.exp(-1)) / self.trials),
                "max_abs_deviation_n_ge_30": float(dev.max()) if dev.size else None,
                "mean_freq_n_ge_30": float(f[sel].mean()) if sel.any() else None,
            },
            "B_count": {
                "mean": float(self.b_totals.mean()),
                "min": int(self.b_totals.min()),
                "max": int(self.b_totals.max()),
                "analytic_mean": math.fsum(np.exp(self.sched.logPB_n).tolist()),
                "histogram": np.bincount(self.b_totals).tolist(),
            },
        }


def simulate(params, n_min, n_max, trials, seed=0, workers=1):
    """Seeded partial-maxima Monte Carlo at checkpoints ``n_min..n_max``.

    Trial ``i`` uses stream ``(seed, i, MAXIMA)`` and consumes uniforms exactly
    as :func:`run_maxima_trial`; results do not depend on ``workers``.
    """
    sched = schedule(params, n_min, n_max)
    T = int(trials)
    if T < 1:
        raise ValueError("trials must be >= 1")
    K = len(sched)
    parts = streams.shards(T)
    gens = [
        [streams.trial_generator(seed, t, streams.MAXIMA) for t in range(lo, hi)]
        for lo, hi in parts
    ]

    def first(j):
        u = np.array([streams.open_uniforms(g, 1)[0] for g in gens[j]])
        return block_max_s(sched.s_first, u)

    s_prev = np.concatenate(_map(first, len(parts), workers))
    count = {k: np.zeros(K, dtype=np.int64) for k in ("A", "E", "B", "below")}
    gap_mean = np.empty(K)
    gap_q = np.empty((K, len(GAP_QUANTILES)))
    b_tot = np.zeros(T, dtype=np.int64)
    width = max(1, min(K, CHUNK_BUDGET // T))
    for k0 in range(0, K, width):
        k1 = min(K, k0 + width)
        sub = _slice(sched, k0, k1)

        def step(j, sub=sub, k0=k0, k1=k1):
            lo, hi = parts[j]
            u = np.empty((hi - lo, k1 - k0))
            for i, g in enumerate(gens[j]):
                u[i] = streams.open_uniforms(g, k1 - k0)
            return _advance(sub, s_prev[lo:hi], u)

        res = _map(step, len(parts), workers)
        s_max = np.concatenate([r[1] for r in res])
        A = np.concatenate([r[2] for r in res])
        E = np.concatenate([r[3] for r in res])
        B = np.concatenate([r[4] for r in res])
        gap = _t0(params, s_max) - sub.t_n
        count["A"][k0:k1] = np.count_nonzero(A, axis=0)
        count["E"][k0:k1] = np.count_nonzero(E, axis=0)
        count["B"][k0:k1] = np.count_nonzero(B, axis=0)
        count["below"][k0:k1] = np.count_nonzero(s_max <= sub.s_n, axis=0)
        gap_mean[k0:k1] = gap.mean(axis=0)
        gap_q[k0:k1] = np.quantile(gap, GAP_QUANTILES, axis=0).T
        b_tot += np.count_nonzero(B, axis=1)
        s_prev = s_max[:, -1].copy()
    return MaximaSummary(
        sched, T, int(seed), count["A"], count["E"], count["B"], count["below"],
        gap_mean, gap_q, b_tot,
    )


def _map(fn, count, workers):
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or count == 1:
        return [fn(j) for j in range(count)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def _slice(sched, k0, k1):
    fields = {
        name: (val[k0:k1] if isinstance(val, np.ndarray) else val)
        for name, val in sched.__dict__.items()
    }
    return Schedule(**fields)
