"""Log-domain probability arithmetic.

Probabilities are carried as natural logs (``LogProb``), a plain float in
``[-inf, 0]``. ``-inf`` is a legal value meaning probability zero.
"""

import math

import numpy as np

LOG_HALF = -math.log(2.0)

# below this |x| the product x * e^m_log is formed without materialising e^m_log
_MAX_EXP = math.log(np.finfo(float).max)


def lp_from_prob(p):
    """Return ``log p`` for a probability ``p`` in ``[0, 1]``."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p!r}")
    if p == 0.0:
        return -math.inf
    return math.log(p)


def _check_lp(x):
    if not x <= 0.0:
        raise ValueError(f"log-probability must be <= 0, got {x!r}")


def lp_complement(x):
    """``log(1 - e^x)`` with full relative precision for every ``x <= 0``.

    The two branches split at ``x = -log 2``: near zero ``1 - e^x`` is
    ``-expm1(x)``; far from zero it is ``log1p(-e^x)``.
    """
    x = float(x)
    _check_lp(x)
    if x == 0.0:
        return -math.inf
    if x > LOG_HALF:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def lp_complement_array(x):
    """Vectorised :func:`lp_complement`."""
    x = np.asarray(x, dtype=float)
    if np.any(x > 0.0):
        raise ValueError("log-probability must be <= 0")
    out = np.empty_like(x)
    near = x > LOG_HALF
    with np.errstate(divide="ignore"):
        out[near] = np.log(-np.expm1(x[near]))
        out[~near] = np.log1p(-np.exp(x[~near]))
    return out


def lp_pow(x, m_log):
    """``log(p^m)`` for ``p = e^x`` and ``m = e^m_log``.

    Overflow of ``m`` saturates: the result is ``-inf`` when ``x < 0`` and
    ``0`` when ``x == 0``.
    """
    x = float(x)
    _check_lp(x)
    if x == 0.0:
        return 0.0
    if x == -math.inf:
        return -math.inf
    # e^m_log * x == -exp(m_log + log(-x)), which overflows only when the
    # product itself does
    expo = m_log + math.log(-x)
    if expo > _MAX_EXP:
        return -math.inf
    return -math.exp(expo)


def log_neg_log1m(log_y):
    """``log(-log(1 - y))`` for ``y = e^log_y`` in ``(0, 1)``.

    For tiny ``y`` this is ``log_y + log1p(y/2 + y^2/3 + ...)``; the series
    is used below ``y = 1e-8`` where it is exact to double precision.
    """
    log_y = float(log_y)
    if log_y == -math.inf:
        return -math.inf
    _check_lp(log_y)
    if log_y == 0.0:
        return math.inf
    y = math.exp(log_y)
    if y < 1e-8:
        return log_y + math.log1p(y / 2.0 + y * y / 3.0)
    return math.log(-lp_complement(log_y))


def lp_pow_complement(log_tail, m_log):
    """``log((1 - y)^m)`` with ``y = e^log_tail`` and ``m = e^m_log``.

    Fused form of ``lp_pow(lp_complement(log_tail), m_log)``: the product
    ``m * log(1 - y)`` is evaluated as ``-exp(m_log + log(-log(1 - y)))`` so
    neither ``m`` nor ``y`` is formed when they fall outside double range.
    """
    if log_tail == -math.inf:
        return 0.0
    expo = m_log + log_neg_log1m(log_tail)
    if expo > _MAX_EXP:
        return -math.inf
    return -math.exp(expo)


def log_neg_log1m_array(log_y):
    """Vectorised :func:`log_neg_log1m`."""
    log_y = np.asarray(log_y, dtype=float)
    out = np.empty_like(log_y)
    with np.errstate(divide="ignore", over="ignore"):
        y = np.exp(log_y)
        tiny = y < 1e-8
        out[tiny] = log_y[tiny] + np.log1p(y[tiny] / 2.0 + y[tiny] ** 2 / 3.0)
        big = ~tiny
        out[big] = np.log(-lp_complement_array(log_y[big]))
    return out


def lp_pow_complement_array(log_tail, m_log):
    """Vectorised :func:`lp_pow_complement`."""
    expo = np.asarray(m_log, dtype=float) + log_neg_log1m_array(log_tail)
    with np.errstate(over="ignore"):
        return -np.exp(expo)
