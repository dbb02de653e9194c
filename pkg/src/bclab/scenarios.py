"""Contaminated event sequences ``B_n = A_n \\ E_n``.

Four joint laws are provided:

* :class:`IndependentContamination`: ``E_n`` independent of ``A_n``.
* :class:`FixedContaminator`: one event ``E`` per trial, ``E_n = E``.
* :class:`Absorbing`: ``E_n = E & A_n`` for a once-per-trial ``E``.
* :class:`BoundedDependence`: ``P(E_n & A_n) = C p_n e_n`` clipped to the
  Frechet bounds, realised by a single-uniform copula.

Each step consumes exactly two scenario uniforms ``(u1, u2)``; the
once-per-trial ``E`` uses a separate header draw.
"""

import math
from dataclasses import dataclass, field

import numpy as np

MARGIN_KINDS = ("constant", "harmonic", "reciprocal_log", "geometric", "table")


class ScenarioError(ValueError):
    """Invalid scenario or margin description; ``path`` names the field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class MarginSpec:
    """Deterministic index law ``n -> probability``.

    ``constant``: ``c``; ``harmonic``: ``min(1, c/n)``; ``reciprocal_log``:
    ``min(1, c/log(n+2))``; ``geometric``: ``min(1, c r^n)``; ``table``:
    explicit values for ``n = 1..len(values)``.
    """

    kind: str
    c: float = 1.0
    r: float = 0.5
    values: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in MARGIN_KINDS:
            raise ScenarioError("kind", f"unknown margin kind {self.kind!r}")
        if self.kind == "constant" and not 0.0 <= self.c <= 1.0:
            raise ScenarioError("c", f"constant probability {self.c!r} outside [0, 1]")
        if self.kind in ("harmonic", "reciprocal_log", "geometric") and not self.c >= 0.0:
            raise ScenarioError("c", "scale must be non-negative")
        if self.kind == "geometric" and not 0.0 <= self.r <= 1.0:
            raise ScenarioError("r", "ratio must lie in [0, 1]")
        if self.kind == "table":
            vals = tuple(float(v) for v in self.values)
            for i, v in enumerate(vals):
                if not 0.0 <= v <= 1.0:
                    raise ScenarioError(f"values[{i}]", f"{v!r} outside [0, 1]")
            object.__setattr__(self, "values", vals)

    def to_dict(self):
        if self.kind == "table":
            return {"kind": "table", "values": list(self.values)}
        if self.kind == "geometric":
            return {"kind": "geometric", "c": self.c, "r": self.r}
        return {"kind": self.kind, "c": self.c}


def margin_value(spec, n):
    if n < 1:
        raise ValueError("index must be >= 1")
    if spec.kind == "constant":
        return spec.c
    if spec.kind == "harmonic":
        return min(1.0, spec.c / n)
    if spec.kind == "reciprocal_log":
        return min(1.0, spec.c / math.log(n + 2))
    if spec.kind == "geometric":
        return min(1.0, spec.c * spec.r**n)
    if n > len(spec.values):
        raise IndexError(f"table margin has {len(spec.values)} entries, asked for n={n}")
    return spec.values[n - 1]


def margin_values(spec, start, stop):
    """Margins for ``n = start .. stop-1`` as an array."""
    n = np.arange(start, stop, dtype=float)
    if start < 1:
        raise ValueError("index must be >= 1")
    if spec.kind == "constant":
        return np.full(n.shape, spec.c)
    if spec.kind == "harmonic":
        return np.minimum(1.0, spec.c / n)
    if spec.kind == "reciprocal_log":
        return np.minimum(1.0, spec.c / np.log(n + 2.0))
    if spec.kind == "geometric":
        return np.minimum(1.0, spec.c * np.power(spec.r, n))
    if stop - 1 > len(spec.values):
        raise IndexError(
            f"table margin has {len(spec.values)} entries, asked for n={stop - 1}"
        )
    return np.array(spec.values[start - 1 : stop - 1], dtype=float)


@dataclass(frozen=True)
class IndependentContamination:
    p: MarginSpec
    e: MarginSpec
    variant = "independent"
    has_trial_event = False


@dataclass(frozen=True)
class FixedContaminator:
    p: MarginSpec
    pE: float = 0.5
    variant = "fixed"
    has_trial_event = True

    def __post_init__(self):
        if not 0.0 <= self.pE <= 1.0:
            raise ScenarioError("pE", f"{self.pE!r} outside [0, 1]")


@dataclass(frozen=True)
class Absorbing:
    p: MarginSpec
    pE: float = 0.5
    variant = "absorbing"
    has_trial_event = True

    def __post_init__(self):
        if not 0.0 <= self.pE <= 1.0:
            raise ScenarioError("pE", f"{self.pE!r} outside [0, 1]")


@dataclass(frozen=True)
class BoundedDependence:
    p: MarginSpec
    e: MarginSpec
    C: float = 1.0
    variant = "bounded"
    has_trial_event = False

    def __post_init__(self):
        if not self.C >= 0.0:
            raise ScenarioError("C", "dependence constant must be >= 0")


def contamination_margin(scenario, start, stop):
    """The sequence fed to the thinning step: ``e_n = P(E_n & A_n) / P(A_n)``."""
    p, pe, pb = analytic_probs(scenario, start, stop)
    e = np.zeros_like(p)
    pos = p > 0.0
    e[pos] = np.clip((p[pos] - pb[pos]) / p[pos], 0.0, 1.0)
    return e


def joint_intersection(p, e, C):
    """Prescribed ``P(E & A)`` clipped to ``[max(0, p+e-1), min(p, e)]``."""
    p = np.asarray(p, dtype=float)
    e = np.asarray(e, dtype=float)
    lo = np.maximum(0.0, p + e - 1.0)
    hi = np.minimum(p, e)
    return np.clip(C * p * e, lo, hi)


def analytic_probs(scenario, start, stop):
    """Exact ``(P A_n, P E_n, P B_n)`` for ``n = start .. stop-1``."""
    p = margin_values(scenario.p, start, stop)
    if isinstance(scenario, IndependentContamination):
        e = margin_values(scenario.e, start, stop)
        return p, e, p * (1.0 - e)
    if isinstance(scenario, FixedContaminator):
        return p, np.full(p.shape, scenario.pE), p * (1.0 - scenario.pE)
    if isinstance(scenario, Absorbing):
        return p, p * scenario.pE, p * (1.0 - scenario.pE)
    if isinstance(scenario, BoundedDependence):
        e = margin_values(scenario.e, start, stop)
        return p, e, p - joint_intersection(p, e, scenario.C)
    raise TypeError(f"not a scenario: {scenario!r}")


def analytic_pB(scenario, n):
    return float(analytic_probs(scenario, n, n + 1)[2][0])


def draw_trial_event(scenario, u):
    """Once-per-trial ``E`` from the header uniform(s) ``u``."""
    if not scenario.has_trial_event:
        return np.zeros(np.shape(u), dtype=bool)
    return np.asarray(u) < scenario.pE


def step_events(scenario, p, e, u1, u2, trial_e):
    """Indicators ``(A, E, B)`` for a block of steps.

    ``p`` and ``e`` are the per-step margins (``e`` is ignored by the
    once-per-trial variants), ``u1``/``u2`` are uniforms of shape
    ``(trials, steps)`` and ``trial_e`` the per-trial event, shape
    ``(trials,)``.
    """
    if isinstance(scenario, BoundedDependence):
        j = joint_intersection(p, e, scenario.C)
        a = u1 < p
        ev = (u1 < j) | ((u1 >= p) & (u1 < p + (e - j)))
    else:
        a = u1 < p
        if isinstance(scenario, IndependentContamination):
            ev = u2 < e
        elif isinstance(scenario, FixedContaminator):
            ev = np.broadcast_to(np.asarray(trial_e)[:, None], a.shape)
        elif isinstance(scenario, Absorbing):
            ev = a & np.asarray(trial_e)[:, None]
        else:
            raise TypeError(f"not a scenario: {scenario!r}")
    b = a & ~ev
    return a, ev, b


@dataclass
class TrialState:
    e_occurred: bool = False


def new_trial_state(scenario, header_rng):
    """Fresh per-trial state; draws the once-per-trial ``E`` from ``header_rng``."""
    u = header_rng.random()
    return TrialState(bool(draw_trial_event(scenario, u)))


def sample_step(scenario, n, trial_state, rng):
    """One step ``n``: returns ``(a, e, b)`` with ``b == a and not e``.

    Consumes two uniforms from ``rng``, in the same order as the bulk engine.
    """
    u1, u2 = rng.random(2)
    p = margin_value(scenario.p, n)
    e = margin_value(scenario.e, n) if hasattr(scenario, "e") else 0.0
    a, ev, b = step_events(
        scenario,
        np.array([p]),
        np.array([e]),
        np.array([[u1]]),
        np.array([[u2]]),
        np.array([trial_state.e_occurred]),
    )
    return bool(a[0, 0]), bool(ev[0, 0]), bool(b[0, 0])


_VARIANTS = {
    "independent": IndependentContamination,
    "IndependentContamination": IndependentContamination,
    "fixed": FixedContaminator,
    "FixedContaminator": FixedContaminator,
    "absorbing": Absorbing,
    "Absorbing": Absorbing,
    "bounded": BoundedDependence,
    "BoundedDependence": BoundedDependence,
}


def _number(d, key, path, default=None):
    if key not in d:
        if default is None:
            raise ScenarioError(f"{path}.{key}", "required field missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}.{key}", f"expected a number, got {v!r}")
    return float(v)


def margin_from_dict(d, path="p"):
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected an object")
    kind = d.get("kind")
    if kind not in MARGIN_KINDS:
        raise ScenarioError(f"{path}.kind", f"expected one of {MARGIN_KINDS}, got {kind!r}")
    try:
        if kind == "table":
            vals = d.get("values")
            if not isinstance(vals, list):
                raise ScenarioError(f"{path}.values", "expected a list of probabilities")
            return MarginSpec("table", values=tuple(vals))
        if kind == "geometric":
            return MarginSpec(kind, c=_number(d, "c", path, 1.0), r=_number(d, "r", path))
        if kind == "constant":
            return MarginSpec(kind, c=_number(d, "c", path))
        return MarginSpec(kind, c=_number(d, "c", path, 1.0))
    except ScenarioError as err:
        if err.path.startswith(path):
            raise
        raise ScenarioError(f"{path}.{err.path}", str(err).split(": ", 1)[1]) from None
    except (TypeError, ValueError) as err:
        raise ScenarioError(path, str(err)) from None


def scenario_from_dict(d, path="scenario"):
    """Build a scenario from its JSON form.

    Schema: ``{"variant": ..., "p": {...}, "e": {...}, "C": ..., "pE": ...}``.
    """
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected an object")
    name = d.get("variant")
    cls = _VARIANTS.get(name)
    if cls is None:
        raise ScenarioError(f"{path}.variant", f"unknown variant {name!r}")
    if "p" not in d:
        raise ScenarioError(f"{path}.p", "required field missing")
    p = margin_from_dict(d["p"], f"{path}.p")
    try:
        if cls in (IndependentContamination, BoundedDependence):
            if "e" not in d:
                raise ScenarioError(f"{path}.e", "required field missing")
            e = margin_from_dict(d["e"], f"{path}.e")
            if cls is BoundedDependence:
                return cls(p, e, _number(d, "C", path))
            return cls(p, e)
        return cls(p, _number(d, "pE", path, 0.5))
    except ScenarioError as err:
        if err.path.startswith(path):
            raise
        raise ScenarioError(f"{path}.{err.path}", str(err).split(": ", 1)[1]) from None


def scenario_to_dict(scenario):
    d = {"variant": scenario.variant, "p": scenario.p.to_dict()}
    if hasattr(scenario, "e"):
        d["e"] = scenario.e.to_dict()
    if hasattr(scenario, "C"):
        d["C"] = scenario.C
    if hasattr(scenario, "pE"):
        d["pE"] = scenario.pE
    return d
