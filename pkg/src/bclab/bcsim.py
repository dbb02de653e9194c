"""Seeded Monte Carlo for contaminated event sequences.

Trials run over ``n = 1..N`` through :func:`bclab.scenarios.step_events`.
With a thinning plan the engine also draws an auxiliary uniform ``U_n`` per
step and reports the thinned events ``A'_n = A_n & {U_n <= q_n}``,
``D'_n = (E_n & A_n) & {U_n <= q_n}`` and ``B'_n = B_n & {U_n <= q_n}``.

All aggregation uses integer counters, so summaries are bit-identical for
any worker count.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import scenarios as sc
from . import streams

EVENTS = ("A", "E", "B", "D")
PRIMED = ("A'", "B'", "D'")

# uniforms held in memory per shard and draw stream
CHUNK_BUDGET = 1 << 21
DENSE_LIMIT = 10**6


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrialConfig:
    """Horizon ``N``, trial count ``T``, 64-bit seed and worker count.

    ``checkpoints`` are extra horizons at which per-trial cumulative counts
    are kept (powers of ten below ``N`` and ``N`` itself are always kept).
    """

    horizon: int
    trials: int
    seed: int = 0
    workers: int = 1
    checkpoints: tuple = ()

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise ValueError("horizon must be >= 1")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        for h in self.checkpoints:
            if not 1 <= int(h) <= int(self.horizon):
                raise ValueError(f"checkpoint {h} outside [1, horizon]")

    def horizons(self):
        hs = {self.horizon, *map(int, self.checkpoints)}
        k = 10
        while k < self.horizon:
            hs.add(k)
            k *= 10
        return np.array(sorted(hs), dtype=np.int64)


def index_grid(horizon):
    """Indices ``n`` whose per-step frequencies are stored.

    Dense up to ``DENSE_LIMIT``; beyond that every ``n <= 1000`` and then
    rounded powers of 1.01, plus the horizon itself.
    """
    if horizon <= DENSE_LIMIT:
        return np.arange(1, horizon + 1, dtype=np.int64)
    j = np.arange(math.ceil(math.log(1000) / math.log(1.01)), 
                  math.floor(math.log(horizon) / math.log(1.01)) + 1)
    geo = np.round(np.power(1.01, j)).astype(np.int64)
    grid = np.concatenate((np.arange(1, 1001), geo[geo > 1000], [horizon]))
    return np.unique(grid[grid <= horizon])


def _stats(x):
    x = np.asarray(x)
    if x.size == 0:
        return {"trials": 0}
    return {
        "trials": int(x.size),
        "mean": float(x.mean()),
        "variance": float(x.var(ddof=1)) if x.size > 1 else 0.0,
        "min": int(x.min()),
        "max": int(x.max()),
        "histogram": np.bincount(x).tolist(),
    }


@dataclass
class TrialSummary:
    """Aggregated outcome of :func:`run` / :func:`run_with_coupling`.

    ``counts[ev]`` holds, for each stored index ``grid[i]``, the number of
    trials in which event ``ev`` occurred at that index. ``totals[ev]`` is the
    per-trial cumulative count up to the horizon and ``at_horizons[ev]`` the
    per-trial cumulative counts at ``horizons``.
    """

    scenario: object
    config: TrialConfig
    grid: np.ndarray
    counts: dict
    totals: dict
    horizons: np.ndarray
    at_horizons: dict
    last_a: np.ndarray
    trial_e: np.ndarray = None
    coupled: bool = False
    analytic: dict = field(default_factory=dict)

    @property
    def trials(self):
        return self.config.trials

    def freq(self, event):
        return self.counts[event] / self.trials

    def mean_count(self, event="B", horizon=None):
        return float(self.count_at(event, horizon).mean())

    def count_at(self, event="B", horizon=None):
        """Per-trial cumulative counts of ``event`` at a stored horizon."""
        if horizon is None:
            return self.totals[event]
        hit = np.flatnonzero(self.horizons == horizon)
        if hit.size == 0:
            raise KeyError(f"horizon {horizon} not stored; have {self.horizons.tolist()}")
        return self.at_horizons[event][:, hit[0]]

    def cumulative(self, event="B"):
        return _stats(self.totals[event])

    def conditional(self):
        """B-count statistics split on the once-per-trial ``E``; ``None`` if absent."""
        if self.trial_e is None:
            return None
        b = self.totals["B"]
        return {
            "freq_E": float(self.trial_e.mean()),
            "given_E": _stats(b[self.trial_e]),
            "given_not_E": _stats(b[~self.trial_e]),
        }

    def events(self):
        return EVENTS + (PRIMED if self.coupled else ())

    def to_dict(self):
        out = {
            "horizon": self.config.horizon,
            "trials": self.config.trials,
            "seed": self.config.seed,
            "scenario": sc.scenario_to_dict(self.scenario),
            "coupled": self.coupled,
            "cumulative": {ev: self.cumulative(ev) for ev in self.events()},
            "at_horizons": {
                ev: [
                    {"horizon": int(h), "mean": float(c.mean()),
                     "variance": float(c.var(ddof=1)) if c.size > 1 else 0.0}
                    for h, c in zip(self.horizons, self.at_horizons[ev].T)
                ]
                for ev in self.events()
            },
            "last_A_index": {
                "max": int(self.last_a.max()),
                "p99": float(np.percentile(self.last_a, 99)),
            },
            "analytic": self.analytic,
        }
        cond = self.conditional()
        if cond is not None:
            out["conditional"] = cond
        return out

    def table(self):
        """Per-index frequency table: column names and rows."""
        cols = ["n", "freqA", "freqE", "freqB"]
        evs = ["A", "E", "B"]
        if self.coupled:
            cols += ["freqAprime", "freqBprime", "freqDprime"]
            evs += list(PRIMED)
        data = [self.grid] + [self.freq(ev) for ev in evs]
        return cols, list(zip(*(d.tolist() for d in data)))


def _analytic(scenario, horizon, q):
    pa, pe, pb = sc.analytic_probs(scenario, 1, horizon + 1)
    pd = pa - pb
    out = {"sum_pA": math.fsum(pa.tolist()), "sum_pB": math.fsum(pb.tolist())}
    if q is not None:
        out["sum_q_pA"] = math.fsum((q * pa).tolist())
        out["sum_q_pD"] = math.fsum((q * pd).tolist())
    return out


def _simulate(scenario, config, q):
    N, T = int(config.horizon), int(config.trials)
    grid = index_grid(N)
    dense = grid.size == N
    horizons = config.horizons()
    events = EVENTS + (PRIMED if q is not None else ())
    p_all = sc.margin_values(scenario.p, 1, N + 1)
    e_all = (
        sc.margin_values(scenario.e, 1, N + 1)
        if hasattr(scenario, "e")
        else np.zeros(N)
    )
    seed = int(config.seed)

    def shard(lo, hi):
        batch = hi - lo
        gens = [streams.trial_generator(seed, t, streams.SCENARIO) for t in range(lo, hi)]
        cgens = (
            [streams.trial_generator(seed, t, streams.COUPLING) for t in range(lo, hi)]
            if q is not None
            else None
        )
        header = np.array(
            [streams.trial_generator(seed, t, streams.HEADER).random() for t in range(lo, hi)]
        )
        trial_e = sc.draw_trial_event(scenario, header)

        counts = {ev: np.zeros(grid.size, dtype=np.int64) for ev in events}
        running = {ev: np.zeros(batch, dtype=np.int64) for ev in events}
        at_h = {ev: np.zeros((batch, horizons.size), dtype=np.int64) for ev in events}
        last_a = np.zeros(batch, dtype=np.int64)

        chunk = max(1, min(N, CHUNK_BUDGET // (2 * batch)))
        buf = np.empty((batch, chunk, 2))
        cbuf = np.empty((batch, chunk)) if q is not None else None
        for n0 in range(0, N, chunk):
            n1 = min(N, n0 + chunk)
            width = n1 - n0
            u = buf[:, :width]
            for i, g in enumerate(gens):
                g.random(out=u[i])
            p = p_all[n0:n1]
            a, ev, b = sc.step_events(scenario, p, e_all[n0:n1], u[..., 0], u[..., 1], trial_e)
            ind = {"A": a, "E": ev, "B": b, "D": a & ev}
            if q is not None:
                uc = cbuf[:, :width]
                for i, g in enumerate(cgens):
                    g.random(out=uc[i])
                keep = uc <= q[n0:n1]
                ind["A'"] = a & keep
                ind["B'"] = b & keep
                ind["D'"] = ind["D"] & keep

            if dense:
                cols = slice(n0, n1)
                pick = slice(None)
            else:
                sel = (grid > n0) & (grid <= n1)
                cols = sel
                pick = grid[sel] - n0 - 1
            inside = horizons[(horizons > n0) & (horizons <= n1)]
            for name, x in ind.items():
                counts[name][cols] += np.count_nonzero(x[:, pick], axis=0)
                for h in inside:
                    hi_idx = int(np.searchsorted(horizons, h))
                    at_h[name][:, hi_idx] = running[name] + np.count_nonzero(
                        x[:, : h - n0], axis=1
                    )
                running[name] += np.count_nonzero(x, axis=1)

            seen = a.any(axis=1)
            if seen.any():
                back = np.argmax(a[:, ::-1], axis=1)
                last_a[seen] = n0 + width - back[seen]
        return counts, running, at_h, last_a, trial_e

    try:
        parts = streams.map_shards(shard, T, config.workers)
    except MemoryError as err:
        raise SimulationError(f"out of memory at horizon={N}, trials={T}") from err

    counts = {ev: sum(part[0][ev] for part in parts) for ev in events}
    totals = {ev: np.concatenate([part[1][ev] for part in parts]) for ev in events}
    at_h = {ev: np.concatenate([part[2][ev] for part in parts]) for ev in events}
    last_a = np.concatenate([part[3] for part in parts])
    trial_e = np.concatenate([part[4] for part in parts]) if scenario.has_trial_event else None
    return TrialSummary(
        scenario=scenario,
        config=config,
        grid=grid,
        counts=counts,
        totals=totals,
        horizons=horizons,
        at_horizons=at_h,
        last_a=last_a,
        trial_e=trial_e,
        coupled=q is not None,
        analytic=_analytic(scenario, N, q),
    )


def run(scenario, config):
    """Run ``config.trials`` independent trials of ``scenario`` up to the horizon."""
    return _simulate(scenario, config, None)


def run_with_coupling(scenario, plan, config):
    """As :func:`run`, additionally thinning every step with ``U_n <= q_n``.

    ``plan`` is a :class:`~bclab.thinning.ThinningPlan` (or any array of
    retention ratios) covering at least the horizon.
    """
    q = np.asarray(getattr(plan, "q", plan), dtype=float)
    if q.size < config.horizon:
        raise ValueError(
            f"thinning plan covers {q.size} indices, horizon is {config.horizon}"
        )
    if np.any((q < 0.0) | (q > 1.0)):
        raise ValueError("retention ratios must lie in [0, 1]")
    return _simulate(scenario, config, q[: config.horizon])
