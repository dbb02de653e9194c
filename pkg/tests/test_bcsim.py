import math

import numpy as np
import pytest

from bclab import bcsim, thinning
from bclab import scenarios as sc

harmonic = sc.MarginSpec("harmonic", 1.0)
reclog = sc.MarginSpec("reciprocal_log", 1.0)
DIVERGENT = sc.IndependentContamination(harmonic, reclog)


def _plan(scenario, N):
    return thinning.build_plan(
        sc.margin_values(scenario.p, 1, N + 1), sc.contamination_margin(scenario, 1, N + 1)
    )


def test_config_validation():
    for bad in ({"horizon": 0, "trials": 1}, {"horizon": 1, "trials": 0},
                {"horizon": 5, "trials": 1, "workers": 0},
                {"horizon": 5, "trials": 1, "checkpoints": (6,)},
                {"horizon": 5, "trials": 1, "seed": -1}):
        with pytest.raises(ValueError):
            bcsim.TrialConfig(**bad)
    assert bcsim.TrialConfig(2500, 1, checkpoints=(7,)).horizons().tolist() == [7, 10, 100, 1000, 2500]


def test_accounting_identity_and_ranges():
    s = bcsim.run(DIVERGENT, bcsim.TrialConfig(2000, 300, seed=4))
    for ev in ("A", "E", "B", "D"):
        f = s.freq(ev)
        assert np.all((f >= 0) & (f <= 1))
        assert s.mean_count(ev) == pytest.approx(f.sum(), abs=1e-9)
        assert s.counts[ev].sum() == s.totals[ev].sum()
    assert np.all(s.totals["B"] + s.totals["D"] == s.totals["A"])


def test_counts_at_horizons_are_prefix_counts():
    s = bcsim.run(DIVERGENT, bcsim.TrialConfig(3000, 200, seed=9, checkpoints=(1, 1234)))
    for h in s.horizons:
        assert s.count_at("B", int(h)).sum() == s.counts["B"][:h].sum()
    assert np.all(np.diff(s.at_horizons["B"], axis=1) >= 0)


def test_last_occurrence_index():
    s = bcsim.run(DIVERGENT, bcsim.TrialConfig(500, 50, seed=1))
    # n = 1 has P(A_1) = 1, so every trial records at least index 1
    assert np.all(s.last_a >= 1)
    assert s.last_a.max() <= 500


@pytest.mark.parametrize("workers", [2, 3])
def test_determinism_across_workers(workers, monkeypatch):
    monkeypatch.setattr(bcsim.streams, "SHARD_SIZE", 64)
    cfg = bcsim.TrialConfig(700, 300, seed=123)
    one = bcsim.run_with_coupling(DIVERGENT, _plan(DIVERGENT, 700), cfg)
    many = bcsim.run_with_coupling(
        DIVERGENT, _plan(DIVERGENT, 700), bcsim.TrialConfig(700, 300, seed=123, workers=workers)
    )
    assert one.to_dict() == many.to_dict()
    for ev in one.events():
        np.testing.assert_array_equal(one.counts[ev], many.counts[ev])
        np.testing.assert_array_equal(one.totals[ev], many.totals[ev])


def test_coupling_full_and_zero_retention():
    cfg = bcsim.TrialConfig(400, 200, seed=2)
    plain = bcsim.run(DIVERGENT, cfg)
    full = bcsim.run_with_coupling(DIVERGENT, np.ones(400), cfg)
    for ev in ("A", "B", "D"):
        np.testing.assert_array_equal(full.counts[ev + "'"], plain.counts[ev])
        np.testing.assert_array_equal(full.counts[ev], plain.counts[ev])
    zero = bcsim.run_with_coupling(DIVERGENT, np.zeros(400), cfg)
    for ev in ("A'", "B'", "D'"):
        assert zero.totals[ev].sum() == 0


def test_coupling_rejects_short_plan():
    with pytest.raises(ValueError, match="covers"):
        bcsim.run_with_coupling(DIVERGENT, np.ones(10), bcsim.TrialConfig(11, 1))


def test_coupling_monotone_and_identity():
    N = 2000
    s = bcsim.run_with_coupling(DIVERGENT, _plan(DIVERGENT, N), bcsim.TrialConfig(N, 200, seed=8))
    for ev in ("A", "B", "D"):
        assert np.all(s.totals[ev + "'"] <= s.totals[ev])
        assert np.all(s.counts[ev + "'"] <= s.counts[ev])
    # B' = A' and not E, D' = A' and E  =>  B' + D' = A'
    assert np.all(s.totals["B'"] + s.totals["D'"] == s.totals["A'"])


@pytest.mark.parametrize("variant", [sc.Absorbing, sc.FixedContaminator])
def test_counterexample_conditional_zero(variant):
    s = bcsim.run(variant(sc.MarginSpec("constant", 0.05), 0.4), bcsim.TrialConfig(300, 500, seed=3))
    cond = s.conditional()
    assert cond["given_E"]["max"] == 0
    assert cond["given_not_E"]["mean"] > 0
    assert abs(cond["freq_E"] - 0.4) < 4 * math.sqrt(0.24 / 500)
    assert "conditional" in s.to_dict()


def test_no_conditional_for_independent():
    s = bcsim.run(DIVERGENT, bcsim.TrialConfig(10, 5))
    assert s.conditional() is None
    assert "conditional" not in s.to_dict()


def test_convergent_series_last_occurrence_tight():
    geo = sc.IndependentContamination(sc.MarginSpec("geometric", 1.0, 0.5), sc.MarginSpec("constant", 0.0))
    short = bcsim.run(geo, bcsim.TrialConfig(10**3, 2000, seed=6))
    long = bcsim.run(geo, bcsim.TrialConfig(10**4, 2000, seed=6))
    # P(any A_n with n > 20) <= 2^-20
    assert short.last_a.max() <= 20 and long.last_a.max() <= 20
    assert np.percentile(long.last_a, 99) <= np.percentile(short.last_a, 99)
    np.testing.assert_array_equal(short.totals["A"], long.totals["A"])


def test_mean_b_count_matches_series_small():
    N, T = 2000, 2000
    s = bcsim.run(DIVERGENT, bcsim.TrialConfig(N, T, seed=17))
    n = np.arange(1, N + 1)
    target = math.fsum((1 / n * (1 - 1 / np.log(n + 2))).tolist())
    assert s.analytic["sum_pB"] == pytest.approx(target, rel=1e-14)
    sd = s.totals["B"].std(ddof=1)
    assert abs(s.mean_count("B") - target) < 4 * sd / math.sqrt(T)


def test_index_grid():
    assert bcsim.index_grid(50).tolist() == list(range(1, 51))
    g = bcsim.index_grid(3 * 10**6)
    assert g[:1000].tolist() == list(range(1, 1001))
    assert g[-1] == 3 * 10**6
    assert np.all(np.diff(g) > 0)
    assert np.all(g[1001:] / g[1000:-1] < 1.012)  # integer rounding of 1.01^j


def test_geometric_grid_run(monkeypatch):
    monkeypatch.setattr(bcsim, "DENSE_LIMIT", 2000)
    s = bcsim.run(DIVERGENT, bcsim.TrialConfig(5000, 20, seed=1))
    assert s.grid.size < 5000 and s.grid[-1] == 5000
    cols, rows = s.table()
    assert len(rows) == s.grid.size
    monkeypatch.setattr(bcsim, "DENSE_LIMIT", 10**6)
    full = bcsim.run(DIVERGENT, bcsim.TrialConfig(5000, 20, seed=1))
    np.testing.assert_array_equal(s.counts["B"], full.counts["B"][s.grid - 1])
    np.testing.assert_array_equal(s.totals["B"], full.totals["B"])
