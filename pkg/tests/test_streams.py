import numpy as np
import pytest

from bclab import streams


def test_streams_are_pure_functions_of_key():
    a = streams.trial_generator(7, 3, streams.SCENARIO).random(10)
    b = streams.trial_generator(7, 3, streams.SCENARIO).random(10)
    np.testing.assert_array_equal(a, b)
    for other in ((8, 3, 0), (7, 4, 0), (7, 3, 1)):
        assert not np.array_equal(a, streams.trial_generator(*other).random(10))


def test_split_draws_equal_single_draw():
    g1 = streams.trial_generator(1, 0, streams.MAXIMA)
    g2 = streams.trial_generator(1, 0, streams.MAXIMA)
    whole = g1.random(100)
    parts = np.concatenate([g2.random(1), g2.random(33), g2.random(66)])
    np.testing.assert_array_equal(whole, parts)


def test_open_uniforms():
    u = streams.open_uniforms(streams.trial_generator(0, 0, 0), 10**5)
    assert np.all((u > 0) & (u < 1))


def test_map_shards_order_and_worker_independence():
    seen = streams.map_shards(lambda lo, hi: (lo, hi), 2500, workers=3, size=1000)
    assert seen == [(0, 1000), (1000, 2000), (2000, 2500)]
    assert seen == streams.map_shards(lambda lo, hi: (lo, hi), 2500, workers=1, size=1000)
    with pytest.raises(ValueError):
        streams.map_shards(lambda lo, hi: None, 5, workers=0)
