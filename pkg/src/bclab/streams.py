"""Counter-based random streams and the trial-sharding executor.

Every trial owns independent Philox streams keyed by ``(seed, trial)``. The
purpose of a stream (scenario draws, coupling uniforms, once-per-trial
header draws, block maxima) sits in the top word of the 256-bit counter, so
streams never overlap for fewer than 2**192 draws and any stream can be
reconstructed without replaying the others.

Trials are cut into fixed-size shards that are independent of the worker
count; shard results are returned in shard order.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

MASK64 = (1 << 64) - 1

SCENARIO = 0
COUPLING = 1
HEADER = 2
MAXIMA = 3

SHARD_SIZE = 1024


def trial_generator(seed, trial, purpose):
    """Generator for stream ``purpose`` of ``trial`` under ``seed``."""
    if trial < 0:
        raise ValueError("trial index must be non-negative")
    bitgen = np.random.Philox(
        key=[int(seed) & MASK64, int(trial)], counter=[0, 0, 0, int(purpose)]
    )
    return np.random.Generator(bitgen)


def open_uniforms(gen, size):
    """Uniforms on the open interval (0, 1); the rare exact zero is nudged up."""
    u = gen.random(size)
    np.maximum(u, 2.0**-54, out=u)
    return u


def shards(trials, size=SHARD_SIZE):
    return [(lo, min(lo + size, trials)) for lo in range(0, trials, size)]


def map_shards(fn, trials, workers=1, size=SHARD_SIZE):
    """Apply ``fn(lo, hi)`` to every shard; results come back in shard order."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    parts = shards(trials, size)
    if workers == 1 or len(parts) == 1:
        return [fn(lo, hi) for lo, hi in parts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda lh: fn(*lh), parts))
