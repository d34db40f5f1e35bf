"""Counter-based random streams.

Every stochastic routine in the package draws from a Philox generator whose
128-bit key is derived from (seed, *lane). Streams for different lanes are
statistically independent, and a stream is reconstructed from its lane tuple
alone, so interrupted runs replay identically without saving generator
state. Lanes are non-negative integers (chain index, sweep index, table
cell, trial number, ...).
"""

import numpy as np


def stream(seed, *lane):
    """Return a fresh ``numpy.random.Generator`` keyed by (seed, *lane)."""
    for ix in lane:
        if ix < 0:
            raise ValueError("lane indices must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(ix) for ix in lane))
    key = ss.generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class SweepStream:
    """Per-sweep generators for one chain, cheap enough for tight loops.

    The Philox key is derived once from (seed, chain); sweep ``t`` places the
    256-bit counter at block t * 2^128, so sweeps never overlap and any sweep
    can be replayed in isolation.
    """

    def __init__(self, seed, chain):
        ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chain),))
        self._key = ss.generate_state(2, np.uint64)

    def at(self, sweep):
        if sweep < 0:
            raise ValueError("sweep index must be non-negative")
        bg = np.random.Philox(key=self._key, counter=[0, 0, int(sweep), 0])
        return np.random.Generator(bg)
