"""Counter-based noise streams.

Every random draw is addressed by ``(seed, lane, counter)`` and produced by a
fresh Philox generator, so a draw never depends on how many draws came before
it or on which worker asked for it.
"""

import numpy as np

# Lane tags keep the purposes of randomness apart.
LANE_INIT = 0
LANE_NOISE_1 = 1
LANE_NOISE_2 = 2
LANE_KICK = 3
LANE_DATA = 4
LANE_PARTICLES = 5
LANE_DECAY = 6

_MASK64 = (1 << 64) - 1


def generator(seed, lane, counter):
    """Return a Philox-backed ``Generator`` for one ``(seed, lane, counter)`` cell."""
    seed = int(seed) & _MASK64
    bitgen = np.random.Philox(
        key=np.array([seed, lane], dtype=np.uint64),
        counter=np.array([0, 0, int(counter) & _MASK64, 0], dtype=np.uint64),
    )
    return np.random.Generator(bitgen)


def derive_seed(*keys):
    """Mix integer keys into one 64-bit seed."""
    ss = np.random.SeedSequence([int(k) & _MASK64 for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class NoiseSource:
    """Standard Gaussian increments laid out as one ``(n_rows, dim)`` block per step.

    Row ``i`` of the block for step ``k`` belongs to the particle whose original
    index is ``i``, so the increment seen by a particle is a pure function of
    ``(seed, particle index, step)`` for a fixed swarm layout.
    """

    # the two Brownian lanes of a step come from one draw of shape (2, n_rows, dim)
    _PAIRED = {LANE_NOISE_1: 0, LANE_NOISE_2: 1}

    def __init__(self, seed, n_rows, dim):
        self.seed = int(seed) & _MASK64
        self.n_rows = int(n_rows)
        self.dim = int(dim)
        self._cached_step = None
        self._cached = None

    def _paired_block(self, step):
        if step != self._cached_step:
            gen = generator(self.seed, LANE_NOISE_1, step)
            self._cached = gen.standard_normal((2, self.n_rows, self.dim))
            self._cached_step = step
        return self._cached

    def normals(self, step, lane, rows=None):
        if lane in self._PAIRED:
            block = self._paired_block(step)[self._PAIRED[lane]]
        else:
            block = generator(self.seed, lane, step).standard_normal((self.n_rows, self.dim))
        if rows is None:
            return block.copy()
        return block[rows]

    def __repr__(self):
        return f"NoiseSource(seed={self.seed}, n_rows={self.n_rows}, dim={self.dim})"
