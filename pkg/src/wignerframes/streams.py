"""Counter-based random streams for reproducible, order-independent trials.

Every trial owns a fixed set of uniform draws ("slots") computed from
Philox4x32-10 with key = seed and counter = (trial index, block). A trial's
draws therefore depend only on ``(seed, trial)``, never on how trials are
split between workers.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)

# Slot layout shared by every code path that consumes trial randomness.
SLOT_COLLAPSE = 0
SLOT_ALICE = 1
SLOT_W1 = 2
SLOT_W2 = 3
SLOT_X1 = 4
SLOT_X2 = 5
N_SLOTS = 6

STREAM_DESCRIPTION = (
    "Philox4x32-10; key=(seed mod 2^32, seed >> 32); "
    "counter=(trial mod 2^32, trial >> 32, block, 0); "
    "two 32-bit words per uniform, (k + 0.5) / 2^53 with k the top 53 bits; "
    "slots: 0 collapse, 1 alice, 2 W first, 3 W second, 4 x1, 5 x2"
)


def philox4x32(counter, key, rounds: int = 10) -> np.ndarray:
    """Vectorized Philox4x32 block function.

    ``counter`` has shape (..., 4) and ``key`` shape (..., 2), both holding
    32-bit words. Returns an array of shape (..., 4) of uint32 words.
    """
    ctr = np.asarray(counter, dtype=np.uint64) & _MASK
    k = np.asarray(key, dtype=np.uint64) & _MASK
    c0, c1, c2, c3 = (ctr[..., i] for i in range(4))
    k0, k1 = k[..., 0], k[..., 1]
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = c0 * _M0
        p1 = c2 * _M1
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT) ^ c1 ^ k0,
            p1 & _MASK,
            (p0 >> _SHIFT) ^ c3 ^ k1,
            p0 & _MASK,
        )
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def _split64(value) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(value, dtype=np.uint64)
    return v & _MASK, v >> _SHIFT


def trial_uniforms(seed: int, trials, n_slots: int = N_SLOTS) -> np.ndarray:
    """Uniform draws in (0, 1) for each trial index, shape (len(trials), n_slots)."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    trials = np.atleast_1d(np.asarray(trials, dtype=np.uint64))
    n_blocks = (n_slots + 1) // 2
    t_lo, t_hi = _split64(trials)
    s_lo, s_hi = _split64(np.uint64(int(seed)))
    ctr = np.zeros((trials.size, n_blocks, 4), dtype=np.uint64)
    ctr[..., 0] = t_lo[:, None]
    ctr[..., 1] = t_hi[:, None]
    ctr[..., 2] = np.arange(n_blocks, dtype=np.uint64)[None, :]
    key = np.empty((trials.size, n_blocks, 2), dtype=np.uint64)
    key[..., 0] = s_lo
    key[..., 1] = s_hi
    words = philox4x32(ctr, key).astype(np.uint64).reshape(trials.size, 2 * n_blocks, 2)
    k53 = ((words[..., 0] >> np.uint64(5)) << np.uint64(26)) | (words[..., 1] >> np.uint64(6))
    u = (k53.astype(np.float64) + 0.5) / 2.0**53
    return u[:, :n_slots]


class TrialStream:
    """The random stream owned by one trial.

    ``slot(i)`` gives the draw reserved for a protocol step; ``random()``
    hands out the slots sequentially, which makes the stream usable where a
    ``numpy.random.Generator``-like object is expected.
    """

    def __init__(self, seed: int, trial: int = 0, n_slots: int = N_SLOTS):
        self.seed = int(seed)
        self.trial = int(trial)
        self.slots = trial_uniforms(self.seed, [self.trial], n_slots)[0]
        self._next = 0

    def slot(self, i: int) -> float:
        return float(self.slots[i])

    def random(self) -> float:
        if self._next >= self.slots.size:
            raise IndexError("trial stream exhausted")
        u = float(self.slots[self._next])
        self._next += 1
        return u

    def __repr__(self):
        return f"TrialStream(seed={self.seed}, trial={self.trial})"
