import numpy as np
import pytest

from wignerframes.streams import N_SLOTS, TrialStream, philox4x32, trial_uniforms

# Known-answer vectors of the reference Philox4x32-10 implementation.
KAT = [
    ([0, 0, 0, 0], [0, 0], [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]),
    (
        [0xFFFFFFFF] * 4,
        [0xFFFFFFFF] * 2,
        [0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD],
    ),
    (
        [0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344],
        [0xA4093822, 0x299F31D0],
        [0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1],
    ),
]


@pytest.mark.parametrize("counter, key, expected", KAT)
def test_known_answers(counter, key, expected):
    assert philox4x32(counter, key).tolist() == expected


def test_vectorized_matches_scalar():
    ctr = np.array([v[0] for v in KAT], dtype=np.uint64)
    key = np.array([v[1] for v in KAT], dtype=np.uint64)
    assert philox4x32(ctr, key).tolist() == [v[2] for v in KAT]


def test_uniform_range_and_shape():
    u = trial_uniforms(42, np.arange(50_000))
    assert u.shape == (50_000, N_SLOTS)
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 5 * np.sqrt(1 / 12 / u.size)


def test_streams_independent_of_batch():
    a = trial_uniforms(7, np.arange(100))
    b = trial_uniforms(7, np.arange(40, 60))
    assert np.array_equal(a[40:60], b)
    assert np.array_equal(TrialStream(7, 55).slots, a[55])


def test_seed_changes_stream():
    assert not np.array_equal(trial_uniforms(1, [0]), trial_uniforms(2, [0]))
    big = trial_uniforms(2**64 - 1, [2**40])
    assert big.shape == (1, N_SLOTS)


def test_slots_uncorrelated():
    u = trial_uniforms(3, np.arange(20_000))
    c = np.corrcoef(u.T)
    off = c[~np.eye(N_SLOTS, dtype=bool)]
    assert np.max(np.abs(off)) < 5 / np.sqrt(20_000)


def test_sequential_access():
    s = TrialStream(9, 3)
    assert [s.random() for _ in range(N_SLOTS)] == s.slots.tolist()
    with pytest.raises(IndexError):
        s.random()
    assert s.slot(2) == s.slots[2]


def test_bad_seed():
    with pytest.raises(ValueError):
        trial_uniforms(-1, [0])
    with pytest.raises(ValueError):
        trial_uniforms(2**64, [0])
