import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simstudy.batches import DrawsBatch
from simstudy.errors import StateVersionError
from simstudy.rng import (
    RngState,
    StreamKey,
    capture_state,
    derive_chunk_stream,
    method_stream_for,
    restore_state,
)


def _stream(seed=2016, name="slm/k_10", idx=1):
    return derive_chunk_stream(StreamKey(seed, name, idx))


def test_same_key_same_sequence():
    assert np.array_equal(_stream().uniform(1000), _stream().uniform(1000))


def test_chunk_index_changes_stream():
    a, b = _stream(idx=1).uniform(10_000), _stream(idx=2).uniform(10_000)
    assert not np.any(a == b)


def test_model_name_changes_stream():
    assert not np.array_equal(_stream(name="a").uniform(100), _stream(name="b").uniform(100))


def test_chunk_index_must_be_positive():
    with pytest.raises(ValueError):
        _stream(idx=0)


def test_uniform_open_interval_and_normal_moments():
    s = _stream()
    u = s.uniform(100_000)
    assert u.min() > 0 and u.max() < 1
    z = s.normal(100_000)
    assert abs(z.mean()) < 0.02 and abs(z.std() - 1) < 0.02


def test_capture_immediately_after_derive():
    s = _stream()
    restored = restore_state(capture_state(s))
    assert np.array_equal(restored.uniform(50), _stream().uniform(50))


def test_replay_after_1000_draws():
    reference = _stream().random_raw(1001)
    s = _stream()
    s.random_raw(1000)
    restored = restore_state(capture_state(s))
    assert restored.random_raw(1)[0] == reference[1000]


def test_record_round_trip_continuation():
    s = _stream()
    s.normal(37)
    record = capture_state(s).to_record()
    restored = restore_state(RngState.from_record(dict(record)))
    assert np.array_equal(restored.normal(100), s.normal(100))


def test_version_mismatch_raises():
    state = capture_state(_stream())
    with pytest.raises(StateVersionError):
        restore_state(RngState(state.algorithm, state.version + 1, state.state))
    with pytest.raises(StateVersionError):
        restore_state(RngState("mt19937", state.version, state.state))


def test_method_stream_identical_for_every_method():
    s = _stream()
    s.normal(20)
    batch = DrawsBatch("m", "M", 1, [0.0], capture_state(s))
    a = method_stream_for(batch).uniform(5)
    method_stream_for(batch).uniform(1000)  # another method consuming its own copy
    b = method_stream_for(batch).uniform(5)
    assert np.array_equal(a, b)


def test_substream_does_not_advance_parent():
    s = _stream()
    before = capture_state(s)
    sub1 = s.substream("draw", 1).uniform(5)
    assert capture_state(s) == before
    assert np.array_equal(sub1, s.substream("draw", 1).uniform(5))
    assert not np.array_equal(sub1, s.substream("draw", 2).uniform(5))


def test_permutation_is_permutation():
    p = _stream().permutation(1000)
    assert sorted(p.tolist()) == list(range(1000))


def test_permutation_uniform_on_three():
    s = _stream()
    counts = {}
    for _ in range(6000):
        key = tuple(s.permutation(3))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    assert all(abs(c - 1000) < 150 for c in counts.values())


def test_streams_uncorrelated():
    data = np.array([_stream(idx=i).uniform(100_000) for i in range(1, 65)])
    corr = np.corrcoef(data)
    off = corr[~np.eye(64, dtype=bool)]
    assert np.max(np.abs(off)) < 0.01


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), name=st.text(min_size=1, max_size=20),
       idx=st.integers(1, 2**31), skip=st.integers(0, 50))
def test_capture_restore_property(seed, name, idx, skip):
    s = derive_chunk_stream(StreamKey(seed, name, idx))
    s.random_raw(skip)
    r = restore_state(capture_state(s))
    assert np.array_equal(r.random_raw(8), s.random_raw(8))


def test_stream_correlations_match_independence():
    # under independence sqrt(n) * rho is approximately standard normal
    n = 100_000
    data = np.array([_stream(idx=i).uniform(n) for i in range(1, 65)])
    rho = np.corrcoef(data)[np.triu_indices(64, 1)]
    z = np.sqrt(n) * rho
    assert abs(z.mean()) < 0.1
    assert 0.9 < z.std() < 1.1
    assert np.max(np.abs(z)) < 5.0
