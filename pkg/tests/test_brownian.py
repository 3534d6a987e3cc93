import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftimplicit.brownian import (
    QUANTUM,
    IncrementArray,
    TimeGrid,
    coarsen,
    cumulative,
    generate_batch,
    generate_increments,
    path_stream,
)


def test_grid_times_are_uniform():
    g = TimeGrid(2.0, 4)
    assert g.step == 0.5
    np.testing.assert_array_equal(g.times(), [0, 0.5, 1.0, 1.5, 2.0])
    assert g.index_of(0.7) == 1
    assert g.index_of(2.0) == 4


@pytest.mark.parametrize("T, n", [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5)])
def test_invalid_grid(T, n):
    with pytest.raises(ValueError):
        TimeGrid(T, n)


def test_generation_is_deterministic():
    g = TimeGrid(1.0, 4)
    a = generate_increments(g, path_stream(11, 3))
    b = generate_increments(g, path_stream(11, 3))
    np.testing.assert_array_equal(a.values, b.values)
    c = generate_increments(g, path_stream(11, 4))
    assert not np.array_equal(a.values, c.values)


def test_increment_statistics():
    g = TimeGrid(1e4, 10**6)  # h = 0.01
    inc = generate_increments(g, path_stream(2024, 0)).values
    assert abs(inc.mean()) < 4e-4
    assert abs(inc.var() / g.step - 1) < 0.01


def test_single_step_has_unit_variance():
    g = TimeGrid(1.0, 1)
    draws = np.array([generate_increments(g, path_stream(5, i)).values[0] for i in range(20000)])
    assert draws.shape == (20000,)
    # sd of the sample variance is sqrt(2/M) ~ 0.01
    assert abs(draws.var() - 1.0) < 0.05


def test_increments_live_on_the_lattice():
    inc = generate_increments(TimeGrid(1.0, 256), path_stream(1, 1)).values
    np.testing.assert_array_equal(inc / QUANTUM, np.rint(inc / QUANTUM))


def test_batch_rows_match_single_paths():
    g = TimeGrid(1.0, 64)
    batch = generate_batch(g, 99, 5, 9)
    for row, index in enumerate(range(5, 9)):
        single = generate_increments(g, path_stream(99, index)).values
        np.testing.assert_array_equal(batch[row], single)
    # splitting the range does not change any row
    np.testing.assert_array_equal(
        np.vstack([generate_batch(g, 99, 5, 7), generate_batch(g, 99, 7, 9)]), batch
    )


def test_coarsen_sums_blocks():
    a = IncrementArray(TimeGrid(1.0, 4), [0.1, -0.2, 0.3, 0.4])
    c = coarsen(a, 2)
    assert c.grid == TimeGrid(1.0, 2)
    np.testing.assert_allclose(c.values, [-0.1, 0.7], rtol=0, atol=1e-15)


def test_coarsen_identity():
    a = generate_increments(TimeGrid(1.0, 16), path_stream(0, 0))
    np.testing.assert_array_equal(coarsen(a, 1).values, a.values)


def test_coarsen_requires_divisor():
    a = IncrementArray(TimeGrid(1.0, 4), [0.1, -0.2, 0.3, 0.4])
    with pytest.raises(ValueError):
        coarsen(a, 3)


def test_cumulative_examples():
    np.testing.assert_array_equal(cumulative(IncrementArray(TimeGrid(1.0, 2), [0.5, -0.5])), [0, 0.5, 0])
    np.testing.assert_array_equal(cumulative(np.array([])), [0.0])


def test_subsample_identity():
    a = generate_increments(TimeGrid(1.0, 64), path_stream(3, 0))
    fine = cumulative(a)
    coarse = cumulative(coarsen(a, 8))
    # recompute W at coarse times directly from the fine increments
    direct = np.array([np.sum(a.values[: 8 * j]) for j in range(9)])
    np.testing.assert_array_equal(coarse, fine[::8])
    np.testing.assert_array_equal(coarse, direct)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    log_n=st.integers(0, 10),
    log_m=st.integers(0, 10),
    horizon=st.floats(0.01, 50.0),
)
def test_exact_coupling(seed, log_n, log_m, horizon):
    n = 2**log_n * 3
    m = 2 ** min(log_m, log_n)
    a = generate_increments(TimeGrid(horizon, n), path_stream(seed, 0))
    np.testing.assert_array_equal(cumulative(coarsen(a, m)), cumulative(a)[::m])
    np.testing.assert_array_equal(cumulative(coarsen(a, 3 * m)), cumulative(a)[:: 3 * m])


def test_immutable():
    a = generate_increments(TimeGrid(1.0, 4), path_stream(0, 0))
    with pytest.raises(ValueError):
        a.values[0] = 1.0
