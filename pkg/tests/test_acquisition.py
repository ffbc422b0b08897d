import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jamloc.acquisition import normalize, select_target, ucb
from jamloc.gridworld import Cell
from jamloc.surrogate import Posterior


def cells_for(n, w=10):
    return [Cell(i % w, i // w) for i in range(n)]


def exhaustive_argmax(cells, values):
    best = None
    for c, v in zip(cells, values):
        if best is None or v > best[1] or (v == best[1] and (c.iy, c.ix) < (best[0].iy, best[0].ix)):
            best = (c, v)
    return best[0]


def test_kappa_zero_is_mean():
    post = Posterior(np.array([-80.0, -70.0, -75.0]), np.array([4.0, 1.0, 9.0]))
    acq = ucb(post, 0.0, cells_for(3))
    assert np.array_equal(acq.values, post.mu)


def test_extra_sd_wins():
    mu = np.full(20, -80.0)
    var = np.zeros(20)
    var[7] = 25.0
    acq = ucb(Posterior(mu, var), 2.0, cells_for(20))
    assert acq.values[7] == -70.0
    assert select_target(acq) == cells_for(20)[7]


def test_ucb_elementwise():
    rng = np.random.default_rng(0)
    mu = rng.normal(-60, 10, 50)
    var = rng.random(50) * 20
    acq = ucb(Posterior(mu, var), 2.0, cells_for(50))
    for i in range(50):
        assert acq.values[i] == mu[i] + 2.0 * np.sqrt(var[i])
    assert acq.normalized.min() == 0.0 and acq.normalized.max() == 1.0


def test_flat_field_tie_break():
    cells = cells_for(30)
    acq = ucb(Posterior(np.zeros(30), np.zeros(30)), 2.0, cells)
    assert np.all(acq.normalized == 0.5)
    assert select_target(acq) == Cell(0, 0)
    assert select_target(acq, feasible=cells[3:]) == Cell(3, 0)
    shuffled = list(reversed(cells))
    acq2 = ucb(Posterior(np.zeros(30), np.zeros(30)), 2.0, shuffled)
    assert select_target(acq2) == Cell(0, 0)


def test_random_field_matches_scan():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(1, 100))
        cells = cells_for(n)
        post = Posterior(rng.integers(-5, 5, n).astype(float), rng.integers(0, 3, n).astype(float))
        acq = ucb(post, 1.0, cells)
        assert select_target(acq) == exhaustive_argmax(cells, acq.values)


dyadic = st.integers(-400, 400).map(lambda k: k / 8)
sds = st.integers(0, 64).map(lambda k: k / 8)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(dyadic, sds), min_size=1, max_size=40),
    st.integers(-100, 100),
    st.integers(-3, 3),
    st.sampled_from([0.0, 0.5, 1.0, 2.0, 4.0]),
)
def test_select_target_invariances(pairs, shift, log2_scale, kappa):
    mu = np.array([p[0] for p in pairs])
    sd = np.array([p[1] for p in pairs])
    cells = cells_for(len(pairs))
    base = select_target(ucb(Posterior(mu, sd**2), kappa, cells))
    assert select_target(ucb(Posterior(mu + shift, sd**2), kappa, cells)) == base
    s = 2.0**log2_scale
    assert select_target(ucb(Posterior(mu * s, (sd * s) ** 2), kappa, cells)) == base


def test_large_kappa_selects_dominant_sd():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = 30
        mu = rng.normal(0, 50, n)
        sd = rng.random(n)
        j = int(rng.integers(n))
        m = 0.5
        sd[j] = sd.max() + m
        spread = mu.max() - mu.min()
        kappa_star = spread / m
        acq = ucb(Posterior(mu, sd**2), kappa_star * 1.01 + 1e-9, cells_for(n))
        assert select_target(acq) == cells_for(n)[j]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30), st.floats(0.1, 10), st.floats(-100, 100))
def test_normalized_affine_invariant(vals, a, b):
    v = np.array(vals)
    if v.max() - v.min() < 1e-3:
        return
    np.testing.assert_allclose(normalize(a * v + b), normalize(v), atol=1e-9)


def test_negative_kappa_rejected():
    with pytest.raises(ValueError):
        ucb(Posterior(np.zeros(2), np.zeros(2)), -1.0, cells_for(2))


def test_acquisition_csv():
    acq = ucb(Posterior(np.array([1.0, 2.0]), np.array([0.0, 0.0])), 2.0, cells_for(2))
    assert acq.to_csv().splitlines() == ["ix,iy,alpha,alpha_norm", "0,0,1.000000,0.000000", "1,0,2.000000,1.000000"]
