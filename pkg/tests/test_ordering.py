import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lswsim.ordering import (
    MonotoneFn,
    StepOrdering,
    evaluate,
    generalized_inverse,
    lp_distance,
    make_ordering,
    quantize,
    sample_ordering,
    sup_distance,
)
from oracles import grid_sup

atom = st.tuples(
    st.floats(0, 10, allow_nan=False, allow_subnormal=False),
    st.floats(1e-3, 1.0, allow_nan=False),
)


@st.composite
def orderings(draw, max_atoms=20):
    pairs = draw(st.lists(atom, min_size=0, max_size=max_atoms))
    total = sum(w for _, w in pairs)
    scale = draw(st.floats(0.1, 1.0)) / total if total > 0 else 1.0
    return make_ordering([(v, w * scale) for v, w in pairs])


# --- make_ordering -------------------------------------------------------

def test_make_ordering_direct():
    v = make_ordering([(2.0, 0.5), (0.5, 0.5)])
    assert v.values.tolist() == [2.0, 0.5]
    assert v.breakpoints.tolist() == [0, 0.5, 1.0]
    assert v.total_volume == 1.25


def test_make_ordering_merges_equal_volumes():
    v = make_ordering([(1.0, 0.3), (1.0, 0.2)])
    assert v.values.tolist() == [1.0]
    assert v.breakpoints.tolist() == [0, 0.5]
    assert v.total_volume == 0.5


def test_make_ordering_zero_volume_only():
    v = make_ordering([(0.0, 1.0)])
    assert v.n_components == 0
    assert v.breakpoints.tolist() == [0]
    assert v.total_volume == 0


def test_make_ordering_sorts_and_merges_within_tolerance():
    v = make_ordering([(1.0, 0.25), (3.0, 0.25), (1.0 + 1e-14, 0.25)])
    assert v.values.tolist() == [3.0, pytest.approx(1.0)]
    assert v.weights.tolist() == [0.25, 0.5]


@pytest.mark.parametrize(
    "pairs",
    [[(-1.0, 0.5)], [(1.0, 0.0)], [(1.0, -0.1)], [(1.0, 0.7), (2.0, 0.4)]],
)
def test_make_ordering_rejects(pairs):
    with pytest.raises(ValueError):
        make_ordering(pairs)


@settings(max_examples=200)
@given(st.lists(atom, max_size=30), st.floats(0.05, 1.0))
def test_canonical_form(pairs, mass):
    total = sum(w for _, w in pairs)
    scaled = [(v, w * mass / total) for v, w in pairs] if total else []
    v = make_ordering(scaled)
    assert np.all(v.values > 0)
    assert np.all(np.diff(v.values) < 0)
    assert v.breakpoints[0] == 0 and v.phi_bar <= 1
    expected = math.fsum(y * w for y, w in scaled if y > 0)
    assert v.total_volume == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_step_ordering_validates():
    with pytest.raises(ValueError):
        StepOrdering([1.0, 2.0], [0, 0.5, 1])
    with pytest.raises(ValueError):
        StepOrdering([1.0], [0, 1.2])
    with pytest.raises(ValueError):
        StepOrdering([1.0, 0.0], [0, 0.5, 1])


# --- evaluate -------------------------------------------------------------

def test_evaluate():
    v = make_ordering([(2.0, 0.5), (0.5, 0.5)])
    assert evaluate(v, 0.5) == 0.5
    assert evaluate(v, 0.49) == 2.0
    assert evaluate(v, 1.0) == 0.0
    assert v(0.0) == 2.0
    np.testing.assert_array_equal(v([0, 0.5, 1]), [2.0, 0.5, 0.0])
    tail = make_ordering([(1.0, 0.5)])
    assert tail(0.5) == 0.0 and tail(0.7) == 0.0
    with pytest.raises(ValueError):
        evaluate(v, 1.5)
    with pytest.raises(ValueError):
        evaluate(v, -0.1)


@given(orderings())
def test_evaluate_is_rcd(v):
    phi = np.linspace(0, 1, 257)
    y = v(phi)
    assert y[-1] == 0
    assert np.all(np.diff(y) <= 0)


# --- generalized inverse -------------------------------------------------

def test_inverse_identity():
    w = MonotoneFn([0.0, 1.0], [0.0, 1.0], kind="linear")
    inv = generalized_inverse(w)
    y = np.linspace(0, 1, 11)
    np.testing.assert_allclose(inv(y), y)


def brute_inverse(w, y, n=200_001):
    """sup{x | w(x) < y} over a dense grid containing every node."""
    xs = np.union1d(np.linspace(0, w.b, n), w.x)
    wx = w(xs)
    below = xs[wx < y]
    return below.max()


def test_inverse_of_step():
    w = MonotoneFn([0.0, 0.5, 1.0], [0.0, 1.0])
    inv = generalized_inverse(w)
    assert inv.b == 1.0
    assert inv(0.0) == 0.0
    for y in [1e-9, 0.3, 0.999, 1.0]:
        assert inv(y) == 0.5 == brute_inverse(w, y)


def random_step_fn(rng, k=5):
    x = np.concatenate([[0.0], np.sort(rng.uniform(0, 2, k - 1)), [2.0]])
    vals = np.sort(rng.uniform(0, 3, k))
    return MonotoneFn(x, vals)


@pytest.mark.parametrize("seed", range(10))
def test_inverse_matches_scan(seed):
    rng = np.random.default_rng(seed)
    w = random_step_fn(rng)
    inv = generalized_inverse(w)
    for y in np.concatenate([rng.uniform(0, w.end_value, 20), w.values]):
        if y > 0:
            assert inv(y) == brute_inverse(w, y)


@pytest.mark.parametrize("seed", range(10))
def test_inverse_is_involution(seed):
    rng = np.random.default_rng(seed)
    w = random_step_fn(rng)
    inv = generalized_inverse(w)
    back = generalized_inverse(inv)
    # the double inverse lives on [0, w^-(w(b))]
    assert back.b == inv(inv.b)
    t = np.linspace(0, back.b, 1000)
    np.testing.assert_array_equal(back(t), w(t))
    mids = 0.5 * (w.x[1:] + w.x[:-1])
    pts = np.concatenate([w.x, mids])
    pts = pts[pts <= back.b]
    np.testing.assert_array_equal(back(pts), w(pts))
    assert np.all(np.diff(inv.values) >= 0)


def test_inverse_linear_involution():
    w = MonotoneFn([0, 0.3, 1.0], [0, 0.1, 2.0], kind="linear")
    back = generalized_inverse(generalized_inverse(w))
    t = np.linspace(0, 1, 1000)
    np.testing.assert_allclose(back(t), w(t), rtol=1e-14, atol=1e-15)


def test_inverse_rejects():
    with pytest.raises(ValueError):
        MonotoneFn([0, 0.5, 1], [1.0, 0.5])
    with pytest.raises(ValueError):
        generalized_inverse(MonotoneFn([0, 1], [0.0]))
    with pytest.raises(ValueError):
        generalized_inverse(MonotoneFn([0, 0.5, 1], [0, 1, 1], kind="linear"))


def test_inverse_left_continuous():
    w = MonotoneFn([0.0, 0.5, 1.0], [0.2, 1.0])
    inv = generalized_inverse(w)
    # jump at y = 0.2: value at the jump equals the left limit
    assert inv(0.2) == inv(0.2 - 1e-12) == 0.0
    assert inv(0.2 + 1e-12) == 0.5


# --- quantize ------------------------------------------------------------

def test_quantize_fixed_point():
    v = make_ordering([(2.0, 0.5), (0.5, 0.5)])
    assert quantize(v, 1.0) == v


def test_quantize_linear():
    q = quantize(lambda p: 1 - p, 0.2)
    assert q.n_components == 10
    np.testing.assert_allclose(q.values, np.arange(10, 0, -1) * 0.1)
    phi = np.linspace(0, 1, 200_001)
    d = np.abs(q(phi) - (1 - phi))
    assert d.max() < 0.2
    assert np.all(q(phi[:-1]) >= 1 - phi[:-1])


def test_quantize_rejects_nonpositive_eps():
    v = make_ordering([(1.0, 1.0)])
    with pytest.raises(ValueError):
        quantize(v, 0.0)
    with pytest.raises(ValueError):
        quantize(v, -1.0)


@settings(max_examples=200)
@given(orderings(), st.sampled_from([1.0, 0.3, 0.1, 0.01, 1e-3]))
def test_quantize_bound_and_domination(v, eps):
    q = quantize(v, eps)
    assert sup_distance(q, v) < eps
    cuts = np.union1d(q.breakpoints, v.breakpoints)
    assert np.all(q(cuts) >= v(cuts))
    levels = q.values / (eps / 2)
    np.testing.assert_allclose(levels, np.round(levels), atol=1e-9)


def test_sample_ordering():
    v = sample_ordering([3.0, 3.0, 1.0, 0.0])
    assert v.values.tolist() == [3.0, 1.0]
    assert v.breakpoints.tolist() == [0, 0.5, 0.75]
    with pytest.raises(ValueError):
        sample_ordering([1.0, 2.0])


# --- distances -----------------------------------------------------------

def test_sup_distance_examples():
    a = make_ordering([(2.0, 0.5)])
    b = make_ordering([(1.0, 1.0)])
    assert sup_distance(a, a) == 0.0
    assert sup_distance(a, b) == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_sup_distance_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    # breakpoints on a 1/1000 lattice so a 1e5 grid hits every plateau
    def lattice(k):
        w = rng.multinomial(1000 - rng.integers(0, 100), np.ones(k) / k) / 1000
        w = w[w > 0]
        return make_ordering(zip(rng.uniform(0, 5, w.size), w))

    a, b = lattice(20), lattice(20)
    assert sup_distance(a, b) == grid_sup(a, b)


def test_lp_distance_examples():
    d2, d1 = make_ordering([(2.0, 1.0)]), make_ordering([(1.0, 1.0)])
    for p in [1, 2, 3.5, 10]:
        assert lp_distance(d2, d1, p) == pytest.approx(1.0, rel=1e-15)
    half = make_ordering([(2.0, 0.5)])
    assert lp_distance(half, d1, 1) == 1.0
    with pytest.raises(ValueError):
        lp_distance(d1, d2, 0.5)
    assert lp_distance(d1, d2, math.inf) == sup_distance(d1, d2)


def test_lp_tends_to_sup():
    # gap 1 on a width-1/4 plateau: d_p = 4^(-1/p)
    a = make_ordering([(2.0, 0.25), (1.0, 0.75)])
    b = make_ordering([(1.0, 1.0)])
    for p in (1, 4, 64, 1024):
        assert lp_distance(a, b, p) == pytest.approx(0.25 ** (1 / p), rel=1e-13)


@settings(max_examples=150)
@given(orderings(8), orderings(8), orderings(8))
def test_metric_axioms(a, b, c):
    for dist in (sup_distance, lambda x, y: lp_distance(x, y, 1), lambda x, y: lp_distance(x, y, 2.5)):
        assert dist(a, b) == dist(b, a)
        assert dist(a, a) == 0
        assert dist(a, c) <= dist(a, b) + dist(b, c) + 1e-12


@settings(max_examples=100)
@given(orderings(8), orderings(8))
def test_lp_increasing_in_p(a, b):
    ds = [lp_distance(a, b, p) for p in (1, 2, 4, 8, 16)]
    assert all(y >= x * (1 - 1e-12) for x, y in zip(ds, ds[1:]))
    assert ds[-1] <= sup_distance(a, b) * (1 + 1e-12)
