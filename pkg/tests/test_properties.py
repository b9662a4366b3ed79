import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st

from longtail_lab import CompoundSpec, PairConv, build_family1, build_family2, compound_tail, ratio_sweep, \
    thm_bounds
from longtail_lab.counting import explicit

alphas = st.floats(0.5, 0.95)
bs = st.floats(0.5, 3.0)
ts = st.floats(1.0, 2.0)


@st.composite
def family1(draw):
    alpha, b, t = draw(alphas), draw(bs), draw(ts)
    # smallest admissible base, padded
    a = 2.0 ** ((t + 2.0) * alpha) * draw(st.floats(1.01, 3.0))
    return build_family1(alpha, b, t, a)


@st.composite
def family2(draw):
    t = draw(st.floats(1.1, 1.9))
    alpha = draw(st.floats(max(0.01, (t - 1) / t) + 1e-3, 1 / t - 1e-3))
    a = 2.0 ** ((t + 2.0) * alpha) * draw(st.floats(1.01, 3.0))
    return build_family2(alpha, t, a)


def grid_for(F, u):
    hi = float(F.block_hi[2])
    return np.sort(F.lo * (hi / F.lo) ** np.asarray(u)) + 1.0


@given(family1(), st.lists(st.floats(0, 1), min_size=2, max_size=30))
def test_family1_tail_monotone_and_ratio_at_least_one(F, u):
    x = np.unique(grid_for(F, u))
    s = F.sf(x)
    assert np.all((s >= 0) & (s <= 1))
    assert np.all(np.diff(s) <= 1e-15)
    r = ratio_sweep(F, 1.0, x)["ratio"]
    assert np.all(r[np.isfinite(r)] >= 1.0 - 1e-12)


@given(family2(), st.lists(st.floats(0, 1), min_size=2, max_size=30), st.floats(0.1, 5.0))
def test_family2_window_matches_tail_difference(G, u, c):
    x = np.unique(grid_for(G, u))
    w = G.window(x, np.full(x.size, c))
    assert np.all(w >= 0)
    np.testing.assert_allclose(w, np.maximum(G.sf(x - c) - G.sf(x), 0), rtol=1e-7, atol=1e-14)


@given(family1(), st.lists(st.floats(0, 1), min_size=1, max_size=6))
def test_pair_tail_dominates_base_tail(F, u):
    x = np.unique(grid_for(F, u))
    H = PairConv(F, F).sf(x)
    assert np.all(H >= F.sf(x) - 1e-12)
    assert np.all(H <= 1.0 + 1e-15)


@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda v: sum(v) > 0.01),
       st.lists(st.floats(0, 1), min_size=2, max_size=8))
def test_mixture_tail_monotone_and_between_components(w, u):
    F = build_family1(0.5, 1.0, 1.0, 3.0)
    probs = np.array([0.0] + w) / sum(w)
    probs[-1] = 1.0 - probs[:-1].sum()
    assume(probs[-1] >= 0)
    spec = CompoundSpec(F, explicit(probs))
    x = np.unique(grid_for(F, u))
    v = compound_tail(spec, x)["value"]
    assert np.all(np.diff(v) <= 1e-12)
    # the order-3 tail dominates order 1 and bounds every mixture from above
    assert np.all(v >= F.sf(x) - 1e-12)
    assert np.all(v <= spec.power.evaluator(3, float(x.max())).sf(x) + 1e-9)


@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12).filter(lambda v: sum(v) > 0.01),
       st.floats(2.0, 8.0))
def test_bounds_ordered(w, c):
    probs = np.array(w) / sum(w)
    probs[-1] = 1.0 - probs[:-1].sum()
    assume(probs[-1] >= 0)
    b = thm_bounds(explicit(probs), c)
    assert 0 <= b.liminf_over_F2 <= b.limsup_over_F2 + 1e-12
    assert b.liminf_over_F2 <= b.liminf_over_F / 2 + 1e-12
