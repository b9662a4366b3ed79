import math

import numpy as np
import pytest

from longtail_lab import ConvPower, NumericConv, PairConv, nfold_tail, self_conv_density
from longtail_lab.convolution import CSV_COLUMNS, ConvTable, scale_edges, t_functional


@pytest.mark.parametrize("x", [7.0, 10.0, 40.0, 60.0, 19690.0, 30000.0])
def test_pair_tail_matches_exact_mixture(ref, mix_oracle, x):
    v, e, ok = PairConv(ref, ref).sf_err(np.array([x]))
    assert ok[0]
    assert v[0] == pytest.approx(mix_oracle(0.5, 3.0, 6, 2, x), rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("x", [12.0, 50.0, 20000.0])
def test_order3_tail_matches_exact_mixture(ref, mix_oracle, x):
    ev = ConvPower(ref).evaluator(3, 1e5)
    v, e, ok = ev.sf_err(np.array([x]))
    assert ok[0]
    assert v[0] == pytest.approx(mix_oracle(0.5, 3.0, 6, 3, x), rel=1e-8)
    assert e[0] < 1e-7 * v[0]


def test_self_conv_density_values(ref):
    h = PairConv(ref, ref).pdf(np.array([8.0, 20.0]))
    # x = 8 sits in the triangle of two block-0 uniforms; 20 falls in a gap of h
    assert h[0] == pytest.approx(0.12271683, rel=1e-7)
    assert h[1] == 0.0


def test_self_conv_density_closed_form_block00(ref):
    # on [6, 12) only the block-0 pair contributes: m0^2 * triangle density on [6, 12]
    m0 = ref.masses[0]
    x = np.linspace(6.1, 11.9, 7)
    tri = np.where(x < 9, (x - 6) / 9, (12 - x) / 9)
    out = self_conv_density(ref, x)
    assert np.all(out["reliable"])
    np.testing.assert_allclose(out["value"], m0 ** 2 * tri, rtol=1e-10)


def test_tail_closed_form_block00(ref):
    # H-bar(x) = 1 - m0^2 P(U + U' <= x - 6) on [6, 12]
    m0 = ref.masses[0]
    x = np.array([6.5, 8.0, 10.0, 11.5])
    s = x - 6.0
    cdf = np.where(s <= 3, s ** 2 / 18, 1 - (6 - s) ** 2 / 18)
    np.testing.assert_allclose(PairConv(ref, ref).sf(x), 1 - m0 ** 2 * cdf, rtol=1e-12)


def test_pair_window_consistent_with_tail(ref):
    P = PairConv(ref, ref)
    x = np.array([8.0, 40.0, 19700.0])
    w = P.window(x, np.ones(3))
    np.testing.assert_allclose(w, P.sf(x - 1) - P.sf(x), rtol=1e-9, atol=1e-15)


def test_table_reproduces_source(ref):
    P = PairConv(ref, ref)
    T = ConvTable(P, 2e5)
    x = np.geomspace(6.5, 1.9e5, 50)
    np.testing.assert_allclose(T.sf(x), P.sf(x), rtol=1e-8)


def test_nfold_tail_and_csv(ref):
    grid = np.array([10.0, 50.0, 20000.0])
    c = nfold_tail(ref, 2, grid)
    assert isinstance(c, NumericConv)
    assert not np.any(c.flagged)
    text = c.to_csv({"order": 2})
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 4


def test_scale_edges_order2(ref):
    e = scale_edges(ref, 2)
    assert e[0] == pytest.approx(6.0)
    assert e[1] == pytest.approx(30.0)


def test_deep_order2_tail_uses_shifted_precision(ref, mix_oracle):
    # a_4 + a_0 region; naive subtraction near 1.5e13 loses all digits
    x = 7.62559748e12 + 4.0
    v = PairConv(ref, ref).sf(np.array([x]))[0]
    assert v == pytest.approx(mix_oracle(0.5, 3.0, 6, 2, x), rel=1e-8)
    assert math.isfinite(v) and v > 0


def test_t_functional_closed_form_at_12(ref):
    # z < 6 keeps H-bar(z) = 1, so T(12) = P(6 < S <= 12) = m0^2
    m0 = ref.masses[0]
    out = t_functional(ref, ConvPower(ref), np.array([12.0]))
    assert out["T"][0] == pytest.approx(m0 ** 2, rel=1e-9)
    assert out["ratio"][0] == pytest.approx(m0 ** 2 / (1 - m0 ** 2), rel=1e-9)
