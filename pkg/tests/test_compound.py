import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

from longtail_lab import CompoundSpec, PairConv, ParameterError, compound_tail, kesten_envelope, \
    levy_compound_tail, series_condition_check, thm_bounds
from longtail_lab.compound import COMPOUND_COLUMNS, compound_csv, poisson_closed_forms
from longtail_lab.counting import degenerate, explicit, from_config, geometric, poisson, power_law


# ---------------------------------------------------------------- counting laws


def test_poisson_pmf_and_truncation():
    c = poisson(1.0)
    assert c.p(3) == pytest.approx(math.exp(-1) / 6, rel=1e-14)
    assert c.tail_mass <= 1e-12
    assert c.pmf.sum() + c.tail_mass == pytest.approx(1.0, abs=1e-15)
    assert c.mean == 1.0


def test_geometric_mean_and_params():
    g = geometric(0.25)
    assert g.p(0) == 0.75
    assert g.mean == pytest.approx(1 / 3)
    assert g.params == {"q": 0.75, "p": 0.25}


def test_power_law_moments_from_zeta():
    pl = power_law(3.0)
    with mp.workdps(30):
        K = 1 / mp.zeta(3)
        assert pl.params["K"] == pytest.approx(float(K), rel=1e-14)
        assert pl.mean == pytest.approx(float(K * mp.zeta(2)), rel=1e-13)
    assert pl.pmf.sum() + pl.tail_mass == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ParameterError):
        power_law(2.0)


def test_explicit_and_config():
    e = explicit([0.25, 0.25, 0.5])
    assert e.mean == 1.25 and e.support_max == 2
    assert e.sf(0) == 0.75
    with pytest.raises(ParameterError):
        explicit([0.5, 0.6])
    assert from_config({"kind": "poisson", "mu": 2.0}).mean == 2.0
    with pytest.raises(ParameterError):
        from_config({"kind": "binomial"})


# ---------------------------------------------------------------- bounds


def test_kesten_envelope_value():
    assert kesten_envelope(3.0, 0.1, 2) == pytest.approx(4.41)
    with pytest.raises(ParameterError):
        kesten_envelope(1.5, 0.1, 2)


def test_bounds_degenerate_two():
    b = thm_bounds(degenerate(2), 3.0)
    assert (b.liminf_over_F, b.liminf_over_F2, b.limsup_over_F2) == (2.0, 1.0, 1.0)
    assert b.doubled()["liminf_over_F2"] == 2.0


def _series_oracle(pmf, c):
    lower = sum(Fraction(k // 2) * p for k, p in enumerate(pmf))
    upper = sum(Fraction((k + 1) // 2) * p * Fraction(c - 1) ** ((k + 1) // 2 - 1)
                for k, p in enumerate(pmf) if k >= 1)
    return float(lower), float(upper)


def test_bounds_explicit_against_exact_rationals():
    probs = [Fraction(1, 8), Fraction(1, 4), Fraction(1, 8), Fraction(1, 4), Fraction(1, 4)]
    lo, up = _series_oracle(probs, 3)
    b = thm_bounds(explicit([float(p) for p in probs]), 3.0)
    assert b.liminf_over_F2 == pytest.approx(lo, rel=1e-14)
    assert b.limsup_over_F2 == pytest.approx(up, rel=1e-14)


def test_bounds_geometric_closed_form():
    # pmf (1-p) p^k with p = 1/2; oracle sums 400 exact rational terms
    probs = [Fraction(1, 2) ** (k + 1) for k in range(400)]
    lo, up = _series_oracle(probs, 3)
    b = thm_bounds(geometric(0.5), 3.0)
    assert b.liminf_over_F2 == pytest.approx(lo, rel=1e-12)
    assert b.limsup_over_F2 == pytest.approx(up, rel=1e-12)
    assert up == pytest.approx(1.5, rel=1e-12)


def test_poisson_bounds_oracle():
    # 10^5-term double-precision sums; doubled normalisation
    b = thm_bounds(poisson(1.0), 3.0).doubled()
    assert b["liminf_over_F2"] == pytest.approx(0.5676676416183064, abs=1e-9)
    assert b["limsup_over_F2"] == pytest.approx(1.8080470, abs=1e-6)


def test_poisson_closed_forms():
    pr = poisson_closed_forms(1.0, 3.0)
    assert pr["lower"] == pytest.approx(1.432332, abs=1e-6)
    assert pr["upper"] == pytest.approx(1.8080470, abs=1e-6)
    # the closed lower form is 2 E ceil(tau/2), not the floor sum
    lo = thm_bounds(poisson(1.0), 3.0).doubled()["liminf_over_F2"]
    assert pr["lower"] + lo == pytest.approx(2.0, abs=1e-12)


def test_series_condition_verdicts():
    assert series_condition_check(poisson(5.0), 6.0)["finite"]
    assert not series_condition_check(geometric(0.9), 3.0)["finite"]
    assert series_condition_check(geometric(0.5), 3.0)["finite"]
    assert not series_condition_check(power_law(3.0), 2.5)["finite"]
    b = thm_bounds(geometric(0.9), 3.0)
    assert math.isinf(b.limsup_over_F2) and not b.series_finite


# ---------------------------------------------------------------- compound tails


def test_compound_degenerate_reduces(ref):
    x = np.array([5.0, 10.0, 40.0])
    one = compound_tail(CompoundSpec(ref, degenerate(1)), x)
    np.testing.assert_allclose(one["value"], ref.sf(x), rtol=1e-13)
    two = CompoundSpec(ref, degenerate(2))
    np.testing.assert_allclose(compound_tail(two, x)["value"], PairConv(ref, ref).sf(x), rtol=1e-12)
    assert np.all(compound_tail(two, x)["trunc_bound"] == 0)


def test_compound_requires_cstar2(ref):
    with pytest.raises(ParameterError):
        CompoundSpec(ref, poisson(1.0))


def test_levy_tail_against_exact_partial_sum(ref, mix_oracle):
    x = np.array([10.0, 40.0, 20000.0])
    out = levy_compound_tail(ref, 1.0, x, cstar2=3.0)
    assert out["orders_computed"] == 4 and out["truncation_M"] == 11
    for i, xv in enumerate(x):
        exact = sum(math.exp(-1) / math.factorial(n) * mix_oracle(0.5, 3.0, 6, n, xv) for n in range(1, 5))
        assert out["value"][i] == pytest.approx(exact, rel=1e-8)
    assert np.all(out["trunc_bound"] > out["remainder_beyond_M"])


def test_levy_tail_below_support(ref):
    out = levy_compound_tail(ref, 1.0, np.array([1.0]), cstar2=3.0)
    a0 = 1 - math.exp(-1)
    assert out["value"][0] <= a0 <= out["value"][0] + out["trunc_bound"][0]
    assert out["value"][0] == pytest.approx(a0, abs=4e-3)


def test_compound_csv_columns(ref):
    spec = CompoundSpec(ref, poisson(1.0), cstar2=3.0)
    text = compound_csv(spec, np.array([10.0, 40.0]))
    rows = text.strip().splitlines()
    assert rows[0].split(",") == list(COMPOUND_COLUMNS)
    assert rows[1].split(",")[3] == "inf"
