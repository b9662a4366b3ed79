import math

import numpy as np
import pytest

from longtail_lab import (ExponentialControl, ParameterError, build_family1, build_family2,
                          build_from_config, build_non_ol_example, build_scale_sequence,
                          build_staircase_ol_example, build_tail_equivalent, moment_diagnostic)
from longtail_lab.distributions import family2_alpha_bounds


def test_anchor_sequence_log_domain():
    seq = build_scale_sequence(3.0, 0.5, 1.0, 6)
    assert seq.r == 3.0
    np.testing.assert_allclose(seq.log_anchors, [3.0 ** n * math.log(3.0) for n in range(7)])
    assert seq.anchors[2] == 19683.0
    assert math.isinf(seq.anchors[6])


@pytest.mark.parametrize("a, alpha, t", [(1.0, 0.5, 1.0), (3.0, 1.0, 1.0), (2.0, 0.5, 1.0), (3.0, 0.5, 2.0)])
def test_scale_sequence_rejects(a, alpha, t):
    with pytest.raises(ParameterError):
        build_scale_sequence(a, alpha, t, 6)


def test_tail_sum_bound_dominates():
    seq = build_scale_sequence(3.0, 0.5, 1.0, 6)
    exact = seq.log_power_sum(0.5, 3, 6)
    assert seq.log_tail_sum_bound(0.5, 3) >= exact


def test_reference_closed_forms(ref):
    # frozen from an mpmath evaluation of 1 / sum a_n^(-1/2)
    C = 1.2871197249598383
    assert ref.norm_const == pytest.approx(C, rel=1e-14)
    # block 0 is uniform on [3, 6) with mass C/sqrt(3)
    assert ref.pdf(np.array([4.0]))[0] == pytest.approx(C / math.sqrt(3) / 3, rel=1e-13)
    np.testing.assert_allclose(ref.sf(np.array([5.0, 6.0])), [0.50458739, 0.25688108], rtol=1e-7)
    assert ref.window(np.array([5.0]), 1.0)[0] == pytest.approx(0.2477063065616133, rel=1e-12)
    assert ref.masses.sum() == pytest.approx(1.0, abs=1e-12)


def test_tail_constant_in_gaps(ref):
    gap = np.array([6.0, 10.0, 26.999])
    np.testing.assert_allclose(ref.sf(gap), ref.sf(np.array([6.0]))[0], rtol=1e-14)
    assert np.all(ref.pdf(gap[1:]) == 0.0)


def test_shifted_evaluation_matches_plain(ref):
    x = np.array([30.0, 40.0, 19700.0])
    y = np.array([2.0, 5.0, 10.0])
    np.testing.assert_allclose(ref.sf(x, y), ref.sf(x - y), rtol=1e-13)
    np.testing.assert_allclose(ref.pdf(x, y), ref.pdf(x - y), rtol=1e-13)


def test_deep_tail_in_log_domain(ref):
    # above 2 a_3 only blocks 4..6 carry mass
    x = np.array([1.6e13])
    expect = math.log(ref.masses[4:].sum())
    assert ref.log_sf(x)[0] == pytest.approx(expect, rel=1e-12)


def test_family1_b2_density_shape():
    F = build_family1(0.5, 2.0, 1.0, 3.0)
    # G(u) = u^2, so the density on block 0 grows linearly from 0
    assert F.pdf(np.array([3.0 + 1e-9]))[0] < 1e-8
    assert F.pdf(np.array([5.0]))[0] > F.pdf(np.array([4.0]))[0]


def test_family2_regime_and_interval_note():
    G = build_family2(0.4, 1.5, 3.0)
    assert G.metadata["regime"] == "non-OS-regime"
    assert build_family2(0.55, 1.5, 4.0).metadata["regime"] == "OS-regime"
    b = family2_alpha_bounds(1.5)
    assert b["definition_interval"][0] < 0 < b["non_os_interval"][0]
    with pytest.raises(ParameterError):
        build_family2(0.7, 1.5, 3.0)


def test_family2_block_edges():
    G = build_family2(0.4, 1.5, 3.0)
    a = G.seq.anchors[:3]
    np.testing.assert_allclose(G.block_lo[:3], a ** (1 / 1.5), rtol=1e-13)
    np.testing.assert_allclose(G.block_hi[:3], (2 * a) ** (1 / 1.5), rtol=1e-13)


def test_config_builder_rejects_bad_alpha():
    with pytest.raises(ParameterError):
        build_from_config({"family": "family1", "alpha": 1.5, "a": 3.0})
    with pytest.raises(ParameterError):
        build_from_config({"family": "family9", "alpha": 0.5, "a": 3.0})


def test_segment_table_covers_blocks(ref):
    rows = ref.segment_table()
    assert len(rows) >= 3
    blocks = [r for r in rows if r["segment"] == "block"]
    assert [r["n"] for r in blocks[:3]] == [0, 1, 2]
    assert blocks[0]["log_x_lo"] == pytest.approx(math.log(3.0))
    assert all(r["log_x_lo"] < r["log_x_hi"] for r in rows)


def test_moment_diagnostic_critical_exponent(ref):
    below = moment_diagnostic(ref, 0.4)
    above = moment_diagnostic(ref, 0.6)
    assert below["finite"] and not above["finite"]
    assert above["partial_sums"][-1] > 1e3 * above["partial_sums"][1]


def test_staircase_steps():
    ex = build_staircase_ol_example(depth=4)
    F1 = ex["F1"]
    for xn, yn in zip(F1.xs, F1.ys):
        assert math.sqrt(yn) - math.sqrt(xn) == pytest.approx(math.log(2.0), rel=1e-13)
        plateau = F1.sf(np.array([xn, 0.5 * (xn + yn)]))
        assert plateau[0] == plateau[1] == pytest.approx(math.exp(-math.sqrt(xn)))
        assert F1.sf(np.array([yn]))[0] == pytest.approx(plateau[0] / 2, rel=1e-12)


def test_non_ol_witness_exact():
    ex = build_non_ol_example(0.5, [0.5, 0.25, 0.125])
    w = ex["witness"]
    n = np.arange(1, len(w["log2_at_b"]) + 1)
    np.testing.assert_allclose(w["log2_at_b"], n, atol=1e-12)
    # entries at a start from a_2
    np.testing.assert_allclose(w["log2_at_a"], 1 - (n[:-1] + 1), atol=1e-12)


def test_non_ol_rejects_increasing_eps():
    with pytest.raises(ParameterError):
        build_non_ol_example(0.5, [0.25, 0.5])


def test_tail_equivalent_start_and_ratio(ref):
    L = build_tail_equivalent(ref)
    assert L.start == pytest.approx(4.364913489969004, rel=1e-12)
    x = np.array([1e3, 1e5, 1e10])
    r = L.sf(x) / ref.sf(x)
    np.testing.assert_allclose(r, 1 + 1 / np.log(math.e + x), rtol=1e-13)


def test_exponential_control():
    E = ExponentialControl()
    assert not E.heavy_tailed
    assert E.window(np.array([3.0]), 1.0)[0] == pytest.approx(math.exp(-2) - math.exp(-3))


def test_family2_short_sequence_needs_looser_truncation():
    with pytest.raises(ParameterError):
        build_family2(0.4, 1.5, 3.0, n_max=2)
    G = build_family2(0.4, 1.5, 3.0, n_max=2, trunc_tol=1e-6)
    assert G.block_lo[0] == pytest.approx(3 ** (2 / 3), rel=1e-13)
    assert G.block_hi[0] == pytest.approx(6 ** (2 / 3), rel=1e-13)
    assert G.trunc_bound == pytest.approx(7.6e-9, rel=0.05)
