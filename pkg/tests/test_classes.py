import math

import numpy as np
import pytest

from longtail_lab import (ClassifyConfig, PairConv, Subject, build_family1, build_family2,
                          build_tail_equivalent, classify, convolution_root_crosscheck,
                          density_o_tail_probe, insensitivity_probe, ratio_sweep,
                          tail_condition_x0, tail_equivalence_transfer)
from longtail_lab.classes import CLASSES, PreconditionError, per_scale_max, probe_grid, trend
from longtail_lab.distributions import ExponentialControl, ParetoLaw


def verdicts(rep):
    return {c: rep.verdict(c) for c in rep.verdicts}


@pytest.fixture(scope="module")
def reports(ref):
    return classify(Subject(ref, 1)), classify(Subject(ref, 2))


def test_trend_thresholds():
    assert trend([1.0, 0.5, 0.2])["decreasing"]
    assert trend([1.0, 1.2, 1.1])["bounded"]
    assert trend([1.0, 2.0, 5.0])["growing"]
    t = trend([1.0, 0.8, 0.5])
    assert not t["decreasing"] and not t["persistent"]


def test_probe_grid_layout(ref):
    x, idx = probe_grid(Subject(ref, 1), n_points=16, c_values=(1.0,), depth=3)
    assert np.all(np.diff(x) > 0)
    assert set(np.unique(idx)) == {0, 1, 2}
    assert x[0] == pytest.approx(3.0)
    # breakpoint shifts land on the grid
    assert np.any(np.isclose(x, 6.0)) and np.any(np.isclose(x, 7.0))


def test_ratio_sweep_reference_values(ref):
    x = 2.0 * ref.block_lo[:3]
    r = ratio_sweep(ref, 1.0, x)["ratio"]
    assert r[0] == pytest.approx(1.9642840, abs=1e-6)
    assert abs(r[2] - 2.0) < 1e-6


def test_ratio_sweep_callable_and_guards(ref):
    x = np.array([4.0, 5.0])
    r = ratio_sweep(lambda z: ref.sf(z), 1.0, x)["ratio"]
    np.testing.assert_allclose(r, ref.sf(x - 1) / ref.sf(x))
    with pytest.raises(ValueError):
        ratio_sweep(ref, 0.0, x)
    with pytest.raises(ValueError):
        ratio_sweep(ref, 1.0, x[::-1])


def test_ratio_sweep_deep_blocks(ref):
    # at the block top 2 a_n the ratio tends to 2; n = 4 sits near 1e39.
    # block_hi, not 2 * block_lo: the doubles differ by ~0.03 at n = 3
    x = ref.block_hi[3:5]
    r = ratio_sweep(ref, 1.0, x)["ratio"]
    np.testing.assert_allclose(r, 2.0, atol=1e-6)


def test_reference_verdicts(reports):
    F, FF = reports
    assert verdicts(F) == {"L": "inconsistent", "OL": "consistent", "OS": "inconsistent",
                           "D": "inconsistent"}
    v = verdicts(FF)
    assert v["L"] == v["OL"] == v["OS"] == "consistent"


def test_crosscheck_pattern(reports):
    out = convolution_root_crosscheck(*reports)
    assert out["status"] == "consistent"
    assert out["pattern"] == "F not in L, F not in OS, F*F in L"


def test_family2_non_os_pattern():
    G = build_family2(0.4, 1.5, 3.0)
    rf = classify(Subject(G, 1), ClassifyConfig(classes=("L", "OL", "OS")))
    rff = classify(Subject(G, 2), ClassifyConfig(classes=("L", "OL", "OS")))
    assert rf.verdict("OL") == "inconsistent"
    assert rff.verdict("L") == "consistent" and rff.verdict("OS") == "inconsistent"


def test_family2_os_crosscheck():
    G = build_family2(0.55, 1.5, 4.0)
    rf, rff = classify(Subject(G, 1)), classify(Subject(G, 2))
    out = convolution_root_crosscheck(rf, rff)
    assert out["pattern"] == "F not in OL while F*F in L and OS"


def test_light_tail_out_of_scope():
    rep = classify(Subject(ExponentialControl(), 1))
    assert rep.verdict("L") == "inconsistent" and rep.verdict("OL") == "consistent"
    assert convolution_root_crosscheck(rep, rep, heavy_tailed=False)["status"] == "out-of-scope"


def test_class_subset_and_report(ref):
    rep = classify(Subject(ref, 1), ClassifyConfig(classes=("L",)))
    assert list(rep.verdicts) == ["L"]
    d = rep.to_dict()
    assert d["config"]["burn_in"] == 1 if "config" in d else True
    assert rep.traces_csv().splitlines()[0].startswith("x")


def test_density_probe_shrinks(ref):
    x, idx = probe_grid(Subject(ref, 2), c_values=(1.0,))
    ps = density_o_tail_probe(Subject(ref, 2), x, idx)["per_scale_max"]
    assert ps[1] < ps[0] and ps[2] < ps[1]


def test_insensitivity_probe_pareto():
    law = ParetoLaw(0.5)
    x = np.geomspace(10, 1e8, 20)
    r = insensitivity_probe(law, lambda z: np.sqrt(z), x)["ratio"]
    assert r[-1] < r[0] and r[-1] < 1e-3


def test_transfer_precondition(ref):
    L = build_tail_equivalent(ref)
    out = tail_equivalence_transfer(ref, L, PairConv(ref, ref))
    d = out["per_scale_distance"]
    assert d[2] < d[0]

    class Doubled:
        lo = ref.lo

        def sf(self, x):
            return np.minimum(1.0, 2.0 * ref.sf(x))

    with pytest.raises(PreconditionError):
        tail_equivalence_transfer(ref, Doubled(), PairConv(ref, ref))


def test_tail_condition_x0(ref):
    sub = Subject(ref, 2)
    out = tail_condition_x0(sub, 0.05)
    assert out["x0"] == pytest.approx(20.333333, abs=1e-5)
    assert out["threshold"] == pytest.approx(3 * out["x0"] - 2)
    assert tail_condition_x0(sub, 0.3)["x0"] == 1.0


def test_per_scale_max_ignores_negative_index():
    ps = per_scale_max([1.0, 5.0, 2.0], np.array([-1, 0, 0]))
    assert ps == {0: 5.0}
    assert CLASSES == ("L", "OL", "OS", "D")
    assert math.isfinite(ps[0])
