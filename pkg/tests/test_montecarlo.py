import math

import numpy as np
import pytest

from longtail_lab import PairConv, ParameterError, build_family2, empirical_tail, sample_xi
from longtail_lab import montecarlo as mc
from longtail_lab.counting import degenerate, poisson
from longtail_lab.distributions import ExponentialControl, build_staircase_ol_example

SEED = 12345
N = 200_000


def test_same_seed_same_draws(ref):
    a = sample_xi(ref, SEED, 1000)
    b = sample_xi(ref, SEED, 1000)
    c = sample_xi(ref, SEED, 1000, stream=1)
    assert np.array_equal(a.log_values, b.log_values)
    assert not np.array_equal(a.log_values, c.log_values)


def test_config_mapping_accepted():
    batch = sample_xi({"family": "family1", "alpha": 0.5, "a": 3.0}, SEED, 10)
    assert batch.provenance["kind"] == "family1"


def test_tails_within_band(ref):
    batch = sample_xi(ref, SEED, N)
    xs = np.array([3.5, 5.0, 6.0, 30.0, 50.0, 2.0e4, 3.9e4])
    for x, e in zip(xs, empirical_tail(batch, xs)):
        assert mc.band_check(ref.sf(np.array([x]))[0], e)


def test_family2_tails_within_band():
    G = build_family2(0.4, 1.5, 3.0)
    batch = sample_xi(G, SEED, N)
    xs = np.geomspace(G.block_lo[0], G.block_hi[2], 15)
    est = empirical_tail(batch, xs)
    assert all(mc.band_check(t, e) for t, e in zip(G.sf(xs), est))


def test_zero_count_one_sided_bound(ref):
    batch = sample_xi(ref, SEED, 1000)
    e = empirical_tail(batch, 1e300)
    assert e["count"] == 0
    assert e["ci_halfwidth"] == pytest.approx(-math.log(0.5 * math.erfc(5 / math.sqrt(2))) / 1000)
    below = empirical_tail(batch, 1.0)
    assert below == {"estimate": 1.0, "ci_halfwidth": 0.0, "count": 1000, "n": 1000}


def test_block_uniformity(ref):
    batch = sample_xi(ref, SEED, N)
    for n in (0, 1):
        assert mc.block_uniformity(batch, ref, n)["ok"]


def test_pair_sums_match_quadrature(ref):
    s2 = mc.sample_sums(ref, 2, SEED, N)
    xs = np.array([7.0, 10.0, 40.0, 60.0])
    v = PairConv(ref, ref).sf(xs)
    for vv, e in zip(v, empirical_tail(s2, xs)):
        assert mc.band_check(vv, e)


def test_random_sum_degenerate_and_empty(ref):
    one = mc.sample_sums(ref, None, SEED, 1000, counting=degenerate(1))
    assert np.all(np.isfinite(one.log_values))
    pois = mc.sample_sums(ref, None, SEED, 20_000, counting=poisson(1.0))
    empty = np.mean(np.isneginf(pois.log_values))
    assert abs(empty - math.exp(-1)) < 5 * math.sqrt(math.exp(-1) * (1 - math.exp(-1)) / 20_000)
    with pytest.raises(ParameterError):
        mc.empirical_conv_tail(ref, 1, SEED, 10, [5.0])


def test_staircase_sampler_matches_tail():
    ex = build_staircase_ol_example(depth=4)
    for law in (ex["F1"], ex["F2"]):
        batch = sample_xi(law, SEED, N)
        xs = np.array([0.5, 2.0, 5.0, 12.0, 30.0])
        assert all(mc.band_check(t, e) for t, e in zip(law.sf(xs), empirical_tail(batch, xs)))


def test_exponential_sampler():
    batch = sample_xi(ExponentialControl(), SEED, N)
    e = empirical_tail(batch, 2.0)
    assert mc.band_check(math.exp(-2.0), e)


def test_merge_counts(ref):
    parts = [empirical_tail(sample_xi(ref, SEED, 5000, stream=s), 6.0) for s in range(3)]
    merged = mc.merge_counts(parts)
    assert merged["n"] == 15000 and merged["count"] == sum(p["count"] for p in parts)


def test_npz_round_trip(ref, tmp_path):
    batch = sample_xi(ref, SEED, 500)
    path = tmp_path / "b.npz"
    mc.export_batch(batch, path)
    back = mc.load_batch(path)
    assert np.array_equal(back.log_values, batch.log_values)
    assert np.array_equal(back.block, batch.block)
    assert back.seed == SEED and back.provenance["norm_const"] == ref.norm_const


def test_tails_csv_header(ref):
    batch = sample_xi(ref, SEED, 100)
    text = mc.tails_csv([5.0], [empirical_tail(batch, 5.0)], [0.5], {"seed": SEED})
    lines = text.splitlines()
    assert lines[0] == f"# seed: {SEED}"
    assert lines[1] == "x,estimate,ci_halfwidth,count,n,target,within_band"
