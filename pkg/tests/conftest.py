import itertools
import math

import mpmath as mp
import pytest
from hypothesis import settings

from longtail_lab import build_family1

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def ref():
    return build_family1(0.5, 1.0, 1.0, 3.0)


def _box_cdf(lows, highs, x):
    """P(U_1 + ... + U_k <= x) for independent uniforms, by the box-spline formula."""
    k = len(lows)
    vol = mp.fprod([h - l for l, h in zip(lows, highs)])
    acc = mp.mpf(0)
    for pick in itertools.product((0, 1), repeat=k):
        corner = mp.fsum(highs[i] if pick[i] else lows[i] for i in range(k))
        s = x - corner
        if s > 0:
            acc += (-1) ** sum(pick) * s ** k
    return acc / (mp.factorial(k) * vol)


def uniform_mixture_conv_sf(alpha, a, n_max, order, x, blocks=None):
    """Tail of the order-fold sum for the t = b = 1 block family, exact in mpmath.

    Each summand is uniform on [a_n, 2 a_n) with mass proportional to a_n^(-alpha).
    """
    with mp.workdps(60):
        r = 1 + mp.mpf(1) / alpha
        anchors = [mp.mpf(a) ** (r ** n) for n in range(n_max + 1)]
        w = [s ** (-alpha) for s in anchors]
        tot = mp.fsum(w)
        w = [v / tot for v in w]
        blocks = range(n_max + 1) if blocks is None else blocks
        x = mp.mpf(x)
        out = mp.mpf(0)
        for combo in itertools.product(blocks, repeat=order):
            lows = [anchors[j] for j in combo]
            if mp.fsum(lows) >= x:
                out += mp.fprod(w[j] for j in combo)
                continue
            highs = [2 * anchors[j] for j in combo]
            if mp.fsum(highs) <= x:
                continue
            out += mp.fprod(w[j] for j in combo) * (1 - _box_cdf(lows, highs, x))
        return float(out)


@pytest.fixture(scope="session")
def mix_oracle():
    return uniform_mixture_conv_sf


def approx_rel(a, b, rel):
    return abs(a - b) <= rel * abs(b) + 1e-300 or math.isclose(a, b, rel_tol=rel)
