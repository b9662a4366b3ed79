"""Doubly-exponential anchor sequences a_n = a ** (r ** n), kept in log domain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    """Raised when family or sequence parameters fall outside their valid domain."""


@dataclass(frozen=True)
class ScaleSequence:
    """Anchors a_0 < a_1 < ... < a_{n_max} with r = 1 + 1/alpha.

    Only ``log_anchors`` is authoritative; ``anchors`` overflows to ``inf``
    once a_n leaves the double range (around n = 5 for a = 3, alpha = 1/2).
    """

    a: float
    alpha: float
    r: float
    n_max: int
    log_anchors: np.ndarray

    @property
    def anchors(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.array([_pow_or_inf(self.a, self.r ** n) for n in range(self.n_max + 1)])

    def log_anchor(self, n: int) -> float:
        """log a_n for any n >= 0, including indices beyond ``n_max``."""
        return (self.r ** n) * math.log(self.a)

    def log_power_sum(self, K: float, start: int = 0, stop: int | None = None) -> float:
        """log of sum_{start <= n <= stop} a_n ** (-K); ``stop`` defaults to n_max."""
        stop = self.n_max if stop is None else stop
        if start > stop:
            return -math.inf
        terms = np.array([-K * self.log_anchor(n) for n in range(start, stop + 1)])
        return float(np.logaddexp.reduce(terms))

    def log_tail_sum_bound(self, K: float, N: int) -> float:
        """log of an upper bound on sum_{n >= N} a_n ** (-K).

        Successive ratios a_{n+1}^{-K} / a_n^{-K} = a_n^{-K (r - 1)} shrink
        doubly exponentially, so the geometric series with the first ratio
        dominates the remainder.
        """
        first = -K * self.log_anchor(N)
        log_q = -K * (self.r - 1.0) * self.log_anchor(N)
        return first - math.log1p(-math.exp(log_q))


def _pow_or_inf(base: float, expo: float) -> float:
    try:
        return base ** expo
    except OverflowError:
        return math.inf


def build_scale_sequence(a: float, alpha: float, t: float, n_max: int) -> ScaleSequence:
    """Validate parameters and return the anchor sequence.

    Requires ``a > 1``, ``alpha`` in (0, 1) so that r = 1 + 1/alpha > 2, and
    the spacing condition a**r > 2**(t+2) * a.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if not a > 1.0:
        raise ParameterError(f"scale base a must exceed 1, got {a}")
    if n_max < 2:
        raise ParameterError(f"n_max must be at least 2, got {n_max}")
    r = 1.0 + 1.0 / alpha
    # a^r > 2^{t+2} a  <=>  (r - 1) log a > (t + 2) log 2
    if not (r - 1.0) * math.log(a) > (t + 2.0) * math.log(2.0):
        raise ParameterError(
            f"base a={a} violates a**r > 2**(t+2)*a for r={r:g}, t={t:g}"
        )
    log_anchors = np.array([(r ** n) * math.log(a) for n in range(n_max + 1)])
    return ScaleSequence(a=float(a), alpha=float(alpha), r=r, n_max=int(n_max), log_anchors=log_anchors)
