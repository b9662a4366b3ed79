"""Counting laws for the number of summands in a random sum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .scales import ParameterError

TRUNC_REL = 1e-12


@dataclass(frozen=True)
class CountingDist:
    """Law of tau on {0, 1, 2, ...}.

    ``pmf`` holds p_0..p_N; for infinite-support kinds N is chosen so the
    neglected tail mass is at most ``TRUNC_REL`` and that mass is kept in
    ``tail_mass``.
    """

    kind: str
    params: dict
    pmf: np.ndarray
    tail_mass: float = 0.0
    mean: float = field(default=float("nan"))

    @property
    def support_max(self) -> int | None:
        return len(self.pmf) - 1 if self.kind == "explicit" else None

    def p(self, k: int) -> float:
        return float(self.pmf[k]) if 0 <= k < len(self.pmf) else 0.0

    def sf(self, k: float) -> float:
        """P(tau > k)."""
        k = math.floor(k)
        if k < 0:
            return 1.0
        return float(self.pmf[k + 1:].sum()) + self.tail_mass

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def poisson(mu: float) -> CountingDist:
    if not mu > 0:
        raise ParameterError("poisson mean must be positive")
    N = int(stats.poisson.isf(TRUNC_REL, mu)) + 2
    k = np.arange(N + 1)
    pmf = stats.poisson.pmf(k, mu)
    return CountingDist("poisson", {"mu": mu}, pmf, float(stats.poisson.sf(N, mu)), mu)


def geometric(p: float) -> CountingDist:
    """p_k = (1 - p) p^k for k >= 0."""
    if not 0 < p < 1:
        raise ParameterError("geometric ratio must lie in (0, 1)")
    N = int(math.ceil(math.log(TRUNC_REL) / math.log(p))) + 1
    k = np.arange(N + 1)
    pmf = (1.0 - p) * p ** k
    return CountingDist("geometric", {"q": 1.0 - p, "p": p}, pmf, p ** (N + 1), p / (1.0 - p))


def power_law(beta: float, n_terms: int = 200_000) -> CountingDist:
    """p_k = K k^(-beta) for k >= 1 with K = 1/zeta(beta).

    The mass beyond ``n_terms`` is reported in ``tail_mass``; the normaliser
    and the mean use the zeta function, so they carry no truncation error.
    """
    if not beta > 2:
        raise ParameterError("power-law exponent must exceed 2 for a finite mean")
    K = 1.0 / special.zeta(beta, 1)
    k = np.arange(n_terms + 1, dtype=float)
    pmf = np.zeros(n_terms + 1)
    pmf[1:] = K * k[1:] ** -beta
    tail = K * special.zeta(beta, n_terms + 1)
    mean = K * special.zeta(beta - 1.0, 1)
    return CountingDist("power_law", {"beta": beta, "K": K}, pmf, float(tail), float(mean))


def explicit(probs) -> CountingDist:
    pmf = np.asarray(probs, dtype=float)
    if pmf.ndim != 1 or pmf.size == 0 or np.any(pmf < 0):
        raise ParameterError("explicit counting law needs nonnegative probabilities")
    if abs(pmf.sum() - 1.0) > 1e-12:
        raise ParameterError(f"explicit probabilities sum to {pmf.sum()!r}, not 1")
    return CountingDist("explicit", {"probs": pmf.tolist()}, pmf, 0.0, float(np.arange(pmf.size) @ pmf))


def degenerate(n: int) -> CountingDist:
    """tau identically equal to n."""
    probs = np.zeros(n + 1)
    probs[n] = 1.0
    return explicit(probs)


def from_config(cfg: dict) -> CountingDist:
    kind = cfg.get("kind")
    if kind == "poisson":
        return poisson(float(cfg["mu"]))
    if kind == "geometric":
        return geometric(float(cfg["p"]))
    if kind == "power_law":
        return power_law(float(cfg["beta"]))
    if kind == "explicit":
        return explicit(cfg["probs"])
    raise ParameterError(f"unknown counting kind {kind!r}")
