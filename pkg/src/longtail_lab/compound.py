"""Random sums F^{*tau} = sum_n p_n F^{*n}, their truncation bounds and limit bounds.

Orders up to ``MAX_ORDER`` are computed by quadrature.  Every higher order
enters only through the Kesten-type envelope

    tail(F^{*2m}) <= K (c - 1 + eps0)^m tail(F^{*2}),     c = C*(F^{*2}),

with K calibrated on the computed orders, so each compound value carries a
``trunc_bound`` column rather than a silently dropped remainder.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .convolution import ConvPower, cstar_estimate, nfold_tail, scale_block_index
from .counting import CountingDist, poisson
from .distributions import Law, PiecewiseDist, _arr
from .scales import ParameterError

MAX_ORDER = 4
DEFAULT_EPS0 = 0.1
DEFAULT_EPS = 1e-6


def kesten_envelope(cstar_n: float, eps0: float, m: int) -> float:
    """Growth factor (cstar_n - 1 + eps0)^m of the envelope for order m*n."""
    if cstar_n < 2 or eps0 <= 0 or m < 1:
        raise ParameterError("envelope needs cstar_n >= 2, eps0 > 0 and m >= 1")
    return (cstar_n - 1.0 + eps0) ** m


def _block_masses(counting: CountingDist, n: int, m_max: int) -> np.ndarray:
    """sum_{k=(m-1)n+1}^{mn} p_k for m = 1..m_max."""
    pmf = counting.pmf
    out = np.zeros(m_max)
    for m in range(1, m_max + 1):
        lo, hi = (m - 1) * n + 1, m * n
        if lo >= pmf.size:
            break
        out[m - 1] = pmf[lo:min(hi, pmf.size - 1) + 1].sum()
    return out


def series_condition_check(counting: CountingDist, cstar_n: float, eps0: float = DEFAULT_EPS0,
                           n: int = 2, terms: int = 60) -> dict:
    """Whether sum_m (sum_{k=(m-1)n+1}^{mn} p_k) (cstar_n - 1 + eps0)^m is finite.

    The verdict is analytic for the named kinds; ``partial`` lists the first
    ``terms`` partial sums as numeric evidence.
    """
    if cstar_n < 2:
        raise ParameterError("cstar_n must be at least 2")
    q = cstar_n - 1.0 + eps0
    blocks = _block_masses(counting, n, terms)
    with np.errstate(over="ignore"):
        partial = np.cumsum(blocks * q ** np.arange(1, terms + 1)).tolist()
    kind = counting.kind
    if kind in ("poisson", "explicit"):
        finite = True
    elif kind == "geometric":
        # block masses decay like p^{n m}
        finite = counting.params["p"] ** n * q < 1.0
    elif kind == "power_law":
        # polynomial block masses against q^m with q > 1
        finite = False
    else:
        finite = bool(np.isfinite(partial[-1]) and blocks[-1] * q ** terms < 1e-12)
    return {"finite": bool(finite), "partial": partial, "ratio": q}


def _prob_odd(counting: CountingDist) -> float:
    kind, par = counting.kind, counting.params
    if kind == "poisson":
        return -0.5 * math.expm1(-2.0 * par["mu"])
    if kind == "geometric":
        return par["p"] / (1.0 + par["p"])
    if kind == "power_law":
        return 1.0 - 2.0 ** -par["beta"]
    return float(counting.pmf[1::2].sum())


@dataclass(frozen=True)
class ThmBounds:
    """Limit bounds for the compound tail, in the undoubled normalisation.

    ``liminf_over_F2`` is the lower bound for liminf tail(F^{*tau})/tail(F^{*2})
    and ``limsup_over_F2`` the upper bound for the limsup; ``doubled`` gives
    the same numbers multiplied by two.
    """

    liminf_over_F: float
    liminf_over_F2: float
    limsup_over_F2: float
    series_finite: bool

    def doubled(self) -> dict:
        return {"liminf_over_F": self.liminf_over_F,
                "liminf_over_F2": 2.0 * self.liminf_over_F2,
                "limsup_over_F2": 2.0 * self.limsup_over_F2}

    def to_dict(self) -> dict:
        return {"liminf_over_F": self.liminf_over_F, "liminf_over_F2": self.liminf_over_F2,
                "limsup_over_F2": self.limsup_over_F2, "series_finite": self.series_finite}


def thm_bounds(counting: CountingDist, cstar2: float, eps0: float = DEFAULT_EPS0) -> ThmBounds:
    """Bounds built from E tau, sum m (p_2m + p_2m+1) and sum m (p_2m-1 + p_2m) (c-1)^(m-1).

    The lower sum equals E floor(tau/2) = (E tau - P(tau odd)) / 2, which is
    how it is evaluated here.  The upper sum is infinite unless the series
    condition with n = 2 holds.
    """
    mean = counting.mean
    if not math.isfinite(mean):
        raise ParameterError("bounds need a finite mean counting law")
    lower = 0.5 * (mean - _prob_odd(counting))
    chk = series_condition_check(counting, cstar2, eps0, n=2)
    c1 = cstar2 - 1.0
    if not chk["finite"]:
        upper = math.inf
    elif counting.kind == "geometric":
        p = counting.params["p"]
        upper = p * (1.0 - p * p) / (1.0 - p * p * c1) ** 2
    else:
        pmf = counting.pmf
        m_max = (pmf.size + 1) // 2
        m = np.arange(1, m_max + 1)
        pair = _block_masses(counting, 2, m_max)
        with np.errstate(over="ignore", invalid="ignore"):
            terms = m * pair * c1 ** (m - 1.0)
        upper = float(np.nansum(terms))
    return ThmBounds(float(mean), float(lower), float(upper), chk["finite"])


def poisson_closed_forms(mu: float, cstar2: float) -> dict:
    """Closed forms for Poisson counting, in the doubled normalisation.

    ``lower`` is mu + (1 - e^{-2 mu}) / 2 and ``upper`` uses r = sqrt(c - 1).
    Both are kept as stated; ``thm_bounds(...).doubled()`` is the direct
    evaluation of the underlying series and differs from ``lower``.
    """
    r = math.sqrt(cstar2 - 1.0)
    lower = mu - 0.5 * math.expm1(-2.0 * mu)
    a, b = math.exp(mu * (r - 1.0)), math.exp(-mu * (r + 1.0))
    upper = (mu + 1.0) / (2.0 * r) * (a - b) + 0.5 * mu * (a + b)
    return {"lower": lower, "upper": upper, "r": r}


def default_calibration_grid(dist: Law, n_points: int = 240) -> np.ndarray:
    """Log-spaced points from 2 lo to twice the top of the third block (or 1e4 lo)."""
    lo = dist.lo
    if isinstance(dist, PiecewiseDist) and len(dist.finite_blocks()) >= 3:
        top = 2.0 * float(dist.block_hi[2])
    else:
        top = 1e4 * lo
    return np.geomspace(2.0 * lo, top, n_points)


@dataclass(frozen=True)
class CompoundSpec:
    """Base law, counting law and the envelope that certifies the remainder.

    ``K`` is calibrated once at construction as the largest observed
    tail(F^{*2m}) / ((c - 1 + eps0)^m tail(F^{*2})) for 2m <= MAX_ORDER on
    ``calibration_grid``.  ``truncation_M`` is the smallest M >= 2 whose
    envelope remainder is at most ``eps`` times the guaranteed part of the
    partial sum; it is ``None`` when the series condition fails.
    """

    base: Law
    counting: CountingDist
    cstar2: float | None = None
    eps: float = DEFAULT_EPS
    eps0: float = DEFAULT_EPS0
    calibration_grid: np.ndarray | None = None
    power: ConvPower | None = field(default=None, compare=False, repr=False)
    K: float = field(default=math.nan, init=False)
    truncation_M: int | None = field(default=None, init=False)

    def __post_init__(self):
        top = self.counting.pmf.size - 1
        needs_env = self.counting.tail_mass > 0 or np.any(self.counting.pmf[MAX_ORDER + 1:] > 0)
        if self.cstar2 is None and needs_env:
            raise ParameterError("counting law reaches beyond the computed orders; cstar2 is required")
        if self.cstar2 is not None and self.cstar2 < 2:
            raise ParameterError("cstar2 must be at least 2")
        if self.power is None:
            object.__setattr__(self, "power", ConvPower(self.base))
        if self.cstar2 is None:
            return
        grid = self.calibration_grid
        if grid is None:
            grid = default_calibration_grid(self.base)
            object.__setattr__(self, "calibration_grid", grid)
        q = self.cstar2 - 1.0 + self.eps0
        xm = float(np.max(grid))
        t2 = self.power.evaluator(2, xm).sf(grid)
        K = 1.0 / q
        for m in range(2, MAX_ORDER // 2 + 1):
            t = self.power.evaluator(2 * m, xm).sf(grid)
            ok = t2 > 0
            K = max(K, float(np.max(t[ok] / t2[ok])) / q ** m)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "truncation_M", self._choose_M(q, top))

    def _choose_M(self, q: float, top: int) -> int | None:
        if not series_condition_check(self.counting, self.cstar2, self.eps0, n=2)["finite"]:
            return None
        pmf = self.counting.pmf
        n = np.arange(pmf.size)
        logw = np.full(pmf.size, -np.inf)
        pos = pmf > 0
        logw[pos] = np.log(pmf[pos]) + math.log(self.K) + np.ceil(n[pos] / 2.0) * math.log(q)
        # suffix sums of p_n K q^{ceil(n/2)}, in log domain
        suffix = np.logaddexp.accumulate(logw[::-1])[::-1]
        for M in range(2, pmf.size - 1):
            guaranteed = pmf[2:M + 1].sum()
            if guaranteed > 0 and suffix[M + 1] <= math.log(self.eps * guaranteed):
                return M
        return top

    @property
    def orders_computed(self) -> int:
        return min(MAX_ORDER, self.counting.pmf.size - 1)

    def envelope_log_terms(self, log_t2: float, n_max: int) -> np.ndarray:
        """log of min(1, K q^{ceil(n/2)} tail2) for n = 0..n_max."""
        q = self.cstar2 - 1.0 + self.eps0
        n = np.arange(n_max + 1)
        return np.minimum(0.0, math.log(self.K) + np.ceil(n / 2.0) * math.log(q) + log_t2)


def _remainder(spec: CompoundSpec, t2: np.ndarray, start: int, stop: int | None) -> np.ndarray:
    """sum_{start < n <= stop} p_n min(1, K q^{ceil(n/2)} tail2(x)); ``stop=None`` means all."""
    pmf = spec.counting.pmf
    last = pmf.size - 1 if stop is None else min(stop, pmf.size - 1)
    out = np.zeros(t2.size)
    if last <= start:
        return out
    pn = pmf[start + 1:last + 1]
    q = spec.cstar2 - 1.0 + spec.eps0
    lq = math.log(q)
    half = np.ceil(np.arange(start + 1, last + 1) / 2.0)
    for i, v in enumerate(t2):
        if v <= 0:
            continue
        # terms saturate at 1 once K q^{ceil(n/2)} tail2 >= 1
        expo = np.minimum(0.0, math.log(spec.K) + half * lq + math.log(v))
        out[i] = float(pn @ np.exp(expo))
    if stop is None:
        out += spec.counting.tail_mass
    return out


def compound_tail(spec: CompoundSpec, x) -> dict:
    """Partial compound tail over the computed orders plus its certified remainder.

    Returns arrays ``value``, ``err`` (quadrature), ``trunc_bound`` (mass of all
    orders above ``orders_computed`` under the envelope, including the counting
    law's own truncation), ``remainder_beyond_M`` and the scalar
    ``orders_computed``.  The true tail lies in [value - err, value + err + trunc_bound].
    """
    x = np.atleast_1d(_arr(x))
    pmf = spec.counting.pmf
    top = spec.orders_computed
    xm = float(np.max(x))
    value = np.where(x < 0, pmf[0], 0.0)
    err = np.zeros(x.size)
    t2 = None
    for n in range(1, top + 1):
        ev = spec.power.evaluator(n, xm)
        v, e, _ = ev.sf_err(x)
        if n == 2:
            t2 = v
        value = value + pmf[n] * v
        err = err + pmf[n] * e
    needs_env = spec.counting.tail_mass > 0 or pmf.size - 1 > top
    if needs_env:
        if t2 is None:
            t2 = spec.power.evaluator(2, xm).sf(x)
        trunc = _remainder(spec, t2, top, None)
        M = spec.truncation_M
        beyond = _remainder(spec, t2, M, None) if M is not None else trunc
    else:
        trunc = np.zeros(x.size)
        beyond = np.zeros(x.size)
    return {"value": value, "err": err, "trunc_bound": trunc, "remainder_beyond_M": beyond,
            "orders_computed": top, "truncation_M": spec.truncation_M}


def compound_density(spec: CompoundSpec, x) -> dict:
    """Density of the computed orders; no envelope exists for the remainder."""
    x = np.atleast_1d(_arr(x))
    xm = float(np.max(x))
    val = np.zeros(x.size)
    err = np.zeros(x.size)
    for n in range(1, spec.orders_computed + 1):
        v, e, _ = spec.power.evaluator(n, xm).pdf_err(x)
        val += spec.counting.pmf[n] * v
        err += spec.counting.pmf[n] * e
    return {"value": val, "err": err}


COMPOUND_COLUMNS = ("x", "log_x", "density", "density_err", "tail", "tail_err",
                    "scale_block_index", "trunc_bound", "orders_computed")


def compound_csv(spec: CompoundSpec, grid, extra_header: dict | None = None) -> str:
    """CSV of a compound evaluation.

    ``density_err`` is ``inf`` whenever orders above the computed ones carry
    mass, since the tail envelope gives no pointwise density bound.
    """
    grid = np.asarray(grid, dtype=float)
    tail = compound_tail(spec, grid)
    dens = compound_density(spec, grid)
    dens_err = dens["err"]
    if spec.counting.tail_mass > 0 or spec.counting.pmf.size - 1 > spec.orders_computed:
        dens_err = np.full(grid.size, math.inf)
    try:
        idx = scale_block_index(spec.base, 1, grid)
    except TypeError:
        idx = np.full(grid.size, -1)
    buf = io.StringIO()
    for k, v in (extra_header or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPOUND_COLUMNS)
    for i, xv in enumerate(grid):
        w.writerow([repr(float(xv)), repr(math.log(xv)) if xv > 0 else "-inf",
                    repr(float(dens["value"][i])), repr(float(dens_err[i])),
                    repr(float(tail["value"][i])), repr(float(tail["err"][i])), int(idx[i]),
                    repr(float(tail["trunc_bound"][i])), tail["orders_computed"]])
    return buf.getvalue()


def estimate_cstar2(dist: Law, probe=None, power: ConvPower | None = None) -> float:
    """C*(F^{*2}) estimated as a max ratio on ``probe``, floored at 2."""
    power = power or ConvPower(dist)
    probe = default_calibration_grid(dist) if probe is None else np.asarray(probe, dtype=float)
    conv2 = nfold_tail(dist, 2, probe, power=power)
    return max(2.0, cstar_estimate(conv2, probe, power=power)["sup_ratio"])


def levy_compound_tail(dist: Law, mu: float, x, cstar2: float | None = None,
                       power: ConvPower | None = None) -> dict:
    """Tail of the compound Poisson law e^{-mu} sum mu^n/n! F^{*n}.

    Without ``cstar2`` the envelope constant is estimated from the order-two
    and order-four convolutions.
    """
    if not mu > 0:
        raise ParameterError("Poisson intensity must be positive")
    power = power or ConvPower(dist)
    if cstar2 is None:
        cstar2 = estimate_cstar2(dist, power=power)
    spec = CompoundSpec(dist, poisson(mu), cstar2=cstar2, power=power)
    return compound_tail(spec, x)
