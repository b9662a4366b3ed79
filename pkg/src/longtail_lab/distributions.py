"""Closed-form piecewise distributions: the two block families and the staircase and non-OL examples.

Every law here implements the same small interface used by the convolution
engine and the class probes:

``sf``, ``log_sf``, ``pdf``, ``window``
    vectorised tail, log-tail, density and interval mass F(x - c, x].
``breakpoints``
    finite abscissae where the density or the tail is not smooth.
``atoms``
    point masses as ``(locations, masses)``.
``pieces``
    integration pieces, each with a smooth coordinate map so that
    ``int g dF`` over the piece is a regular integral in ``z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .scales import ParameterError, ScaleSequence, build_scale_sequence

LOG2 = math.log(2.0)


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _exp(v: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.exp(v))


# ---------------------------------------------------------------- pieces


@dataclass(frozen=True)
class Piece:
    """One integration piece of a law.

    ``y(z)`` maps the coordinate ``z`` in ``[z_lo, z_hi]`` onto the x-range
    ``[lo, hi]``; ``w(z)`` is dF/dz, so ``int_piece g dF = int g(y(z)) w(z) dz``.
    """

    lo: float
    hi: float
    z_lo: float
    z_hi: float
    y: Callable[[np.ndarray], np.ndarray]
    z_of: Callable[[np.ndarray], np.ndarray]
    w: Callable[[np.ndarray], np.ndarray]

    def z_clip(self, yv: np.ndarray) -> np.ndarray:
        """Coordinate of ``yv`` clipped to the piece, exact at the edges."""
        yv = _arr(yv)
        out = np.empty_like(yv)
        below = yv <= self.lo
        above = yv >= self.hi
        mid = ~(below | above)
        out[below] = self.z_lo
        out[above] = self.z_hi
        if mid.any():
            out[mid] = np.clip(self.z_of(yv[mid]), self.z_lo, self.z_hi)
        return out


def linear_piece(lo: float, hi: float, pdf: Callable) -> Piece:
    return Piece(lo, hi, lo, hi, lambda z: z, lambda y: y, lambda z: pdf(z))


def log_piece(lo: float, hi: float, pdf: Callable) -> Piece:
    """Piece integrated in log x; suited to plateaus spanning many decades."""

    def w(z):
        yv = np.exp(z)
        return pdf(yv) * yv

    return Piece(lo, hi, math.log(lo), math.log(hi) if np.isfinite(hi) else math.inf, np.exp, np.log, w)


def sqrt_piece(lo: float, hi: float, weight: Callable) -> Piece:
    """Piece integrated in z = sqrt(x); ``weight`` is dF/dz."""
    return Piece(lo, hi, math.sqrt(lo), math.sqrt(hi) if np.isfinite(hi) else math.inf,
                 np.square, np.sqrt, weight)


# ---------------------------------------------------------------- base law


class Law:
    """Interface shared by closed-form laws and tabulated convolutions."""

    name: str = "law"
    lo: float = 0.0
    heavy_tailed: bool = True

    def sf(self, x):
        raise NotImplementedError

    def log_sf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.sf(x))

    def cdf(self, x):
        return 1.0 - self.sf(x)

    def pdf(self, x):
        raise NotImplementedError

    def window(self, x, c):
        """Mass of (x - c, x]; default differences the tail."""
        x = _arr(x)
        return np.maximum(self.sf(x - c) - self.sf(x), 0.0)

    # Shifted evaluation at x - y.  Laws with far-out edges override these to
    # avoid the absolute rounding of a plain subtraction.

    def sf_shift(self, x, y):
        return self.sf(_arr(x) - y)

    def pdf_shift(self, x, y):
        return self.pdf(_arr(x) - y)

    def window_shift(self, x, c, y):
        return self.window(_arr(x) - y, c)

    def breakpoints(self) -> np.ndarray:
        return np.empty(0)

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        return np.empty(0), np.empty(0)

    def pieces(self) -> list[Piece]:
        raise NotImplementedError


# ---------------------------------------------------------------- block families


@dataclass(frozen=True, eq=False)
class PiecewiseDist(Law):
    """Block law  x = s_n (1 + u)^p  with  P(u <= v | block n) = v^b.

    Block n carries mass m_n = C a_n^(-alpha) on [s_n, 2^p s_n); the tail is
    constant on the gaps between blocks.  The law is truncated at ``n_max`` and
    renormalised, so ``norm_const`` is ``1 / sum_{n <= n_max} a_n^(-alpha)``.
    """

    kind: str
    params: dict
    seq: ScaleSequence
    norm_const: float
    p: float
    b: float
    log_s: np.ndarray
    log_mass: np.ndarray
    log_above: np.ndarray
    trunc_bound: float
    metadata: dict = field(default_factory=dict)

    # ---- geometry

    @property
    def n_blocks(self) -> int:
        return len(self.log_s)

    @property
    def block_lo(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_s)

    @property
    def block_hi(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_s + self.p * LOG2)

    @property
    def masses(self) -> np.ndarray:
        return np.exp(self.log_mass)

    @property
    def lo(self) -> float:  # type: ignore[override]
        return float(self.block_lo[0])

    @property
    def name(self) -> str:  # type: ignore[override]
        keys = ("alpha", "b", "t", "a") if self.kind == "family1" else ("alpha", "t", "a")
        return f"{self.kind}(" + ",".join(f"{k}={self.params[k]:g}" for k in keys) + ")"

    def finite_blocks(self) -> range:
        return range(int(np.sum(np.isfinite(self.block_lo))))

    def breakpoints(self) -> np.ndarray:
        lo, hi = self.block_lo, self.block_hi
        pts = np.concatenate([lo, hi])
        return np.sort(pts[np.isfinite(pts)])

    # ---- within-block coordinates
    #
    # Every evaluation takes the argument as a pair (x, y) meaning x - y, and
    # measures it from the block edges as (x - edge) - y.  For x near an edge
    # of a far block this keeps full relative accuracy in the offset, which a
    # plain x - y would lose.

    def _u(self, d_lo, n):
        s = self.block_lo[n]
        return np.expm1(np.log1p(d_lo / s) / self.p)

    def _w(self, d_hi, n):
        top = self.block_hi[n]
        return -2.0 * np.expm1(np.log1p(d_hi / top) / self.p)

    def _one_minus_G(self, d_lo, d_hi, n):
        u = self._u(d_lo, n)
        out = np.empty_like(u)
        small = u < 0.5
        out[small] = 1.0 - np.maximum(u[small], 0.0) ** self.b
        w = self._w(d_hi[~small], n)
        out[~small] = -np.expm1(self.b * np.log1p(-np.maximum(w, 0.0)))
        return np.clip(out, 0.0, 1.0)

    def _offsets(self, x, y, n):
        return (x - self.block_lo[n]) - y, (x - self.block_hi[n]) - y

    def sf_shift(self, x, y):
        return self.sf(x, y)

    def pdf_shift(self, x, y):
        return self.pdf(x, y)

    def window_shift(self, x, c, y):
        return self.window(x, c, y)

    # ---- evaluation

    def log_sf(self, x, y=0.0):
        x, y = np.broadcast_arrays(_arr(x), _arr(y))
        out = np.zeros(x.shape)
        for n in self.finite_blocks():
            d_lo, d_hi = self._offsets(x, y, n)
            inb = (d_lo >= 0) & (d_hi < 0)
            if inb.any():
                with np.errstate(divide="ignore"):
                    lg = np.log(self._one_minus_G(d_lo[inb], d_hi[inb], n))
                out[inb] = np.logaddexp(self.log_mass[n] + lg, self.log_above[n])
            flat = d_hi >= 0
            if n + 1 < self.n_blocks and np.isfinite(self.block_lo[n + 1]):
                flat &= (x - self.block_lo[n + 1]) - y < 0
            out[flat] = self.log_above[n]
        return out

    def sf(self, x, y=0.0):
        return np.exp(self.log_sf(x, y))

    def pdf(self, x, y=0.0):
        x, y = np.broadcast_arrays(_arr(x), _arr(y))
        out = np.zeros(x.shape)
        for n in self.finite_blocks():
            d_lo, d_hi = self._offsets(x, y, n)
            inb = (d_lo >= 0) & (d_hi < 0)
            if not inb.any():
                continue
            u = np.maximum(self._u(d_lo[inb], n), 0.0)
            with np.errstate(divide="ignore"):
                ub = u ** (self.b - 1.0)
            z = x[inb] - y[inb]
            out[inb] = self.masses[n] * self.b * ub * (1.0 + u) / (self.p * z)
        return out

    def window(self, x, c, y=0.0):
        """F(x - y - c, x - y] per block without forming tail differences."""
        x, c, y = np.broadcast_arrays(_arr(x), _arr(c), _arr(y))
        out = np.zeros(x.shape)
        for n in self.finite_blocks():
            m = self.masses[n]
            d_lo, d_hi = self._offsets(x, y, n)
            act = (d_lo > 0) & (d_hi - c < 0) & (c > 0)
            if not act.any():
                continue
            dl, dh, cb = d_lo[act], d_hi[act], c[act]
            clip_lo = dl - cb <= 0
            clip_hi = dh >= 0
            val = np.empty(dl.shape)
            val[clip_lo & clip_hi] = m
            k = clip_lo & ~clip_hi
            if k.any():
                val[k] = m * np.clip(self._u(dl[k], n), 0.0, 1.0) ** self.b
            k = ~clip_lo & clip_hi
            if k.any():
                val[k] = m * self._one_minus_G(dl[k] - cb[k], dh[k] - cb[k], n)
            k = ~clip_lo & ~clip_hi
            if k.any():
                uq = np.clip(self._u(dl[k], n), 0.0, 1.0)
                q = (x[act][k] - y[act][k])
                # (1 + u_q) - (1 + u_{q-c}) with the exact width c
                du = (1.0 + uq) * -np.expm1(np.log1p(-cb[k] / q) / self.p)
                if self.b == 1.0:
                    val[k] = m * du
                else:
                    ratio = np.minimum(du / np.where(uq > 0, uq, 1.0), 1.0)
                    val[k] = m * uq ** self.b * -np.expm1(self.b * np.log1p(-ratio))
            out[act] += val
        return out

    # ---- integration

    def pieces(self) -> list[Piece]:
        out = []
        lo_all, hi_all = self.block_lo, self.block_hi
        p, b = self.p, self.b
        for n in self.finite_blocks():
            s, top, m = lo_all[n], hi_all[n], self.masses[n]
            if b >= 1.0:
                out.append(Piece(
                    s, top, 0.0, 1.0,
                    y=lambda z, s=s: s * (1.0 + z) ** p,
                    z_of=lambda y, s=s: np.expm1(np.log1p((y - s) / s) / p),
                    w=lambda z, m=m: m * b * z ** (b - 1.0),
                ))
            else:
                out.append(Piece(
                    s, top, 0.0, 1.0,
                    y=lambda z, s=s: s * (1.0 + z ** (1.0 / b)) ** p,
                    z_of=lambda y, s=s: np.maximum(np.expm1(np.log1p((y - s) / s) / p), 0.0) ** b,
                    w=lambda z, m=m: np.full(np.shape(z), m),
                ))
        return out

    # ---- export

    def segment_table(self) -> list[dict]:
        """Self-describing table: per block one density segment and one plateau."""
        rows = []
        hi_log = self.log_s + self.p * LOG2
        for n in range(self.n_blocks):
            next_lo = float(self.log_s[n + 1]) if n + 1 < self.n_blocks else math.inf
            rows.append({
                "n": n,
                "segment": "block",
                "log_x_lo": float(self.log_s[n]),
                "log_x_hi": float(hi_log[n]),
                "density": {"form": "m*b*u**(b-1)*(1+u)/(p*x)", "log_m": float(self.log_mass[n]),
                            "b": self.b, "p": self.p, "log_s": float(self.log_s[n])},
                "tail": {"form": "m*(1-u**b)+above", "log_m": float(self.log_mass[n]),
                         "log_above": float(self.log_above[n]), "b": self.b},
            })
            rows.append({
                "n": n,
                "segment": "plateau",
                "log_x_lo": float(hi_log[n]),
                "log_x_hi": next_lo,
                "density": {"form": "0"},
                "tail": {"form": "above", "log_above": float(self.log_above[n])},
            })
        return rows

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "norm_const": self.norm_const,
            "r": self.seq.r,
            "log_anchors": [float(v) for v in self.seq.log_anchors],
            "trunc_bound": self.trunc_bound,
            "metadata": dict(self.metadata),
            "segments": self.segment_table(),
        }


def _block_law(kind, params, seq, log_s, p, b, trunc_tol, metadata) -> PiecewiseDist:
    alpha = seq.alpha
    log_w = -alpha * seq.log_anchors
    log_total = float(np.logaddexp.reduce(log_w))
    log_C = -log_total
    log_mass = log_C + log_w
    log_above = np.array([
        float(np.logaddexp.reduce(log_mass[n + 1:])) if n + 1 < len(log_mass) else -math.inf
        for n in range(len(log_mass))
    ])
    # relative size of the discarded series beyond n_max
    trunc = math.exp(seq.log_tail_sum_bound(alpha, seq.n_max + 1) - log_total)
    if trunc > trunc_tol:
        raise ParameterError(
            f"n_max={seq.n_max} leaves truncation error {trunc:.3g} above trunc_tol={trunc_tol:g}"
        )
    return PiecewiseDist(
        kind=kind, params=params, seq=seq, norm_const=math.exp(log_C), p=float(p), b=float(b),
        log_s=np.asarray(log_s, dtype=float), log_mass=log_mass, log_above=log_above,
        trunc_bound=trunc, metadata=metadata,
    )


def build_family1(alpha: float, b: float, t: float, a: float, n_max: int = 6,
                  trunc_tol: float = 1e-12) -> PiecewiseDist:
    """Law of eta * (1 + U^(1/b))^t with P(eta = a_n) proportional to a_n^(-alpha)."""
    if not 0.5 <= alpha < 1.0:
        raise ParameterError(f"family1 needs alpha in [1/2, 1), got {alpha}")
    if not b > 0:
        raise ParameterError(f"b must be positive, got {b}")
    if not t >= 1.0:
        raise ParameterError(f"family1 needs t >= 1, got {t}")
    seq = build_scale_sequence(a, alpha, t, n_max)
    params = {"family": "family1", "alpha": alpha, "b": b, "t": t, "a": a, "n_max": n_max}
    return _block_law("family1", params, seq, seq.log_anchors, p=t, b=b,
                      trunc_tol=trunc_tol, metadata={})


FAMILY2_REGIMES = ("OS-regime", "non-OS-regime", "outside-regime-range")


def family2_alpha_bounds(t: float) -> dict:
    """Alpha intervals for the second family.

    The construction interval ((1-t)/t, 1/t) has a negative left end; the
    regime split uses ((t-1)/t, 1/2) and [1/2, 1/t).
    """
    return {
        "definition_interval": ((1.0 - t) / t, 1.0 / t),
        "accepted_interval": (max(0.0, (1.0 - t) / t), 1.0 / t),
        "non_os_interval": ((t - 1.0) / t, 0.5),
        "os_interval": (0.5, 1.0 / t),
    }


def build_family2(alpha: float, t: float, a: float, n_max: int = 6,
                  trunc_tol: float = 1e-12) -> PiecewiseDist:
    """Law of (eta * (1 + U))^(1/t), blocks [a_n^(1/t), (2 a_n)^(1/t))."""
    if not 1.0 < t < 2.0:
        raise ParameterError(f"family2 needs t in (1, 2), got {t}")
    bounds = family2_alpha_bounds(t)
    lo_ok, hi_ok = bounds["accepted_interval"]
    if not lo_ok < alpha < hi_ok:
        raise ParameterError(f"family2 needs alpha in ({lo_ok:g}, {hi_ok:g}), got {alpha}")
    if 0.5 <= alpha:
        regime = "OS-regime"
    elif alpha > (t - 1.0) / t:
        regime = "non-OS-regime"
    else:
        regime = "outside-regime-range"
    seq = build_scale_sequence(a, alpha, t, n_max)
    params = {"family": "family2", "alpha": alpha, "t": t, "a": a, "n_max": n_max}
    meta = {"regime": regime,
            "alpha_bounds": {k: list(v) for k, v in bounds.items()},
            "interval_discrepancy": "construction interval left end (1-t)/t is negative; regime split uses (t-1)/t"}
    return _block_law("family2", params, seq, seq.log_anchors / t, p=1.0 / t, b=1.0,
                      trunc_tol=trunc_tol, metadata=meta)


def build_from_config(cfg: dict) -> PiecewiseDist:
    """Build a family from a declarative mapping with keys family, alpha, b, t, a, n_max."""
    fam = cfg.get("family")
    n_max = int(cfg.get("n_max", 6))
    tol = float(cfg.get("trunc_tol", 1e-12))
    if fam == "family1":
        return build_family1(float(cfg["alpha"]), float(cfg.get("b", 1.0)), float(cfg.get("t", 1.0)),
                             float(cfg["a"]), n_max, tol)
    if fam == "family2":
        return build_family2(float(cfg["alpha"]), float(cfg["t"]), float(cfg["a"]), n_max, tol)
    raise ParameterError(f"unknown family {fam!r}")


# ---------------------------------------------------------------- moments


def moment_diagnostic(dist: PiecewiseDist, s: float) -> dict:
    """Blockwise contributions to E xi^s and the analytic finiteness verdict.

    ``partial_sums`` accumulates the untruncated series term by term, so for
    ``s`` at or above the critical exponent the entries grow without bound.
    """
    if s < 0:
        raise ParameterError("moment order must be nonnegative")
    seq, b, p = dist.seq, dist.b, dist.p
    crit = seq.alpha * (dist.params["t"] if dist.kind == "family2" else 1.0)
    # E[(1 + u)^(p s)] with P(u <= v) = v^b
    inner, _ = integrate.quad(lambda u: (1.0 + u) ** (p * s) * b * u ** (b - 1.0), 0.0, 1.0)
    scale = s / dist.params["t"] if dist.kind == "family2" else s
    log_terms = [math.log(dist.norm_const) + (scale - seq.alpha) * seq.log_anchor(n) + math.log(inner)
                 for n in range(seq.n_max + 1)]
    partial = np.cumsum([_exp(v) for v in log_terms])
    return {
        "finite": bool(s < crit),
        "critical_exponent": crit,
        "partial_sums": [float(v) for v in partial],
        "moment_truncated_law": float(partial[-1]),
    }


# ---------------------------------------------------------------- staircase example


def g1_sf(x):
    """Tail exp(-sqrt x) on x >= 0, equal to 1 below 0."""
    x = _arr(x)
    return np.where(x < 0, 1.0, np.exp(-np.sqrt(np.maximum(x, 0.0))))


def _g1_pdf(x):
    x = _arr(x)
    out = np.zeros_like(x)
    pos = x > 0
    r = np.sqrt(x[pos])
    out[pos] = np.exp(-r) / (2.0 * r)
    return out


@dataclass(frozen=True, eq=False)
class StaircaseF1(Law):
    """Staircase flattening of exp(-sqrt x).

    The tail is frozen at G(x_n) on [x_n, y_n) and drops to G(y_n) = G(x_n)/2 at
    y_n, leaving an atom of mass G(x_n)/2 there.  Beyond the last step the tail
    follows G again.
    """

    xs: np.ndarray
    ys: np.ndarray
    name: str = "staircase_F1"
    lo: float = 0.0

    def sf(self, x):
        x = _arr(x)
        out = g1_sf(x)
        for xn, yn in zip(self.xs, self.ys):
            sel = (x >= xn) & (x < yn)
            out[sel] = math.exp(-math.sqrt(xn))
        return out

    def log_sf(self, x):
        x = _arr(x)
        out = -np.sqrt(np.maximum(x, 0.0))
        for xn, yn in zip(self.xs, self.ys):
            sel = (x >= xn) & (x < yn)
            out[sel] = -math.sqrt(xn)
        return out

    def pdf(self, x):
        x = _arr(x)
        out = _g1_pdf(x)
        for xn, yn in zip(self.xs, self.ys):
            out[(x >= xn) & (x < yn)] = 0.0
        return out

    def breakpoints(self):
        return np.sort(np.concatenate([self.xs, self.ys]))

    def atoms(self):
        return self.ys.copy(), np.exp(-np.sqrt(self.xs)) / 2.0

    def pieces(self):
        edges = [0.0]
        for xn, yn in zip(self.xs, self.ys):
            edges.append(xn)
            edges.append(yn)
        edges.append(math.inf)
        weight = lambda z: np.exp(-z)  # noqa: E731  d/dz of -exp(-z) with x = z^2
        return [sqrt_piece(edges[i], edges[i + 1], weight) for i in range(0, len(edges), 2)]


@dataclass(frozen=True, eq=False)
class StaircaseF2(Law):
    """Tail exp(-sqrt x) * min(1, 1/log(x + 2)), the law of min(E^2, exp(1/U) - 2)."""

    name: str = "staircase_F2"
    lo: float = 0.0

    @staticmethod
    def _damp(x):
        return np.minimum(1.0, 1.0 / np.log(np.maximum(x, 0.0) + 2.0))

    def sf(self, x):
        return g1_sf(x) * self._damp(x)

    def log_sf(self, x):
        x = _arr(x)
        return -np.sqrt(np.maximum(x, 0.0)) + np.log(self._damp(x))

    def pdf(self, x):
        x = _arr(x)
        lg = np.log(np.maximum(x, 0.0) + 2.0)
        out = _g1_pdf(x) * self._damp(x)
        cap = x > math.e - 2.0
        out[cap] += g1_sf(x[cap]) / ((x[cap] + 2.0) * lg[cap] ** 2)
        return out

    def breakpoints(self):
        return np.array([math.e - 2.0])

    def pieces(self):
        def weight(z):
            return self.pdf(z * z) * 2.0 * z
        k = math.e - 2.0
        return [sqrt_piece(0.0, k, weight), sqrt_piece(k, math.inf, weight)]


def build_staircase_ol_example(depth: int = 8, x1: float = 1.0, gap_ratio: float = 2.0) -> dict:
    """Both laws of the staircase example.

    ``y_n`` solves G(x_n) = 2 G(y_n), i.e. sqrt(y_n) = sqrt(x_n) + log 2, and
    the next step starts at x_{n+1} = gap_ratio * y_n.
    """
    if depth < 1 or x1 <= 0 or gap_ratio <= 1.0:
        raise ParameterError("need depth >= 1, x1 > 0, gap_ratio > 1")
    xs, ys = [], []
    xn = x1
    for _ in range(depth):
        yn = (math.sqrt(xn) + LOG2) ** 2
        if not math.isfinite(yn) or yn > 1e300:
            raise ParameterError("staircase depth exceeds the representable range")
        xs.append(xn)
        ys.append(yn)
        xn = gap_ratio * yn
    return {"F1": StaircaseF1(np.array(xs), np.array(ys)), "F2": StaircaseF2()}


# ---------------------------------------------------------------- non-OL example


@dataclass(frozen=True, eq=False)
class ParetoLaw(Law):
    """Tail x^(-alpha) on x >= 1."""

    alpha: float
    name: str = "pareto"
    lo: float = 1.0

    def sf(self, x):
        x = _arr(x)
        return np.where(x < 1.0, 1.0, np.maximum(x, 1.0) ** -self.alpha)

    def log_sf(self, x):
        x = _arr(x)
        return np.where(x < 1.0, 0.0, -self.alpha * np.log(np.maximum(x, 1.0)))

    def pdf(self, x):
        x = _arr(x)
        return np.where(x < 1.0, 0.0, self.alpha * np.maximum(x, 1.0) ** (-self.alpha - 1.0))

    def pieces(self):
        return [log_piece(1.0, math.inf, self.pdf)]


@dataclass(frozen=True, eq=False)
class NonOLExample(Law):
    """Tail 1 on x < 1, c_n on [a_n, b_n], d_n x^(-2 alpha) on (b_n, a_{n+1}).

    Sequences are held in log domain.  Past the last built b_N the power tail
    d_N x^(-2 alpha) continues.
    """

    alpha: float
    eps: np.ndarray
    log_a: np.ndarray
    log_b: np.ndarray
    log_c: np.ndarray
    log_d: np.ndarray
    name: str = "non_ol_F1"
    lo: float = 1.0

    @property
    def depth(self) -> int:
        return len(self.log_b)

    def witness_ratios(self) -> dict:
        """log2 of F1(b_n)/F2(b_n) and of F1(a_n-)/F2(a_n); exact n and 1 - n."""
        at_b = (self.log_c + self.alpha * self.log_b) / LOG2
        at_a = (self.log_d[:-1] - self.alpha * self.log_a[1:]) / LOG2
        return {"log2_at_b": at_b, "log2_at_a": at_a}

    def log_sf(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore"):
            lx = np.log(np.maximum(x, 1e-300))
        out = np.zeros_like(x)
        N = self.depth
        for n in range(N):
            lo_plateau = lx >= self.log_a[n]
            sel = lo_plateau & (lx <= self.log_b[n])
            out[sel] = self.log_c[n]
            hi = self.log_a[n + 1] if n + 1 < len(self.log_a) else math.inf
            sel = (lx > self.log_b[n]) & (lx < hi)
            out[sel] = self.log_d[n] - 2.0 * self.alpha * lx[sel]
        out[x < 1.0] = 0.0
        return out

    def sf(self, x):
        return np.exp(self.log_sf(x))

    def pdf(self, x):
        x = _arr(x)
        lx = np.log(np.maximum(x, 1e-300))
        out = np.zeros_like(x)
        for n in range(self.depth):
            hi = self.log_a[n + 1] if n + 1 < len(self.log_a) else math.inf
            sel = (lx > self.log_b[n]) & (lx < hi)
            out[sel] = 2.0 * self.alpha * np.exp(self.log_d[n] - (2.0 * self.alpha + 1.0) * lx[sel])
        return out

    def breakpoints(self):
        pts = np.exp(np.concatenate([self.log_a, self.log_b]))
        return np.sort(pts[np.isfinite(pts)])

    def atoms(self):
        # jump at a_{n+1} from d_n a^(-2 alpha) down to c_{n+1}
        n = np.arange(len(self.log_a) - 1)
        before = np.exp(self.log_d[n] - 2.0 * self.alpha * self.log_a[n + 1])
        return np.exp(self.log_a[1:]), before * (1.0 - self.eps[n])

    def pieces(self):
        out = []
        for n in range(self.depth):
            hi = math.exp(self.log_a[n + 1]) if n + 1 < len(self.log_a) else math.inf
            out.append(log_piece(math.exp(self.log_b[n]), hi, self.pdf))
        return out


def build_non_ol_example(alpha: float, eps_seq: Sequence[float]) -> dict:
    """Recursive sequences with F1(b_n)/F2(b_n) = 2^n and F1(a_n-)/F2(a_n) = 2^(1-n).

    With F2 tail x^(-alpha) both witness equations are solvable in closed form:
    b_n = (2^n / c_n)^(1/alpha) and a_{n+1} = (2^n d_n)^(1/alpha).
    """
    eps = np.asarray(eps_seq, dtype=float)
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    if eps.size < 1 or np.any(eps <= 0) or np.any(eps >= 1) or np.any(np.diff(eps) > 0):
        raise ParameterError("eps_seq must be decreasing values in (0, 1)")
    log_a, log_b, log_c, log_d = [0.0], [], [0.0], []
    N = eps.size + 1
    for n in range(1, N + 1):
        la, lc = log_a[-1], log_c[-1]
        lb = (n * LOG2 - lc) / alpha
        ld = lc + 2.0 * alpha * lb
        log_b.append(lb)
        log_d.append(ld)
        if n == N:
            break
        la_next = (n * LOG2 + ld) / alpha
        lc_next = ld - 2.0 * alpha * la_next + math.log(eps[n - 1])
        if not (math.isfinite(la_next) and la_next < 700.0):
            raise ParameterError(f"recursion leaves the representable range at step {n}")
        log_a.append(la_next)
        log_c.append(lc_next)
    F1 = NonOLExample(alpha=alpha, eps=eps, log_a=np.array(log_a), log_b=np.array(log_b),
                      log_c=np.array(log_c), log_d=np.array(log_d))
    return {"F1": F1, "F2": ParetoLaw(alpha), "witness": F1.witness_ratios()}


# ---------------------------------------------------------------- auxiliary laws


@dataclass(frozen=True, eq=False)
class TailEquivalent(Law):
    """min(1, base_tail * (1 + 1/log(e + x))), a law tail-equivalent to ``base``."""

    base: PiecewiseDist
    start: float
    name: str = "tail_equivalent"

    @property
    def lo(self) -> float:  # type: ignore[override]
        return self.start

    @staticmethod
    def _g(x):
        return 1.0 + 1.0 / np.log(math.e + x)

    def sf(self, x):
        x = _arr(x)
        return np.where(x < self.start, 1.0, np.minimum(1.0, self.base.sf(x) * self._g(x)))

    def sf_shift(self, x, y):
        x, y = np.broadcast_arrays(_arr(x), _arr(y))
        z = x - y
        return np.where(z < self.start, 1.0, np.minimum(1.0, self.base.sf(x, y) * self._g(z)))

    def pdf_shift(self, x, y):
        x, y = np.broadcast_arrays(_arr(x), _arr(y))
        z = x - y
        le = np.log(math.e + z)
        out = self.base.pdf(x, y) * self._g(z) + self.base.sf(x, y) / ((math.e + z) * le ** 2)
        return np.where(z < self.start, 0.0, out)

    def log_sf(self, x):
        x = _arr(x)
        v = self.base.log_sf(x) + np.log(self._g(x))
        return np.where(x < self.start, 0.0, np.minimum(v, 0.0))

    def pdf(self, x):
        x = _arr(x)
        le = np.log(math.e + x)
        out = self.base.pdf(x) * self._g(x) + self.base.sf(x) / ((math.e + x) * le ** 2)
        return np.where(x < self.start, 0.0, out)

    def window(self, x, c, y=0.0):
        x, c, y = np.broadcast_arrays(_arr(x), _arr(c), _arr(y))
        z = x - y
        lo = z - c
        l1 = np.log(math.e + np.maximum(lo, 0.0))
        l2 = np.log(math.e + np.maximum(z, 0.0))
        dg = -np.log1p(-c / (math.e + np.maximum(z, 0.0))) / (l1 * l2)
        body = self.base.window(x, c, y) * self._g(lo) + self.base.sf(x, y) * dg
        capped = np.maximum(1.0 - self.sf_shift(x, y), 0.0)
        out = np.where(lo < self.start, capped, body)
        return np.where(z < self.start, 0.0, out)

    def window_shift(self, x, c, y):
        return self.window(x, c, y)

    def breakpoints(self):
        bp = self.base.breakpoints()
        return np.sort(np.concatenate([[self.start], bp[bp > self.start]]))

    def pieces(self):
        edges = self.breakpoints()
        out = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi / lo > 8.0:
                out.append(log_piece(lo, hi, self.pdf))
            else:
                out.append(linear_piece(lo, hi, self.pdf))
        last = edges[-1]
        out.append(log_piece(last, math.inf, self.pdf))
        return out


def build_tail_equivalent(base: PiecewiseDist) -> TailEquivalent:
    """Capped tail base_sf * (1 + 1/log(e + x)); support starts where the cap releases."""
    lo, hi = base.block_lo[0], base.block_hi[0]
    fn = lambda x: float(base.sf(np.array([x]))[0] * TailEquivalent._g(x)) - 1.0  # noqa: E731
    start = optimize.brentq(fn, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return TailEquivalent(base=base, start=start)


@dataclass(frozen=True, eq=False)
class ExponentialControl(Law):
    """Light-tailed control law with tail exp(-x)."""

    name: str = "exponential"
    lo: float = 0.0
    heavy_tailed: bool = False

    def sf(self, x):
        x = _arr(x)
        return np.where(x < 0, 1.0, np.exp(-np.maximum(x, 0.0)))

    def log_sf(self, x):
        x = _arr(x)
        return -np.maximum(x, 0.0)

    def pdf(self, x):
        x = _arr(x)
        return np.where(x < 0, 0.0, np.exp(-np.maximum(x, 0.0)))

    def window(self, x, c):
        x, c = np.broadcast_arrays(_arr(x), _arr(c))
        lo = np.maximum(x - c, 0.0)
        return np.where(x <= 0, 0.0, np.exp(-lo) * -np.expm1(-(np.maximum(x, 0.0) - lo)))

    def pieces(self):
        return [linear_piece(0.0, math.inf, self.pdf)]
