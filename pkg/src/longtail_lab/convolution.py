"""Numerical convolution of piecewise laws.

Order two uses the symmetric forms that integrate only over the smaller
summand, so the large argument x - y is never the result of cancellation::

    tail:    int_{[0,x/2]} A(x-y) dB(y) + int_{[0,x/2]} B(x-y) dA(y) + A(x/2) B(x/2)
    density: int_{[0,x/2]} a(x-y) dB(y) + int_{[0,x/2]} b(x-y) dA(y)
    window:  int_{y<x/2} A(max(x-c-y, y), x-y] dB(y)  + the mirrored term

(capital letters are tails, lower case densities).  Higher orders iterate
``H_k = H_{k-1} * F`` against a Chebyshev table of ``H_{k-1}``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distributions import Law, PiecewiseDist, _arr
from .quadrature import integrate_panels

DEFAULT_RTOL = 1e-9
DEFAULT_BUDGET = 2 ** 16
OWNER_CHUNK = 512


# ---------------------------------------------------------------- integration against dB


def integrate_against(
    B: Law,
    xs: np.ndarray,
    upper: np.ndarray,
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    kinks: np.ndarray | None = None,
    *,
    lower: np.ndarray | None = None,
    right_closed: bool = True,
    rtol: float = DEFAULT_RTOL,
    atol: np.ndarray | float = 0.0,
    budget: int = DEFAULT_BUDGET,
    presplit: int = 2,
):
    """Per owner i, integrate ``g(i, y)`` against dB over y in [lower_i, upper_i].

    ``kinks`` is an (N, K) array of y-values where g is not smooth; panels are
    split there after mapping into each piece's coordinate.  Returns
    ``(value, err, converged)``.  Owners are processed in chunks so a few
    stubborn integrals cannot exhaust memory.
    """
    xs = _arr(xs)
    N = xs.size
    if N > OWNER_CHUNK:
        upper_b = np.broadcast_to(_arr(upper), (N,))
        lower_b = None if lower is None else np.broadcast_to(_arr(lower), (N,))
        atol_b = np.broadcast_to(_arr(atol), (N,))
        outs = []
        for s0 in range(0, N, OWNER_CHUNK):
            sl = slice(s0, min(N, s0 + OWNER_CHUNK))
            idx = np.arange(sl.start, sl.stop)
            outs.append(integrate_against(
                B, xs[sl], upper_b[sl], (lambda own, y, idx=idx: g(idx[own], y)),
                None if kinks is None else kinks[sl], lower=None if lower_b is None else lower_b[sl],
                right_closed=right_closed, rtol=rtol, atol=atol_b[sl], budget=budget, presplit=presplit))
        return tuple(np.concatenate([o[i] for o in outs]) for i in range(3))
    upper = np.broadcast_to(_arr(upper), (N,))
    lower = np.zeros(N) if lower is None else np.broadcast_to(_arr(lower), (N,))
    if kinks is None:
        kinks = np.empty((N, 0))
    pieces = B.pieces()
    owners, pids, za, zb = [], [], [], []
    for k, P in enumerate(pieces):
        top = np.minimum(P.hi, upper)
        bot = np.maximum(P.lo, lower)
        act = np.nonzero(top > bot)[0]
        if act.size == 0:
            continue
        t, bo = top[act], bot[act]
        pts = np.concatenate([bo[:, None], t[:, None], kinks[act]], axis=1)
        pts = np.clip(pts, bo[:, None], t[:, None])
        z = P.z_clip(pts.ravel()).reshape(pts.shape)
        z.sort(axis=1)
        a_, b_ = z[:, :-1], z[:, 1:]
        keep = b_ > a_
        rows = np.broadcast_to(act[:, None], a_.shape)[keep]
        a_, b_ = a_[keep], b_[keep]
        if presplit > 1:
            f = np.linspace(0.0, 1.0, presplit + 1)
            aa = (a_[:, None] + (b_ - a_)[:, None] * f[None, :-1]).ravel()
            bb = (a_[:, None] + (b_ - a_)[:, None] * f[None, 1:]).ravel()
            rows = np.repeat(rows, presplit)
            a_, b_ = aa, bb
        owners.append(rows)
        pids.append(np.full(rows.size, k))
        za.append(a_)
        zb.append(b_)
    if owners:
        owner = np.concatenate(owners)
        pid = np.concatenate(pids)
        a_all, b_all = np.concatenate(za), np.concatenate(zb)
    else:
        owner = pid = np.empty(0, dtype=np.int64)
        a_all = b_all = np.empty(0)

    def fn(own, pc, z):
        y = np.empty_like(z)
        w = np.empty_like(z)
        for k in np.unique(pc):
            m = pc == k
            y[m] = pieces[k].y(z[m])
            w[m] = pieces[k].w(z[m])
        out = g(own, y) * w
        out[w == 0] = 0.0
        return out

    res = integrate_panels(fn, N, owner, pid, a_all, b_all, rtol=rtol, atol=atol, budget=budget)
    value, err = res.value, res.err
    locs, masses = B.atoms()
    if locs.size:
        for loc, m in zip(locs, masses):
            inside = (loc >= lower) & ((loc <= upper) if right_closed else (loc < upper))
            idx = np.nonzero(inside)[0]
            if idx.size:
                value[idx] += m * g(idx, np.full(idx.size, loc))
    return value, err, res.converged


def _reflect(xs, pts):
    return xs[:, None] - np.asarray(pts)[None, :]


# ---------------------------------------------------------------- order two


@dataclass(eq=False)
class PairConv(Law):
    """Convolution A * B of two closed-form laws evaluated by quadrature."""

    A: Law
    B: Law
    rtol: float = DEFAULT_RTOL
    budget: int = DEFAULT_BUDGET
    name: str = "pair"

    def __post_init__(self):
        self.same = self.A is self.B
        self.name = f"{self.A.name}*{self.B.name}"

    @property
    def lo(self) -> float:  # type: ignore[override]
        return self.A.lo + self.B.lo

    def breakpoints(self):
        ea = np.concatenate([[self.A.lo], self.A.breakpoints(), self.A.atoms()[0]])
        eb = np.concatenate([[self.B.lo], self.B.breakpoints(), self.B.atoms()[0]])
        s = (ea[:, None] + eb[None, :]).ravel()
        return np.unique(s[np.isfinite(s)])

    def _kinks(self, X, xs):
        e = np.concatenate([X.breakpoints(), X.atoms()[0], [X.lo]])
        return _reflect(xs, e)

    def _two_sided(self, xs, make_g, kinks_fn, right_closed=True, atol=0.0):
        half = xs / 2.0
        v1, e1, ok1 = integrate_against(self.B, xs, half, make_g(self.A), kinks_fn(self.A, xs),
                                        right_closed=right_closed, rtol=self.rtol, atol=atol,
                                        budget=self.budget)
        if self.same:
            return 2.0 * v1, 2.0 * e1, ok1
        v2, e2, ok2 = integrate_against(self.A, xs, half, make_g(self.B), kinks_fn(self.B, xs),
                                        right_closed=right_closed, rtol=self.rtol, atol=atol,
                                        budget=self.budget)
        return v1 + v2, e1 + e2, ok1 & ok2

    def sf_err(self, x):
        x = _arr(x)
        flat = np.atleast_1d(x).ravel()
        val = np.ones(flat.size)
        err = np.zeros(flat.size)
        ok = np.ones(flat.size, dtype=bool)
        sel = np.nonzero(flat > self.lo)[0]
        if sel.size:
            xs = flat[sel]
            ref = np.maximum(self.A.sf(xs), self.B.sf(xs))

            def make_g(X):
                return lambda own, y: X.sf_shift(xs[own], y)

            v, e, o = self._two_sided(xs, make_g, self._kinks, atol=1e-13 * ref)
            corner = self.A.sf(xs / 2.0) * self.B.sf(xs / 2.0)
            val[sel] = v + corner
            err[sel] = e
            ok[sel] = o
        return val.reshape(np.shape(x)), err.reshape(np.shape(x)), ok.reshape(np.shape(x))

    def pdf_err(self, x):
        x = _arr(x)
        flat = np.atleast_1d(x).ravel()
        val = np.zeros(flat.size)
        err = np.zeros(flat.size)
        ok = np.ones(flat.size, dtype=bool)
        sel = np.nonzero(flat > self.lo)[0]
        if sel.size:
            xs = flat[sel]

            def make_g(X):
                return lambda own, y: X.pdf_shift(xs[own], y)

            v, e, o = self._two_sided(xs, make_g, self._kinks, right_closed=False)
            val[sel], err[sel], ok[sel] = v, e, o
        return val.reshape(np.shape(x)), err.reshape(np.shape(x)), ok.reshape(np.shape(x))

    def window_err(self, x, c):
        """Mass of (x - c, x] split by which summand is larger."""
        x = _arr(x)
        flat = np.atleast_1d(x).ravel()
        cc = np.broadcast_to(_arr(c), np.shape(x)).ravel()
        val = np.zeros(flat.size)
        err = np.zeros(flat.size)
        ok = np.ones(flat.size, dtype=bool)
        sel = np.nonzero((flat > self.lo) & (cc > 0))[0]
        if sel.size:
            xs, cs = flat[sel], cc[sel]

            def make_g(X):
                return lambda own, y: X.window_shift(xs[own], np.minimum(cs[own], xs[own] - 2.0 * y), y)

            def kinks(X, xv):
                e = np.concatenate([X.breakpoints(), X.atoms()[0], [X.lo]])
                return np.concatenate([_reflect(xv, e), _reflect(xv - cs, e),
                                       np.broadcast_to(e, (xv.size, e.size)),
                                       ((xv - cs) / 2.0)[:, None]], axis=1)

            v, e, o = self._two_sided(xs, make_g, kinks, right_closed=False)
            val[sel], err[sel], ok[sel] = v, e, o
        return val.reshape(np.shape(x)), err.reshape(np.shape(x)), ok.reshape(np.shape(x))

    def sf(self, x):
        return self.sf_err(x)[0]

    def pdf(self, x):
        return self.pdf_err(x)[0]

    def window(self, x, c):
        return self.window_err(x, c)[0]

    def log_sf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.sf(x))


# ---------------------------------------------------------------- higher orders


@dataclass(eq=False)
class OneSidedConv(Law):
    """T * F for a tabulated continuous law T and a closed-form law F.

    tail(x) = int_{[0, x - lo_T]} T(x - y) dF(y) + F(x - lo_T), all terms positive.
    """

    T: Law
    F: Law
    rtol: float = DEFAULT_RTOL
    budget: int = DEFAULT_BUDGET
    name: str = "onesided"

    def __post_init__(self):
        self.name = f"{self.T.name}*{self.F.name}"

    @property
    def lo(self) -> float:  # type: ignore[override]
        return self.T.lo + self.F.lo

    def breakpoints(self):
        et = np.concatenate([[self.T.lo], self.T.breakpoints()])
        ef = np.concatenate([[self.F.lo], self.F.breakpoints(), self.F.atoms()[0]])
        s = (et[:, None] + ef[None, :]).ravel()
        return np.unique(s[np.isfinite(s)])

    def _kinks(self, xs, extra=()):
        e = np.concatenate([[self.T.lo], self.T.breakpoints()])
        cols = [_reflect(xs, e)]
        for shift in extra:
            cols.append(_reflect(xs - shift, e))
        return np.concatenate(cols, axis=1)

    def _run(self, x, g_of, tail_term, extra=(), atol_ref=None, c=None):
        x = _arr(x)
        flat = np.atleast_1d(x).ravel()
        base = 1.0 if tail_term else 0.0
        val = np.full(flat.size, base)
        err = np.zeros(flat.size)
        ok = np.ones(flat.size, dtype=bool)
        sel = np.nonzero(flat > self.lo)[0]
        if sel.size:
            xs = flat[sel]
            cs = None if c is None else np.broadcast_to(_arr(c), np.shape(x)).ravel()[sel]
            atol = 0.0 if atol_ref is None else 1e-13 * atol_ref(xs)
            kn = self._kinks(xs) if cs is None else np.concatenate(
                [self._kinks(xs), _reflect(xs - cs, np.concatenate([[self.T.lo], self.T.breakpoints()]))], axis=1)
            v, e, o = integrate_against(self.F, xs, xs - self.T.lo, g_of(xs, cs), kn,
                                        rtol=self.rtol, atol=atol, budget=self.budget)
            if tail_term:
                v = v + self.F.sf(xs - self.T.lo)
            rel = getattr(self.T, "rel_err", 0.0)
            val[sel], err[sel], ok[sel] = v, e + rel * np.abs(v), o
        return val.reshape(np.shape(x)), err.reshape(np.shape(x)), ok.reshape(np.shape(x))

    def sf_err(self, x):
        return self._run(x, lambda xs, cs: (lambda own, y: self.T.sf_shift(xs[own], y)), True,
                         atol_ref=lambda xs: self.F.sf(xs))

    def pdf_err(self, x):
        return self._run(x, lambda xs, cs: (lambda own, y: self.T.pdf_shift(xs[own], y)), False)

    def window_err(self, x, c):
        return self._run(x, lambda xs, cs: (lambda own, y: self.T.window_shift(xs[own], cs[own], y)),
                         False, c=c)

    def sf(self, x):
        return self.sf_err(x)[0]

    def pdf(self, x):
        return self.pdf_err(x)[0]

    def window(self, x, c):
        return self.window_err(x, c)[0]


# ---------------------------------------------------------------- tables


class ConvTable(Law):
    """Piecewise Chebyshev table of log-tail and density on [lo, x_max].

    Pieces start at the structural breakpoints of the source and are bisected
    (geometrically when a piece spans more than a factor of four) until the
    trailing coefficients fall below ``tol``.  Window masses integrate the
    density interpolant exactly.
    """

    DEG = 16

    def __init__(self, source: Law, x_max: float, tol: float = 1e-8, max_rounds: int = 40):
        self.source = source
        self.name = f"table[{source.name}]"
        self._lo = float(source.lo)
        self.x_max = float(x_max)
        self.tol = tol
        if not self.x_max > self._lo:
            raise ValueError("table range is empty")
        k = np.arange(self.DEG + 1)
        self._nodes = -np.cos((2 * k + 1) * np.pi / (2 * (self.DEG + 1)))
        self._inv = np.linalg.inv(np.polynomial.chebyshev.chebvander(self._nodes, self.DEG))
        bp = source.breakpoints()
        bp = bp[(bp > self._lo) & (bp < self.x_max)]
        edges = np.unique(np.concatenate([[self._lo], bp, [self.x_max]]))
        todo = list(zip(edges[:-1], edges[1:]))
        done: list[tuple] = []
        worst_quad = 0.0
        for _ in range(max_rounds):
            if not todo:
                break
            lo = np.array([p[0] for p in todo])
            hi = np.array([p[1] for p in todo])
            xs = (0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * self._nodes[None, :])
            sv, se, _ = source.sf_err(xs.ravel())
            dv, de, _ = source.pdf_err(xs.ravel())
            sv = sv.reshape(xs.shape)
            dv = np.maximum(dv.reshape(xs.shape), 0.0)
            with np.errstate(divide="ignore"):
                ls = np.log(sv)
            worst_quad = max(worst_quad, float(np.max(se.reshape(xs.shape) / np.maximum(sv, 1e-300))))
            cs = ls @ self._inv.T
            cd = dv @ self._inv.T
            scale_d = np.max(np.abs(dv), axis=1)
            err_s = np.max(np.abs(cs[:, -2:]), axis=1)
            err_d = np.max(np.abs(cd[:, -2:]), axis=1)
            good = (err_s <= tol) & (err_d <= tol * np.maximum(scale_d, 1e-300))
            good |= ~np.isfinite(err_s) & (scale_d == 0)
            tiny = (hi - lo) <= 1e-10 * hi
            nxt = []
            for i in range(len(todo)):
                if good[i] or tiny[i]:
                    done.append((lo[i], hi[i], cs[i], cd[i], err_s[i], err_d[i]))
                else:
                    if hi[i] / lo[i] > 4.0 and lo[i] > 0:
                        m = math.sqrt(lo[i] * hi[i])
                    else:
                        m = 0.5 * (lo[i] + hi[i])
                    nxt += [(lo[i], m), (m, hi[i])]
            todo = nxt
        if todo:
            raise RuntimeError("table refinement did not converge")
        done.sort(key=lambda r: r[0])
        self.p_lo = np.array([r[0] for r in done])
        self.p_hi = np.array([r[1] for r in done])
        self.c_sf = np.array([r[2] for r in done])
        self.c_pdf = np.array([r[3] for r in done])
        self.rel_err = float(max(worst_quad, max(r[4] for r in done)))
        self.pdf_err_est = np.array([r[5] for r in done])
        cint = np.polynomial.chebyshev.chebint(self.c_pdf, axis=1, lbnd=-1)
        self.c_int = cint * (0.5 * (self.p_hi - self.p_lo))[:, None]
        self._struct = source.breakpoints()

    @property
    def lo(self) -> float:  # type: ignore[override]
        return self._lo

    @property
    def n_pieces(self) -> int:
        return len(self.p_lo)

    def breakpoints(self):
        bp = self._struct
        return bp[(bp >= self._lo) & (bp <= self.x_max)]

    def _check(self, x):
        if np.any(x > self.x_max * (1 + 1e-12)):
            raise ValueError(f"table evaluated beyond x_max={self.x_max:g}")

    def _locate(self, x):
        i = np.searchsorted(self.p_lo, x, side="right") - 1
        return np.clip(i, 0, self.n_pieces - 1)

    @staticmethod
    def _clenshaw(coef, t):
        b1 = np.zeros_like(t)
        b2 = np.zeros_like(t)
        for j in range(coef.shape[1] - 1, 0, -1):
            b1, b2 = 2.0 * t * b1 - b2 + coef[:, j], b1
        return t * b1 - b2 + coef[:, 0]

    def _eval(self, coefs, x, i, y=None):
        lo, hi = self.p_lo[i], self.p_hi[i]
        off = x - lo if y is None else (x - lo) - y
        t = np.clip((2.0 * off - (hi - lo)) / (hi - lo), -1.0, 1.0)
        return self._clenshaw(coefs[i], t)

    def _prep(self, x, y):
        x, y = np.broadcast_arrays(_arr(x), _arr(y))
        shape = x.shape
        xf = np.atleast_1d(x).ravel().astype(float)
        yf = np.atleast_1d(y).ravel().astype(float)
        z = xf - yf
        self._check(z)
        return shape, xf, yf, z

    def log_sf_shift(self, x, y):
        shape, xf, yf, z = self._prep(x, y)
        out = np.zeros(z.size)
        sel = z > self._lo
        if sel.any():
            i = self._locate(z[sel])
            out[sel] = np.minimum(self._eval(self.c_sf, xf[sel], i, yf[sel]), 0.0)
        return out.reshape(shape)

    def log_sf(self, x):
        return self.log_sf_shift(x, 0.0)

    def sf_shift(self, x, y):
        return np.exp(self.log_sf_shift(x, y))

    def sf(self, x):
        return np.exp(self.log_sf_shift(x, 0.0))

    def pdf_shift(self, x, y):
        shape, xf, yf, z = self._prep(x, y)
        out = np.zeros(z.size)
        sel = z > self._lo
        if sel.any():
            i = self._locate(z[sel])
            out[sel] = np.maximum(self._eval(self.c_pdf, xf[sel], i, yf[sel]), 0.0)
        return out.reshape(shape)

    def pdf(self, x):
        return self.pdf_shift(x, 0.0)

    def window_shift(self, x, c, y):
        """Density integral over (x - y - c, x - y]."""
        x, c, y = np.broadcast_arrays(_arr(x), _arr(c), _arr(y))
        shape = x.shape
        xf = np.atleast_1d(x).ravel().astype(float)
        cf = np.atleast_1d(c).ravel().astype(float)
        yf = np.atleast_1d(y).ravel().astype(float)
        z = xf - yf
        self._check(z)
        out = np.zeros(z.size)
        act = (z > self._lo) & (cf > 0)
        if act.any():
            xa, ya, ca, za = xf[act], yf[act], cf[act], z[act]
            iR = self._locate(za)
            lo_clip = za - ca <= self._lo
            Lz = np.where(lo_clip, self._lo, za - ca)
            iL = self._locate(Lz)
            top = self._eval(self.c_int, xa, iR, ya)
            # left end: either the support start or (x - y - c) measured precisely
            bot = np.where(lo_clip, 0.0, self._eval(self.c_int, xa, iL, ya + ca))
            tot = top - bot
            span = iR - iL
            for k in range(1, int(span.max()) + 1 if span.size else 1):
                m = span >= k
                j = iL[m] + k - 1
                tot[m] += self._eval(self.c_int, self.p_hi[j], j)
            out[act] = np.maximum(tot, 0.0)
        return out.reshape(shape)

    def window(self, x, c):
        return self.window_shift(x, c, 0.0)

    def sf_err(self, x):
        v = self.sf(x)
        return v, self.rel_err * v, np.ones(np.shape(v), dtype=bool)

    def pdf_err(self, x):
        v = self.pdf(x)
        return v, np.zeros_like(v) + 0.0, np.ones(np.shape(v), dtype=bool)


# ---------------------------------------------------------------- closed-form adapter


class ClosedForm(Law):
    """Wrap a closed-form law so it answers the ``*_err`` batch contract."""

    def __init__(self, law: Law):
        self.law = law
        self.name = law.name

    @property
    def lo(self):  # type: ignore[override]
        return self.law.lo

    def sf(self, x):
        return self.law.sf(x)

    def log_sf(self, x):
        return self.law.log_sf(x)

    def pdf(self, x):
        return self.law.pdf(x)

    def window(self, x, c):
        return self.law.window(x, c)

    def sf_shift(self, x, y):
        return self.law.sf_shift(x, y)

    def pdf_shift(self, x, y):
        return self.law.pdf_shift(x, y)

    def window_shift(self, x, c, y):
        return self.law.window_shift(x, c, y)

    def breakpoints(self):
        return self.law.breakpoints()

    def atoms(self):
        return self.law.atoms()

    def pieces(self):
        return self.law.pieces()

    def _pack(self, v):
        v = np.asarray(v, dtype=float)
        return v, np.zeros_like(v), np.ones(v.shape, dtype=bool)

    def sf_err(self, x):
        return self._pack(self.law.sf(x))

    def pdf_err(self, x):
        return self._pack(self.law.pdf(x))

    def window_err(self, x, c):
        return self._pack(self.law.window(x, c))


# ---------------------------------------------------------------- powers


class ConvPower:
    """Self-convolution powers F^{*k} with cached intermediate tables.

    ``evaluator(k, x_max)`` returns an object with ``sf_err``, ``pdf_err`` and
    ``window_err``: the closed form for k = 1, pairwise quadrature for k = 2
    and quadrature against a table of order k - 1 beyond that.
    """

    def __init__(self, dist: Law, rtol: float = DEFAULT_RTOL, table_tol: float = 1e-8):
        self.dist = dist
        self.rtol = rtol
        self.table_tol = table_tol
        self._tables: dict[int, ConvTable] = {}
        self._pair = PairConv(dist, dist, rtol=rtol)

    def evaluator(self, k: int, x_max: float | None = None):
        if k < 1:
            raise ValueError("order must be at least 1")
        if k == 1:
            return ClosedForm(self.dist)
        if k == 2:
            return self._pair
        if x_max is None:
            raise ValueError("orders above 2 need x_max for the intermediate table")
        return OneSidedConv(self.table(k - 1, x_max - self.dist.lo), self.dist, rtol=self.rtol)

    def table(self, k: int, x_max: float) -> ConvTable:
        """Table of F^{*k} covering at least [k lo, x_max]."""
        # a request below the support still needs a nonempty table
        x_max = max(x_max, k * self.dist.lo + max(self.dist.lo, 1.0))
        cached = self._tables.get(k)
        if cached is not None and cached.x_max >= x_max:
            return cached
        if k == 2:
            src = PairConv(self.dist, self.dist, rtol=max(self.rtol * 0.1, 1e-10))
        else:
            src = OneSidedConv(self.table(k - 1, x_max - self.dist.lo), self.dist,
                               rtol=max(self.rtol * 0.1, 1e-10))
        tab = ConvTable(src, x_max, tol=self.table_tol)
        self._tables[k] = tab
        return tab


# ---------------------------------------------------------------- results


CSV_COLUMNS = ("x", "log_x", "density", "density_err", "tail", "tail_err", "scale_block_index")


@dataclass
class NumericConv:
    """Values of F^{*order} on a grid, each with an absolute error estimate."""

    base: Law
    order: int
    grid: np.ndarray
    density_vals: np.ndarray
    density_err: np.ndarray
    tail_vals: np.ndarray
    tail_err: np.ndarray
    flagged: np.ndarray
    quadrature_budget: int = DEFAULT_BUDGET
    scale_index: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.scale_index is None:
            self.scale_index = scale_block_index(self.base, self.order, self.grid)

    def rows(self):
        for i in range(self.grid.size):
            x = float(self.grid[i])
            yield (x, math.log(x) if x > 0 else -math.inf, float(self.density_vals[i]),
                   float(self.density_err[i]), float(self.tail_vals[i]), float(self.tail_err[i]),
                   int(self.scale_index[i]))

    def to_csv(self, extra_header: dict | None = None) -> str:
        buf = io.StringIO()
        for k, v in (extra_header or {}).items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows():
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
        return buf.getvalue()


def scale_edges(dist: Law, order: int = 1) -> np.ndarray:
    """Left ends of the scale regions of F^{*order}: lo_n + (order - 1) lo_0."""
    if isinstance(dist, PiecewiseDist):
        lo = dist.block_lo
        lo = lo[np.isfinite(lo)]
        return lo + (order - 1) * lo[0]
    raise TypeError("scale regions are defined for block families")


def scale_block_index(dist: Law, order: int, x) -> np.ndarray:
    x = _arr(x)
    try:
        edges = scale_edges(dist, order)
    except TypeError:
        return np.full(x.shape, -1, dtype=int)
    return np.searchsorted(edges, x, side="right") - 1


def self_conv_density(dist: Law, x) -> dict:
    """h(x) = 2 int_{[0,x/2]} f(x - y) dF(y) with its quadrature error."""
    v, e, ok = PairConv(dist, dist).pdf_err(x)
    return {"value": v, "err": e, "reliable": ok}


def nfold_tail(dist: Law, n: int, grid, power: ConvPower | None = None,
               budget: int = DEFAULT_BUDGET, tol: float = 1e-6) -> NumericConv:
    """Density and tail of F^{*n} on ``grid``; points whose error exceeds ``tol`` are flagged."""
    if n < 1:
        raise ValueError("fold count must be at least 1")
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    power = power or ConvPower(dist)
    ev = power.evaluator(n, float(grid.max()))
    tv, te, tok = ev.sf_err(grid)
    dv, de, dok = ev.pdf_err(grid)
    flagged = ~(tok & dok) | (te > tol * np.maximum(tv, 1e-300)) | (de > tol * np.maximum(dv, 1e-300) + 1e-300)
    return NumericConv(dist, n, grid, dv, de, tv, te, flagged, budget)


def cstar_estimate(subject, probe, power: ConvPower | None = None) -> dict:
    """Max over ``probe`` of tail(G*G)/tail(G), for G a law or the law of a NumericConv."""
    probe = np.asarray(probe, dtype=float)
    if isinstance(subject, NumericConv):
        dist, k = subject.base, subject.order
    else:
        dist, k = subject, 1
    idx = scale_block_index(dist, 2 * k, probe)
    if np.unique(idx[idx >= 0]).size < 2:
        raise ValueError("probe covers fewer than two scale blocks")
    power = power or ConvPower(dist)
    num = power.evaluator(2 * k, float(probe.max())).sf_err(probe)[0]
    den = power.evaluator(k, float(probe.max())).sf_err(probe)[0]
    ratio = num / den
    i = int(np.argmax(ratio))
    per_scale = {int(s): float(ratio[idx == s].max()) for s in np.unique(idx) if s >= 0}
    return {"sup_ratio": float(ratio[i]), "arg": float(probe[i]),
            "trace": list(zip(probe.tolist(), ratio.tolist())), "per_scale_max": per_scale}


def t_functional(dist: Law, conv, x) -> dict:
    """T(x) = int_0^{x/2} H(z) h(x - z) dz with H = F*F, and the ratio T/H(x).

    ``conv`` is a ConvPower over ``dist`` (its order-2 table is used) or a
    ConvTable of order two.
    """
    x = np.atleast_1d(_arr(x))
    tab = conv if isinstance(conv, ConvTable) else conv.table(2, float(x.max()))

    e = np.concatenate([[tab.lo], tab.breakpoints()])
    N = x.size
    pts = np.concatenate([np.zeros((N, 1)), (x / 2.0)[:, None],
                          np.broadcast_to(e, (N, e.size)), _reflect(x, e)], axis=1)
    pts = np.clip(pts, 0.0, (x / 2.0)[:, None])
    pts.sort(axis=1)
    a_, b_ = pts[:, :-1], pts[:, 1:]
    keep = b_ > a_
    owner = np.broadcast_to(np.arange(N)[:, None], a_.shape)[keep]

    def fn(own, pc, z):
        return tab.sf(z) * tab.pdf_shift(x[own], z)

    res = integrate_panels(fn, N, owner, np.zeros(owner.size, dtype=int), a_[keep], b_[keep], rtol=1e-9, atol=0.0)
    H = tab.sf(x)
    return {"T": res.value, "err": res.err, "H": H, "ratio": res.value / H}
