"""Numerical membership diagnostics for heavy-tail classes.

Each probe turns a class definition into a ratio trace on a probe grid,
reduces the trace to per-scale maxima and reads a trend off those maxima.
Finite grids cannot decide asymptotic membership, so verdicts are
"consistent", "inconsistent" or "inconclusive" and always carry their traces.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .convolution import ClosedForm, ConvPower, NumericConv, PairConv, scale_edges
from .distributions import (Law, NonOLExample, PiecewiseDist, StaircaseF1, TailEquivalent,
                            _arr)

CLASSES = ("L", "OL", "OS", "D")
CONSISTENT, INCONSISTENT, INCONCLUSIVE = "consistent", "inconsistent", "inconclusive"
DECREASE_FACTOR = 0.7
BOUND_RATIO = 1.5


class PreconditionError(ValueError):
    """A probe's hypothesis does not hold on the grid."""


# ---------------------------------------------------------------- subjects


@dataclass
class Subject:
    """A law, or its ``order``-fold self-convolution, under probe."""

    base: Law
    order: int = 1
    power: ConvPower | None = None
    label: str = ""

    def __post_init__(self):
        if not self.label:
            name = getattr(self.base, "name", "law")
            self.label = name if self.order == 1 else f"{name}^*{self.order}"
        if self.order > 1 and self.power is None:
            self.power = ConvPower(self.base)

    @property
    def heavy_tailed(self) -> bool:
        return getattr(self.base, "heavy_tailed", True)

    def evaluator(self, x_max: float):
        if self.order == 1:
            return ClosedForm(self.base)
        return self.power.evaluator(self.order, x_max)

    def edges(self) -> np.ndarray:
        return subject_edges(self.base, self.order)

    def power_or_new(self) -> ConvPower:
        if self.power is None:
            self.power = ConvPower(self.base)
        return self.power


def as_subject(obj, order: int | None = None, power: ConvPower | None = None) -> Subject:
    if isinstance(obj, Subject):
        return obj
    if isinstance(obj, NumericConv):
        return Subject(obj.base, obj.order, power)
    return Subject(obj, order or 1, power)


def subject_edges(law: Law, order: int = 1) -> np.ndarray:
    """Left ends of the scale regions used to bucket probe points."""
    if isinstance(law, TailEquivalent):
        law = law.base
    if isinstance(law, PiecewiseDist):
        return scale_edges(law, order)
    if isinstance(law, StaircaseF1):
        return law.xs + (order - 1) * law.lo
    if isinstance(law, NonOLExample):
        e = np.exp(law.log_a)
        return e[np.isfinite(e)] * order
    # generic laws: geometric buckets from max(lo, 1)
    start = max(law.lo, 1.0) * order
    return start * 4.0 ** np.arange(8)


def probe_grid(subject, n_points: int = 64, c_values=(1.0, 2.0, 4.0), depth: int = 3,
               x_cap: float = math.inf) -> tuple[np.ndarray, np.ndarray]:
    """Points and their scale index for scales 0..depth-1.

    Each scale region [e_n, e_{n+1}) gets ``n_points`` log-spaced points plus
    every breakpoint of the subject inside it, shifted by 0, +-1 and +-c.
    """
    subject = as_subject(subject)
    edges = subject.edges()
    depth = min(depth, edges.size - 1)
    if depth < 1:
        raise PreconditionError("subject exposes fewer than two scale edges")
    top = min(float(edges[depth]), x_cap)
    if subject.order == 1:
        bp = np.concatenate([subject.base.breakpoints(), subject.base.atoms()[0]])
    elif subject.order == 2:
        bp = PairConv(subject.base, subject.base).breakpoints()
    else:
        bp = subject.evaluator(top + 1.0).breakpoints()
    shifts = np.unique(np.concatenate([[0.0, 1.0, -1.0], c_values, -np.asarray(c_values, float)]))
    cand = (bp[:, None] + shifts[None, :]).ravel()
    pts, idx = [], []
    for n in range(depth):
        a, b = float(edges[n]), min(float(edges[n + 1]), x_cap)
        if not b > a:
            break
        g = np.geomspace(max(a, 1e-300), b, n_points, endpoint=False) if a > 0 else \
            np.linspace(a, b, n_points, endpoint=False)
        g = np.unique(np.concatenate([g, cand[(cand >= a) & (cand < b)]]))
        pts.append(g)
        idx.append(np.full(g.size, n))
    return np.concatenate(pts), np.concatenate(idx)


def per_scale_max(values, scale_idx) -> dict:
    values = np.asarray(values, dtype=float)
    return {int(s): float(np.max(values[scale_idx == s])) for s in np.unique(scale_idx) if s >= 0}


# ---------------------------------------------------------------- trends


def trend(seq, decrease_factor: float = DECREASE_FACTOR, bound_ratio: float = BOUND_RATIO) -> dict:
    """Classify a per-scale maxima sequence.

    ``decreasing``: each term at most decrease_factor times the previous.
    ``bounded``: max/min at most bound_ratio.  ``growing``: each term at
    least bound_ratio times the previous.  ``persistent``: no term drops
    below decrease_factor times its predecessor.
    """
    s = np.asarray(seq, dtype=float)
    if s.size < 2:
        return {"decreasing": False, "bounded": False, "growing": False, "persistent": False,
                "steps": []}
    prev, nxt = s[:-1], s[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        steps = np.where(prev > 0, nxt / prev, np.where(nxt > 0, np.inf, 0.0))
    lo, hi = float(np.min(s)), float(np.max(s))
    return {
        "decreasing": bool(np.all(steps <= decrease_factor)),
        "bounded": bool(lo > 0 and hi / lo <= bound_ratio) or hi == lo,
        "growing": bool(np.all(steps >= bound_ratio)),
        "persistent": bool(np.all(steps > decrease_factor)),
        "steps": steps.tolist(),
    }


# ---------------------------------------------------------------- sweeps


def ratio_sweep(tail, c: float, grid) -> dict:
    """Trace of tail(x - c) / tail(x).

    ``tail`` is a law or evaluator (the ratio is 1 + window/tail, with the
    quadrature error propagated when available) or a plain callable tail
    function.  Where the tail underflows a ``log_sf`` is used; points with
    no usable value are NaN, never 0/0.
    """
    if not c > 0:
        raise ValueError("shift c must be positive")
    x = np.asarray(grid, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise ValueError("grid must be increasing")
    err = np.zeros(x.size)
    if callable(tail) and not hasattr(tail, "sf"):
        num, den = np.asarray(tail(x - c), float), np.asarray(tail(x), float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(den > 0, num / den, np.nan)
        return {"x": x, "c": c, "ratio": ratio, "err": err}
    if hasattr(tail, "window_err"):
        w, we, _ = tail.window_err(x, np.full(x.size, c))
        s, se, _ = tail.sf_err(x)
    else:
        w, we = tail.window(x, np.full(x.size, c)), np.zeros(x.size)
        s, se = tail.sf(x), np.zeros(x.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = 1.0 + w / s
        err = (we + (ratio - 1.0) * se) / s
    bad = ~(s > 0)
    if bad.any() and hasattr(tail, "log_sf"):
        with np.errstate(invalid="ignore"):
            lr = tail.log_sf(x[bad] - c) - tail.log_sf(x[bad])
        ratio[bad] = np.where(np.isfinite(lr), np.exp(lr), np.nan)
        err[bad] = 0.0
    return {"x": x, "c": c, "ratio": ratio, "err": err}


def insensitivity_probe(law, h_fn: Callable, grid) -> dict:
    """Trace of F(x - h(x), x + h(x)] / F-bar(x)."""
    x = np.asarray(grid, dtype=float)
    h = np.asarray(h_fn(x), dtype=float)
    if np.any(h >= x):
        raise ValueError("h(x) must stay below x on the grid")
    num = law.window(x + h, 2.0 * h)
    den = law.sf(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return {"x": x, "h": h, "ratio": np.where(den > 0, num / den, np.nan)}


def density_o_tail_probe(subject, grid, scale_idx=None) -> dict:
    """Trace of f(x) / F-bar(x) with per-scale maxima."""
    subject = as_subject(subject)
    x = np.asarray(grid, dtype=float)
    ev = subject.evaluator(float(x.max()))
    f = ev.pdf_err(x)[0]
    s = ev.sf_err(x)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(s > 0, f / s, np.nan)
    out = {"x": x, "ratio": r}
    if scale_idx is not None:
        out["per_scale_max"] = per_scale_max(np.nan_to_num(r), scale_idx)
    return out


def local_mass_probe(F: Law, H, grid, c: float = 1.0, scale_idx=None) -> dict:
    """Trace of F(x - c, x + c] / H-bar(x) for a second law H."""
    x = np.asarray(grid, dtype=float)
    num = F.window(x + c, np.full(x.size, 2.0 * c))
    den = H.sf(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / den, np.nan)
    out = {"x": x, "ratio": r}
    if scale_idx is not None:
        out["per_scale_max"] = per_scale_max(np.nan_to_num(r), scale_idx)
    return out


def cstar_trace(subject: Subject, grid) -> np.ndarray:
    """tail(G*G)/tail(G) on ``grid`` for G the subject's law."""
    power = subject.power_or_new()
    xm = float(np.max(grid))
    num = power.evaluator(2 * subject.order, xm).sf_err(grid)[0]
    den = subject.evaluator(xm).sf_err(grid)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / den, np.nan)


# ---------------------------------------------------------------- reports


@dataclass
class Verdict:
    verdict: str
    witness: list
    per_scale: dict
    trend: dict
    note: str = ""

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "witness": self.witness, "per_scale": self.per_scale,
                "trend": self.trend, "note": self.note}


@dataclass
class ClassifyConfig:
    """Probe configuration; ``burn_in`` scales are probed and reported but not trended.

    Scale 0 of a block family's convolution holds only sums of block-0 values
    and behaves unlike deeper scales, hence the default of one.
    """

    n_points: int = 64
    c_values: tuple = (1.0, 2.0, 4.0)
    depth: int = 3
    burn_in: int = 1
    classes: tuple = CLASSES
    decrease_factor: float = DECREASE_FACTOR
    bound_ratio: float = BOUND_RATIO
    x_cap: float = math.inf

    def to_dict(self) -> dict:
        return {"n_points": self.n_points, "c_values": list(self.c_values), "depth": self.depth,
                "burn_in": self.burn_in, "classes": list(self.classes),
                "decrease_factor": self.decrease_factor, "bound_ratio": self.bound_ratio,
                "x_cap": self.x_cap}


@dataclass
class ClassReport:
    subject: str
    verdicts: dict
    traces: dict
    config: dict
    grid: np.ndarray = field(repr=False, default=None)
    scale_index: np.ndarray = field(repr=False, default=None)

    def verdict(self, cls: str) -> str:
        return self.verdicts[cls].verdict

    def to_dict(self) -> dict:
        return {"subject": self.subject, "config": self.config,
                "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()}}

    def traces_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = sorted(self.traces)
        w.writerow(["x", "scale_block_index", *names])
        for i, x in enumerate(self.grid):
            w.writerow([repr(float(x)), int(self.scale_index[i]),
                        *(repr(float(self.traces[n][i])) for n in names)])
        return buf.getvalue()


def _witness(x, vals, idx, scales) -> list:
    out = []
    for s in scales:
        m = idx == s
        if m.any():
            v = np.nan_to_num(vals[m], nan=-np.inf)
            j = int(np.argmax(v))
            out.append({"scale": int(s), "x": float(x[m][j]), "value": float(vals[m][j])})
    return out


def classify(subject, config: ClassifyConfig | None = None) -> ClassReport:
    """Run the selected class probes and read verdicts from per-scale maxima.

    L: max |tail(x-1)/tail(x) - 1| decreasing -> consistent, persistent ->
    inconsistent.  OL: the c in ``c_values`` ratios bounded -> consistent,
    growing for some c -> inconsistent.  OS: tail(G*G)/tail(G) bounded or
    growing.  D: tail(x/2)/tail(x) bounded or growing.  Anything else is
    inconclusive.  L-consistent lifts OL to consistent.
    """
    cfg = config or ClassifyConfig()
    subject = as_subject(subject)
    if cfg.depth - cfg.burn_in < 2:
        raise PreconditionError("need at least two trended scales")
    x, idx = probe_grid(subject, cfg.n_points, cfg.c_values, cfg.depth, cfg.x_cap)
    scales = sorted(set(idx.tolist()))
    if len(scales) - cfg.burn_in < 2:
        raise PreconditionError("probe grid covers fewer than two trended scales")
    kept = scales[cfg.burn_in:]
    ev = subject.evaluator(float(x.max()))
    traces, verdicts = {}, {}

    def seq_of(vals):
        ps = per_scale_max(np.nan_to_num(vals, nan=0.0, posinf=np.inf), idx)
        return ps, [ps[s] for s in kept]

    def tr(seq):
        return trend(seq, cfg.decrease_factor, cfg.bound_ratio)

    if "L" in cfg.classes or "OL" in cfg.classes:
        for c in cfg.c_values:
            traces[f"ratio_c{c:g}"] = ratio_sweep(ev, c, x)["ratio"]
    if "L" in cfg.classes:
        dev = np.abs(traces[f"ratio_c{cfg.c_values[0]:g}"] - 1.0)
        traces["L_deviation"] = dev
        ps, seq = seq_of(dev)
        t = tr(seq)
        v = CONSISTENT if t["decreasing"] else INCONSISTENT if t["persistent"] else INCONCLUSIVE
        verdicts["L"] = Verdict(v, _witness(x, dev, idx, scales), ps, t)
    if "OL" in cfg.classes:
        per_c, flags = {}, []
        for c in cfg.c_values:
            ps, seq = seq_of(traces[f"ratio_c{c:g}"])
            t = tr(seq)
            per_c[f"{c:g}"] = {"per_scale": ps, "trend": t}
            flags.append("bounded" if t["bounded"] else "growing" if t["growing"] else "other")
        v = CONSISTENT if all(f == "bounded" for f in flags) else \
            INCONSISTENT if "growing" in flags else INCONCLUSIVE
        key = f"ratio_c{cfg.c_values[-1]:g}"
        verdicts["OL"] = Verdict(v, _witness(x, traces[key], idx, scales),
                                 {k: d["per_scale"] for k, d in per_c.items()},
                                 {k: d["trend"] for k, d in per_c.items()})
        if verdicts.get("L") and verdicts["L"].verdict == CONSISTENT and v != CONSISTENT:
            verdicts["OL"].verdict = CONSISTENT
            verdicts["OL"].note = f"lifted from L evidence; own trend read {v}"
    if "OS" in cfg.classes:
        r = cstar_trace(subject, x)
        traces["cstar_ratio"] = r
        ps, seq = seq_of(r)
        t = tr(seq)
        v = CONSISTENT if t["bounded"] else INCONSISTENT if t["growing"] else INCONCLUSIVE
        verdicts["OS"] = Verdict(v, _witness(x, r, idx, scales), ps, t)
    if "D" in cfg.classes:
        s = ev.sf_err(x)[0]
        s2 = ev.sf_err(x / 2.0)[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(s > 0, s2 / s, np.nan)
        traces["D_ratio"] = r
        ps, seq = seq_of(r)
        t = tr(seq)
        v = CONSISTENT if t["bounded"] else INCONSISTENT if t["growing"] else INCONCLUSIVE
        verdicts["D"] = Verdict(v, _witness(x, r, idx, scales), ps, t)
    conf = cfg.to_dict()
    conf["scales_probed"] = scales
    conf["scales_trended"] = kept
    return ClassReport(subject.label, verdicts, traces, conf, x, idx)


# ---------------------------------------------------------------- transfer and roots


def tail_equivalence_transfer(F: Law, L: Law, conv_FF, grid=None, depth: int = 3,
                              max_dev: float = 0.25) -> dict:
    """Trace of tail(F*L)/tail(F*F) and its per-scale distance from 1.

    The precondition that L-bar ~ F-bar is checked on F's own scales: the
    per-scale max of |L-bar/F-bar - 1| must be nonincreasing and at most
    ``max_dev`` on the deepest scale.  ``conv_FF`` is a NumericConv of order
    two over F, a ConvPower over F, or any evaluator of F*F.
    """
    gx, gi = probe_grid(Subject(F, 1), depth=depth)
    fs = F.sf(gx)
    ok = fs > 0
    dev = np.abs(L.sf(gx[ok]) / fs[ok] - 1.0)
    pre = per_scale_max(dev, gi[ok])
    seq = [pre[s] for s in sorted(pre)]
    if any(b > a for a, b in zip(seq, seq[1:])) or seq[-1] > max_dev:
        raise PreconditionError(f"tail equivalence not supported on the grid: {pre}")
    if grid is None:
        grid, idx = probe_grid(Subject(F, 2), depth=depth)
    else:
        grid = np.asarray(grid, dtype=float)
        idx = subject_edges(F, 2).searchsorted(grid, side="right") - 1
    if isinstance(conv_FF, NumericConv):
        if conv_FF.grid.shape == grid.shape and np.all(conv_FF.grid == grid):
            den = conv_FF.tail_vals
        else:
            den = PairConv(F, F).sf(grid)
    elif isinstance(conv_FF, ConvPower):
        den = conv_FF.evaluator(2).sf(grid)
    else:
        den = conv_FF.sf(grid)
    num = PairConv(F, L).sf(grid)
    ratio = num / den
    d = np.abs(ratio - 1.0)
    return {"x": grid, "scale_index": idx, "ratio": ratio, "precondition": pre,
            "per_scale_distance": per_scale_max(d, idx)}


def convolution_root_crosscheck(report_F: ClassReport, report_FF: ClassReport,
                                heavy_tailed: bool = True) -> dict:
    """Compare verdicts for F and F*F against the known closure patterns.

    Under F in OS, F*F in L forces F in L; without OS the split
    (F not in L, F*F in L) is allowed, and it may even come with F outside OL.
    """
    def v(rep, cls):
        d = rep.verdicts.get(cls)
        return d.verdict if d else None

    matrix = {"F": {c: v(report_F, c) for c in CLASSES}, "F*F": {c: v(report_FF, c) for c in CLASSES}}
    if not heavy_tailed:
        return {"matrix": matrix, "pattern": "out of class scope", "status": "out-of-scope"}
    fL, fOS, fOL = matrix["F"]["L"], matrix["F"]["OS"], matrix["F"]["OL"]
    ffL, ffOS = matrix["F*F"]["L"], matrix["F*F"]["OS"]
    if fOS == CONSISTENT and fL == INCONSISTENT and ffL == CONSISTENT:
        return {"matrix": matrix, "status": "contradiction",
                "pattern": "F in OS with F*F in L but F not in L"}
    if fOL == INCONSISTENT and ffL == CONSISTENT and ffOS == CONSISTENT:
        return {"matrix": matrix, "status": "consistent",
                "pattern": "F not in OL while F*F in L and OS"}
    if fL == INCONSISTENT and fOS == INCONSISTENT and ffL == CONSISTENT:
        return {"matrix": matrix, "status": "consistent",
                "pattern": "F not in L, F not in OS, F*F in L"}
    if fL == CONSISTENT and ffL == CONSISTENT:
        return {"matrix": matrix, "status": "consistent", "pattern": "F and F*F both in L"}
    return {"matrix": matrix, "status": "no-pattern", "pattern": "verdicts do not match a listed pattern"}


def tail_condition_x0(subject, eps: float, grid=None, k: int = 2, tol: float = 1e-9) -> dict:
    """Smallest x0 with max over grid points x >= k(x0 - 1) + x0 of H-bar(x-1)/H-bar(x) <= 1 + eps.

    H is the order-k self-convolution of the subject's base law, and x0 is found
    by bisection.  The supremum only runs over the probed range, which is
    returned alongside; ``x0`` is None if even the last point fails.
    """
    subject = as_subject(subject)
    sub = Subject(subject.base, k, subject.power if subject.order == k else None)
    if grid is None:
        grid, _ = probe_grid(sub)
    x = np.asarray(grid, dtype=float)
    r = ratio_sweep(sub.evaluator(float(x.max())), 1.0, x)["ratio"]
    r = np.nan_to_num(r, nan=np.inf)
    suffix = np.maximum.accumulate(r[::-1])[::-1]

    def ok(x0):
        j = np.searchsorted(x, k * (x0 - 1.0) + x0, side="left")
        return j >= x.size or suffix[j] <= 1.0 + eps

    hi = (x[-1] + k) / (k + 1.0)
    if not ok(hi) or not (suffix[-1] <= 1.0 + eps):
        return {"x0": None, "eps": eps, "range": [float(x[0]), float(x[-1])]}
    lo = 1.0
    if ok(lo):
        return {"x0": 1.0, "eps": eps, "range": [float(x[0]), float(x[-1])]}
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return {"x0": hi, "threshold": k * (hi - 1.0) + hi, "eps": eps,
            "range": [float(x[0]), float(x[-1])]}
