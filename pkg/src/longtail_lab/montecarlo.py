"""Monte Carlo ground truth by direct sampling of the defining random variables.

Block-family draws are assembled as log x = log s_n + p log(1 + U^(1/b)) with
the block n drawn from the same truncated, renormalised law the closed forms
use, so values whose anchors leave the double range stay exact in log domain.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .artifacts import atomic_write_bytes
from .counting import CountingDist
from .distributions import (ExponentialControl, Law, PiecewiseDist, StaircaseF1, StaircaseF2,
                            build_from_config)
from .scales import ParameterError

Z_BAND = 5.0
# one-sided bound for a zero count: (1 - p)^N >= P(Z > 5) gives p <= -log P(Z > 5) / N
ZERO_COUNT_FACTOR = -math.log(stats.norm.sf(Z_BAND))
MIN_ACCEPTANCE_SAMPLES = 10_000


@dataclass(frozen=True)
class SampleBatch:
    """Draws of xi, S_n or S_tau, kept as natural logs (``-inf`` for an empty sum)."""

    seed: int
    n_samples: int
    log_values: np.ndarray = field(repr=False)
    provenance: dict
    block: np.ndarray | None = field(default=None, repr=False)

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_values)

    def header(self) -> dict:
        return {"seed": self.seed, "n_samples": self.n_samples, "provenance": self.provenance}


def _rng(seed: int, stream: int | None = None) -> np.random.Generator:
    ss = np.random.SeedSequence(seed)
    if stream is not None:
        ss = ss.spawn(stream + 1)[stream]
    return np.random.Generator(np.random.PCG64(ss))


def _as_law(dist) -> Law:
    if isinstance(dist, Law):
        return dist
    if isinstance(dist, dict):
        return build_from_config(dist)
    raise TypeError(f"cannot sample from {type(dist).__name__}")


def _draw_log(law: Law, rng: np.random.Generator, n: int):
    """n draws as (log values, block index or None)."""
    if isinstance(law, PiecewiseDist):
        k = rng.choice(law.n_blocks, size=n, p=law.masses / law.masses.sum())
        u = rng.random(n) ** (1.0 / law.b)
        return law.log_s[k] + law.p * np.log1p(u), k
    if isinstance(law, StaircaseF1):
        x = np.log(rng.random(n)) ** 2
        for xn, yn in zip(law.xs, law.ys):
            x[(x >= xn) & (x < yn)] = yn
        with np.errstate(divide="ignore"):
            return np.log(x), None
    if isinstance(law, StaircaseF2):
        e2 = rng.exponential(size=n) ** 2
        u = rng.random(n)
        with np.errstate(over="ignore"):
            cap = np.expm1(1.0 / u) - 1.0
        with np.errstate(divide="ignore"):
            return np.log(np.minimum(e2, cap)), None
    if isinstance(law, ExponentialControl):
        with np.errstate(divide="ignore"):
            return np.log(rng.exponential(size=n)), None
    raise TypeError(f"no sampler for {type(law).__name__}")


def _provenance(law: Law) -> dict:
    prov = {"generator": "PCG64", "law": getattr(law, "name", type(law).__name__)}
    if isinstance(law, PiecewiseDist):
        prov.update({"kind": law.kind, "params": dict(law.params), "n_max": law.seq.n_max,
                     "norm_const": law.norm_const, "renormalised_truncation": law.trunc_bound,
                     "lo": law.lo})
    else:
        prov["lo"] = float(law.lo)
    return prov


def sample_xi(dist, seed: int, n_samples: int, stream: int | None = None) -> SampleBatch:
    """Direct draws of xi for a family config, a PiecewiseDist or a staircase/control law."""
    if n_samples < 1:
        raise ParameterError("n_samples must be positive")
    law = _as_law(dist)
    lv, k = _draw_log(law, _rng(seed, stream), n_samples)
    prov = _provenance(law)
    prov["variable"] = "xi"
    if stream is not None:
        prov["stream"] = stream
    return SampleBatch(int(seed), int(n_samples), lv, prov, k)


def _tail_from_count(count: int, N: int, below_support: bool) -> dict:
    est = count / N
    if count == N and below_support:
        return {"estimate": 1.0, "ci_halfwidth": 0.0, "count": count, "n": N}
    if count == 0:
        return {"estimate": 0.0, "ci_halfwidth": ZERO_COUNT_FACTOR / N, "count": 0, "n": N,
                "one_sided_bound": ZERO_COUNT_FACTOR / N}
    hw = Z_BAND * math.sqrt(est * (1.0 - est) / N)
    if count == N:
        hw = ZERO_COUNT_FACTOR / N
    return {"estimate": est, "ci_halfwidth": hw, "count": count, "n": N}


def empirical_tail(batch: SampleBatch, x) -> dict | list:
    """Fraction of draws strictly above x with a 5 sigma binomial half-width.

    A zero count returns the one-sided bound -log P(Z > 5) / N as the
    half-width; x below the support returns 1 with width 0.
    """
    if batch.n_samples == 0:
        raise ParameterError("empty batch")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    srt = np.sort(batch.log_values)
    lo = batch.provenance.get("lo", -math.inf)
    out = []
    for xv in xs:
        lx = math.log(xv) if xv > 0 else -math.inf
        if xv <= 0:
            count = int(np.sum(srt > lx)) if xv == 0 else batch.n_samples
        else:
            count = batch.n_samples - int(np.searchsorted(srt, lx, side="right"))
        out.append(_tail_from_count(count, batch.n_samples, xv < lo))
    return out[0] if scalar else out


def sample_sums(dist, n: int | None, seed: int, n_samples: int, counting: CountingDist | None = None,
                stream: int | None = None) -> SampleBatch:
    """Draws of S_n = xi_1 + ... + xi_n, or of S_tau when ``counting`` is given."""
    law = _as_law(dist)
    rng = _rng(seed, stream)
    if counting is None:
        if n is None or n < 1:
            raise ParameterError("fold count must be at least 1")
        lv, _ = _draw_log(law, rng, n * n_samples)
        sums = np.logaddexp.reduce(lv.reshape(n_samples, n), axis=1)
        variable = f"S_{n}"
    else:
        probs = counting.pmf / counting.pmf.sum()
        tau = rng.choice(probs.size, size=n_samples, p=probs)
        total = int(tau.sum())
        lv, _ = _draw_log(law, rng, total)
        starts = np.concatenate([[0], np.cumsum(tau)[:-1]])
        sums = np.full(n_samples, -np.inf)
        nz = tau > 0
        if nz.any():
            sums[nz] = np.logaddexp.reduceat(lv, starts[nz])
        variable = "S_tau"
    prov = _provenance(law)
    prov["variable"] = variable
    if counting is not None:
        prov["counting"] = counting.to_dict()
        prov["counting_truncated_mass"] = counting.tail_mass
    return SampleBatch(int(seed), int(n_samples), sums, prov)


def empirical_conv_tail(dist, n: int, seed: int, n_samples: int, x_grid,
                        counting: CountingDist | None = None) -> list:
    """Tail estimates of S_n (n >= 2) or S_tau on ``x_grid``."""
    if counting is None and n < 2:
        raise ParameterError("fold count must be at least 2")
    batch = sample_sums(dist, n, seed, n_samples, counting)
    return empirical_tail(batch, np.atleast_1d(np.asarray(x_grid, dtype=float)))


def band_check(target, est: dict) -> bool:
    """True if ``target`` lies within the estimate's band."""
    return abs(float(target) - est["estimate"]) <= est["ci_halfwidth"]


def merge_counts(parts: list[dict]) -> dict:
    """Combine tail estimates at one x from disjoint seed streams."""
    count = sum(p["count"] for p in parts)
    N = sum(p["n"] for p in parts)
    return _tail_from_count(count, N, all(p["ci_halfwidth"] == 0 and p["estimate"] == 1 for p in parts))


def block_uniformity(batch: SampleBatch, law: PiecewiseDist, n: int, buckets: int = 20) -> dict:
    """Bucket counts of u = (x / s_n)^(1/p) - 1 within block n against uniform.

    For b = 1 the conditional law of u is uniform, so each bucket count should
    sit within 5 sigma of N_n / buckets.
    """
    sel = batch.block == n
    u = np.expm1((batch.log_values[sel] - law.log_s[n]) / law.p)
    g = u ** law.b
    counts = np.bincount(np.minimum((g * buckets).astype(int), buckets - 1), minlength=buckets)
    N = int(sel.sum())
    exp_ = N / buckets
    sd = math.sqrt(N * (1.0 / buckets) * (1.0 - 1.0 / buckets))
    z = (counts - exp_) / sd if sd > 0 else np.zeros(buckets)
    return {"n_in_block": N, "counts": counts.tolist(), "max_abs_z": float(np.max(np.abs(z))),
            "ok": bool(np.all(np.abs(z) <= Z_BAND))}


def tails_csv(x_grid, estimates: list, targets=None, header: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (header or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = ["x", "estimate", "ci_halfwidth", "count", "n"]
    if targets is not None:
        cols += ["target", "within_band"]
    w.writerow(cols)
    for i, (x, e) in enumerate(zip(x_grid, estimates)):
        row = [repr(float(x)), repr(e["estimate"]), repr(e["ci_halfwidth"]), e["count"], e["n"]]
        if targets is not None:
            row += [repr(float(targets[i])), int(band_check(targets[i], e))]
        w.writerow(row)
    return buf.getvalue()


def batch_npz_bytes(batch: SampleBatch) -> bytes:
    """Columnar ``.npz`` with a JSON header (seed, parameters, renormalisation)."""
    buf = io.BytesIO()
    cols = {"log_values": batch.log_values}
    if batch.block is not None:
        cols["block"] = batch.block.astype(np.int16)
    np.savez(buf, header=np.array(json.dumps(batch.header(), sort_keys=True)), **cols)
    return buf.getvalue()


def export_batch(batch: SampleBatch, path) -> None:
    atomic_write_bytes(path, batch_npz_bytes(batch))


def load_batch(path) -> SampleBatch:
    with np.load(path, allow_pickle=False) as z:
        hdr = json.loads(str(z["header"]))
        block = z["block"].astype(np.int64) if "block" in z.files else None
        return SampleBatch(hdr["seed"], hdr["n_samples"], z["log_values"].copy(), hdr["provenance"], block)
