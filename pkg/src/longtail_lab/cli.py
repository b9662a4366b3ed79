"""Command-line front end: one experiment per invocation, artifacts written atomically.

Exit status: 0 success, 2 bad config or failed precondition, 3 a tolerance or
acceptance check failed (artifacts are still written and record the failure).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import montecarlo as mc
from .acceptance import DEFAULT_SEED, run_acceptance
from .artifacts import (EXPERIMENTS, ArtifactSet, ConfigError, csv_header, json_document,
                        load_config, timestamp)
from .classes import (ClassifyConfig, PreconditionError, Subject, classify, per_scale_max,
                      probe_grid, ratio_sweep)
from .compound import CompoundSpec, compound_csv, compound_tail, thm_bounds
from .convolution import ConvPower, NumericConv, PairConv, nfold_tail
from .counting import from_config as counting_from_config
from .distributions import build_from_config
from .scales import ParameterError

EXIT_OK, EXIT_PRECONDITION, EXIT_TOLERANCE = 0, 2, 3


class _Run:
    def __init__(self, cfg: dict, out: ArtifactSet, threads: int):
        self.cfg = cfg
        self.params = cfg.get("params", {})
        self.out = out
        self.threads = max(1, threads)
        self.stamp = timestamp()
        self.status = EXIT_OK

    def json(self, name: str, body: dict):
        self.out.add_text(name, json_document(body, self.cfg, self.stamp))

    def header(self, extra=None):
        return csv_header(self.cfg, extra, self.stamp)

    def grid(self, subject: Subject):
        g = self.params.get("grid", {})
        if "points" in g:
            pts = np.unique(np.asarray(g["points"], dtype=float))
            return pts, None
        return probe_grid(subject, n_points=g.get("n_points", self.params.get("n_points", 64)),
                          c_values=tuple(self.params.get("c_values", (1.0,))),
                          depth=g.get("depth", self.params.get("depth", 3)))

    def chunked(self, fn, x):
        """Apply ``fn`` to slices of ``x`` on the thread pool; results are concatenated in order."""
        if self.threads == 1 or x.size < 2 * self.threads:
            return fn(x)
        parts = np.array_split(x, self.threads)
        with ThreadPoolExecutor(self.threads) as ex:
            res = list(ex.map(fn, parts))
        if isinstance(res[0], tuple):
            return tuple(np.concatenate([r[i] for r in res]) for i in range(len(res[0])))
        return {k: np.concatenate([np.atleast_1d(r[k]) for r in res]) if np.ndim(res[0][k]) else res[0][k]
                for k in res[0]}


def _family_report(run: _Run):
    F = build_from_config(run.cfg["family"])
    pts = 2.0 ** F.p * F.block_lo
    pts = pts[np.isfinite(pts)]
    sw = ratio_sweep(F, 1.0, pts)
    limit = F.b / F.p * 2.0 ** (1.0 - F.p) + 1.0 if F.kind == "family1" else None
    body = {
        "norm_const": F.norm_const,
        "log_anchors": F.seq.log_anchors,
        "anchors": F.seq.anchors,
        "block_masses": F.masses,
        "block_lo": F.block_lo,
        "block_hi": F.block_hi,
        "trunc_bound": F.trunc_bound,
        "metadata": F.metadata,
        "ratio_trace": {"c": 1.0, "x": pts, "ratio": sw["ratio"], "limit": limit},
        "segments": F.segment_table(),
    }
    run.json("family_report.json", body)


def _ratio_sweep(run: _Run):
    F = build_from_config(run.cfg["family"])
    order = run.params.get("order", 1)
    sub = Subject(F, order)
    x, idx = run.grid(sub)
    if idx is None:
        idx = sub.edges().searchsorted(x, side="right") - 1
    c = float(run.params.get("c", 1.0))
    ev = sub.evaluator(float(x.max()))
    sw = run.chunked(lambda xs: ratio_sweep(ev, c, xs), x)
    buf = io.StringIO()
    for k, v in run.header({"c": c, "order": order}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "ratio", "ratio_err", "scale_block_index"])
    for i in range(x.size):
        w.writerow([repr(float(x[i])), repr(float(sw["ratio"][i])), repr(float(sw["err"][i])), int(idx[i])])
    run.out.add_text("ratio_sweep.csv", buf.getvalue())
    run.json("ratio_sweep.json", {"c": c, "order": order,
                                  "per_scale_max": per_scale_max(np.nan_to_num(sw["ratio"]), idx)})


def _convolve(run: _Run):
    F = build_from_config(run.cfg["family"])
    order = run.params.get("order", 2)
    tol = float(run.params.get("tol", 1e-6))
    power = ConvPower(F)
    x, _ = run.grid(Subject(F, order, power))
    if order >= 3:
        power.table(order - 1, float(x.max()) - F.lo)
    # per-point results are independent, so the thread split does not change them
    parts = run.chunked(lambda xs: _conv_arrays(F, order, xs, power, tol), x)
    conv = NumericConv(F, order, x, *parts)
    run.out.add_text(f"conv_order{order}.csv", conv.to_csv(run.header({"order": order, "tol": tol})))
    n_flag = int(np.sum(conv.flagged))
    run.json(f"conv_order{order}.json", {"order": order, "points": int(x.size), "flagged": n_flag,
                                         "max_rel_tail_err": float(np.max(conv.tail_err / conv.tail_vals))})
    if n_flag:
        run.status = EXIT_TOLERANCE


def _conv_arrays(F, order, xs, power, tol):
    c = nfold_tail(F, order, xs, power=power, tol=tol)
    return c.density_vals, c.density_err, c.tail_vals, c.tail_err, c.flagged


def _classify(run: _Run, classes):
    F = build_from_config(run.cfg["family"])
    p = run.params
    cfg = ClassifyConfig(n_points=p.get("n_points", 64), c_values=tuple(p.get("c_values", (1.0, 2.0, 4.0))),
                         depth=p.get("depth", 3), burn_in=p.get("burn_in", 1),
                         classes=tuple(classes or p.get("classes", ("L", "OL", "OS", "D"))))
    rep = classify(Subject(F, p.get("order", 1)), cfg)
    run.json("class_report.json", rep.to_dict())
    run.out.add_text("class_traces.csv", "".join(f"# {k}: {v}\n" for k, v in run.header().items())
                     + rep.traces_csv())


def _compound(run: _Run):
    F = build_from_config(run.cfg["family"])
    p = run.params
    if "counting" not in p:
        raise ConfigError("params/counting is required for compound")
    counting = counting_from_config(p["counting"])
    power = ConvPower(F)
    spec = CompoundSpec(F, counting, cstar2=p.get("cstar2"), eps=p.get("eps", 1e-6),
                        eps0=p.get("eps0", 0.1), power=power)
    x, _ = run.grid(Subject(F, 2, power))
    run.out.add_text("compound.csv", compound_csv(spec, x, run.header({"K": spec.K,
                                                                         "truncation_M": spec.truncation_M})))
    body = {"K": spec.K, "truncation_M": spec.truncation_M, "orders_computed": spec.orders_computed,
            "counting_mean": counting.mean}
    if spec.cstar2 is not None:
        body["bounds"] = thm_bounds(counting, spec.cstar2, spec.eps0).to_dict()
    ct = compound_tail(spec, x)
    body["max_trunc_bound_over_value"] = float(np.max(ct["trunc_bound"] / np.maximum(ct["value"], 1e-300)))
    run.json("compound.json", body)


def _oracle(run: _Run, seed: int):
    F = build_from_config(run.cfg["family"])
    p = run.params
    N = p.get("n_samples", 10 ** 6)
    per = p.get("points_per_scale", 20)
    depth = min(p.get("depth", 3), len(F.finite_blocks()))
    batch = mc.sample_xi(F, seed, N)
    xs = np.concatenate([np.geomspace(F.block_lo[n], 1.05 * F.block_hi[n], per) for n in range(depth)])
    est = mc.empirical_tail(batch, xs)
    target = F.sf(xs)
    ok1 = [mc.band_check(t, e) for t, e in zip(target, est)]
    s2 = mc.sample_sums(F, 2, seed, N, stream=1)
    x2 = np.concatenate([np.geomspace(F.block_lo[n] + F.lo, 1.02 * 2.0 * F.block_hi[n], per)
                         for n in range(depth)])
    v, e, _ = PairConv(F, F).sf_err(x2)
    est2 = mc.empirical_tail(s2, x2)
    ok2 = [abs(vv - ee["estimate"]) <= ee["ci_halfwidth"] + 5.0 * er for vv, er, ee in zip(v, e, est2)]
    hdr = run.header({"seed": seed, "n_samples": N})
    run.out.add_text("oracle_tails.csv", mc.tails_csv(xs, est, target, hdr))
    run.out.add_text("oracle_conv2.csv", mc.tails_csv(x2, est2, v, hdr))
    if p.get("export_batch", False):
        run.out.add_bytes("samples_xi.npz", mc.batch_npz_bytes(batch))
    run.json("oracle.json", {"seed": seed, "n_samples": N, "tails_within_band": all(ok1),
                             "conv2_within_band": all(ok2), "points": [len(xs), len(x2)]})
    if not (all(ok1) and all(ok2)):
        run.status = EXIT_TOLERANCE


def _acceptance(run: _Run, seed: int):
    n = run.params.get("mc_samples", 10 ** 6)
    results = run_acceptance(seed=seed, n_samples=n, echo=print)
    run.json("acceptance.json", {"seed": seed, "results": [r.to_dict() for r in results],
                                 "all_passed": all(r.passed for r in results)})
    if not all(r.passed for r in results):
        run.status = EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="longtail-lab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, metavar="PATH")
    ap.add_argument("--out", default=".", metavar="DIR")
    ap.add_argument("--seed", type=int, default=None, metavar="N")
    ap.add_argument("--threads", type=int, default=1, metavar="N")
    ap.add_argument("--classes", default=None, help="comma list drawn from L,OL,OS,D (classify only)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = copy.deepcopy(load_config(args.config))
        if cfg["experiment"] != args.command:
            raise ConfigError(f"config declares {cfg['experiment']!r}, command is {args.command!r}")
        if args.seed is not None:
            cfg["seed"] = args.seed
        cfg.setdefault("seed", DEFAULT_SEED)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        classes = None
        if args.classes:
            classes = [c.strip() for c in args.classes.split(",") if c.strip()]
            bad = set(classes) - {"L", "OL", "OS", "D"}
            if bad:
                raise ConfigError(f"unknown classes {sorted(bad)}")
        prefix = cfg.get("outputs", {}).get("prefix", "")
        run = _Run(cfg, ArtifactSet(args.out, prefix), args.threads)
        cmd = args.command
        if cmd == "family-report":
            _family_report(run)
        elif cmd == "ratio-sweep":
            _ratio_sweep(run)
        elif cmd == "convolve":
            _convolve(run)
        elif cmd == "classify":
            _classify(run, classes)
        elif cmd == "compound":
            _compound(run)
        elif cmd == "oracle-crosscheck":
            _oracle(run, cfg["seed"])
        else:
            _acceptance(run, cfg["seed"])
    except (ConfigError, ParameterError, PreconditionError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    for p in run.out.commit():
        print(p)
    return run.status


if __name__ == "__main__":
    sys.exit(main())
