"""Batched adaptive Gauss-Legendre quadrature.

Many independent integrals (one per *owner*, typically one per abscissa) are
refined together so every integrand call is one large vectorised evaluation.
Each panel is integrated with an n-point rule on the whole interval and on its
two halves; the difference is the panel's error estimate and the halves value
is kept.  Owners whose summed error exceeds ``max(atol, rtol * |value|)`` get
their worst panels bisected until they converge or exhaust the budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

_EPS = np.finfo(float).eps


@dataclass
class QuadResult:
    value: np.ndarray
    err: np.ndarray
    converged: np.ndarray
    subdivisions: np.ndarray


class GaussLegendre:
    """Fixed rule on [-1, 1], mapped per panel."""

    def __init__(self, order: int = 10):
        self.nodes, self.weights = np.polynomial.legendre.leggauss(order)
        self.order = order

    def panel_values(self, fn, owner, piece, a, b):
        """Rule estimates on [a, b] and on its two halves, in one call to ``fn``."""
        m = len(a)
        if m == 0:
            return np.empty(0), np.empty(0)
        k = self.order
        mid = 0.5 * (a + b)
        los = np.concatenate([a, a, mid])
        his = np.concatenate([b, mid, b])
        half = 0.5 * (his - los)
        cen = 0.5 * (his + los)
        z = (cen[:, None] + half[:, None] * self.nodes[None, :]).ravel()
        own = np.repeat(np.tile(owner, 3), k)
        pc = np.repeat(np.tile(piece, 3), k)
        vals = np.asarray(fn(own, pc, z), dtype=float).reshape(3 * m, k)
        est = (vals @ self.weights) * half
        whole = est[:m]
        halves = est[m:2 * m] + est[2 * m:]
        return whole, halves


def integrate_panels(
    fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    n_owners: int,
    owner: np.ndarray,
    piece: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    rtol: float = 1e-9,
    atol: np.ndarray | float = 1e-12,
    budget: int = 2 ** 16,
    order: int = 10,
) -> QuadResult:
    """Integrate ``fn(owner, piece, z)`` over the given panels, summed per owner.

    Panels must not overlap within an owner.  ``atol`` may be an array with one
    entry per owner, which lets callers scale the absolute floor to the local
    size of the answer.
    """
    rule = GaussLegendre(order)
    owner = np.asarray(owner, dtype=np.int64)
    piece = np.asarray(piece, dtype=np.int64)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    keep = b > a
    owner, piece, a, b = owner[keep], piece[keep], a[keep], b[keep]
    atol = np.broadcast_to(np.asarray(atol, dtype=float), (n_owners,))

    whole, halves = rule.panel_values(fn, owner, piece, a, b)
    err = np.abs(whole - halves)
    val = halves
    # finished panels are folded into these accumulators
    done_val = np.zeros(n_owners)
    done_err = np.zeros(n_owners)
    subdiv = np.zeros(n_owners, dtype=np.int64)
    converged = np.zeros(n_owners, dtype=bool)

    while True:
        tot_val = done_val + np.bincount(owner, val, n_owners)
        tot_err = done_err + np.bincount(owner, err, n_owners)
        tol = np.maximum(np.maximum(atol, rtol * np.abs(tot_val)), 100.0 * _EPS * np.abs(tot_val))
        ok = tot_err <= tol
        exhausted = subdiv >= budget
        active_owner = ~(ok | exhausted)
        converged = ok
        if not active_owner.any():
            break
        act = active_owner[owner]
        # retire panels of settled owners
        if (~act).any():
            done_val += np.bincount(owner[~act], val[~act], n_owners)
            done_err += np.bincount(owner[~act], err[~act], n_owners)
        owner, piece, a, b, val, err = owner[act], piece[act], a[act], b[act], val[act], err[act]
        counts = np.bincount(owner, minlength=n_owners)
        share = tol[owner] / (2.0 * counts[owner])
        split = err > share
        # panels too narrow to split further are frozen
        narrow = (b - a) <= 64.0 * _EPS * np.maximum(np.abs(a), np.abs(b))
        split &= ~narrow
        if not split.any():
            # nothing left that can be refined; owners stay unconverged
            done_val += np.bincount(owner, val, n_owners)
            done_err += np.bincount(owner, err, n_owners)
            owner = owner[:0]
            a = b = val = err = a[:0]
            piece = piece[:0]
            subdiv[active_owner] = np.maximum(subdiv[active_owner], budget)
            continue
        so, sp, sa, sb = owner[split], piece[split], a[split], b[split]
        mid = 0.5 * (sa + sb)
        no = np.concatenate([so, so])
        npc = np.concatenate([sp, sp])
        na = np.concatenate([sa, mid])
        nb = np.concatenate([mid, sb])
        w2, h2 = rule.panel_values(fn, no, npc, na, nb)
        subdiv += np.bincount(so, minlength=n_owners)
        keepm = ~split
        owner = np.concatenate([owner[keepm], no])
        piece = np.concatenate([piece[keepm], npc])
        a = np.concatenate([a[keepm], na])
        b = np.concatenate([b[keepm], nb])
        val = np.concatenate([val[keepm], h2])
        err = np.concatenate([err[keepm], np.abs(w2 - h2)])

    tot_val = done_val + np.bincount(owner, val, n_owners)
    tot_err = done_err + np.bincount(owner, err, n_owners)
    return QuadResult(tot_val, tot_err, converged, subdiv)
