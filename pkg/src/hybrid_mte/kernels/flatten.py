"""Flatten a PiecewiseFn into contiguous arrays for batch evaluation.

Both evaluation lanes consume the same layout: constraint rows and term rows
are concatenated across pieces with start-offset index arrays, so a kernel
can walk pieces in order and stop at the first region containing the point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..expcalc import PiecewiseFn


@dataclass(frozen=True)
class FlatFn:
    n_vars: int
    pc_start: np.ndarray  # (P+1,) int64, constraint row offsets
    c_coeff: np.ndarray  # (C, n_vars)
    c_const: np.ndarray  # (C,)
    c_strict: np.ndarray  # (C,) uint8
    pt_start: np.ndarray  # (P+1,) int64, term row offsets
    t_coeff: np.ndarray  # (T,)
    t_pow: np.ndarray  # (T, n_vars) int64
    t_exp: np.ndarray  # (T, n_vars)
    t_expc: np.ndarray  # (T,)


def flatten(f: PiecewiseFn) -> FlatFn:
    cached = getattr(f, "_flat_cache", None)
    if cached is not None:
        return cached
    idx = {v: j for j, v in enumerate(f.vars)}
    n = len(f.vars)
    pc_start, pt_start = [0], [0]
    c_coeff, c_const, c_strict = [], [], []
    t_coeff, t_pow, t_exp, t_expc = [], [], [], []
    for region, terms in f.pieces:
        for c in region.constraints:
            row = np.zeros(n)
            for v, a in c.expr.coeffs.items():
                row[idx[v]] = a
            c_coeff.append(row)
            c_const.append(c.expr.const)
            c_strict.append(1 if c.strict else 0)
        pc_start.append(len(c_coeff))
        for t in terms:
            prow = np.zeros(n, dtype=np.int64)
            for v, k in t.powers.items():
                prow[idx[v]] = k
            erow = np.zeros(n)
            for v, a in t.exp_arg.coeffs.items():
                erow[idx[v]] = a
            t_coeff.append(t.coeff)
            t_pow.append(prow)
            t_exp.append(erow)
            t_expc.append(t.exp_arg.const)
        pt_start.append(len(t_coeff))

    def stack(rows: list, dtype) -> np.ndarray:
        if rows:
            return np.ascontiguousarray(np.vstack(rows), dtype=dtype)
        return np.zeros((0, n), dtype=dtype)

    flat = FlatFn(
        n_vars=n,
        pc_start=np.asarray(pc_start, dtype=np.int64),
        c_coeff=stack(c_coeff, np.float64),
        c_const=np.asarray(c_const, dtype=np.float64),
        c_strict=np.asarray(c_strict, dtype=np.uint8),
        pt_start=np.asarray(pt_start, dtype=np.int64),
        t_coeff=np.asarray(t_coeff, dtype=np.float64),
        t_pow=stack(t_pow, np.int64),
        t_exp=stack(t_exp, np.float64),
        t_expc=np.asarray(t_expc, dtype=np.float64),
    )
    object.__setattr__(f, "_flat_cache", flat)
    return flat
