"""Batch point-evaluation kernels with import-time lane selection.

The compiled Cython lane is used when its extension imported successfully;
otherwise the numpy lane takes over with identical semantics. Set
HYBRID_MTE_KERNEL=pure or =compiled to force a lane (the latter raises if
the extension is unavailable).
"""

from __future__ import annotations

import os
from typing import Mapping

import numpy as np

from ..errors import InvalidPoint
from ..expcalc import PiecewiseFn, evaluate
from . import pyeval
from .flatten import FlatFn, flatten

_FORCED = os.environ.get("HYBRID_MTE_KERNEL", "").strip().lower()

_compiled = None
if _FORCED != "pure":
    try:
        from . import _evalcore as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None
if _FORCED == "compiled" and _compiled is None:
    raise ImportError("HYBRID_MTE_KERNEL=compiled but the extension is missing")

ACTIVE_LANE = "compiled" if _compiled is not None else "pure"


def eval_flat(flat: FlatFn, pts: np.ndarray, lane: str | None = None) -> np.ndarray:
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    use = lane or ACTIVE_LANE
    if use == "compiled":
        if _compiled is None:
            raise InvalidPoint("compiled lane requested but unavailable")
        out = np.zeros(pts.shape[0])
        _compiled.eval_batch(
            pts,
            flat.pc_start,
            flat.c_coeff,
            flat.c_const,
            flat.c_strict,
            flat.pt_start,
            flat.t_coeff,
            flat.t_pow,
            flat.t_exp,
            flat.t_expc,
            out,
        )
        return out
    return pyeval.eval_batch(flat, pts)


def eval_batch(
    f: PiecewiseFn, cols: Mapping[str, np.ndarray], lane: str | None = None
) -> np.ndarray:
    if not f.vars:
        n = len(next(iter(cols.values()))) if cols else 1
        return np.full(n, evaluate(f, {}))
    first = None
    for v in f.vars:
        if v not in cols:
            raise InvalidPoint(f"columns are missing variable {v!r}")
        if first is None:
            first = np.asarray(cols[v], dtype=np.float64)
    n = len(first)
    pts = np.empty((n, len(f.vars)))
    for j, v in enumerate(f.vars):
        pts[:, j] = cols[v]
    return eval_flat(flatten(f), pts, lane)
