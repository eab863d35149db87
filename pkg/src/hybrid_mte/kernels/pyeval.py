"""Pure-Python (numpy) evaluation lane.

Vectorizes over points piece by piece: points not yet claimed by an earlier
piece are tested against the piece's constraints, and term values are summed
on the matching subset. Semantics match scalar evaluate exactly, including
first-piece-wins on shared boundaries.
"""

from __future__ import annotations

import numpy as np

from .flatten import FlatFn


def eval_batch(flat: FlatFn, pts: np.ndarray) -> np.ndarray:
    n_pts = pts.shape[0]
    out = np.zeros(n_pts)
    undecided = np.ones(n_pts, dtype=bool)
    n_pieces = len(flat.pc_start) - 1
    for p in range(n_pieces):
        if not undecided.any():
            break
        mask = undecided.copy()
        for c in range(flat.pc_start[p], flat.pc_start[p + 1]):
            val = pts @ flat.c_coeff[c] + flat.c_const[c]
            mask &= (val > 0.0) if flat.c_strict[c] else (val >= 0.0)
            if not mask.any():
                break
        if not mask.any():
            continue
        sub = pts[mask]
        acc = np.zeros(sub.shape[0])
        for t in range(flat.pt_start[p], flat.pt_start[p + 1]):
            tv = flat.t_coeff[t] * np.exp(sub @ flat.t_exp[t] + flat.t_expc[t])
            for j in range(flat.n_vars):
                k = flat.t_pow[t, j]
                if k:
                    tv = tv * sub[:, j] ** k
            acc += tv
        out[mask] = acc
        undecided &= ~mask
    return out
