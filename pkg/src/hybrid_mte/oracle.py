"""Brute-force numerical checks that bypass the propagation engine.

Three independent tools: dense Simpson quadrature over the joint (after
composing deterministic definitions symbolically), ancestral Monte Carlo
sampling, and plain Gaussian elimination for linear-equation reduction.
They share nothing with the join tree code beyond the density calculus
itself, so agreement between the two paths exercises the potential algebra
rather than restating it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .config import ZERO_EPS
from .errors import (
    DegenerateDensity,
    DomainMismatch,
    NonInvertibleEquation,
    OracleDimension,
    UnknownState,
    UnknownVariable,
    UnsupportedElimination,
)
from .expcalc import (
    Constraint,
    ExpPolyTerm,
    PiecewiseFn,
    Region,
    eliminate_integrate,
    evaluate,
    multiply,
    substitute_linear,
    support_interval,
)
from .kernels import eval_batch
from .linexpr import LinExpr
from .model import (
    DensitySpec,
    LinearEquationSpec,
    MassTable,
    Network,
    NormalTemplate,
    density_fn,
)

_BATCH_LIMIT = 2_000_000  # grid points evaluated per kernel call


@dataclass(frozen=True)
class QuadratureSpec:
    points_per_axis: int = 2001
    bounds: Mapping[str, tuple[float, float]] | None = None

    def __post_init__(self) -> None:
        n = self.points_per_axis
        if n < 3 or n % 2 == 0:
            raise DomainMismatch(
                "points_per_axis must be odd and at least 3"
            )


def _topo_order(n: Network) -> list[str]:
    seen: dict[str, int] = {}
    out: list[str] = []

    def visit(name: str) -> None:
        if seen.get(name) == 2:
            return
        seen[name] = 1
        for p in n.by_name[name].parents:
            visit(p)
        seen[name] = 2
        out.append(name)

    for v in n.variables:
        visit(v.name)
    return out


def _check_evidence(n: Network, evidence: Mapping[str, object]) -> dict[str, object]:
    clean: dict[str, object] = {}
    for name, value in evidence.items():
        if name not in n.by_name:
            raise UnknownVariable(f"evidence names unknown variable {name!r}")
        var = n.by_name[name]
        if var.kind == "discrete":
            label = str(value)
            if label not in var.states:
                raise UnknownState(f"{label!r} is not a state of {name!r}")
            clean[name] = label
        else:
            clean[name] = float(value)
    return clean


def _parent_cfg(n: Network, name: str, cfg: Mapping[str, str]) -> tuple:
    return tuple(cfg[p] for p in n.discrete_parents(name))


def _resolve(e: LinExpr, defs: Mapping[str, LinExpr]) -> LinExpr:
    changed = True
    while changed:
        changed = False
        for u in e.vars:
            if u in defs:
                e = e.substitute(u, defs[u])
                changed = True
                break
    return e


def _region_range(
    region: Region, u: str, box: Mapping[str, tuple[float, float]]
) -> tuple[float, float]:
    """Exact [min, max] of u over the region, helped by known var bounds."""
    order = region.vars
    if u not in order:
        return (-np.inf, np.inf)
    a_ub: list[list[float]] = []
    b_ub: list[float] = []
    for c in region.constraints:
        a_ub.append([-c.expr.coeff(w) for w in order])
        b_ub.append(c.expr.const)
    var_bounds = [box.get(w, (None, None)) for w in order]
    out = []
    for sign in (1.0, -1.0):
        cvec = [0.0] * len(order)
        cvec[order.index(u)] = sign
        res = linprog(
            cvec, A_ub=a_ub or None, b_ub=b_ub or None,
            bounds=var_bounds, method="highs",
        )
        if res.status != 0:
            out.append(sign * -np.inf)
        else:
            out.append(res.fun if sign > 0 else -res.fun)
    return (out[0], out[1])


def _support_box(
    fns: Sequence[PiecewiseFn],
    free: Sequence[str],
    override: Mapping[str, tuple[float, float]] | None,
) -> dict[str, tuple[float, float]] | None:
    """Tightest per-variable interval hull; None marks an empty support.

    Bounds propagate: a conditional strip is unbounded on its own but
    becomes finite once the variables it leans on have intervals, so passes
    repeat until nothing improves.
    """
    box: dict[str, tuple[float, float]] = {}
    pending: list[str] = []
    for u in free:
        if override and u in override:
            box[u] = (float(override[u][0]), float(override[u][1]))
        else:
            pending.append(u)
    for _ in range(len(pending) + 1):
        if not pending:
            break
        progressed = False
        for u in list(pending):
            lo, hi = -np.inf, np.inf
            bounded = False
            for fn in fns:
                if u not in fn.vars:
                    continue
                f_lo, f_hi = np.inf, -np.inf
                for region, _ in fn.pieces:
                    r_lo, r_hi = _region_range(region, u, box)
                    f_lo = min(f_lo, r_lo)
                    f_hi = max(f_hi, r_hi)
                if f_lo > -np.inf and f_hi < np.inf:
                    bounded = True
                    lo = max(lo, f_lo)
                    hi = min(hi, f_hi)
            if bounded:
                if hi <= lo:
                    return None
                box[u] = (lo, hi)
                pending.remove(u)
                progressed = True
        if not progressed:
            break
    if pending:
        raise DegenerateDensity(
            f"support of {pending[0]!r} is unbounded; quadrature needs bounds"
        )
    return box


def _simpson_axis(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    xs = np.linspace(lo, hi, n)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (hi - lo) / (n - 1) / 3.0
    return xs, w


def _integrate(
    fns: Sequence[PiecewiseFn],
    free: Sequence[str],
    box: Mapping[str, tuple[float, float]],
    n_pts: int,
    value: LinExpr,
) -> tuple[float, float, float]:
    """(integral, integral of value*f, integral of value^2*f)."""
    if not free:
        cell = 1.0
        for fn in fns:
            cell *= evaluate(fn, {})
        val = value.const
        return cell, cell * val, cell * val * val
    axes = [_simpson_axis(*box[u], n_pts) for u in free]
    shape = tuple(n_pts for _ in free)
    total = int(np.prod(shape))
    outer = shape[0]
    inner = total // outer
    chunk = max(1, _BATCH_LIMIT // max(inner, 1))
    acc0 = acc1 = acc2 = 0.0
    inner_grids = (
        np.meshgrid(*(a[0] for a in axes[1:]), indexing="ij")
        if len(free) > 1
        else []
    )
    inner_w = np.ones(inner)
    if len(free) > 1:
        for g in np.meshgrid(*(a[1] for a in axes[1:]), indexing="ij"):
            inner_w = inner_w * g.reshape(-1)
    for start in range(0, outer, chunk):
        stop = min(outer, start + chunk)
        m = stop - start
        cols: dict[str, np.ndarray] = {
            free[0]: np.repeat(axes[0][0][start:stop], inner)
        }
        for j, u in enumerate(free[1:]):
            cols[u] = np.tile(inner_grids[j].reshape(-1), m)
        w = np.repeat(axes[0][1][start:stop], inner) * np.tile(inner_w, m)
        dens = np.ones(m * inner)
        for fn in fns:
            dens *= eval_batch(fn, cols)
        val = value.evaluate_cols(cols)
        fw = dens * w
        acc0 += float(fw.sum())
        acc1 += float((fw * val).sum())
        acc2 += float((fw * val * val).sum())
    return acc0, acc1, acc2


def quadrature_posterior(
    n: Network,
    evidence: Mapping[str, object],
    v: str,
    spec: QuadratureSpec | None = None,
) -> tuple[float, float, float]:
    """Posterior mean/variance of v plus evidence weight, by quadrature.

    Deterministic variables are substituted away symbolically (chains
    compose); observing one adds a linear constraint that is solved for the
    parent with the largest coefficient, and the change of variables
    contributes the usual 1/|a| factor. What remains is a sum over discrete
    configurations of at most three-dimensional Simpson integrals.
    """
    spec = spec or QuadratureSpec()
    if v not in n.by_name:
        raise UnknownVariable(f"unknown variable {v!r}")
    evidence = _check_evidence(n, evidence)
    order = _topo_order(n)
    discrete = [u for u in order if n.by_name[u].kind == "discrete"]
    continuous = [u for u in order if n.by_name[u].kind == "continuous"]
    det = [u for u in order if n.by_name[u].kind == "deterministic"]

    state_lists = []
    for d in discrete:
        if d in evidence:
            state_lists.append((evidence[d],))
        else:
            state_lists.append(n.by_name[d].states)

    weight = 0.0
    num1 = 0.0
    num2 = 0.0
    for states in product(*state_lists):
        cfg = dict(zip(discrete, states))
        p_disc = 1.0
        for d in discrete:
            table = n.cpds[d]
            assert isinstance(table, MassTable)
            p_disc *= table.rows[_parent_cfg(n, d, cfg)][cfg[d]]
        if p_disc == 0.0:
            continue

        # deterministic definitions, composed down to continuous roots
        defs: dict[str, LinExpr] = {}
        for t in det:
            eq = n.cpds[t]
            assert isinstance(eq, LinearEquationSpec)
            lhs = eq.per_config[_parent_cfg(n, t, cfg)]
            rhs = lhs.solve_for(t)
            defs[t] = _resolve(rhs, defs)

        # evidence: pin roots, solve constraints from observed deterministics
        subst: dict[str, LinExpr] = {}
        jac = 1.0
        for name, value in evidence.items():
            kind = n.by_name[name].kind
            if kind == "continuous":
                subst[name] = LinExpr.constant(float(value))
        for name, value in evidence.items():
            if n.by_name[name].kind != "deterministic":
                continue
            constraint = _resolve(defs[name], subst) + (-float(value))
            candidates = {
                u: constraint.coeff(u)
                for u in constraint.vars
                if abs(constraint.coeff(u)) >= ZERO_EPS
            }
            if not candidates:
                raise NonInvertibleEquation(
                    f"evidence on {name!r} yields no solvable constraint"
                )
            pivot = max(sorted(candidates), key=lambda u: abs(candidates[u]))
            subst[pivot] = constraint.solve_for(pivot)
            jac /= abs(candidates[pivot])

        free = [
            u for u in continuous if u not in subst
        ]
        if len(free) > 3:
            raise OracleDimension(
                f"{len(free)} free dimensions exceed the quadrature limit of 3"
            )

        fns = []
        empty = False
        for c in continuous:
            fn = density_fn(n, c, _parent_cfg(n, c, cfg))
            for u in tuple(fn.vars):
                if u in free:
                    continue
                repl = _resolve(
                    defs.get(u, LinExpr({u: 1.0})), {**defs, **subst}
                )
                fn = substitute_linear(fn, u, repl)
            if fn.is_zero() or (not fn.vars and evaluate(fn, {}) == 0.0):
                empty = True
                break
            fns.append(fn)
        if empty:
            continue

        if v in cfg:
            value = LinExpr.constant(float(cfg[v]))
        else:
            value = _resolve(LinExpr({v: 1.0}), {**defs, **subst})

        box = _support_box(fns, free, spec.bounds)
        if box is None:
            continue
        cell0, cell1, cell2 = _integrate(
            fns, free, box, spec.points_per_axis, value
        )
        weight += p_disc * jac * cell0
        num1 += p_disc * jac * cell1
        num2 += p_disc * jac * cell2

    if not weight > 0.0:
        raise DegenerateDensity("evidence weight is zero")
    mean = num1 / weight
    return mean, num2 / weight - mean * mean, weight


_CDF_VAR = "_cdf_bound"


def _cdf_of(fn: PiecewiseFn, v: str) -> PiecewiseFn:
    """Closed-form CDF of a one-variable density, as a function of the bound."""
    gate = PiecewiseFn(
        (v, _CDF_VAR),
        (
            (
                Region((v, _CDF_VAR), (Constraint(LinExpr({_CDF_VAR: 1.0, v: -1.0})),)),
                (ExpPolyTerm(1.0, (), LinExpr()),),
            ),
        ),
    )
    return eliminate_integrate(multiply(fn.extended((_CDF_VAR,)), gate), v)


@lru_cache(maxsize=None)
def _std_template_tools() -> tuple[PiecewiseFn, float, float, float]:
    from .model import make_normal_mte

    var = "_std_t"
    fn = make_normal_mte(var, LinExpr(), 1.0)
    lo, hi = support_interval(fn, var)
    cdf = _cdf_of(fn, var)
    total = evaluate(cdf, {_CDF_VAR: hi})
    return cdf, lo, hi, total


def _inv_cdf(cdf: PiecewiseFn, lo: float, hi: float, targets: np.ndarray) -> np.ndarray:
    lo_a = np.full(targets.shape, lo)
    hi_a = np.full(targets.shape, hi)
    for _ in range(60):
        mid = 0.5 * (lo_a + hi_a)
        below = eval_batch(cdf, {_CDF_VAR: mid}) < targets
        lo_a = np.where(below, mid, lo_a)
        hi_a = np.where(below, hi_a, mid)
    return 0.5 * (lo_a + hi_a)


def forward_sample(n: Network, count: int, seed: int) -> np.ndarray:
    """Ancestral samples, one column per variable in network order.

    Discrete states are reported as float(label) when every label parses as
    a number, otherwise as the state index. Explicit densities must not
    depend on continuous parents (templates may).
    """
    rng = np.random.default_rng(seed)
    cols: dict[str, np.ndarray] = {}
    idx_cols: dict[str, np.ndarray] = {}
    order = _topo_order(n)
    explicit_cdfs: dict[int, tuple[PiecewiseFn, float, float, float]] = {}

    for name in order:
        var = n.by_name[name]
        dparents = n.discrete_parents(name)
        groups: list[tuple[tuple, np.ndarray]] = []
        if dparents:
            for pcfg in product(*(n.by_name[p].states for p in dparents)):
                mask = np.ones(count, dtype=bool)
                for p, s in zip(dparents, pcfg):
                    mask &= idx_cols[p] == n.by_name[p].states.index(s)
                if mask.any():
                    groups.append((pcfg, mask))
        else:
            groups.append(((), np.ones(count, dtype=bool)))

        if var.kind == "discrete":
            out = np.zeros(count, dtype=np.int64)
            table = n.cpds[name]
            assert isinstance(table, MassTable)
            for pcfg, mask in groups:
                row = table.rows[pcfg]
                probs = np.array([row[s] for s in var.states], dtype=float)
                probs = probs / probs.sum()
                out[mask] = rng.choice(len(var.states), size=int(mask.sum()), p=probs)
            idx_cols[name] = out
            try:
                values = np.array([float(s) for s in var.states])
                cols[name] = values[out]
            except ValueError:
                cols[name] = out.astype(float)
            continue

        if var.kind == "deterministic":
            eq = n.cpds[name]
            assert isinstance(eq, LinearEquationSpec)
            out = np.zeros(count)
            for pcfg, mask in groups:
                rhs = eq.per_config[pcfg].solve_for(name)
                vals = np.full(int(mask.sum()), rhs.const)
                for u, c in rhs.coeffs.items():
                    vals += c * cols[u][mask]
                out[mask] = vals
            cols[name] = out
            continue

        out = np.zeros(count)
        dens = n.cpds[name]
        assert isinstance(dens, DensitySpec)
        u_draw = rng.random(count)
        for pcfg, mask in groups:
            shape = dens.per_config[pcfg]
            m = int(mask.sum())
            if isinstance(shape, NormalTemplate):
                cdf, lo, hi, total = _std_template_tools()
                t = _inv_cdf(cdf, lo, hi, u_draw[mask] * total)
                mean = np.full(m, shape.mean.const)
                for u, c in shape.mean.coeffs.items():
                    mean += c * cols[u][mask]
                out[mask] = mean + np.sqrt(shape.variance) * t
            else:
                fn = shape.fn
                if set(fn.vars) != {name}:
                    raise UnsupportedElimination(
                        "sampling needs explicit densities free of "
                        "continuous parents"
                    )
                key = id(fn)
                if key not in explicit_cdfs:
                    lo, hi = support_interval(fn, name)
                    cdf = _cdf_of(fn, name)
                    total = evaluate(cdf, {_CDF_VAR: hi})
                    explicit_cdfs[key] = (cdf, lo, hi, total)
                cdf, lo, hi, total = explicit_cdfs[key]
                out[mask] = _inv_cdf(cdf, lo, hi, u_draw[mask] * total)
        cols[name] = out

    matrix = np.empty((count, len(n.variables)))
    for j, var in enumerate(n.variables):
        matrix[:, j] = cols[var.name]
    return matrix


def solve_linear_system(
    eqs: Sequence[LinExpr], eliminate: Sequence[str]
) -> LinExpr:
    """Reduce a linear system to one equation on the remaining variables.

    Gaussian elimination with partial pivoting; the result is scaled so the
    last remaining variable (sorted by name) has coefficient exactly 1.
    """
    rows = list(eqs)
    if len(rows) != len(eliminate) + 1:
        raise DomainMismatch(
            f"{len(rows)} equations cannot eliminate {len(eliminate)} "
            "variables into a single result"
        )
    for u in eliminate:
        pivot_i = None
        pivot_c = 0.0
        for i, row in enumerate(rows):
            c = row.coeff(u)
            if abs(c) > abs(pivot_c):
                pivot_i, pivot_c = i, c
        if pivot_i is None or abs(pivot_c) < ZERO_EPS:
            raise NonInvertibleEquation(
                f"system is singular in {u!r}"
            )
        pivot = rows.pop(pivot_i)
        rows = [
            row + pivot * (-row.coeff(u) / pivot_c) if row.coeff(u) != 0.0 else row
            for row in rows
        ]
    (result,) = rows
    live = [u for u in result.vars if abs(result.coeff(u)) >= ZERO_EPS]
    if not live:
        raise NonInvertibleEquation("elimination left a constant equation")
    head = sorted(live)[-1]
    return result * (1.0 / result.coeff(head))
