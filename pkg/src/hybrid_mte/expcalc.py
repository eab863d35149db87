"""Closed-form calculus for piecewise exponential-polynomial functions.

A function is stored as an ordered list of pieces. Each piece pairs a Region
(a conjunction of linear constraints ``expr >= 0`` or ``expr > 0``, i.e. a
convex polytope) with a list of terms of the form

    coeff * prod(v ** powers[v]) * exp(exp_arg)

where ``exp_arg`` is linear in the variables. The function is zero outside
the union of pieces. Pieces must be pairwise interior-disjoint; on shared
boundaries the first piece in list order wins, which is how half-open
hypercubes like ``[-3, 0) [0, 3]`` are encoded.

The class of such functions is closed under pointwise product, linear
substitution, and integration over one variable with piecewise-linear bounds,
so every operation here returns another PiecewiseFn. Integration works per
piece: bound candidates for the eliminated variable are collected from the
constraints, the remaining region is split into cells on which the active
lower/upper bounds are fixed, and an antiderivative is evaluated at those
(linear) bounds. Splitting is also how overlapping pieces are merged when
functions are summed.

Feasibility of a region means an interior point exists. Axis-aligned
constraint sets are decided by interval arithmetic; anything with a genuinely
multivariate constraint falls back to a Chebyshev-center linear program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .config import FEAS_TOL, MAX_DEGREE, MAX_VARS, ZERO_EPS, max_pieces
from .errors import (
    CapacityExceeded,
    DegenerateDensity,
    DivergentIntegral,
    DomainMismatch,
    InvalidPoint,
)
from .linexpr import LinExpr

# Box used to keep feasibility LPs bounded; supports handled here are tiny
# compared to this.
_LP_BOX = 1e6

_UNSET = object()


@dataclass(frozen=True)
class Constraint:
    """``expr >= 0`` (or ``expr > 0`` when strict)."""

    expr: LinExpr
    strict: bool = False

    def holds(self, point: Mapping[str, float]) -> bool:
        v = self.expr.evaluate(point)
        return v > 0.0 if self.strict else v >= 0.0

    def substitute(self, v: str, repl: LinExpr) -> Constraint:
        return Constraint(self.expr.substitute(v, repl), self.strict)

    def __repr__(self) -> str:
        return f"{self.expr!r} {'>' if self.strict else '>='} 0"


@dataclass(frozen=True)
class Region:
    """Conjunction of linear constraints over an ordered variable tuple."""

    vars: tuple[str, ...]
    constraints: tuple[Constraint, ...] = ()
    _interior: object = field(default=_UNSET, repr=False, compare=False)

    def contains(self, point: Mapping[str, float]) -> bool:
        return all(c.holds(point) for c in self.constraints)

    def contains_slack(self, point: Mapping[str, float], tol: float) -> bool:
        """Membership for points known to sit away from boundaries."""
        return all(c.expr.evaluate(point) > -tol for c in self.constraints)

    def interior_point(self) -> dict[str, float] | None:
        if self._interior is _UNSET:
            object.__setattr__(
                self, "_interior", _interior_point(self.vars, self.constraints)
            )
        return self._interior  # type: ignore[return-value]

    def has_interior(self) -> bool:
        return self.interior_point() is not None

    def substituted(self, v: str, repl: LinExpr, new_vars: tuple[str, ...]) -> Region | None:
        """Rewrite constraints under v := repl; None when a constraint

        becomes constant-false (the piece disappears)."""
        out: list[Constraint] = []
        for c in self.constraints:
            expr = c.expr.substitute(v, repl)
            if expr.is_constant():
                ok = expr.const > 0.0 if c.strict else expr.const >= 0.0
                if not ok:
                    return None
                continue
            out.append(Constraint(expr, c.strict))
        return Region(new_vars, tuple(out))


def _interior_point(
    vars: tuple[str, ...], constraints: Sequence[Constraint]
) -> dict[str, float] | None:
    lo: dict[str, float] = {v: -math.inf for v in vars}
    hi: dict[str, float] = {v: math.inf for v in vars}
    multi: list[Constraint] = []
    for c in constraints:
        cv = c.expr.vars
        if not cv:
            ok = c.expr.const > FEAS_TOL if c.strict else c.expr.const >= -FEAS_TOL
            if not ok:
                return None
        elif len(cv) == 1:
            (v,) = cv
            a = c.expr.coeff(v)
            bound = -c.expr.const / a
            if a > 0:
                lo[v] = max(lo.get(v, -math.inf), bound)
            else:
                hi[v] = min(hi.get(v, math.inf), bound)
        else:
            multi.append(c)
    for v in set(lo) | set(hi):
        if hi.get(v, math.inf) - lo.get(v, -math.inf) <= FEAS_TOL:
            return None
    order = tuple(vars) if vars else tuple(sorted({u for c in constraints for u in c.expr.vars}))
    if not multi:
        point: dict[str, float] = {}
        for v in order:
            l, h = lo.get(v, -math.inf), hi.get(v, math.inf)
            if math.isinf(l) and math.isinf(h):
                point[v] = 0.0
            elif math.isinf(l):
                point[v] = h - 1.0
            elif math.isinf(h):
                point[v] = l + 1.0
            else:
                point[v] = 0.5 * (l + h)
        return point
    # Chebyshev center: maximize r subject to a.z + b >= r * ||a||.
    idx = {v: i for i, v in enumerate(order)}
    n = len(order)
    rows, rhs = [], []
    for c in constraints:
        if c.expr.is_constant():
            continue
        row = np.zeros(n + 1)
        for v, a in c.expr.coeffs.items():
            row[idx[v]] = -a
        row[n] = math.hypot(*c.expr.coeffs.values())
        rows.append(row)
        rhs.append(c.expr.const)
    bounds = [
        (max(lo.get(v, -math.inf), -_LP_BOX), min(hi.get(v, math.inf), _LP_BOX))
        for v in order
    ] + [(0.0, 1.0)]
    cost = np.zeros(n + 1)
    cost[n] = -1.0
    res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs")
    if not res.success or -res.fun <= FEAS_TOL:
        return None
    return {v: float(res.x[idx[v]]) for v in order}


PowKey = tuple[tuple[str, int], ...]


def _merge_powkeys(a: PowKey, b: PowKey) -> PowKey:
    acc = dict(a)
    for v, k in b:
        acc[v] = acc.get(v, 0) + k
    return tuple(sorted(acc.items()))


def _linexpr_pow(e: LinExpr, k: int) -> dict[PowKey, float]:
    """Expand e ** k into a sparse polynomial {powers: coeff}."""
    base: dict[PowKey, float] = {}
    if e.const != 0.0:
        base[()] = e.const
    for v, c in e.coeffs.items():
        base[((v, 1),)] = c
    acc: dict[PowKey, float] = {(): 1.0}
    for _ in range(k):
        nxt: dict[PowKey, float] = {}
        for p1, c1 in acc.items():
            for p2, c2 in base.items():
                key = _merge_powkeys(p1, p2)
                nxt[key] = nxt.get(key, 0.0) + c1 * c2
        acc = nxt
    return acc


@dataclass(frozen=True)
class ExpPolyTerm:
    """coeff * prod(v ** powers[v]) * exp(exp_arg)."""

    coeff: float
    powers: Mapping[str, int] = field(default_factory=dict)
    exp_arg: LinExpr = field(default_factory=LinExpr)

    def __post_init__(self) -> None:
        raw = dict(self.powers)
        clean = {v: int(k) for v, k in sorted(raw.items()) if k != 0}
        if any(k < 0 for k in clean.values()):
            raise DomainMismatch("negative powers are not representable")
        object.__setattr__(self, "powers", clean)
        object.__setattr__(self, "coeff", float(self.coeff))

    @property
    def vars(self) -> set[str]:
        return set(self.powers) | set(self.exp_arg.vars)

    @property
    def degree(self) -> int:
        return sum(self.powers.values())

    def value(self, point: Mapping[str, float]) -> float:
        x = self.coeff
        for v, k in self.powers.items():
            x *= point[v] ** k
        return x * math.exp(self.exp_arg.evaluate(point))

    def scaled(self, k: float) -> ExpPolyTerm:
        return ExpPolyTerm(self.coeff * k, self.powers, self.exp_arg)

    def __mul__(self, other: ExpPolyTerm) -> ExpPolyTerm:
        return ExpPolyTerm(
            self.coeff * other.coeff,
            _merge_powkeys(tuple(self.powers.items()), tuple(other.powers.items())),
            self.exp_arg + other.exp_arg,
        )

    def substituted(self, v: str, repl: LinExpr) -> list[ExpPolyTerm]:
        """Replace v by the linear expression repl; monomials expand."""
        n = self.powers.get(v, 0)
        rest = {u: k for u, k in self.powers.items() if u != v}
        exp_arg = self.exp_arg.substitute(v, repl)
        if n == 0:
            return [ExpPolyTerm(self.coeff, rest, exp_arg)]
        out = []
        for powkey, c in _linexpr_pow(repl, n).items():
            merged = _merge_powkeys(tuple(rest.items()), powkey)
            out.append(ExpPolyTerm(self.coeff * c, merged, exp_arg))
        return out


def _merge_terms(terms: Iterable[ExpPolyTerm]) -> tuple[ExpPolyTerm, ...]:
    """Collapse terms with identical powers and exponent argument."""
    acc: dict[tuple, list] = {}
    for t in terms:
        key = (
            tuple(t.powers.items()),
            tuple(t.exp_arg.coeffs.items()),
            t.exp_arg.const,
        )
        slot = acc.get(key)
        if slot is None:
            acc[key] = [t.coeff, t]
        else:
            slot[0] += t.coeff
    out = []
    for coeff, proto in acc.values():
        if coeff != 0.0:
            out.append(ExpPolyTerm(coeff, proto.powers, proto.exp_arg))
    return tuple(out)


def _check_degree(terms: Iterable[ExpPolyTerm]) -> None:
    for t in terms:
        if t.degree > MAX_DEGREE:
            raise CapacityExceeded(
                f"monomial degree {t.degree} exceeds cap {MAX_DEGREE}"
            )


Piece = tuple[Region, tuple[ExpPolyTerm, ...]]


@dataclass(frozen=True)
class PiecewiseFn:
    vars: tuple[str, ...]
    pieces: tuple[Piece, ...] = ()

    def __post_init__(self) -> None:
        if len(self.vars) > MAX_VARS:
            raise CapacityExceeded(
                f"{len(self.vars)} variables exceeds cap {MAX_VARS}"
            )
        if len(self.pieces) > max_pieces():
            raise CapacityExceeded(
                f"{len(self.pieces)} pieces exceeds cap {max_pieces()}"
            )
        allowed = set(self.vars)
        for region, terms in self.pieces:
            used = {u for c in region.constraints for u in c.expr.vars}
            used |= {u for t in terms for u in t.vars}
            if not used <= allowed:
                raise DomainMismatch(
                    f"piece uses {sorted(used - allowed)} outside {self.vars}"
                )

    @staticmethod
    def zero(vars: tuple[str, ...] = ()) -> PiecewiseFn:
        return PiecewiseFn(vars, ())

    @staticmethod
    def one() -> PiecewiseFn:
        return PiecewiseFn((), ((Region((), ()), (ExpPolyTerm(1.0),)),))

    def is_zero(self) -> bool:
        return not self.pieces

    def as_scalar(self) -> float:
        if self.vars:
            raise DomainMismatch(f"function over {self.vars} is not a scalar")
        return evaluate(self, {})

    def scaled(self, k: float) -> PiecewiseFn:
        if k == 0.0:
            return PiecewiseFn.zero(self.vars)
        return PiecewiseFn(
            self.vars,
            tuple((r, tuple(t.scaled(k) for t in ts)) for r, ts in self.pieces),
        )

    def extended(self, extra: Sequence[str]) -> PiecewiseFn:
        """Same function viewed over a wider variable tuple."""
        new = self.vars + tuple(u for u in extra if u not in self.vars)
        return PiecewiseFn(new, self.pieces) if new != self.vars else self


def evaluate(f: PiecewiseFn, point: Mapping[str, float]) -> float:
    """Value at a point; ties on piece boundaries go to the first piece."""
    for v in f.vars:
        if v not in point:
            raise InvalidPoint(f"point is missing variable {v!r}")
    for region, terms in f.pieces:
        if region.contains(point):
            return sum(t.value(point) for t in terms)
    return 0.0


def evaluate_batch(f: PiecewiseFn, cols: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorized evaluate over coordinate columns (same semantics)."""
    from . import kernels

    return kernels.eval_batch(f, cols)


def multiply(f: PiecewiseFn, g: PiecewiseFn) -> PiecewiseFn:
    """Pointwise product; regions intersect, term lists multiply out."""
    out_vars = f.vars + tuple(u for u in g.vars if u not in f.vars)
    pieces: list[Piece] = []
    for rf, tf in f.pieces:
        for rg, tg in g.pieces:
            region = Region(out_vars, rf.constraints + rg.constraints)
            if not region.has_interior():
                continue
            terms = _merge_terms(a * b for a in tf for b in tg)
            if terms:
                pieces.append((region, terms))
            if len(pieces) > max_pieces():
                raise CapacityExceeded("product exceeds the piece cap")
    return PiecewiseFn(out_vars, tuple(pieces))


def _hyperplane_key(e: LinExpr) -> tuple | None:
    """Canonical key identifying the hyperplane e == 0 up to scale."""
    if not e.coeffs:
        return None
    scale = max(abs(c) for c in e.coeffs.values())
    first = e.coeffs[min(e.coeffs)]
    if first < 0:
        scale = -scale
    return (
        tuple((v, round(c / scale, 12)) for v, c in e.coeffs.items()),
        round(e.const / scale, 12),
    )


def _split_cells(
    out_vars: tuple[str, ...],
    base: tuple[Constraint, ...],
    hyperplanes: Iterable[LinExpr],
) -> list[tuple[Constraint, ...]]:
    """Refine the base region into cells with fixed sign on each hyperplane.

    Cells are kept half-open (>= on one side, strict > on the other) so they
    stay interior-disjoint and jointly cover the base region.
    """
    seen: set[tuple] = set()
    cells = [base]
    for h in hyperplanes:
        key = _hyperplane_key(h)
        if key is None or key in seen:
            continue
        seen.add(key)
        nxt: list[tuple[Constraint, ...]] = []
        for cell in cells:
            pos = cell + (Constraint(h, strict=False),)
            neg = cell + (Constraint(-h, strict=True),)
            pos_ok = Region(out_vars, pos).has_interior()
            neg_ok = Region(out_vars, neg).has_interior()
            if pos_ok and neg_ok:
                nxt.append(pos)
                nxt.append(neg)
            elif pos_ok or neg_ok:
                nxt.append(cell)
            if len(nxt) > max_pieces():
                raise CapacityExceeded("region refinement exceeds the piece cap")
        cells = nxt
    return cells


def _overlay(
    out_vars: tuple[str, ...],
    fragments: Sequence[tuple[float, Region, tuple[ExpPolyTerm, ...]]],
) -> PiecewiseFn:
    """Sum of weighted (region, terms) fragments over a common refinement."""
    fragments = [f for f in fragments if f[2]]
    if not fragments:
        return PiecewiseFn.zero(out_vars)
    planes = [c.expr for _, region, _ in fragments for c in region.constraints]
    cells = _split_cells(out_vars, (), planes)
    pieces: list[Piece] = []
    for cell in cells:
        region = Region(out_vars, cell)
        point = region.interior_point()
        if point is None:
            continue
        bucket: list[ExpPolyTerm] = []
        for w, src, terms in fragments:
            if src.contains_slack(point, FEAS_TOL / 2):
                bucket.extend(t.scaled(w) for t in terms)
        merged = _merge_terms(bucket)
        if merged:
            pieces.append((region, merged))
    return PiecewiseFn(out_vars, tuple(pieces))


def weighted_sum(items: Sequence[tuple[float, PiecewiseFn]]) -> PiecewiseFn:
    """Pointwise sum of weighted functions over identical variable tuples."""
    if not items:
        raise DomainMismatch("weighted_sum of nothing")
    out_vars = items[0][1].vars
    for _, f in items:
        if f.vars != out_vars:
            raise DomainMismatch(
                f"weighted_sum over {f.vars} does not match {out_vars}"
            )
    fragments = [
        (w, region, terms) for w, f in items for region, terms in f.pieces
    ]
    return _overlay(out_vars, fragments)


def substitute_linear(f: PiecewiseFn, v: str, repl: LinExpr) -> PiecewiseFn:
    """Compose with v := repl (repl linear over other variables)."""
    if v not in f.vars:
        raise DomainMismatch(f"{v!r} is not a variable of the function")
    if v in repl.vars:
        raise DomainMismatch(f"replacement for {v!r} mentions itself")
    out_vars = tuple(u for u in f.vars if u != v) + tuple(
        u for u in repl.vars if u not in f.vars
    )
    pieces: list[Piece] = []
    for region, terms in f.pieces:
        new_region = region.substituted(v, repl, out_vars)
        if new_region is None or not new_region.has_interior():
            continue
        new_terms = _merge_terms(
            t2 for t in terms for t2 in t.substituted(v, repl)
        )
        _check_degree(new_terms)
        if new_terms:
            pieces.append((new_region, new_terms))
    return PiecewiseFn(out_vars, tuple(pieces))


def _antideriv_at(
    coeff: float,
    x_powers: PowKey,
    exp_rest: LinExpr,
    n: int,
    b: float,
    bound: LinExpr,
) -> list[ExpPolyTerm]:
    """Evaluate an antiderivative of coeff * x_part * v**n * exp(b v) at a

    linear bound, folding the bound into the remaining variables."""
    out: list[ExpPolyTerm] = []
    if abs(b) <= ZERO_EPS:
        # polynomial branch: v**(n+1) / (n+1)
        for powkey, c in _linexpr_pow(bound, n + 1).items():
            out.append(
                ExpPolyTerm(
                    coeff * c / (n + 1), _merge_powkeys(x_powers, powkey), exp_rest
                )
            )
        return out
    exp_arg = exp_rest + bound * b
    fall = 1.0  # n! / (n-k)!
    for k in range(n + 1):
        c_k = coeff * ((-1.0) ** k) * fall / b ** (k + 1)
        if n - k == 0:
            out.append(ExpPolyTerm(c_k, x_powers, exp_arg))
        else:
            for powkey, c in _linexpr_pow(bound, n - k).items():
                out.append(
                    ExpPolyTerm(c_k * c, _merge_powkeys(x_powers, powkey), exp_arg)
                )
        fall *= n - k
    return out


def _slab_exp_integral(i: int, b: float, d: float) -> float:
    """Stable value of int_0^d t**i * exp(b*t) dt.

    The series has all-positive terms for b > 0 and alternates mildly down to
    b*d = -8; steeper decay switches to the incomplete-gamma form, whose one
    subtraction is benign on that range.
    """
    if b * d >= -8.0:
        term = d ** (i + 1) / (i + 1)
        s = term
        j = 0
        while abs(term) > 1e-18 * abs(s) and j < 400:
            term *= b * d * (i + j + 1) / ((j + 1) * (i + j + 2))
            s += term
            j += 1
        return s
    x = -b * d
    partial = 0.0
    tk = 1.0
    for k in range(i + 1):
        partial += tk
        tk *= x / (k + 1)
    return math.factorial(i) * (1.0 - math.exp(-x) * partial) / (-b) ** (i + 1)


def _slab_antideriv(
    coeff: float,
    x_powers: PowKey,
    exp_rest: LinExpr,
    n: int,
    b: float,
    lo: LinExpr,
    d: float,
) -> list[ExpPolyTerm]:
    """Integrate coeff * x_part * v**n * exp(b v) over [lo(u), lo(u) + d].

    Substituting v = lo(u) + t keeps every emitted coefficient O(d**k): the
    two-anchor closed form defers a 1/b**(k+1) cancellation to evaluation
    time instead, which costs digits whenever pieces stack.
    """
    exp_arg = exp_rest + lo * b
    out: list[ExpPolyTerm] = []
    for i in range(n + 1):
        c_i = coeff * math.comb(n, i) * _slab_exp_integral(i, b, d)
        if n - i == 0:
            out.append(ExpPolyTerm(c_i, x_powers, exp_arg))
        else:
            for powkey, c in _linexpr_pow(lo, n - i).items():
                out.append(
                    ExpPolyTerm(c_i * c, _merge_powkeys(x_powers, powkey), exp_arg)
                )
    return out


def _integrate_piece(
    out_vars: tuple[str, ...],
    region: Region,
    terms: tuple[ExpPolyTerm, ...],
    v: str,
) -> list[tuple[float, Region, tuple[ExpPolyTerm, ...]]]:
    """Integrate one piece over v, returning overlay fragments."""
    base: list[Constraint] = []
    lowers: list[LinExpr] = []
    uppers: list[LinExpr] = []
    for c in region.constraints:
        a = c.expr.coeff(v)
        if a == 0.0:
            base.append(c)
        else:
            bound = c.expr.solve_for(v)
            (lowers if a > 0 else uppers).append(bound)

    split = [li - lj for i, li in enumerate(lowers) for lj in lowers[i + 1:]]
    split += [ui - uj for i, ui in enumerate(uppers) for uj in uppers[i + 1:]]
    cells = _split_cells(out_vars, tuple(base), split)

    fragments = []
    for cell in cells:
        cr = Region(out_vars, cell)
        point = cr.interior_point()
        if point is None:
            continue
        lo = max(lowers, key=lambda e: e.evaluate(point)) if lowers else None
        hi = min(uppers, key=lambda e: e.evaluate(point)) if uppers else None
        if lo is not None and hi is not None:
            gap = hi - lo
            if gap.is_constant():
                if gap.const <= 0.0:
                    continue
            else:
                pos = cell + (Constraint(gap),)
                if not Region(out_vars, pos).has_interior():
                    continue
                if Region(out_vars, cell + (Constraint(-gap, strict=True),)).has_interior():
                    cell = pos
                    cr = Region(out_vars, cell)
        out_terms: list[ExpPolyTerm] = []
        for t in terms:
            n = t.powers.get(v, 0)
            x_powers = tuple((u, k) for u, k in t.powers.items() if u != v)
            b = t.exp_arg.coeff(v)
            exp_rest = LinExpr(
                {u: c for u, c in t.exp_arg.coeffs.items() if u != v},
                t.exp_arg.const,
            )
            if (
                hi is not None
                and lo is not None
                and abs(b) > ZERO_EPS
                and (hi - lo).is_constant()
            ):
                # constant-thickness cell: anchor the integral at the moving
                # lower bound so no closed-form 1/b**k pair is left to cancel
                out_terms.extend(
                    _slab_antideriv(
                        t.coeff, x_powers, exp_rest, n, b, lo, (hi - lo).const
                    )
                )
                continue
            if hi is None:
                if b < -ZERO_EPS:
                    pass  # exp decays, upper limit contributes zero
                else:
                    raise DivergentIntegral(
                        f"piece is unbounded above in {v!r} with a non-decaying term"
                    )
            else:
                out_terms.extend(_antideriv_at(t.coeff, x_powers, exp_rest, n, b, hi))
            if lo is None:
                if b > ZERO_EPS:
                    pass  # exp decays toward -inf
                else:
                    raise DivergentIntegral(
                        f"piece is unbounded below in {v!r} with a non-decaying term"
                    )
            else:
                out_terms.extend(
                    t2.scaled(-1.0)
                    for t2 in _antideriv_at(t.coeff, x_powers, exp_rest, n, b, lo)
                )
        merged = _merge_terms(out_terms)
        _check_degree(merged)
        if merged:
            fragments.append((1.0, cr, merged))
    return fragments


def eliminate_integrate(f: PiecewiseFn, v: str) -> PiecewiseFn:
    """Integrate v out in closed form."""
    if v not in f.vars:
        raise DomainMismatch(f"{v!r} is not a variable of the function")
    out_vars = tuple(u for u in f.vars if u != v)
    fragments: list[tuple[float, Region, tuple[ExpPolyTerm, ...]]] = []
    for region, terms in f.pieces:
        fragments.extend(_integrate_piece(out_vars, region, terms, v))
    return _overlay(out_vars, fragments)


def definite_integral(f: PiecewiseFn) -> float:
    """Integral over all variables (closed form throughout)."""
    g = f
    for v in f.vars:
        g = eliminate_integrate(g, v)
    return g.as_scalar()


def moment(f: PiecewiseFn, v: str, order: int) -> float:
    """Normalized moment E[v**order] of a univariate unnormalized density."""
    if f.vars != (v,):
        raise DomainMismatch(f"moment needs a function of {v!r} alone")
    total = definite_integral(f)
    if not total > 0.0:
        raise DegenerateDensity(f"normalizer is {total}")
    boosted = PiecewiseFn(
        f.vars,
        tuple(
            (
                r,
                tuple(
                    ExpPolyTerm(
                        t.coeff,
                        _merge_powkeys(tuple(t.powers.items()), ((v, order),)),
                        t.exp_arg,
                    )
                    for t in ts
                ),
            )
            for r, ts in f.pieces
        ),
    )
    return definite_integral(boosted) / total


def axis_bound_candidates(
    f: PiecewiseFn, v: str
) -> tuple[list[LinExpr], list[LinExpr]]:
    """Lower/upper bound expressions for v gathered from all pieces.

    Used by callers that need conservative support boxes (quadrature grids,
    samplers, plotting); candidates are exact per piece but the union over
    pieces is what bounds the support.
    """
    lowers: list[LinExpr] = []
    uppers: list[LinExpr] = []
    for region, _ in f.pieces:
        for c in region.constraints:
            a = c.expr.coeff(v)
            if a == 0.0:
                continue
            (lowers if a > 0 else uppers).append(c.expr.solve_for(v))
    return lowers, uppers


def support_interval(f: PiecewiseFn, v: str) -> tuple[float, float]:
    """Constant support bounds for v when every candidate is constant."""
    lowers, uppers = axis_bound_candidates(f, v)
    lo = [e.const for e in lowers if e.is_constant()]
    hi = [e.const for e in uppers if e.is_constant()]
    if not lo or not hi:
        raise DomainMismatch(f"support of {v!r} is not a constant interval")
    return min(lo), max(hi)


def check_interior_disjoint(f: PiecewiseFn) -> bool:
    """Debug helper: True when no two pieces share an interior point."""
    for i, (ra, _) in enumerate(f.pieces):
        for rb, _ in f.pieces[i + 1:]:
            both = Region(f.vars, ra.constraints + rb.constraints)
            if both.has_interior():
                return False
    return True
