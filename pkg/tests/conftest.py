"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from hybrid_mte.expcalc import (
    Constraint,
    ExpPolyTerm,
    PiecewiseFn,
    Region,
    evaluate,
)
from hybrid_mte.linexpr import LinExpr
from hybrid_mte.model import Network, parse_model
from hybrid_mte.potential import DeterministicPotential

ROOT = Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"


@pytest.fixture(scope="session")
def figure3() -> Network:
    return parse_model((MODELS / "figure3.json").read_text())


@pytest.fixture(scope="session")
def mixed_model() -> Network:
    return parse_model((MODELS / "mixed_distribution.json").read_text())


def interval_fn(var: str, lo: float, hi: float,
                terms: tuple[ExpPolyTerm, ...]) -> PiecewiseFn:
    """One-piece function supported on [lo, hi]."""
    region = Region(
        (var,),
        (
            Constraint(LinExpr({var: 1.0}, -lo)),
            Constraint(LinExpr({var: -1.0}, hi)),
        ),
    )
    return PiecewiseFn((var,), ((region, terms),))


def uniform_fn(var: str, lo: float, hi: float) -> PiecewiseFn:
    return interval_fn(var, lo, hi, (ExpPolyTerm(1.0 / (hi - lo)),))


def box_region(bounds: dict[str, tuple[float, float]]) -> Region:
    names = tuple(sorted(bounds))
    cons = []
    for v in names:
        lo, hi = bounds[v]
        cons.append(Constraint(LinExpr({v: 1.0}, -lo)))
        cons.append(Constraint(LinExpr({v: -1.0}, hi)))
    return Region(names, tuple(cons))


def box_fn(bounds: dict[str, tuple[float, float]],
           terms: tuple[ExpPolyTerm, ...]) -> PiecewiseFn:
    names = tuple(sorted(bounds))
    return PiecewiseFn(names, ((box_region(bounds), terms),))


def random_linexpr(rng: random.Random, names: list[str],
                   scale: float = 1.0) -> LinExpr:
    coeffs = {
        v: rng.uniform(-scale, scale)
        for v in names
        if rng.random() < 0.8
    }
    return LinExpr(coeffs, rng.uniform(-scale, scale))


def random_mte(rng: random.Random, names: list[str],
               n_pieces: int = 2, nonneg: bool = False) -> PiecewiseFn:
    """MTE over a split of [-2, 2]^d with random exp-poly terms per cell.

    Pieces are boxes stacked along the first variable so their interiors
    never overlap. nonneg keeps powers even so values stay nonnegative.
    """
    cuts = sorted(rng.uniform(-2.0, 2.0) for _ in range(n_pieces - 1))
    edges = [-2.0] + cuts + [2.0]
    head, rest = names[0], names[1:]
    pieces = []
    for lo, hi in zip(edges, edges[1:]):
        if hi - lo < 1e-3:
            continue
        bounds = {head: (lo, hi)}
        for v in rest:
            bounds[v] = (-2.0, 2.0)
        terms = []
        for _ in range(rng.randint(1, 2)):
            powers = {
                v: (rng.choice((0, 2)) if nonneg else rng.randint(0, 2))
                for v in names if rng.random() < 0.5
            }
            arg = LinExpr(
                {v: rng.uniform(-0.7, 0.7) for v in names}, 0.0
            )
            terms.append(ExpPolyTerm(rng.uniform(0.05, 1.0), powers, arg))
        pieces.append((box_region(bounds), tuple(terms)))
    return PiecewiseFn(tuple(names), tuple(pieces))


def sample_point(rng: random.Random, names: list[str],
                 lo: float = -2.0, hi: float = 2.0) -> dict[str, float]:
    return {v: rng.uniform(lo, hi) for v in names}


def fn_value(f: PiecewiseFn, point: dict[str, float]) -> float:
    return evaluate(f, {v: point[v] for v in f.vars})


def det_equations(factors) -> list[DeterministicPotential]:
    return [f for f in factors if isinstance(f, DeterministicPotential)]


def normalized_coeffs(lhs: LinExpr, head: str) -> dict:
    """Coefficient map of an equation rescaled so head has coefficient 1."""
    a = lhs.coeff(head)
    assert abs(a) > 1e-12, f"no {head} coefficient to normalize on"
    out = {v: lhs.coeff(v) / a for v in lhs.vars}
    out["__const__"] = lhs.const / a
    return out


def assert_equation(lhs: LinExpr, expected: dict[str, float],
                    const: float, head: str, tol: float = 1e-9) -> None:
    """Compare an equation to expected coefficients up to head scaling."""
    got = normalized_coeffs(lhs, head)
    want = normalized_coeffs(
        LinExpr(dict(expected), const), head
    )
    for key in set(got) | set(want):
        assert abs(got.get(key, 0.0) - want.get(key, 0.0)) <= tol, (
            f"{key}: {got} vs {want}"
        )


def random_network(rng: random.Random) -> Network:
    """Small random hybrid network as a model document.

    At most 2 discrete, 3 continuous and 2 deterministic variables; linear
    equation coefficients are kept away from zero so inverses exist.
    """
    n_disc = rng.randint(0, 2)
    n_cont = rng.randint(1, 3)
    # piece counts multiply along continuous chains; keep shapes tractable
    n_det = rng.randint(0, min(2, 4 - n_cont))
    variables = []
    cpds = []
    disc = [f"D{i}" for i in range(n_disc)]
    cont = [f"C{i}" for i in range(n_cont)]
    det = [f"E{i}" for i in range(n_det)]

    for name in disc:
        states = ["0", "1"]
        variables.append(
            {"name": name, "kind": "discrete", "states": states}
        )
        w = rng.uniform(0.2, 0.8)
        cpds.append({"var": name, "table": {"0": w, "1": 1.0 - w}})

    # continuous means stay constant and deterministic parents stay single:
    # that keeps every density univariate, so each symbolic integral runs
    # between parallel bounds and loses nothing to deferred cancellation.
    # Sloped continuous-to-continuous links are exercised by the worked
    # model fixtures and the quadrature comparisons at their own tolerance.
    for name in cont:
        parents = []
        if disc and rng.random() < 0.4:
            parents.append(disc[0])
        spec: dict = {"name": name, "kind": "continuous"}
        if parents:
            spec["parents"] = parents
        variables.append(spec)

        def params() -> dict:
            return {
                "template": "normal_mte",
                "mean": f"{rng.uniform(-1.0, 1.0):.3f}",
                "variance": rng.uniform(0.5, 1.5),
            }

        if parents:
            density = {f"{disc[0]}={s}": params() for s in ("0", "1")}
            cpds.append({"var": name, "density": density})
        else:
            cpds.append({"var": name, "density": params()})

    for i, name in enumerate(det):
        pool = cont + det[:i]
        parents = rng.sample(pool, 1)
        sel = disc[-1] if disc and rng.random() < 0.5 else None

        def eq() -> str:
            # slopes well away from zero keep inverse substitutions and
            # pairwise eliminations numerically mild
            parts = [
                f"{rng.choice([-1, 1]) * rng.uniform(0.5, 2.0):.3f}*{p}"
                for p in parents
            ]
            parts.append(f"{rng.uniform(-1.0, 1.0):.3f}")
            return f"{name} = " + " + ".join(parts)

        spec = {
            "name": name,
            "kind": "deterministic",
            "parents": parents + ([sel] if sel else []),
        }
        variables.append(spec)
        if sel:
            cpds.append({
                "var": name,
                "equations": {f"{sel}=0": eq(), f"{sel}=1": eq()},
            })
        else:
            cpds.append({"var": name, "equations": eq()})

    return parse_model(json.dumps({"variables": variables, "cpds": cpds}))
