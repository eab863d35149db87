"""Network schema, model-file parsing, validation, and potential compilation.

The model file is UTF-8 JSON with top-level keys:

* ``variables``: list of {name, kind: "discrete"|"continuous"|"deterministic",
  states?, parents?}
* ``cpds``: list of {var, table? | density? | equations?}
* ``jointree``: optional list of {id, variables, neighbors, assigned}

``density`` is either {"template": "normal_mte", "mean": <expr>, "variance":
<number>} or {"pieces": [{"region": [<inequality> ...], "terms": [{"coeff",
"powers"?, "exp"?}]}]}, possibly wrapped in a map keyed by discrete-parent
configuration strings such as "Y1=0". ``equations`` values are strings
"<head> = <expr>". Expressions admit real literals, variable names, +, -,
unary minus, parentheses, and products with at most one variable per product;
anything else is rejected at parse time, which makes linearity a parse-time
guarantee.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

from .config import ZERO_EPS
from .errors import NonlinearExpression, ParseError, UnknownVariable
from .expcalc import (
    Constraint,
    ExpPolyTerm,
    PiecewiseFn,
    Region,
    definite_integral,
    substitute_linear,
)
from .linexpr import LinExpr
from .potential import (
    DeterministicPotential,
    Entry,
    MassPotential,
    MixedPotential,
    WeightedEquation,
)

Config = tuple[str, ...]

# Standard-normal approximant on [-3, 3]: two mirror-image pieces, constant
# term plus three exponentials. Constants kept verbatim.
_STD_CONST = (-0.0105929, 197.5892111, -462.6885096, 265.5099139)
_STD_RATES = (2.2568434, 2.3434117, 2.4043270)


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "discrete" | "continuous" | "deterministic"
    states: tuple[str, ...] | None = None
    parents: tuple[str, ...] = ()


@dataclass(frozen=True)
class NormalTemplate:
    mean: LinExpr
    variance: float


@dataclass(frozen=True)
class ExplicitDensity:
    fn: PiecewiseFn


@dataclass(frozen=True)
class MassTable:
    rows: Mapping[Config, Mapping[str, float]]


@dataclass(frozen=True)
class DensitySpec:
    per_config: Mapping[Config, NormalTemplate | ExplicitDensity]


@dataclass(frozen=True)
class LinearEquationSpec:
    per_config: Mapping[Config, LinExpr]  # lhs of head - expr = 0


Cpd = MassTable | DensitySpec | LinearEquationSpec


@dataclass(frozen=True)
class JoinTreeHintNode:
    id: str
    variables: tuple[str, ...]
    neighbors: tuple[str, ...]
    assigned: tuple[str, ...] = ()


@dataclass(frozen=True)
class Network:
    variables: tuple[Variable, ...]
    cpds: Mapping[str, Cpd]
    jointree_hint: tuple[JoinTreeHintNode, ...] | None = None
    by_name: Mapping[str, Variable] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "by_name", {v.name: v for v in self.variables})

    def discrete_parents(self, name: str) -> tuple[str, ...]:
        return tuple(
            p for p in self.by_name[name].parents
            if self.by_name[p].kind == "discrete"
        )

    def continuous_parents(self, name: str) -> tuple[str, ...]:
        return tuple(
            p for p in self.by_name[name].parents
            if self.by_name[p].kind != "discrete"
        )


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                    r"|([A-Za-z_][A-Za-z_0-9]*)|([+\-*()]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ParseError(
                f"unexpected character {rest[0]!r} at column {pos + 1} in {text!r}"
            )
        if m.group(1) is not None:
            out.append(("num", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            out.append(("name", m.group(2), m.start(2)))
        else:
            out.append(("op", m.group(3), m.start(3)))
        pos = m.end()
    return out


class _ExprParser:
    """Recursive descent over the linear expression grammar."""

    def __init__(self, text: str, known: set[str] | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.known = known

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _next(self):
        tok = self._peek()
        if tok is None:
            raise ParseError(f"unexpected end of expression in {self.text!r}")
        self.i += 1
        return tok

    def parse(self) -> LinExpr:
        e = self._expr()
        tok = self._peek()
        if tok is not None:
            raise ParseError(
                f"unexpected {tok[1]!r} at column {tok[2] + 1} in {self.text!r}"
            )
        return e

    def _expr(self) -> LinExpr:
        e = self._term()
        while True:
            tok = self._peek()
            if tok is None or tok[0] != "op" or tok[1] not in "+-":
                return e
            self._next()
            rhs = self._term()
            e = e + rhs if tok[1] == "+" else e - rhs

    def _term(self) -> LinExpr:
        e = self._factor()
        while True:
            tok = self._peek()
            if tok is None or tok[0] != "op" or tok[1] != "*":
                return e
            self._next()
            rhs = self._factor()
            if e.vars and rhs.vars:
                raise NonlinearExpression(
                    f"product of variables in {self.text!r}"
                )
            if rhs.vars:
                e, rhs = rhs, e
            e = e * rhs.const

    def _factor(self) -> LinExpr:
        tok = self._next()
        if tok[0] == "num":
            return LinExpr.constant(float(tok[1]))
        if tok[0] == "name":
            if self.known is not None and tok[1] not in self.known:
                raise UnknownVariable(
                    f"unknown variable {tok[1]!r} in {self.text!r}"
                )
            return LinExpr.var(tok[1])
        if tok[1] == "-":
            return -self._factor()
        if tok[1] == "(":
            e = self._expr()
            close = self._next()
            if close[0] != "op" or close[1] != ")":
                raise ParseError(f"expected ')' in {self.text!r}")
            return e
        raise ParseError(
            f"unexpected {tok[1]!r} at column {tok[2] + 1} in {self.text!r}"
        )


def parse_expr(text: str, known: set[str] | None = None) -> LinExpr:
    """Parse a linear expression such as "0.25*Z1 + 1" into a LinExpr."""
    e = _ExprParser(text, known).parse()
    return e


_REL = re.compile(r"(<=|>=|<|>)")


def parse_inequalities(text: str, known: set[str] | None = None) -> list[Constraint]:
    """Parse "a <= expr < b" chains into >=0 / >0 normal-form constraints."""
    parts = _REL.split(text)
    if len(parts) < 3 or len(parts) % 2 == 0:
        raise ParseError(f"expected an inequality, got {text!r}")
    out = []
    for k in range(0, len(parts) - 2, 2):
        lhs = parse_expr(parts[k], known)
        rel = parts[k + 1]
        rhs = parse_expr(parts[k + 2], known)
        diff = rhs - lhs if rel in ("<=", "<") else lhs - rhs
        out.append(Constraint(diff, strict=rel in ("<", ">")))
    return out


def _parse_config(text: str, var: str, dparents: tuple[str, ...],
                  states: Mapping[str, tuple[str, ...]]) -> Config:
    """Parse "Y1=0, Y2=1" against the declared discrete parents."""
    text = text.strip()
    if not text:
        if dparents:
            raise ParseError(
                f"cpd for {var!r} needs a configuration of {dparents}"
            )
        return ()
    seen: dict[str, str] = {}
    for chunk in text.split(","):
        if "=" not in chunk:
            raise ParseError(f"bad configuration chunk {chunk.strip()!r}")
        name, _, state = chunk.partition("=")
        name, state = name.strip(), state.strip()
        if name not in dparents:
            raise UnknownVariable(
                f"{name!r} is not a discrete parent of {var!r}"
            )
        if state not in states[name]:
            raise ParseError(f"{state!r} is not a state of {name!r}")
        if name in seen:
            raise ParseError(f"duplicate assignment for {name!r}")
        seen[name] = state
    missing = [p for p in dparents if p not in seen]
    if missing:
        raise ParseError(f"configuration {text!r} misses {missing}")
    return tuple(seen[p] for p in dparents)


def _parse_piecewise(spec: Mapping, vars_: tuple[str, ...]) -> PiecewiseFn:
    known = set(vars_)
    pieces = []
    for pc in spec["pieces"]:
        constraints: list[Constraint] = []
        for s in pc["region"]:
            constraints.extend(parse_inequalities(s, known))
        region = Region(vars_, tuple(constraints))
        if not region.has_interior():
            continue  # infeasible pieces carry no mass
        terms = []
        for t in pc["terms"]:
            powers = {str(k): int(v) for k, v in t.get("powers", {}).items()}
            for k in powers:
                if k not in known:
                    raise UnknownVariable(f"unknown variable {k!r} in powers")
            exp_arg = parse_expr(t["exp"], known) if "exp" in t else LinExpr.constant(0.0)
            terms.append(ExpPolyTerm(float(t["coeff"]), powers, exp_arg))
        pieces.append((region, tuple(terms)))
    return PiecewiseFn(vars_, tuple(pieces))


def parse_model(text: str | bytes) -> Network:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict) or "variables" not in doc or "cpds" not in doc:
        raise ParseError("model file needs 'variables' and 'cpds' keys")

    variables: list[Variable] = []
    names: set[str] = set()
    for raw in doc["variables"]:
        name = raw.get("name")
        kind = raw.get("kind")
        if not name or kind not in ("discrete", "continuous", "deterministic"):
            raise ParseError(f"bad variable declaration {raw!r}")
        if name in names:
            raise ParseError(f"duplicate variable {name!r}")
        names.add(name)
        states = None
        if kind == "discrete":
            states = tuple(str(s) for s in raw.get("states", ()))
            if not states or len(set(states)) != len(states):
                raise ParseError(f"discrete {name!r} needs unique states")
        elif "states" in raw:
            raise ParseError(f"{name!r} is not discrete but lists states")
        variables.append(Variable(name, kind, states,
                                  tuple(raw.get("parents", ()))))
    for v in variables:
        for p in v.parents:
            if p not in names:
                raise UnknownVariable(f"{v.name!r} lists unknown parent {p!r}")

    net_states = {v.name: v.states for v in variables if v.states}
    by_name = {v.name: v for v in variables}
    cpds: dict[str, Cpd] = {}
    for raw in doc["cpds"]:
        var = raw.get("var")
        if var not in by_name:
            raise UnknownVariable(f"cpd for unknown variable {var!r}")
        if var in cpds:
            raise ParseError(f"duplicate cpd for {var!r}")
        v = by_name[var]
        dparents = tuple(p for p in v.parents if by_name[p].kind == "discrete")
        cparents = tuple(p for p in v.parents if by_name[p].kind != "discrete")
        kinds = [k for k in ("table", "density", "equations") if k in raw]
        if len(kinds) != 1:
            raise ParseError(
                f"cpd for {var!r} needs exactly one of table/density/equations"
            )
        kind = kinds[0]
        if kind == "table":
            if v.kind != "discrete":
                raise ParseError(f"{var!r} is not discrete but has a table")
            cpds[var] = _parse_table(raw["table"], v, dparents, net_states)
        elif kind == "density":
            if v.kind != "continuous":
                raise ParseError(f"{var!r} is not continuous but has a density")
            cpds[var] = _parse_density(raw["density"], v, dparents, cparents,
                                       net_states)
        else:
            if v.kind != "deterministic":
                raise ParseError(
                    f"{var!r} is not deterministic but has equations"
                )
            cpds[var] = _parse_equations(raw["equations"], v, dparents,
                                         cparents, net_states)
    missing = [v.name for v in variables if v.name not in cpds]
    if missing:
        raise ParseError(f"variables without a cpd: {missing}")

    hint = None
    if "jointree" in doc:
        nodes = []
        for raw in doc["jointree"]:
            nodes.append(JoinTreeHintNode(
                str(raw["id"]),
                tuple(raw["variables"]),
                tuple(str(x) for x in raw.get("neighbors", ())),
                tuple(raw.get("assigned", ())),
            ))
        hint = tuple(nodes)
    return Network(tuple(variables), cpds, hint)


def _configs(dparents: tuple[str, ...], states) -> list[Config]:
    return list(product(*(states[p] for p in dparents)))


def _parse_table(raw, v: Variable, dparents, states) -> MassTable:
    if not isinstance(raw, dict):
        raise ParseError(f"table for {v.name!r} must be an object")
    direct = all(isinstance(x, (int, float)) for x in raw.values())
    rows: dict[Config, dict[str, float]] = {}
    if direct:
        if dparents:
            raise ParseError(
                f"table for {v.name!r} must be keyed by parent configurations"
            )
        rows[()] = {str(s): float(p) for s, p in raw.items()}
    else:
        for key, row in raw.items():
            cfg = _parse_config(key, v.name, dparents, states)
            if cfg in rows:
                raise ParseError(f"duplicate table row for {key!r}")
            rows[cfg] = {str(s): float(p) for s, p in row.items()}
    for cfg in _configs(dparents, states):
        if cfg not in rows:
            raise ParseError(f"table for {v.name!r} misses configuration {cfg}")
        for s in rows[cfg]:
            if s not in v.states:
                raise ParseError(f"{s!r} is not a state of {v.name!r}")
    return MassTable(rows)


def _density_form(spec: Mapping, v: Variable, cparents, states):
    if "template" in spec:
        if spec["template"] != "normal_mte":
            raise ParseError(f"unknown density template {spec['template']!r}")
        mean = parse_expr(str(spec["mean"]), set(cparents))
        variance = float(spec["variance"])
        if not variance > 0.0:
            raise ParseError(f"variance for {v.name!r} must be positive")
        return NormalTemplate(mean, variance)
    if "pieces" in spec:
        return ExplicitDensity(_parse_piecewise(spec, (v.name,) + cparents))
    raise ParseError(f"density for {v.name!r} needs 'template' or 'pieces'")


def _parse_density(raw, v: Variable, dparents, cparents, states) -> DensitySpec:
    per: dict[Config, NormalTemplate | ExplicitDensity] = {}
    if isinstance(raw, dict) and ("template" in raw or "pieces" in raw):
        if dparents:
            raise ParseError(
                f"density for {v.name!r} must be keyed by parent configurations"
            )
        per[()] = _density_form(raw, v, cparents, states)
    else:
        for key, spec in raw.items():
            cfg = _parse_config(key, v.name, dparents, states)
            per[cfg] = _density_form(spec, v, cparents, states)
    for cfg in _configs(dparents, states):
        if cfg not in per:
            raise ParseError(
                f"density for {v.name!r} misses configuration {cfg}"
            )
    return DensitySpec(per)


def _parse_equation(text: str, v: Variable, cparents) -> LinExpr:
    if "=" not in text:
        raise ParseError(f"equation {text!r} needs '='")
    lhs_text, _, rhs_text = text.partition("=")
    known = set(cparents) | {v.name}
    lhs = parse_expr(lhs_text, known)
    rhs = parse_expr(rhs_text, known)
    return lhs - rhs


def _parse_equations(raw, v: Variable, dparents, cparents, states) -> LinearEquationSpec:
    per: dict[Config, LinExpr] = {}
    if isinstance(raw, str):
        if dparents:
            raise ParseError(
                f"equations for {v.name!r} must be keyed by parent configurations"
            )
        per[()] = _parse_equation(raw, v, cparents)
    else:
        for key, text in raw.items():
            cfg = _parse_config(key, v.name, dparents, states)
            per[cfg] = _parse_equation(str(text), v, cparents)
    for cfg in _configs(dparents, states):
        if cfg not in per:
            raise ParseError(
                f"equations for {v.name!r} miss configuration {cfg}"
            )
    return LinearEquationSpec(per)


def linexpr_to_str(e: LinExpr) -> str:
    parts = []
    for v in e.vars:
        c = e.coeff(v)
        term = v if c == 1.0 else (f"-{v}" if c == -1.0 else f"{c!r}*{v}")
        if parts and not term.startswith("-"):
            parts.append("+ " + term)
        elif parts:
            parts.append("- " + term.lstrip("-"))
        else:
            parts.append(term)
    if e.const != 0.0 or not parts:
        c = e.const
        if parts:
            parts.append(("- " if c < 0 else "+ ") + repr(abs(c)))
        else:
            parts.append(repr(c))
    return " ".join(parts)


def serialize_model(n: Network) -> str:
    """Inverse of parse_model, up to formatting."""
    doc: dict = {"variables": [], "cpds": []}
    for v in n.variables:
        raw: dict = {"name": v.name, "kind": v.kind}
        if v.states is not None:
            raw["states"] = list(v.states)
        if v.parents:
            raw["parents"] = list(v.parents)
        doc["variables"].append(raw)

    def cfg_key(var: str, cfg: Config) -> str:
        dparents = n.discrete_parents(var)
        return ", ".join(f"{p}={s}" for p, s in zip(dparents, cfg))

    for v in n.variables:
        cpd = n.cpds[v.name]
        raw = {"var": v.name}
        if isinstance(cpd, MassTable):
            if () in cpd.rows and len(cpd.rows) == 1:
                raw["table"] = dict(cpd.rows[()])
            else:
                raw["table"] = {cfg_key(v.name, c): dict(r)
                                for c, r in cpd.rows.items()}
        elif isinstance(cpd, DensitySpec):
            def form(d) -> dict:
                if isinstance(d, NormalTemplate):
                    return {"template": "normal_mte",
                            "mean": linexpr_to_str(d.mean),
                            "variance": d.variance}
                return {"pieces": [
                    {"region": [f"{linexpr_to_str(c.expr)} "
                                f"{'>' if c.strict else '>='} 0"
                                for c in region.constraints],
                     "terms": [{"coeff": t.coeff,
                                **({"powers": dict(t.powers)} if t.powers else {}),
                                **({"exp": linexpr_to_str(t.exp_arg)}
                                   if t.exp_arg.vars or t.exp_arg.const else {})}
                               for t in terms]}
                    for region, terms in d.fn.pieces]}
            if tuple(cpd.per_config) == ((),):
                raw["density"] = form(cpd.per_config[()])
            else:
                raw["density"] = {cfg_key(v.name, c): form(d)
                                  for c, d in cpd.per_config.items()}
        else:
            def eq_str(lhs: LinExpr) -> str:
                rest = LinExpr.var(v.name) - lhs
                return f"{v.name} = {linexpr_to_str(rest)}"
            if tuple(cpd.per_config) == ((),):
                raw["equations"] = eq_str(cpd.per_config[()])
            else:
                raw["equations"] = {cfg_key(v.name, c): eq_str(e)
                                    for c, e in cpd.per_config.items()}
        doc["cpds"].append(raw)
    if n.jointree_hint is not None:
        doc["jointree"] = [
            {"id": h.id, "variables": list(h.variables),
             "neighbors": list(h.neighbors), "assigned": list(h.assigned)}
            for h in n.jointree_hint
        ]
    return json.dumps(doc, indent=2, sort_keys=False)


_TMP = "_std_normal_arg"


def make_normal_mte(var: str, mean: LinExpr, variance: float) -> PiecewiseFn:
    """Truncated-normal MTE density for var with the given mean and variance.

    The fixed standard approximant on [-3, 3] is rescaled via the linear
    substitution t := (var - mean)/sigma and a 1/sigma factor, so the support
    is mean(x) +/- 3*sigma and piece boundaries are polytopes when the mean
    depends on parents.
    """
    if not variance > 0.0:
        raise ValueError(f"variance must be positive, got {variance}")
    tmp = _TMP if var != _TMP and _TMP not in mean.vars else _TMP + "_"
    t = LinExpr.var(tmp)
    lo = Region((tmp,), (Constraint(t + LinExpr.constant(3.0)),
                         Constraint(-t, strict=True)))
    hi = Region((tmp,), (Constraint(t),
                         Constraint(LinExpr.constant(3.0) - t)))
    pieces = []
    for region, sign in ((lo, 1.0), (hi, -1.0)):
        terms = [ExpPolyTerm(_STD_CONST[0], {}, LinExpr.constant(0.0))]
        terms += [ExpPolyTerm(c, {}, t * (sign * b))
                  for c, b in zip(_STD_CONST[1:], _STD_RATES)]
        pieces.append((region, tuple(terms)))
    std = PiecewiseFn((tmp,), tuple(pieces))
    sd = math.sqrt(variance)
    repl = (LinExpr.var(var) - mean) * (1.0 / sd)
    return substitute_linear(std, tmp, repl).scaled(1.0 / sd)


def density_fn(n: Network, var: str, cfg: Config) -> PiecewiseFn:
    """The variable's conditional density at a discrete-parent configuration."""
    spec = n.cpds[var].per_config[cfg]
    if isinstance(spec, NormalTemplate):
        return make_normal_mte(var, spec.mean, spec.variance)
    return spec.fn


def validate_model(n: Network) -> list[str]:
    diags: list[str] = []
    color: dict[str, int] = {}

    def dfs(name: str) -> bool:
        color[name] = 1
        for p in n.by_name[name].parents:
            c = color.get(p, 0)
            if c == 1 or (c == 0 and dfs(p)):
                return True
        color[name] = 2
        return False

    for v in n.variables:
        if color.get(v.name, 0) == 0 and dfs(v.name):
            diags.append(f"cycle through {v.name!r} in the parent graph")
            break

    for v in n.variables:
        cpd = n.cpds[v.name]
        if isinstance(cpd, MassTable):
            for cfg, row in cpd.rows.items():
                if any(p < 0 for p in row.values()):
                    diags.append(f"negative probability for {v.name!r} at {cfg}")
                total = sum(row.values())
                if abs(total - 1.0) > 1e-9:
                    diags.append(
                        f"table row for {v.name!r} at {cfg} sums to {total!r}"
                    )
        elif isinstance(cpd, DensitySpec):
            for cfg, spec in cpd.per_config.items():
                for value in (0.0, 1.0):
                    fn = density_fn(n, v.name, cfg)
                    for p in [u for u in fn.vars if u != v.name]:
                        fn = substitute_linear(fn, p, LinExpr.constant(value))
                    total = definite_integral(fn)
                    if abs(total - 1.0) > 1e-3:
                        diags.append(
                            f"density for {v.name!r} at {cfg} integrates to "
                            f"{total!r} (parents at {value})"
                        )
                        break
        else:
            if not any(n.by_name[p].kind != "discrete" for p in v.parents):
                diags.append(
                    f"deterministic {v.name!r} has no continuous parent"
                )
            for cfg, lhs in cpd.per_config.items():
                a = lhs.coeff(v.name)
                if abs(a - 1.0) > ZERO_EPS:
                    diags.append(
                        f"equation for {v.name!r} at {cfg} has head "
                        f"coefficient {a!r}, expected 1"
                    )
    return diags


def compile_potentials(n: Network) -> dict[str, MixedPotential]:
    """One mixed potential per variable.

    Discrete tables become per-configuration scalar masses with identity
    density; densities become unit-mass density factors; equations become
    unit-weight deterministic factors with the head coefficient rescaled
    to exactly 1.
    """
    out: dict[str, MixedPotential] = {}
    for v in n.variables:
        cpd = n.cpds[v.name]
        dparents = n.discrete_parents(v.name)
        cparents = n.continuous_parents(v.name)
        if isinstance(cpd, MassTable):
            dvars = dparents + (v.name,)
            states = {u: n.by_name[u].states for u in dvars}
            table = {}
            for cfg in product(*(states[u] for u in dvars)):
                p = cpd.rows[cfg[:-1]].get(cfg[-1], 0.0)
                table[cfg] = (
                    Entry((MassPotential.scalar(p),), ()) if p > 0.0
                    else Entry.zero()
                )
            out[v.name] = MixedPotential(dvars, (), states, table)
            continue
        states = {u: n.by_name[u].states for u in dparents}
        if isinstance(cpd, DensitySpec):
            table = {}
            cvar_set: tuple[str, ...] = (v.name,)
            for cfg in product(*(states[u] for u in dparents)):
                fn = density_fn(n, v.name, cfg)
                cvar_set += tuple(u for u in fn.vars if u not in cvar_set)
                table[cfg] = Entry((), (fn,))
            out[v.name] = MixedPotential(dparents, cvar_set, states, table)
        else:
            table = {}
            for cfg in product(*(states[u] for u in dparents)):
                lhs = cpd.per_config[cfg]
                a = lhs.coeff(v.name)
                if abs(a) > ZERO_EPS and a != 1.0:
                    lhs = lhs * (1.0 / a)
                det = DeterministicPotential(
                    (WeightedEquation(1.0, lhs),), v.name,
                )
                table[cfg] = Entry((), (det,))
            out[v.name] = MixedPotential(
                dparents, (v.name,) + cparents, states, table
            )
    return out
