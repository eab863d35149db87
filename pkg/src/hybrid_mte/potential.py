"""Mixed potentials over discrete, continuous, and deterministic variables.

A MixedPotential keys a table by configurations of its discrete variables.
Each table entry holds two factor lists that are kept decomposed until an
operation forces work (lazy combination):

* mass factors: MassPotential slices with countable support. A slice with an
  empty domain is a plain scalar weight and multiplies everything else in the
  entry. A slice with continuous variables in its domain carries point masses
  (atoms); those coexist additively with a density over the same variable
  only in final marginals.
* density factors: PiecewiseFn densities and DeterministicPotential factors
  (weighted linear equations). The list has product semantics; a
  DeterministicPotential's own equation list has mixture (sum) semantics.
  The identity factor is represented by absence. A PiecewiseFn with no
  pieces marks a zeroed branch.

Marginalizing a continuous variable dispatches per entry on the factors that
mention it: densities alone integrate; one deterministic factor alone turns
into its summed weights; two deterministic factors reduce pairwise by
substitution; a deterministic factor with densities substitutes the inverse
of each equation into the density product with a 1/|a| change-of-variables
factor. Three or more deterministic factors on the variable, or two plus a
density, are not reducible here and raise UnsupportedElimination.

Restriction (observing a value) follows a case table: dropping rows for
discrete variables, substitution for densities, equation substitution for
deterministic factors with two or more remaining variables, and conversion
to point mass with a 1/|a| likelihood when one variable remains. A positive
point mass on the observed value zeroes every other branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, Sequence

from .config import FEAS_TOL, ZERO_EPS
from .errors import (
    DomainMismatch,
    NonInvertibleEquation,
    UnknownState,
    UnsupportedElimination,
)
from .expcalc import (
    PiecewiseFn,
    definite_integral,
    eliminate_integrate,
    multiply,
    substitute_linear,
    weighted_sum,
)
from .linexpr import LinExpr

Config = tuple[str, ...]
PointConfig = tuple[float, ...]


@dataclass(frozen=True)
class MassPotential:
    """Countably supported nonnegative weights.

    domain entries are variable names; keys align with the domain. Discrete
    positions hold state labels, continuous positions hold point values.
    """

    domain: tuple[str, ...]
    entries: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean = {}
        for key, w in self.entries.items():
            if len(key) != len(self.domain):
                raise DomainMismatch(f"key {key} does not match {self.domain}")
            if not w > 0.0:
                raise DomainMismatch(f"mass {w} at {key} must be positive")
            clean[tuple(key)] = float(w)
        object.__setattr__(self, "entries", clean)

    @staticmethod
    def scalar(w: float) -> MassPotential:
        return MassPotential((), {(): w})

    def is_scalar(self) -> bool:
        return not self.domain

    def scalar_value(self) -> float:
        if self.domain:
            raise DomainMismatch(f"mass over {self.domain} is not a scalar")
        return self.entries.get((), 0.0)

    def total(self) -> float:
        return sum(self.entries.values())

    def scaled(self, k: float) -> MassPotential:
        return MassPotential(self.domain, {c: w * k for c, w in self.entries.items()})

    def sum_out(self, v: str) -> MassPotential | float:
        """Marginalize v away; a scalar float when the domain empties."""
        if v not in self.domain:
            raise DomainMismatch(f"{v!r} not in mass domain {self.domain}")
        i = self.domain.index(v)
        rest = self.domain[:i] + self.domain[i + 1:]
        acc: dict[tuple, float] = {}
        for key, w in self.entries.items():
            rkey = key[:i] + key[i + 1:]
            acc[rkey] = acc.get(rkey, 0.0) + w
        if not rest:
            return acc.get((), 0.0)
        return MassPotential(rest, acc)

    def project(self, v: str, value: float, tol: float) -> MassPotential | float | None:
        """Keep only entries whose v coordinate matches value; drop v.

        Returns None when nothing matches, a float when the domain empties.
        """
        i = self.domain.index(v)
        rest = self.domain[:i] + self.domain[i + 1:]
        acc: dict[tuple, float] = {}
        for key, w in self.entries.items():
            if abs(float(key[i]) - value) <= tol:
                rkey = key[:i] + key[i + 1:]
                acc[rkey] = acc.get(rkey, 0.0) + w
        if not acc:
            return None
        if not rest:
            return acc[()]
        return MassPotential(rest, acc)


@dataclass(frozen=True)
class WeightedEquation:
    """weight * [lhs == 0]; written with the head coefficient 1 when a head

    variable applies."""

    weight: float
    lhs: LinExpr

    def __post_init__(self) -> None:
        if not self.weight > 0.0:
            raise DomainMismatch(f"equation weight {self.weight} must be positive")
        if not self.lhs.vars:
            raise DomainMismatch("equation has no variables")

    def normalized(self, head: str) -> WeightedEquation:
        a = self.lhs.coeff(head)
        if abs(a) <= ZERO_EPS:
            raise NonInvertibleEquation(f"{head!r} is absent from the equation")
        return WeightedEquation(self.weight, self.lhs * (1.0 / a))

    def same_constraint(self, other: WeightedEquation, tol: float = 1e-9) -> bool:
        """Equality of the constraint up to a nonzero scale."""
        mine, theirs = self.lhs, other.lhs
        if set(mine.vars) != set(theirs.vars):
            return False
        if not mine.vars:
            return abs(mine.const - theirs.const) <= tol
        ref = mine.vars[0]
        a, b = mine.coeff(ref), theirs.coeff(ref)
        if abs(b) <= ZERO_EPS:
            return False
        k = a / b
        for v in mine.vars:
            if abs(mine.coeff(v) - k * theirs.coeff(v)) > tol:
                return False
        return abs(mine.const - k * theirs.const) <= tol


@dataclass(frozen=True)
class DeterministicPotential:
    """Mixture of weighted linear equations (sum semantics across factors)."""

    factors: tuple[WeightedEquation, ...]
    head: str | None = None

    def __post_init__(self) -> None:
        if not self.factors:
            raise DomainMismatch("deterministic potential with no equations")

    @property
    def vars(self) -> set[str]:
        out: set[str] = set()
        for eq in self.factors:
            out |= set(eq.lhs.vars)
        return out

    def mentions(self, v: str) -> bool:
        return any(v in eq.lhs.vars for eq in self.factors)

    def in_all(self, v: str) -> bool:
        return all(v in eq.lhs.vars for eq in self.factors)

    def weight_total(self) -> float:
        return sum(eq.weight for eq in self.factors)

    def scaled(self, k: float) -> DeterministicPotential:
        return DeterministicPotential(
            tuple(WeightedEquation(eq.weight * k, eq.lhs) for eq in self.factors),
            self.head,
        )

    def is_point(self) -> bool:
        """True when every equation pins a single variable."""
        return all(len(eq.lhs.vars) == 1 for eq in self.factors)


DensityFactor = PiecewiseFn | DeterministicPotential


@dataclass(frozen=True)
class Entry:
    """One table cell: a lazy list of mass and density factors.

    Factors multiply. The one exception is an entry marked ``mixture``:
    merging branches of a discrete variable can leave a sum of a point-mass
    part and a density part (or point masses scattered over several
    variables), and such an entry means the SUM of its parts. Mixture
    entries only support scaling, totals and final read-out; operations
    that would need the product reading refuse them.
    """

    mass: tuple[MassPotential, ...] = ()
    density: tuple[DensityFactor, ...] = ()
    mixture: bool = False

    def is_zero(self) -> bool:
        return any(
            isinstance(f, PiecewiseFn) and f.is_zero() for f in self.density
        )

    @staticmethod
    def zero() -> Entry:
        return Entry((), (PiecewiseFn.zero(()),))

    def scalar_weight(self) -> float:
        w = 1.0
        for m in self.mass:
            if m.is_scalar():
                w *= m.scalar_value()
        return w

    def atom_slices(self) -> tuple[MassPotential, ...]:
        return tuple(m for m in self.mass if not m.is_scalar())

    def with_scalar(self, w: float) -> Entry:
        if w == 1.0:
            return self
        return Entry(
            self.mass + (MassPotential.scalar(w),), self.density, self.mixture
        )

    def vars(self) -> set[str]:
        out: set[str] = set()
        for m in self.mass:
            out.update(m.domain)
        for f in self.density:
            out.update(f.vars)
        return out


@dataclass(frozen=True)
class MixedPotential:
    discrete_vars: tuple[str, ...]
    continuous_vars: tuple[str, ...]
    states: Mapping[str, tuple[str, ...]]
    table: Mapping[Config, Entry]

    def __post_init__(self) -> None:
        for v in self.discrete_vars:
            if v not in self.states:
                raise DomainMismatch(f"no state list for discrete {v!r}")
        expected = set(product(*(self.states[v] for v in self.discrete_vars)))
        if expected != set(self.table):
            raise DomainMismatch("table does not cover the configuration space")

    @property
    def domain(self) -> tuple[str, ...]:
        return self.discrete_vars + self.continuous_vars

    @staticmethod
    def vacuous() -> MixedPotential:
        return MixedPotential((), (), {}, {(): Entry()})

    @staticmethod
    def from_entry(continuous_vars: Sequence[str], entry: Entry) -> MixedPotential:
        return MixedPotential((), tuple(continuous_vars), {}, {(): entry})

    def single_entry(self) -> Entry:
        if self.discrete_vars:
            raise DomainMismatch("potential still has discrete variables")
        return self.table[()]

    def density_value(self, config: Config, point: Mapping[str, float]) -> float:
        """Scalar weight times density factor values; for tests and plots.

        Entries carrying deterministic factors or atoms have no pointwise
        density and raise DomainMismatch.
        """
        entry = self.table[config]
        if entry.atom_slices():
            raise DomainMismatch("entry has point masses, not a pointwise density")
        value = entry.scalar_weight()
        from .expcalc import evaluate

        for f in entry.density:
            if isinstance(f, DeterministicPotential):
                raise DomainMismatch("entry has a deterministic factor")
            value *= evaluate(f, point)
        return value


def _merged_states(
    a: MixedPotential, b: MixedPotential
) -> tuple[tuple[str, ...], dict[str, tuple[str, ...]]]:
    dvars = a.discrete_vars + tuple(
        v for v in b.discrete_vars if v not in a.discrete_vars
    )
    states: dict[str, tuple[str, ...]] = {}
    for src in (a, b):
        for v in src.discrete_vars:
            if v in states and states[v] != src.states[v]:
                raise DomainMismatch(f"state lists for {v!r} disagree")
            states[v] = src.states[v]
    return dvars, states


def _project(cfg: Config, dvars: tuple[str, ...], sub: tuple[str, ...]) -> Config:
    pos = {v: i for i, v in enumerate(dvars)}
    return tuple(cfg[pos[v]] for v in sub)


def combine(a: MixedPotential, b: MixedPotential) -> MixedPotential:
    """Lazy combination: factor lists concatenate, nothing is multiplied."""
    dvars, states = _merged_states(a, b)
    cvars = a.continuous_vars + tuple(
        v for v in b.continuous_vars if v not in a.continuous_vars
    )
    shared_atom_vars = {
        v
        for ea in a.table.values()
        for m in ea.atom_slices()
        for v in m.domain
    } & {
        v
        for eb in b.table.values()
        for m in eb.atom_slices()
        for v in m.domain
    }
    if shared_atom_vars:
        raise UnsupportedElimination(
            f"both operands carry point masses on {sorted(shared_atom_vars)}"
        )
    table: dict[Config, Entry] = {}
    for cfg in product(*(states[v] for v in dvars)):
        ea = a.table[_project(cfg, dvars, a.discrete_vars)]
        eb = b.table[_project(cfg, dvars, b.discrete_vars)]
        for mix, other in ((ea, b), (eb, a)):
            if mix.mixture and mix.vars() & set(other.continuous_vars):
                raise UnsupportedElimination(
                    "a sum-form entry shares variables with another factor"
                )
        if ea.mixture and eb.mixture:
            raise UnsupportedElimination(
                "cannot combine two sum-form entries"
            )
        table[cfg] = Entry(
            ea.mass + eb.mass,
            ea.density + eb.density,
            ea.mixture or eb.mixture,
        )
    return MixedPotential(dvars, cvars, states, table)


def combine_all(potentials: Sequence[MixedPotential]) -> MixedPotential:
    acc = MixedPotential.vacuous()
    for p in potentials:
        acc = combine(acc, p)
    return acc


def marg_det_pair(
    d1: DeterministicPotential, d2: DeterministicPotential, z: str
) -> DeterministicPotential:
    """Reduce two deterministic factors by eliminating z pairwise.

    The inverse of each equation of one factor (every equation of which must
    mention z) is substituted into each equation of the other; weights
    multiply. The result is renormalized so the surviving head keeps
    coefficient 1.
    """
    if d1.in_all(z):
        src, dst = d1, d2
    elif d2.in_all(z):
        src, dst = d2, d1
    else:
        raise UnsupportedElimination(
            f"neither factor mentions {z!r} in every equation"
        )
    head = dst.head if dst.head not in (None, z) else (
        src.head if src.head not in (None, z) else None
    )
    out: list[WeightedEquation] = []
    for p in src.factors:
        inv = p.lhs.solve_for(z)
        for q in dst.factors:
            lhs = q.lhs.substitute(z, inv)
            if not lhs.vars:
                raise UnsupportedElimination(
                    "equations are linearly dependent; elimination degenerates"
                )
            eq = WeightedEquation(p.weight * q.weight, lhs)
            if head is not None and abs(lhs.coeff(head)) > ZERO_EPS:
                eq = eq.normalized(head)
            out.append(eq)
    return DeterministicPotential(tuple(out), head)


def marg_single_det(d: DeterministicPotential, z: str) -> float:
    """Marginalize z from a lone deterministic factor: summed weights."""
    if not d.in_all(z):
        raise UnsupportedElimination(
            f"some equations do not mention {z!r}; branches are heterogeneous"
        )
    return d.weight_total()


def marg_density_det(
    f: PiecewiseFn, d: DeterministicPotential, z: str
) -> PiecewiseFn:
    """Eliminate z from density * deterministic via inverse substitution.

    Each equation contributes weight/|a| times the density with z replaced by
    the equation's inverse; contributions add (mixture semantics).
    """
    if z not in f.vars:
        raise DomainMismatch(f"density does not mention {z!r}")
    if not d.in_all(z):
        raise UnsupportedElimination(
            f"some equations do not mention {z!r}; branches are heterogeneous"
        )
    parts: list[PiecewiseFn] = []
    for eq in d.factors:
        a = eq.lhs.coeff(z)
        g = substitute_linear(f, z, eq.lhs.solve_for(z))
        parts.append(g.scaled(eq.weight / abs(a)))
    if len(parts) == 1:
        return parts[0]
    out_vars: tuple[str, ...] = ()
    for g in parts:
        out_vars += tuple(u for u in g.vars if u not in out_vars)
    return weighted_sum([(1.0, g.extended(out_vars)) for g in parts])


def _expand_point_det(
    point: DeterministicPotential,
    rest: list[DeterministicPotential],
    dens_v: list[PiecewiseFn],
    v: str,
) -> tuple[tuple[MassPotential, ...], tuple[DensityFactor, ...]] | None:
    """Eliminate v by substituting a point-equation mixture branch-wise.

    Each equation a*v + b = 0 pins v at c = -b/a and contributes its weight
    over |a| (the density reading of the delta); c replaces v in every other
    factor. A single branch keeps the substituted factors as a product;
    several branches merge only when everything branch-specific collapses
    into one deterministic factor.
    """
    branches: list[tuple[float, list[DeterministicPotential], list[PiecewiseFn]]] = []
    for eq in point.factors:
        a = eq.lhs.coeff(v)
        if abs(a) <= ZERO_EPS:
            raise NonInvertibleEquation(
                f"point equation has a vanishing coefficient on {v!r}"
            )
        value = eq.lhs.solve_for(v)
        w = eq.weight / abs(a)
        dens: list[PiecewiseFn] = []
        for f in dens_v:
            g = substitute_linear(f, v, value)
            if not g.vars:
                w *= g.as_scalar()
            else:
                dens.append(g)
        if w == 0.0:
            continue
        dets: list[DeterministicPotential] = []
        dead = False
        for d in rest:
            eqs: list[WeightedEquation] = []
            for q in d.factors:
                lhs = q.lhs.substitute(v, value)
                if not lhs.vars:
                    if abs(lhs.const) <= FEAS_TOL:
                        raise UnsupportedElimination(
                            "equations are linearly dependent; elimination "
                            "degenerates"
                        )
                    continue  # contradictory branch of the mixture
                eqs.append(WeightedEquation(q.weight, lhs))
            if not eqs:
                dead = True
                break
            dets.append(DeterministicPotential(tuple(eqs), d.head))
        if dead:
            continue
        branches.append((w, dets, dens))
    if not branches:
        return None
    if len(branches) == 1:
        w, dets, dens = branches[0]
        return (MassPotential.scalar(w),), tuple(dens) + tuple(dets)
    if any(dens for _, _, dens in branches):
        raise UnsupportedElimination(
            f"eliminating {v!r} leaves branch-specific densities tied to "
            "equations"
        )
    if any(len(dets) != 1 for _, dets, _ in branches):
        raise UnsupportedElimination(
            f"eliminating {v!r} leaves branch-specific factor products"
        )
    merged: list[WeightedEquation] = []
    for w, dets, _ in branches:
        for q in dets[0].factors:
            merged.append(WeightedEquation(w * q.weight, q.lhs))
    head = next(
        (d[0].head for _, d, _ in branches if d[0].head not in (None, v)), None
    )
    return (), (DeterministicPotential(tuple(merged), head),)


def _eliminate_v_factors(
    mass_v: list[MassPotential],
    dens_v: list[PiecewiseFn],
    dets_v: list[DeterministicPotential],
    v: str,
) -> tuple[tuple[MassPotential, ...], tuple[DensityFactor, ...]] | None:
    """Collapse the factors that mention v into replacement factors.

    None marks a zeroed branch.
    """
    if mass_v and not dens_v and not dets_v:
        mass: list[MassPotential] = []
        for m in mass_v:
            summed = m.sum_out(v)
            mass.append(
                MassPotential.scalar(summed) if isinstance(summed, float)
                else summed
            )
        return tuple(mass), ()
    if mass_v:
        # a point-mass slice times other factors: the slice acts exactly
        # like a mixture of point equations pinning v
        if len(mass_v) != 1 or len(mass_v[0].domain) != 1:
            raise UnsupportedElimination(
                f"point masses on {v!r} cannot merge with its other factors"
            )
        dets_v = [_atoms_as_det(mass_v[0], v)] + dets_v
    if len(dets_v) >= 2:
        pidx = next(
            (i for i, d in enumerate(dets_v) if d.vars == {v}), None
        )
        if pidx is not None:
            return _expand_point_det(
                dets_v[pidx],
                dets_v[:pidx] + dets_v[pidx + 1:],
                dens_v,
                v,
            )
        if len(dets_v) >= 3 or dens_v:
            raise UnsupportedElimination(
                f"{v!r} appears in {len(dets_v)} deterministic factors"
                + (" and a density" if dens_v else "")
            )
    if not dets_v and not dens_v:
        return (), ()
    if len(dets_v) == 2:
        return (), (marg_det_pair(dets_v[0], dets_v[1], v),)
    if len(dets_v) == 1 and not dens_v:
        return (MassPotential.scalar(marg_single_det(dets_v[0], v)),), ()
    f = dens_v[0]
    for g in dens_v[1:]:
        f = multiply(f, g)
    if dets_v:
        g = marg_density_det(f, dets_v[0], v)
    else:
        g = eliminate_integrate(f, v)
    if not g.vars:
        s = g.as_scalar()
        if s == 0.0:
            return None
        return (MassPotential.scalar(s),), ()
    if g.is_zero():
        return None
    return (), (g,)


def _eliminate_from_entry(entry: Entry, v: str, cache: dict) -> Entry:
    """Marginalize continuous v out of one table entry.

    Replacement factors are cached on the identities of the factors that
    mention v, so configurations sharing those factors keep sharing the
    results (object identity matters to the later discrete merge).
    """
    if entry.is_zero():
        return Entry.zero()
    mass_keep = [m for m in entry.mass if v not in m.domain]
    mass_v = [m for m in entry.mass if v in m.domain]
    dens_keep: list[DensityFactor] = []
    dens_v: list[PiecewiseFn] = []
    dets_v: list[DeterministicPotential] = []
    for f in entry.density:
        if isinstance(f, PiecewiseFn):
            (dens_v if v in f.vars else dens_keep).append(f)
        else:
            (dets_v if f.mentions(v) else dens_keep).append(f)
    if not (mass_v or dens_v or dets_v):
        return entry
    if entry.mixture:
        raise UnsupportedElimination(
            f"cannot marginalize {v!r} out of a sum-form entry"
        )
    key = (
        tuple(id(m) for m in mass_v),
        tuple(id(f) for f in dens_v),
        tuple(id(f) for f in dets_v),
    )
    if key not in cache:
        cache[key] = _eliminate_v_factors(mass_v, dens_v, dets_v, v)
    replacement = cache[key]
    if replacement is None:
        return Entry.zero()
    new_mass, new_density = replacement
    return Entry(
        tuple(mass_keep) + new_mass, tuple(dens_keep) + new_density
    )


def marg_cont_density(p: MixedPotential, z: str) -> MixedPotential:
    """Density-only marginalization of z (no deterministic factor may

    mention it); scalar results join the mass part."""
    for entry in p.table.values():
        for f in entry.density:
            if isinstance(f, DeterministicPotential) and f.mentions(z):
                raise UnsupportedElimination(
                    f"deterministic factor mentions {z!r}"
                )
    return marginalize(p, z)


def _atoms_as_det(m: MassPotential, v: str) -> DeterministicPotential:
    """View a one-variable point-mass slice as a mixture of point equations."""
    eqs = tuple(
        WeightedEquation(w, LinExpr({v: 1.0}, -float(key[0])))
        for key, w in m.entries.items()
    )
    return DeterministicPotential(eqs, None)


def _atoms_of_point_det(d: DeterministicPotential, w: float) -> dict[str, dict[tuple, float]]:
    """Convert a point-equation mixture into atom masses keyed by variable."""
    out: dict[str, dict[tuple, float]] = {}
    for eq in d.factors:
        (var,) = eq.lhs.vars
        point = eq.lhs.solve_for(var).const
        slot = out.setdefault(var, {})
        key = (point,)
        # density reading of the delta: divide by the coefficient
        slot[key] = slot.get(key, 0.0) + w * eq.weight / abs(eq.lhs.coeff(var))
    return out


def _marg_discrete(p: MixedPotential, y: str) -> MixedPotential:
    rest = tuple(v for v in p.discrete_vars if v != y)
    states = {v: s for v, s in p.states.items() if v != y}
    table: dict[Config, Entry] = {}
    for rcfg in product(*(states[v] for v in rest)):
        branches: list[tuple[float, Entry]] = []
        for s in p.states[y]:
            cfg_map = dict(zip(rest, rcfg))
            cfg_map[y] = s
            cfg = tuple(cfg_map[v] for v in p.discrete_vars)
            entry = p.table[cfg]
            if entry.is_zero():
                continue
            branches.append((entry.scalar_weight(), entry))
        table[rcfg] = _sum_branches(branches)
    return MixedPotential(rest, p.continuous_vars, states, table)


def _sum_branches(branches: list[tuple[float, Entry]]) -> Entry:
    """Mixture of weighted entries; shared factors stay decomposed."""
    branches = [(w, e) for w, e in branches if w != 0.0]
    if not branches:
        return Entry.zero()
    if len(branches) == 1:
        w, entry = branches[0]
        return Entry(
            entry.atom_slices() + (MassPotential.scalar(w),),
            entry.density,
            entry.mixture,
        )
    shared: list[DensityFactor] = []
    if not any(e.mixture for _, e in branches):
        for f in branches[0][1].density:
            if all(any(g is f for g in e.density) for _, e in branches[1:]):
                shared.append(f)
    shared_ids = {id(f) for f in shared}

    atom_acc: dict[str, dict[tuple, float]] = {}
    dens_parts: list[tuple[float, PiecewiseFn]] = []
    det_eqs: list[WeightedEquation] = []
    det_heads: set[str | None] = set()
    iota_weight = 0.0
    kinds: set[str] = set()
    for w, entry in branches:
        if entry.mixture:
            # sum-form branch: its parts merge additively with the others
            dens = [f for f in entry.density if isinstance(f, PiecewiseFn)]
            if len(dens) != len(entry.density) or len(dens) > 1:
                raise UnsupportedElimination(
                    "sum-form branch carries an unexpected factor layout"
                )
            kinds.add("atoms")
            for m in entry.atom_slices():
                if len(m.domain) != 1:
                    raise UnsupportedElimination(
                        "multi-variable point masses cannot be mixed over states"
                    )
                slot = atom_acc.setdefault(m.domain[0], {})
                for key, mw in m.entries.items():
                    slot[key] = slot.get(key, 0.0) + w * mw
            if dens:
                kinds.add("density")
                dens_parts.append((w, dens[0]))
            continue
        if entry.atom_slices():
            rest = [f for f in entry.density if id(f) not in shared_ids]
            if rest:
                raise UnsupportedElimination(
                    "point masses mixed with branch-specific factors"
                )
            kinds.add("atoms")
            for m in entry.atom_slices():
                if len(m.domain) != 1:
                    raise UnsupportedElimination(
                        "multi-variable point masses cannot be mixed over states"
                    )
                slot = atom_acc.setdefault(m.domain[0], {})
                for key, mw in m.entries.items():
                    slot[key] = slot.get(key, 0.0) + w * mw
            continue
        rest = [f for f in entry.density if id(f) not in shared_ids]
        dens = [f for f in rest if isinstance(f, PiecewiseFn)]
        dets = [f for f in rest if isinstance(f, DeterministicPotential)]
        if dens and dets:
            raise UnsupportedElimination(
                "a branch mixes density and deterministic factors"
            )
        if len(dets) > 1:
            raise UnsupportedElimination(
                "a branch holds several deterministic factors"
            )
        if dets:
            d = dets[0]
            if d.is_point():
                kinds.add("atoms")
                for var, slot_src in _atoms_of_point_det(d, w).items():
                    slot = atom_acc.setdefault(var, {})
                    for key, mw in slot_src.items():
                        slot[key] = slot.get(key, 0.0) + mw
            else:
                kinds.add("det")
                det_heads.add(d.head)
                det_eqs.extend(
                    WeightedEquation(eq.weight * w, eq.lhs) for eq in d.factors
                )
        elif dens:
            kinds.add("density")
            f = dens[0]
            for g in dens[1:]:
                f = multiply(f, g)
            dens_parts.append((w, f))
        else:
            kinds.add("iota")
            iota_weight += w

    if "iota" in kinds and kinds != {"iota"}:
        raise UnsupportedElimination(
            "a weight-only branch cannot be mixed with informative branches"
        )
    if "det" in kinds and kinds & {"density", "atoms"}:
        raise UnsupportedElimination(
            "deterministic and density branches cannot be merged"
        )
    mass: list[MassPotential] = []
    density: list[DensityFactor] = list(shared)
    if kinds == {"iota"}:
        mass.append(MassPotential.scalar(iota_weight))
    if atom_acc:
        for var in sorted(atom_acc):
            mass.append(MassPotential((var,), atom_acc[var]))
    if det_eqs:
        head = det_heads.pop() if len(det_heads) == 1 else None
        density.append(DeterministicPotential(tuple(det_eqs), head))
    if dens_parts:
        out_vars: tuple[str, ...] = ()
        for _, f in dens_parts:
            out_vars += tuple(u for u in f.vars if u not in out_vars)
        density.append(
            weighted_sum([(w, f.extended(out_vars)) for w, f in dens_parts])
        )
    mixture = bool(atom_acc) and (bool(dens_parts) or len(atom_acc) > 1)
    if mixture and shared:
        raise UnsupportedElimination(
            "a sum of point masses and densities cannot keep shared factors"
        )
    return Entry(tuple(mass), tuple(density), mixture)


def marginalize(p: MixedPotential, v: str) -> MixedPotential:
    """Remove v from the potential by summation or integration."""
    if v in p.discrete_vars:
        return _marg_discrete(p, v)
    if v not in p.continuous_vars:
        raise DomainMismatch(f"{v!r} is not in the domain")
    cvars = tuple(u for u in p.continuous_vars if u != v)
    cache: dict = {}
    table = {
        cfg: _eliminate_from_entry(entry, v, cache)
        for cfg, entry in p.table.items()
    }
    return MixedPotential(p.discrete_vars, cvars, p.states, table)


def _restrict_density(f: PiecewiseFn, v: str, value: float) -> object:
    """Substitute v := value; a float when fully reduced, else PiecewiseFn."""
    if v not in f.vars:
        return f
    g = substitute_linear(f, v, LinExpr.constant(value))
    if not g.vars:
        return g.as_scalar()
    return g


def _restrict_det(
    d: DeterministicPotential, v: str, value: float
) -> tuple[DeterministicPotential | None, MassPotential | None, float]:
    """Observe v in a deterministic factor.

    Returns (surviving factor, atom slice, scalar weight); exactly one of the
    first two is set unless the whole factor degenerates to a weight.
    """
    kept: list[WeightedEquation] = []
    atoms: dict[tuple, float] = {}
    atom_var: str | None = None
    weight = 0.0
    n_silent = n_resid = n_atom = n_weight = 0
    for eq in d.factors:
        if v not in eq.lhs.vars:
            kept.append(eq)
            n_silent += 1
            continue
        lhs = eq.lhs.substitute(v, LinExpr.constant(value))
        remaining = lhs.vars
        if len(remaining) >= 2:
            kept.append(WeightedEquation(eq.weight, lhs))
            n_resid += 1
        elif len(remaining) == 1:
            (z1,) = remaining
            if atom_var is not None and atom_var != z1:
                raise UnsupportedElimination(
                    "restriction scatters atoms over different variables"
                )
            atom_var = z1
            a = lhs.coeff(z1)
            point = lhs.solve_for(z1).const
            atoms[(point,)] = atoms.get((point,), 0.0) + eq.weight / abs(a)
            n_atom += 1
        else:
            if abs(lhs.const) <= FEAS_TOL:
                weight += eq.weight
                n_weight += 1
            # inconsistent point equations contribute nothing
    if n_weight:
        # a branch satisfied exactly at the point carries mass there, so it
        # dominates branches that only reach the point with zero probability
        if n_silent:
            raise UnsupportedElimination(
                "restriction mixes a point hit with equations that do not "
                f"mention {v!r}"
            )
        return None, None, weight
    populated = sum(1 for n in (n_silent + n_resid, n_atom) if n)
    if populated > 1:
        raise UnsupportedElimination(
            "restriction splits a deterministic factor into mixed kinds"
        )
    if kept:
        return DeterministicPotential(tuple(kept), d.head if d.head != v else None), None, 1.0
    if n_atom:
        return None, MassPotential((atom_var,), atoms), 1.0
    return None, None, weight


def restrict(p: MixedPotential, v: str, value) -> MixedPotential:
    """Condition the potential on an observed value of v."""
    if v in p.discrete_vars:
        label = str(value)
        if label not in p.states[v]:
            raise UnknownState(f"{label!r} is not a state of {v!r}")
        i = p.discrete_vars.index(v)
        rest = p.discrete_vars[:i] + p.discrete_vars[i + 1:]
        states = {u: s for u, s in p.states.items() if u != v}
        table = {
            cfg[:i] + cfg[i + 1:]: entry
            for cfg, entry in p.table.items()
            if cfg[i] == label
        }
        return MixedPotential(rest, p.continuous_vars, states, table)
    if v not in p.continuous_vars:
        raise DomainMismatch(f"{v!r} is not in the domain")
    value = float(value)
    cvars = tuple(u for u in p.continuous_vars if u != v)

    def atom_match(entry: Entry) -> bool:
        if any(
            v in m.domain
            and any(
                abs(float(key[m.domain.index(v)]) - value) <= FEAS_TOL
                for key in m.entries
            )
            for m in entry.atom_slices()
        ):
            return True
        # an equation pinning v exactly at the value is a point mass too
        return any(
            isinstance(f, DeterministicPotential)
            and any(
                eq.lhs.vars == (v,)
                and abs(eq.lhs.solve_for(v).const - value) <= FEAS_TOL
                for eq in f.factors
            )
            for f in entry.density
        )

    has_match = any(
        atom_match(e) for e in p.table.values() if not e.is_zero()
    )
    table: dict[Config, Entry] = {}
    cache: dict[int, tuple] = {}
    for cfg, entry in p.table.items():
        if entry.is_zero() or (has_match and not atom_match(entry)):
            table[cfg] = Entry.zero()
            continue
        if v not in entry.vars():
            table[cfg] = entry
            continue
        if entry.mixture:
            raise UnsupportedElimination(
                f"cannot observe {v!r} inside a sum-form entry"
            )
        mass: list[MassPotential] = []
        zero = False
        for m in entry.mass:
            if v not in m.domain:
                mass.append(m)
                continue
            kept = m.project(v, value, FEAS_TOL)
            if kept is None:
                zero = True
                break
            mass.append(
                MassPotential.scalar(kept) if isinstance(kept, float) else kept
            )
        if zero:
            table[cfg] = Entry.zero()
            continue
        density: list[DensityFactor] = []
        scalar = 1.0
        for f in entry.density:
            key = id(f)
            if key not in cache:
                cache[key] = _restrict_factor(f, v, value)
            kind, payload = cache[key]
            if kind == "keep":
                density.append(payload)
            elif kind == "scalar":
                if payload == 0.0:
                    zero = True
                    break
                scalar *= payload
            elif kind == "zero":
                zero = True
                break
            elif kind == "atom":
                mass.append(payload)
        if zero:
            table[cfg] = Entry.zero()
            continue
        if scalar != 1.0:
            mass.append(MassPotential.scalar(scalar))
        table[cfg] = Entry(tuple(mass), tuple(density))
    return MixedPotential(p.discrete_vars, cvars, p.states, table)


def _restrict_factor(f: DensityFactor, v: str, value: float) -> tuple:
    if isinstance(f, PiecewiseFn):
        if v not in f.vars:
            return ("keep", f)
        g = substitute_linear(f, v, LinExpr.constant(value))
        if not g.vars:
            return ("scalar", g.as_scalar())
        if g.is_zero():
            return ("zero", None)
        return ("keep", g)
    if not f.mentions(v):
        return ("keep", f)
    det, atom, weight = _restrict_det(f, v, value)
    if det is not None:
        return ("keep", det)
    if atom is not None:
        return ("atom", atom)
    if weight == 0.0:
        return ("zero", None)
    return ("scalar", weight)
