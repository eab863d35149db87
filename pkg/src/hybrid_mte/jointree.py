"""Binary join tree construction and two-phase lazy message propagation.

Messages carry decomposed lists of mixed potentials. Building a message from
node A toward neighbor B pools A's assigned potentials with the messages from
A's other neighbors, then removes every pooled variable outside the separator,
one at a time. A variable under evidence is removed by restriction instead of
marginalization, so evidence enters exactly when its variable would leave the
separator; factors whose domain already fits the separator pass through
untouched. The per-variable removal order is searched with backtracking so
orders that dead-end in unsupported eliminations are skipped.

Queries combine a covering node's inputs, reduce to the target variable, and
materialize the result: per remaining configuration the density factors are
multiplied into one piecewise function, point equations become point masses,
and scalar weights fold in. Normalization divides by the total (mass plus
density integral), which is also the evidence likelihood and is identical
whichever variable is queried.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Mapping, Sequence

from .errors import (
    DegenerateDensity,
    DomainMismatch,
    InconsistentEvidence,
    InvalidJoinTree,
    UnknownState,
    UnknownVariable,
    UnsupportedElimination,
)
from .expcalc import PiecewiseFn, definite_integral, evaluate, moment, multiply
from .model import Network, compile_potentials
from .potential import (
    DeterministicPotential,
    Entry,
    MassPotential,
    MixedPotential,
    combine_all,
    marginalize,
    restrict,
)


@dataclass
class JoinTreeNode:
    id: str
    label: frozenset[str]
    neighbors: tuple[str, ...]
    assigned: tuple[str, ...] = ()  # variable names whose potentials live here


@dataclass
class JoinTree:
    network: Network
    nodes: dict[str, JoinTreeNode]
    node_order: tuple[str, ...]
    potentials: dict[str, MixedPotential]

    def smallest_covering(self, names: frozenset[str]) -> str | None:
        best = None
        for nid in self.node_order:
            label = self.nodes[nid].label
            if names <= label and (best is None
                                   or len(label) < len(self.nodes[best].label)):
                best = nid
        return best


def _potential_domain(p: MixedPotential) -> frozenset[str]:
    return frozenset(p.discrete_vars) | frozenset(p.continuous_vars)


def _check_tree(nodes: dict[str, JoinTreeNode], order: Sequence[str]) -> None:
    for nid, node in nodes.items():
        if len(node.neighbors) != len(set(node.neighbors)):
            raise InvalidJoinTree(f"node {nid!r} lists a neighbor twice")
        if len(node.neighbors) > 3:
            raise InvalidJoinTree(
                f"node {nid!r} has {len(node.neighbors)} neighbors; "
                "a binary join tree allows at most 3"
            )
        for nb in node.neighbors:
            if nb not in nodes:
                raise InvalidJoinTree(f"node {nid!r} names unknown {nb!r}")
            if nid not in nodes[nb].neighbors:
                raise InvalidJoinTree(
                    f"edge {nid!r}-{nb!r} is not symmetric"
                )
    # connected with n-1 edges = tree
    n_edges = sum(len(n.neighbors) for n in nodes.values()) // 2
    if n_edges != len(nodes) - 1:
        raise InvalidJoinTree(
            f"{len(nodes)} nodes with {n_edges} edges do not form a tree"
        )
    seen: set[str] = set()
    stack = [order[0]]
    while stack:
        nid = stack.pop()
        if nid in seen:
            continue
        seen.add(nid)
        stack.extend(nodes[nid].neighbors)
    if len(seen) != len(nodes):
        raise InvalidJoinTree("join tree is not connected")
    # running intersection per variable
    all_vars = set().union(*(n.label for n in nodes.values()))
    for v in all_vars:
        holders = {nid for nid, n in nodes.items() if v in n.label}
        start = next(iter(holders))
        reach = {start}
        stack = [start]
        while stack:
            nid = stack.pop()
            for nb in nodes[nid].neighbors:
                if nb in holders and nb not in reach:
                    reach.add(nb)
                    stack.append(nb)
        if reach != holders:
            raise InvalidJoinTree(
                f"nodes containing {v!r} are not connected "
                "(running intersection fails)"
            )


def _load_hint(n: Network, potentials: dict[str, MixedPotential]) -> JoinTree:
    nodes: dict[str, JoinTreeNode] = {}
    order = []
    for h in n.jointree_hint:
        if h.id in nodes:
            raise InvalidJoinTree(f"duplicate node id {h.id!r}")
        for v in h.variables:
            if v not in n.by_name:
                raise InvalidJoinTree(f"node {h.id!r} names unknown {v!r}")
        nodes[h.id] = JoinTreeNode(h.id, frozenset(h.variables), h.neighbors)
        order.append(h.id)
    if not nodes:
        raise InvalidJoinTree("jointree hint has no nodes")
    _check_tree(nodes, order)
    tree = JoinTree(n, nodes, tuple(order), potentials)
    placed: set[str] = set()
    for h in n.jointree_hint:
        for v in h.assigned:
            if v not in potentials:
                raise InvalidJoinTree(f"node {h.id!r} assigns unknown {v!r}")
            if v in placed:
                raise InvalidJoinTree(f"{v!r} is assigned twice")
            if not _potential_domain(potentials[v]) <= nodes[h.id].label:
                raise InvalidJoinTree(
                    f"potential for {v!r} does not fit node {h.id!r}"
                )
            nodes[h.id].assigned += (v,)
            placed.add(v)
    for v in potentials:
        if v in placed:
            continue
        nid = tree.smallest_covering(_potential_domain(potentials[v]))
        if nid is None:
            raise InvalidJoinTree(f"no node covers the potential for {v!r}")
        nodes[nid].assigned += (v,)
    return tree


def _build_auto(n: Network, potentials: dict[str, MixedPotential],
                order: Sequence[str] | None) -> JoinTree:
    names = [v.name for v in n.variables]
    adj: dict[str, set[str]] = {v: set() for v in names}
    for p in potentials.values():
        dom = sorted(_potential_domain(p))
        for i, a in enumerate(dom):
            for b in dom[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
    if order is None:
        work = {v: set(nb) for v, nb in adj.items()}
        order = []
        remaining = set(names)
        while remaining:
            v = min(remaining, key=lambda u: (len(work[u] & remaining), u))
            order.append(v)
            live = work[v] & remaining - {v}
            for a in live:
                work[a] |= live - {a}
            remaining.discard(v)
    else:
        if set(order) != set(names):
            raise InvalidJoinTree("elimination order must cover every variable")
        order = list(order)

    pos = {v: i for i, v in enumerate(order)}
    work = {v: set(nb) for v, nb in adj.items()}
    cliques: list[set[str]] = []
    parent_var: list[str | None] = []
    eliminated: set[str] = set()
    for v in order:
        live = {u for u in work[v] if u not in eliminated}
        clique = {v} | live
        cliques.append(clique)
        later = sorted(live, key=lambda u: pos[u])
        parent_var.append(later[0] if later else None)
        for a in live:
            work[a] |= live - {a}
        eliminated.add(v)

    idx_of_var = {order[i]: i for i in range(len(order))}
    nodes: dict[str, JoinTreeNode] = {}
    ids = [f"c{i}_{order[i]}" for i in range(len(cliques))]
    edges: list[tuple[str, str]] = []
    for i, clique in enumerate(cliques):
        nodes[ids[i]] = JoinTreeNode(ids[i], frozenset(clique), ())
        if parent_var[i] is not None:
            edges.append((ids[i], ids[idx_of_var[parent_var[i]]]))
    # bridge disconnected components with empty separators
    roots = [ids[i] for i in range(len(cliques)) if parent_var[i] is None]
    for extra in roots[1:]:
        edges.append((extra, roots[0]))
    for a, b in edges:
        nodes[a].neighbors += (b,)
        nodes[b].neighbors += (a,)

    _absorb_subsumed(nodes, ids)
    _binarize(nodes)
    node_order = tuple(sorted(nodes))
    _check_tree(nodes, node_order)
    tree = JoinTree(n, nodes, node_order, potentials)
    for v in sorted(potentials):
        nid = tree.smallest_covering(_potential_domain(potentials[v]))
        if nid is None:
            raise InvalidJoinTree(f"no node covers the potential for {v!r}")
        nodes[nid].assigned += (v,)
    return tree


def _absorb_subsumed(nodes: dict[str, JoinTreeNode], ids: list[str]) -> None:
    """Merge any node whose label is contained in a neighbor's label."""
    changed = True
    while changed:
        changed = False
        for nid in list(nodes):
            node = nodes.get(nid)
            if node is None:
                continue
            for nb in node.neighbors:
                if node.label <= nodes[nb].label and len(nodes) > 1:
                    target = nodes[nb]
                    rest = tuple(x for x in node.neighbors if x != nb)
                    target.neighbors = tuple(
                        x for x in target.neighbors if x != nid
                    ) + rest
                    for x in rest:
                        nodes[x].neighbors = tuple(
                            target.id if y == nid else y
                            for y in nodes[x].neighbors
                        )
                    del nodes[nid]
                    changed = True
                    break


def _binarize(nodes: dict[str, JoinTreeNode]) -> None:
    serial = 0
    while True:
        busy = [nid for nid in sorted(nodes)
                if len(nodes[nid].neighbors) > 3]
        if not busy:
            return
        nid = busy[0]
        node = nodes[nid]
        moved, kept = node.neighbors[:2], node.neighbors[2:]
        helper_id = f"{nid}_b{serial}"
        serial += 1
        nodes[helper_id] = JoinTreeNode(
            helper_id, node.label, moved + (nid,)
        )
        node.neighbors = kept + (helper_id,)
        for m in moved:
            nodes[m].neighbors = tuple(
                helper_id if x == nid else x for x in nodes[m].neighbors
            )


def build_join_tree(n: Network, order: Sequence[str] | None = None) -> JoinTree:
    """Binary join tree for the network; an explicit hint wins over search."""
    potentials = compile_potentials(n)
    if n.jointree_hint is not None:
        return _load_hint(n, potentials)
    return _build_auto(n, potentials, order)


def _domain(p: MixedPotential) -> set[str]:
    return set(p.discrete_vars) | set(p.continuous_vars)


def _removal_orders(to_remove: list[str], pool: Sequence[MixedPotential]):
    def score(v: str) -> tuple:
        dets = denss = 0
        for p in pool:
            for entry in p.table.values():
                for f in entry.density:
                    if isinstance(f, DeterministicPotential):
                        if f.mentions(v):
                            dets += 1
                    elif v in f.vars:
                        denss += 1
        return (dets, denss, v)

    ranked = sorted(to_remove, key=score)
    seen = set()
    budget = 120  # backtracking cap; beyond this the last error stands
    for perm in [tuple(ranked)] + sorted(permutations(ranked)):
        if perm in seen:
            continue
        seen.add(perm)
        yield perm
        budget -= 1
        if budget <= 0:
            return


def eliminate_to(
    pool: Sequence[MixedPotential],
    keep: frozenset[str],
    evidence: Mapping[str, object],
) -> list[MixedPotential]:
    """Remove every pooled variable outside keep, staying decomposed.

    Evidence values are applied by restriction at the moment their variable
    is removed. Removal orders are searched; the last failure is re-raised
    when no order is viable.
    """
    all_vars = set()
    for p in pool:
        all_vars |= _domain(p)
    to_remove = sorted(all_vars - keep)
    if not to_remove:
        return list(pool)
    last: Exception | None = None
    for order in _removal_orders(to_remove, pool):
        factors = list(pool)
        try:
            for v in order:
                affected = [f for f in factors if v in _domain(f)]
                factors = [f for f in factors if v not in _domain(f)]
                if not affected:
                    continue
                c = combine_all(affected)
                if v in evidence:
                    c = restrict(c, v, evidence[v])
                else:
                    c = marginalize(c, v)
                factors.append(c)
            return factors
        except UnsupportedElimination as exc:
            last = exc
    raise last


@dataclass
class PropagatedState:
    tree: JoinTree
    evidence: dict[str, object]
    messages: dict[tuple[str, str], list[MixedPotential]] = field(
        default_factory=dict
    )

    def payload(self, src: str, dst: str) -> list[MixedPotential]:
        return self.messages[(src, dst)]


def check_evidence(n: Network, evidence: Mapping[str, object]) -> dict[str, object]:
    clean: dict[str, object] = {}
    for name, value in evidence.items():
        if name not in n.by_name:
            raise UnknownVariable(f"evidence names unknown variable {name!r}")
        v = n.by_name[name]
        if v.kind == "discrete":
            label = str(value)
            if label not in v.states:
                raise UnknownState(
                    f"{label!r} is not a state of {name!r}"
                )
            clean[name] = label
        else:
            clean[name] = float(value)
    return clean


def _message(state: PropagatedState, src: str, dst: str) -> list[MixedPotential]:
    key = (src, dst)
    if key in state.messages:
        return state.messages[key]
    tree = state.tree
    node = tree.nodes[src]
    pool: list[MixedPotential] = [tree.potentials[v] for v in node.assigned]
    for nb in node.neighbors:
        if nb != dst:
            pool.extend(_message(state, nb, src))
    separator = node.label & tree.nodes[dst].label
    try:
        payload = eliminate_to(pool, frozenset(separator), state.evidence)
    except UnsupportedElimination as exc:
        raise UnsupportedElimination(
            f"message {src!r} -> {dst!r}: {exc}"
        ) from exc
    state.messages[key] = payload
    return payload


def propagate(tree: JoinTree, evidence: Mapping[str, object] | None = None) -> PropagatedState:
    """Two-phase pass: every edge ends up with messages both ways.

    Messages are cached per state, so a state holds one solved propagation
    for one evidence assignment; new evidence means a new propagate call.
    """
    state = PropagatedState(tree, check_evidence(tree.network, evidence or {}))
    for nid in tree.node_order:
        for nb in tree.nodes[nid].neighbors:
            _message(state, nb, nid)
            _message(state, nid, nb)
    return state


def _materialize_entry(entry: Entry) -> Entry:
    """Fold an entry into atoms plus at most one density factor.

    Point equations become point masses as they do under observation, and
    the scalar weight distributes over the parts. Entries reaching this
    point are univariate, so a sum-form entry folds cleanly.
    """
    if entry.is_zero():
        return Entry.zero()
    scalar = entry.scalar_weight()
    atoms: dict[str, dict[tuple, float]] = {}
    for m in entry.atom_slices():
        if len(m.domain) != 1:
            raise DomainMismatch("marginal entry has a joint point mass")
        slot = atoms.setdefault(m.domain[0], {})
        for key, w in m.entries.items():
            slot[key] = slot.get(key, 0.0) + w
    fn: PiecewiseFn | None = None
    for f in entry.density:
        if isinstance(f, DeterministicPotential):
            if not f.is_point():
                raise UnsupportedElimination(
                    "marginal still carries a multi-variable equation"
                )
            for eq in f.factors:
                (var,) = eq.lhs.vars
                point = eq.lhs.solve_for(var).const
                slot = atoms.setdefault(var, {})
                # density reading of the delta: divide by the coefficient
                slot[(point,)] = (
                    slot.get((point,), 0.0)
                    + eq.weight / abs(eq.lhs.coeff(var))
                )
        else:
            fn = f if fn is None else multiply(fn, f)
    if atoms and fn is not None and not entry.mixture:
        # product form: the density just weights each point
        for var, slot in atoms.items():
            for key in list(slot):
                slot[key] *= evaluate(fn, {var: float(key[0])})
        fn = None
    mass = []
    for var in sorted(atoms):
        slot = {k: w * scalar for k, w in atoms[var].items()}
        mass.append(MassPotential((var,), slot))
    density: tuple = ()
    if fn is not None:
        density = (fn.scaled(scalar),)
    elif not mass:
        mass.append(MassPotential.scalar(scalar))
    return Entry(tuple(mass), density, bool(atoms) and fn is not None)


def query_marginal(state: PropagatedState, v: str) -> MixedPotential:
    """Unnormalized mixed marginal for v under the state's evidence."""
    tree = state.tree
    if v not in tree.network.by_name:
        raise UnknownVariable(f"unknown variable {v!r}")
    nid = tree.smallest_covering(frozenset({v}))
    node = tree.nodes[nid]
    pool: list[MixedPotential] = [tree.potentials[u] for u in node.assigned]
    for nb in node.neighbors:
        pool.extend(_message(state, nb, nid))
    evidence = dict(state.evidence)
    value = evidence.pop(v, None)
    try:
        factors = eliminate_to(pool, frozenset({v}), evidence)
        combined = combine_all(factors)
        if value is not None:
            combined = restrict(combined, v, value)
    except UnsupportedElimination as exc:
        raise UnsupportedElimination(f"query for {v!r}: {exc}") from exc
    if value is not None and tree.network.by_name[v].kind != "discrete":
        entry = combined.single_entry()
        weight = entry.scalar_weight() if not entry.is_zero() else 0.0
        table = {(): Entry((MassPotential((v,), {(float(value),): weight}),), ())
                 if weight > 0.0 else Entry.zero()}
        return MixedPotential((), (v,), {}, table)
    if value is not None:
        # discrete evidence variable: a one-state restricted table
        states = tree.network.by_name[v].states
        table = {}
        for s in states:
            if s == value:
                table[(s,)] = _materialize_entry(combined.single_entry())
            else:
                table[(s,)] = Entry.zero()
        return MixedPotential((v,), (), {v: states}, table)
    table = {
        cfg: _materialize_entry(entry)
        for cfg, entry in combined.table.items()
    }
    return MixedPotential(
        combined.discrete_vars, combined.continuous_vars, combined.states, table
    )


def marginal_total(m: MixedPotential) -> float:
    """Total mass plus density integral of a materialized marginal."""
    total = 0.0
    for entry in m.table.values():
        if entry.is_zero():
            continue
        scalar = entry.scalar_weight()
        slices = entry.atom_slices()
        got = False
        for s in slices:
            total += scalar * s.total()
            got = True
        for f in entry.density:
            if isinstance(f, DeterministicPotential):
                raise DomainMismatch("marginal entry holds an equation")
            total += scalar * definite_integral(f)
            got = True
        if not got:
            total += scalar
    return total


def _scale_entry(entry: Entry, k: float) -> Entry:
    """Scale a materialized entry; every additive part picks up k."""
    if entry.is_zero():
        return entry
    atoms = entry.atom_slices()
    density = entry.density
    if not atoms and not density:
        return Entry((MassPotential.scalar(entry.scalar_weight() * k),), ())
    mass = tuple(m.scaled(k) for m in atoms)
    dens = tuple(f.scaled(k) for f in density)
    return Entry(mass, dens, entry.mixture)


def normalize_marginal(m: MixedPotential) -> tuple[MixedPotential, float]:
    """Scale a materialized univariate marginal to total one.

    Returns the normalized marginal and the evidence weight (the total).
    """
    weight = marginal_total(m)
    if not weight > 0.0:
        raise InconsistentEvidence(
            "marginal has zero total mass; the evidence is contradictory"
        )
    k = 1.0 / weight
    table = {cfg: _scale_entry(e, k) for cfg, e in m.table.items()}
    return (
        MixedPotential(m.discrete_vars, m.continuous_vars, m.states, table),
        weight,
    )


def marginal_parts(
    m: MixedPotential,
) -> tuple[dict[object, float], PiecewiseFn | None]:
    """(point masses keyed by state label or value, density) of a marginal."""
    masses: dict[object, float] = {}
    density: PiecewiseFn | None = None
    if m.discrete_vars:
        if len(m.discrete_vars) != 1:
            raise DomainMismatch("marginal is not univariate")
        for cfg, entry in m.table.items():
            if entry.is_zero():
                masses[cfg[0]] = 0.0
                continue
            if entry.density or entry.atom_slices():
                raise DomainMismatch("discrete marginal carries a density")
            masses[cfg[0]] = entry.scalar_weight()
        return masses, None
    entry = m.single_entry()
    if entry.is_zero():
        return masses, None
    scalar = entry.scalar_weight()
    for s in entry.atom_slices():
        for key, w in s.entries.items():
            masses[key[0]] = masses.get(key[0], 0.0) + scalar * w
    for f in entry.density:
        if isinstance(f, DeterministicPotential):
            raise DomainMismatch("marginal entry holds an equation")
        g = f.scaled(scalar) if scalar != 1.0 else f
        density = g if density is None else multiply(density, g)
    return masses, density


def posterior_moments(state: PropagatedState, v: str) -> tuple[float, float]:
    """Mean and variance of the normalized posterior marginal of v."""
    normalized, _ = normalize_marginal(query_marginal(state, v))
    masses, density = marginal_parts(normalized)
    if density is None and not masses:
        raise DegenerateDensity(f"marginal for {v!r} has no mass")
    mean = 0.0
    second = 0.0
    for x, w in masses.items():
        try:
            x = float(x)
        except ValueError:
            raise DomainMismatch(
                f"states of {v!r} are not numeric; moments are undefined"
            ) from None
        mean += x * w
        second += x * x * w
    if density is not None:
        total = definite_integral(density)
        if total > 0.0:
            mean += moment(density, v, 1) * total
            second += moment(density, v, 2) * total
    return mean, second - mean * mean
