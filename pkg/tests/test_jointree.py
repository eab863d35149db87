"""Join tree construction, two-phase propagation, and posterior queries."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

import worked_cases
from conftest import random_network
from hybrid_mte.errors import (
    InconsistentEvidence,
    InvalidJoinTree,
    UnknownState,
    UnknownVariable,
)
from hybrid_mte.expcalc import (
    definite_integral,
    evaluate,
    moment,
    substitute_linear,
)
from hybrid_mte.linexpr import LinExpr
from hybrid_mte.jointree import (
    _materialize_entry,
    build_join_tree,
    check_evidence,
    eliminate_to,
    marginal_parts,
    marginal_total,
    normalize_marginal,
    posterior_moments,
    propagate,
    query_marginal,
)
from hybrid_mte.model import compile_potentials, density_fn, parse_model
from hybrid_mte.potential import Entry, MassPotential, MixedPotential, combine_all

MODELS = Path(__file__).resolve().parent.parent / "models"

HINT_IDS = (
    "n_y1", "n_x1y1", "n_x1", "n_x1y1z1", "n_x1z1", "n_z1",
    "n_x1z1z2", "n_z1z2", "n_x2z1z2", "n_x2z2", "n_z2",
)


@pytest.fixture(scope="module")
def f3_tree(figure3):
    return build_join_tree(figure3)


@pytest.fixture(scope="module")
def f3_prior(f3_tree):
    return propagate(f3_tree)


def _posterior(state, v):
    norm, weight = normalize_marginal(query_marginal(state, v))
    masses, density = marginal_parts(norm)
    return masses, density, weight


# --- tree construction ------------------------------------------------------

def test_layout_hint_is_honored(figure3, f3_tree):
    assert f3_tree.node_order == HINT_IDS
    assert set(f3_tree.nodes) == set(HINT_IDS)
    for node in f3_tree.nodes.values():
        assert 1 <= len(node.neighbors) <= 3
    placed = {
        v: nid for nid, node in f3_tree.nodes.items() for v in node.assigned
    }
    assert placed == {
        "Y1": "n_y1",
        "X1": "n_x1y1z1",
        "Z1": "n_z1",
        "Z2": "n_x1z1z2",
        "X2": "n_x2z1z2",
    }
    # every edge separator on this tree has at most two variables
    for nid, node in f3_tree.nodes.items():
        for nb in node.neighbors:
            assert len(node.label & f3_tree.nodes[nb].label) <= 2


def test_smallest_covering_prefers_tight_nodes(f3_tree):
    assert f3_tree.smallest_covering(frozenset({"X1", "Z1"})) == "n_x1z1"
    assert f3_tree.smallest_covering(frozenset({"Z2"})) == "n_z2"
    assert f3_tree.smallest_covering(frozenset({"Y1", "Z2"})) is None


def test_auto_build_places_every_potential(mixed_model):
    tree = build_join_tree(mixed_model)
    pots = compile_potentials(mixed_model)
    placed = {
        v: nid for nid, node in tree.nodes.items() for v in node.assigned
    }
    assert set(placed) == set(pots)
    for v, nid in placed.items():
        dom = set(pots[v].discrete_vars) | set(pots[v].continuous_vars)
        assert dom <= tree.nodes[nid].label
    for node in tree.nodes.values():
        assert len(node.neighbors) <= 3


def _doc():
    return json.loads((MODELS / "figure3.json").read_text())


def _build(doc):
    return build_join_tree(parse_model(json.dumps(doc)))


def test_rejects_node_with_four_neighbors():
    doc = _doc()
    doc["jointree"][4]["neighbors"].append("n_y1")
    doc["jointree"][0]["neighbors"].append("n_x1z1")
    with pytest.raises(InvalidJoinTree, match="at most 3"):
        _build(doc)


def test_rejects_asymmetric_edge():
    doc = _doc()
    doc["jointree"][0]["neighbors"].append("n_z2")
    with pytest.raises(InvalidJoinTree, match="not symmetric"):
        _build(doc)


def test_rejects_disconnected_graph():
    doc = _doc()
    doc["jointree"][2]["neighbors"] = []
    doc["jointree"][1]["neighbors"].remove("n_x1")
    with pytest.raises(InvalidJoinTree, match="do not form a tree"):
        _build(doc)


def test_rejects_broken_running_intersection():
    doc = _doc()
    doc["jointree"][4]["variables"] = ["X1"]
    with pytest.raises(InvalidJoinTree, match="running intersection"):
        _build(doc)


def test_rejects_assignment_outside_node_label():
    doc = _doc()
    doc["jointree"][3]["assigned"] = []
    doc["jointree"][2]["assigned"] = ["X1"]
    with pytest.raises(InvalidJoinTree, match="does not fit"):
        _build(doc)


def test_rejects_unknown_variable_in_node():
    doc = _doc()
    doc["jointree"][0]["variables"] = ["Q", "Y1"]
    with pytest.raises(InvalidJoinTree, match="names unknown"):
        _build(doc)


# --- message contents -------------------------------------------------------

def test_every_message_matches_hand_built_expression():
    assert worked_cases.run_message_trace() == 12


# --- queries without evidence -----------------------------------------------

def test_no_evidence_moments_and_masses(f3_prior):
    masses, density, k = _posterior(f3_prior, "Y1")
    assert density is None
    assert abs(masses["0"] - 0.6) <= 1e-9
    assert abs(masses["1"] - 0.4) <= 1e-9
    assert abs(k - 1.00001247408) <= 1e-9

    mean_z1, var_z1 = posterior_moments(f3_prior, "Z1")
    mean_x1, var_x1 = posterior_moments(f3_prior, "X1")
    mean_z2, var_z2 = posterior_moments(f3_prior, "Z2")
    mean_x2, var_x2 = posterior_moments(f3_prior, "X2")

    assert abs(mean_z1 - 0.0) <= 1e-6
    assert abs(mean_x1 - (-0.2)) <= 1e-6
    assert abs(mean_z2 - (-0.12)) <= 1e-6
    assert abs(mean_x2 - (-0.09)) <= 1e-6

    # propagate the root moments through the two linear branches by hand
    m0 = 2.0 * mean_z1 - 1.0
    m1 = 0.25 * mean_z1 + 1.0
    want_mean = 0.6 * m0 + 0.4 * m1
    want_var = (
        0.6 * (4.0 * var_z1 + m0 * m0)
        + 0.4 * (0.0625 * var_z1 + m1 * m1)
        - want_mean * want_mean
    )
    assert abs(var_x1 - want_var) <= 1e-8 * want_var
    # the dependent noise term reuses the unit-variance template
    assert abs(var_z2 - (0.36 * var_x1 + var_z1)) <= 1e-8 * var_z2
    cov_z1_x1 = 1.3 * var_z1
    want_var_x2 = (
        0.16 * var_z1 + 0.5625 * var_z2 + 0.6 * 0.6 * cov_z1_x1
    )
    assert abs(var_x2 - want_var_x2) <= 1e-8 * var_x2

    assert abs(var_x1 - 3.3410209450110213) <= 1e-8
    assert abs(var_z1 - 0.9818643072209929) <= 1e-8
    assert abs(var_z2 - 2.1846318475710196) <= 1e-8
    assert abs(var_x2 - 1.84546619912108) <= 1e-8


def test_no_evidence_likelihood_is_query_invariant(f3_prior):
    ks = [
        normalize_marginal(query_marginal(f3_prior, v))[1]
        for v in ("Y1", "X1", "Z1", "Z2", "X2")
    ]
    assert max(ks) - min(ks) <= 1e-9 * max(ks)


# --- continuous evidence ----------------------------------------------------

def test_clamped_reading_posteriors(f3_tree):
    state = propagate(f3_tree, {"X2": 1.0})
    masses, density, k = _posterior(state, "Y1")
    assert density is None
    assert abs(k - 0.24624868943) <= 1e-9
    assert abs(masses["1"] - 0.5952423811562546) <= 1e-8
    assert abs(masses["0"] - 0.40475761884374556) <= 1e-8

    for v, want_mean, want_var in (
        ("X1", 0.9181345279054998, 0.4717031822322134),
        ("Z1", 0.5438334841619508, 0.5626307107720121),
        ("Z2", 1.0432888084433216, 0.16003717995485967),
    ):
        mean, var = posterior_moments(state, v)
        assert abs(mean - want_mean) <= 1e-8
        assert abs(var - want_var) <= 1e-8
        _, w = normalize_marginal(query_marginal(state, v))
        assert abs(w - k) <= 1e-9

    # querying the observed variable returns its point mass at full weight
    masses, density, w = _posterior(state, "X2")
    assert density is None
    assert set(masses) == {1.0}
    assert abs(masses[1.0] - 1.0) <= 1e-12
    assert abs(w - k) <= 1e-9


def test_point_evidence_on_equation_head(figure3, f3_tree):
    state = propagate(f3_tree, {"X1": 1.0})

    # Bayes by hand: each branch inverts to a root point whose density is
    # scaled by the branch slope; the dependent density integrates out to
    # its own (slightly leaky) template mass
    phi1 = density_fn(figure3, "Z1", ())
    phi2 = density_fn(figure3, "Z2", ())
    w0 = 0.6 * evaluate(phi1, {"Z1": 1.0}) / 2.0
    w1 = 0.4 * evaluate(phi1, {"Z1": 0.0}) / 0.25
    leak = definite_integral(
        substitute_linear(phi2, "X1", LinExpr.constant(1.0))
    )
    k_want = (w0 + w1) * leak

    masses, density, k = _posterior(state, "Y1")
    assert density is None
    assert abs(k - k_want) <= 1e-9 * k_want
    assert abs(masses["0"] - w0 / (w0 + w1)) <= 1e-9
    assert abs(masses["1"] - w1 / (w0 + w1)) <= 1e-9
    assert abs(masses["0"] - 0.1002659539399814) <= 1e-8

    # the root marginal collapses to the two branch preimages
    masses, density, _ = _posterior(state, "Z1")
    assert density is None
    assert set(masses) == {0.0, 1.0}
    assert abs(masses[1.0] - w0 / (w0 + w1)) <= 1e-9
    assert abs(masses[0.0] - w1 / (w0 + w1)) <= 1e-9

    p = w0 / (w0 + w1)
    mean_z1, var_z1 = posterior_moments(state, "Z1")
    assert abs(mean_z1 - p) <= 1e-9
    assert abs(var_z1 - p * (1.0 - p)) <= 1e-9

    # downstream of the observation the dependent noise is unperturbed
    mean_z2, var_z2 = posterior_moments(state, "Z2")
    assert abs(mean_z2 - 0.6) <= 1e-8
    assert abs(var_z2 - 0.9818643072209929) <= 1e-8

    mean_x2, var_x2 = posterior_moments(state, "X2")
    assert abs(mean_x2 - (0.4 * mean_z1 + 0.75 * mean_z2)) <= 1e-8
    want_var_x2 = 0.16 * var_z1 + 0.5625 * var_z2
    assert abs(var_x2 - want_var_x2) <= 1e-8


# --- discrete evidence ------------------------------------------------------

def test_label_evidence_selects_branch(f3_tree):
    state = propagate(f3_tree, {"Y1": "1"})
    _, _, k = _posterior(state, "X1")
    assert abs(k - 0.4000049896373) <= 1e-9

    mean_z1, var_z1 = posterior_moments(state, "Z1")
    mean_x1, var_x1 = posterior_moments(state, "X1")
    mean_z2, var_z2 = posterior_moments(state, "Z2")
    mean_x2, var_x2 = posterior_moments(state, "X2")

    assert abs(mean_x1 - (0.25 * mean_z1 + 1.0)) <= 1e-9
    assert abs(var_x1 - 0.0625 * var_z1) <= 1e-9
    assert abs(mean_z2 - 0.6 * mean_x1) <= 1e-8
    assert abs(var_z2 - (0.36 * var_x1 + var_z1)) <= 1e-8
    cov_z1_z2 = 0.6 * 0.25 * var_z1
    assert abs(mean_x2 - (0.4 * mean_z1 + 0.75 * mean_z2)) <= 1e-8
    want_var_x2 = 0.16 * var_z1 + 0.5625 * var_z2 + 0.6 * cov_z1_z2
    assert abs(var_x2 - want_var_x2) <= 1e-8


# --- a model mixing atoms and a density in one marginal ----------------------

def test_mixed_marginal_keeps_atoms_and_density(mixed_model):
    tree = build_join_tree(mixed_model)
    state = propagate(tree)
    norm, k = normalize_marginal(query_marginal(state, "X"))
    # every selector branch carries the same template leakage, so the
    # total equals the template integral and the atom masses normalize
    # back to their table weights
    leak = definite_integral(density_fn(mixed_model, "Z", ()))
    assert abs(k - leak) <= 1e-9
    assert abs(k - 1.000006237020) <= 1e-9
    masses, density = marginal_parts(norm)
    assert density is not None
    assert set(masses) == {1.0, 2.0}
    assert abs(masses[1.0] - 0.5) <= 1e-9
    assert abs(masses[2.0] - 0.3) <= 1e-9

    mean, var = posterior_moments(state, "X")
    mean_t = moment(density_fn(mixed_model, "Z", ()), "Z", 1)
    m2_t = moment(density_fn(mixed_model, "Z", ()), "Z", 2)
    want_mean = 0.5 * 1.0 + 0.3 * 2.0 + 0.2 * mean_t
    want_var = 0.5 * 1.0 + 0.3 * 4.0 + 0.2 * m2_t - want_mean * want_mean
    assert abs(mean - want_mean) <= 1e-9
    assert abs(var - want_var) <= 1e-9
    assert abs(mean - 1.7) <= 1e-4
    assert abs(var - 0.806372861444) <= 1e-8


def test_observing_an_atom_value_zeroes_the_density_branch(mixed_model):
    tree = build_join_tree(mixed_model)
    state = propagate(tree, {"X": 1.0})
    masses, density, k = _posterior(state, "Y")
    assert density is None
    leak = definite_integral(density_fn(mixed_model, "Z", ()))
    assert abs(k - 0.5 * leak) <= 1e-9
    assert abs(masses["1"] - 1.0) <= 1e-12
    assert abs(masses["2"]) <= 1e-12
    assert abs(masses["3"]) <= 1e-12


def test_observing_off_atom_value_keeps_only_the_density(mixed_model):
    tree = build_join_tree(mixed_model)
    state = propagate(tree, {"X": 1.5})
    phi_z = density_fn(mixed_model, "Z", ())
    k_want = 0.2 * evaluate(phi_z, {"Z": 1.5})
    masses, density, k = _posterior(state, "Y")
    assert abs(k - k_want) <= 1e-9 * max(1.0, k_want)
    assert abs(masses["3"] - 1.0) <= 1e-9


# --- normalization and failure paths ----------------------------------------

def test_normalize_rescales_mass_table():
    m = MixedPotential(
        (), ("X",),
        {},
        {(): Entry((MassPotential(("X",), {(2.0,): 2.0, (6.0,): 6.0}),), ())},
    )
    norm, weight = normalize_marginal(m)
    assert abs(weight - 8.0) <= 1e-12
    masses, density = marginal_parts(norm)
    assert density is None
    assert abs(masses[2.0] - 0.25) <= 1e-12
    assert abs(masses[6.0] - 0.75) <= 1e-12


def test_impossible_evidence_raises(f3_tree, mixed_model):
    state = propagate(f3_tree, {"X1": 50.0})
    with pytest.raises(InconsistentEvidence):
        normalize_marginal(query_marginal(state, "Y1"))
    tree = build_join_tree(mixed_model)
    state = propagate(tree, {"X": 7.5})
    with pytest.raises(InconsistentEvidence):
        normalize_marginal(query_marginal(state, "Y"))


def test_evidence_validation(figure3):
    with pytest.raises(UnknownVariable):
        check_evidence(figure3, {"Q": 1.0})
    with pytest.raises(UnknownState):
        check_evidence(figure3, {"Y1": "2"})
    out = check_evidence(figure3, {"Z1": 1, "Y1": "1"})
    assert out["Z1"] == 1.0 and isinstance(out["Z1"], float)
    assert out["Y1"] == "1"


# --- propagation agrees with direct elimination ------------------------------

def _direct_marginal(pool, v):
    combined = combine_all(eliminate_to(pool, frozenset({v}), {}))
    table = {
        cfg: _materialize_entry(e) for cfg, e in combined.table.items()
    }
    return MixedPotential(
        combined.discrete_vars, combined.continuous_vars,
        combined.states, table,
    )


def _assert_same_marginal(got, want, rng):
    t_got = marginal_total(got)
    t_want = marginal_total(want)
    assert abs(t_got - t_want) <= 1e-9 * max(1.0, abs(t_want))
    m_got, d_got = marginal_parts(got)
    m_want, d_want = marginal_parts(want)
    assert len(m_got) == len(m_want)
    if m_got and isinstance(next(iter(m_got)), float):
        pairs = zip(sorted(m_got.items()), sorted(m_want.items()))
        for (k_g, w_g), (k_w, w_w) in pairs:
            assert abs(k_g - k_w) <= 1e-9
            assert abs(w_g - w_w) <= 1e-9 * max(1.0, abs(w_w))
    else:
        for key, w_w in m_want.items():
            assert abs(m_got[key] - w_w) <= 1e-9 * max(1.0, abs(w_w))
    assert (d_got is None) == (d_want is None)
    if d_got is not None:
        v = d_want.vars[0]
        for _ in range(30):
            pt = {v: rng.uniform(-8.0, 8.0)}
            a = evaluate(d_got, pt)
            b = evaluate(d_want, pt)
            assert abs(a - b) <= 1e-9 * max(1.0, abs(b))


def test_propagation_matches_direct_elimination():
    rng = random.Random(909)
    for _ in range(25):
        n = random_network(rng)
        tree = build_join_tree(n)
        state = propagate(tree)
        pool = list(compile_potentials(n).values())
        totals = []
        for name in (x.name for x in n.variables):
            got = query_marginal(state, name)
            want = _direct_marginal(pool, name)
            _assert_same_marginal(got, want, rng)
            totals.append(marginal_total(got))
        # the un-normalized total is the same quantity whichever variable
        # is queried, so the spread across queries must vanish
        assert max(totals) - min(totals) <= 1e-9 * max(1.0, max(totals))
