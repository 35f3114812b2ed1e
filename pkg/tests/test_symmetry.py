import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delayring.equilibria import RelativeEquilibrium, residual, wrap
from delayring.errors import InvalidStateError
from delayring.model import FullState, full_rhs_vec
from delayring.symmetry import (
    IDENTITY,
    GroupElement,
    IsotropyClass,
    act,
    act_on_equilibrium,
    act_vector,
    classify_isotropy,
    compose,
    parameter_shift,
)

elements = st.builds(GroupElement, st.floats(-20, 20, allow_nan=False), st.integers(-10, 10))


def circ(a, b):
    return abs((a - b + np.pi) % (2 * np.pi) - np.pi)


def same(g, h, tol=1e-12):
    return g.rotation == h.rotation and circ(g.phase_shift, h.phase_shift) <= tol


def test_compose_examples():
    g = compose(GroupElement(np.pi / 2, 1), GroupElement(np.pi / 2, 1))
    assert (g.phase_shift, g.rotation) == (np.pi, 2)
    h = compose(GroupElement(3 * np.pi / 2, 3), GroupElement(np.pi / 2, 1))
    assert (h.phase_shift, h.rotation) == (0.0, 0)


@given(elements, elements, elements)
def test_group_axioms(g1, g2, g3):
    assert same(compose(compose(g1, g2), g3), compose(g1, compose(g2, g3)))
    assert compose(g1, IDENTITY) == g1
    assert same(compose(g1, g1.inverse()), IDENTITY)
    assert 0 <= g1.phase_shift < 2 * np.pi and 0 <= g1.rotation < 4


def test_group_axioms_many(rng):
    gs = [GroupElement(p, j) for p, j in zip(rng.uniform(-50, 50, 3000), rng.integers(-8, 8, 3000))]
    for a, b, c in zip(gs[0::3], gs[1::3], gs[2::3]):
        assert same(compose(compose(a, b), c), compose(a, compose(b, c)))
        assert compose(a, IDENTITY) == a
        assert same(compose(a.inverse(), a), IDENTITY)


def test_identity_action():
    s = FullState([1, 2, 3, 4], [0.1, 0.2, 0.3, 0.4])
    t = act(IDENTITY, s)
    assert np.array_equal(t.r, s.r) and np.array_equal(t.phi, s.phi)


def test_splay_fixed_by_generator():
    phi = np.array([np.pi / 2, np.pi, 3 * np.pi / 2, 0.0]) + 0.37
    s = FullState(np.full(4, 1.5), phi)
    t = act(GroupElement(-np.pi / 2, 1), s)
    assert np.max([circ(a, b) for a, b in zip(t.phi, s.phi)]) < 1e-14


def test_vector_field_equivariance(relax, rng):
    for _ in range(100):
        g = GroupElement(rng.uniform(0, 2 * np.pi), rng.integers(4))
        now = np.r_[rng.uniform(0.5, 2, 4), rng.uniform(-np.pi, np.pi, 4)]
        dl = np.r_[rng.uniform(0.5, 2, 4), rng.uniform(-np.pi, np.pi, 4)]
        lhs = full_rhs_vec(relax, act_vector(g, now), act_vector(g, dl))
        rhs = act_vector(GroupElement(0.0, g.rotation), full_rhs_vec(relax, now, dl))
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_classify_primary_states(primary_eq):
    for m in range(4):
        c = classify_isotropy(primary_eq(m, 0.9))
        assert c.label == f"H4{m}" and c.order == 4
    assert classify_isotropy(primary_eq(1, 0.9)).pattern_name == "splay"


def test_classify_two_cluster_examples():
    d = 0.4
    rr = [1.2, 1.5, 1.2, 1.5]
    c = classify_isotropy(RelativeEquilibrium(rr, wrap(np.array([d, 0.0, d])), 2.0, 1.0))
    assert (c.label, c.order, c.pattern_name) == ("H20", 2, "compressed-2-cluster")
    # psi = (d, pi, pi + d): fixed by (pi, 2), the partner subgroup
    c = classify_isotropy(RelativeEquilibrium(rr, wrap(np.array([d, np.pi, np.pi + d])), 2.0, 1.0))
    assert (c.label, c.order, c.pattern_name) == ("H21", 2, "open-2-cluster-family")


def test_classify_asymmetric():
    eps = 0.13
    eq = RelativeEquilibrium([1.1, 1.2, 1.3, 1.4], [3 * np.pi / 2 - eps, np.pi, np.pi / 2], 2.0, 1.0)
    c = classify_isotropy(eq)
    assert (c.label, c.order, c.pattern_name) == ("H10", 1, "asymmetric")
    with pytest.raises(ValueError):
        classify_isotropy(eq, tol=0.0)


def test_classification_invariant_under_action(rng):
    samples = [
        RelativeEquilibrium([1.2, 1.5, 1.2, 1.5], [0.4, 0.0, 0.4], 2.0, 1.0),
        RelativeEquilibrium([1.2, 1.5, 1.2, 1.5], [0.4, np.pi, np.pi + 0.4], 2.0, 1.0),
        RelativeEquilibrium(np.full(4, 1.3), [np.pi / 2, np.pi, 3 * np.pi / 2], 2.0, 1.0),
        RelativeEquilibrium([1.1, 1.2, 1.3, 1.4], [1.0, 2.0, 3.0], 2.0, 1.0),
    ]
    for eq in samples:
        base = classify_isotropy(eq).label
        for _ in range(10):
            g = GroupElement(rng.uniform(0, 2 * np.pi), rng.integers(4))
            assert classify_isotropy(act_on_equilibrium(g, eq)).label == base


def test_from_label_orders():
    for lab, order in (("H40", 4), ("H43", 4), ("H20", 2), ("H21", 2), ("H10", 1)):
        c = IsotropyClass.from_label(lab)
        assert c.order == order == len(c.elements)


def test_parameter_shift_identity_and_errors(primary_eq):
    eq = primary_eq(0, 0.9)
    assert parameter_shift(eq, 0) is eq
    with pytest.raises(InvalidStateError):
        parameter_shift(eq, -4)
    with pytest.raises(InvalidStateError):
        parameter_shift(RelativeEquilibrium(np.ones(4), np.zeros(3), 0.0, 1.0), 1)


def test_parameter_shift_advances_primary_index(relax, primary_eq):
    for m in range(4):
        eq = primary_eq(m, 0.6)
        for j in (1, 2, 3):
            new = parameter_shift(eq, j)
            assert abs(new.tau - (eq.tau + j * np.pi / (2 * eq.omega_collective))) < 1e-15
            assert np.max(np.abs(residual(relax, new))) < 1e-9
            assert classify_isotropy(new).label == f"H4{(m + j) % 4}"


def test_parameter_shift_exchanges_two_cluster_groups():
    eq = RelativeEquilibrium([1.2, 1.5, 1.2, 1.5], [0.4, 0.0, 0.4], 2.0, 1.0)
    assert classify_isotropy(parameter_shift(eq, 1)).label == "H21"
    assert classify_isotropy(parameter_shift(eq, 2)).label == "H20"
