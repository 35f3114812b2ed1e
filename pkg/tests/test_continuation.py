import numpy as np
import pytest

from delayring.continuation import (
    DIM,
    StepPolicy,
    broken_element,
    child_branch,
    continue_branch,
    detect_bifurcations,
    switch_branch,
)
from delayring.equilibria import PrimaryAnsatz, newton_solve, primary_residual, residual
from delayring.errors import ConvergenceError
from delayring.symmetry import act_on_equilibrium, classify_isotropy


@pytest.fixture(scope="module")
def in_phase(relax, primary_eq):
    return continue_branch(relax, primary_eq(0, 0.4), (0.3, 2.0))


def unknowns_distance(a, b):
    dpsi = np.angle(np.exp(1j * (a.psi - b.psi)))
    return max(np.max(np.abs(a.r - b.r)), np.max(np.abs(dpsi)),
               abs(a.omega_collective - b.omega_collective), abs(a.tau - b.tau))


def test_branch_stays_primary(relax, in_phase):
    assert in_phase.taus.min() <= 0.3 + 1e-9 or in_phase.termination in ("left-range", "closed-loop")
    for pt in in_phase.points:
        eq = pt.eq
        assert np.max(np.abs(residual(relax, eq))) < 1e-10
        ans = PrimaryAnsatz(0, float(eq.r.mean()), eq.omega_collective, eq.tau)
        assert np.max(np.abs(primary_residual(relax, ans))) < 1e-9
        assert pt.isotropy.label == "H40"


def test_branch_points_are_newton_fixed_points(relax, in_phase):
    for pt in in_phase.points[::5]:
        again = newton_solve(relax, pt.eq)
        assert unknowns_distance(again, pt.eq) < 1e-9


def test_step_cap_respected(in_phase):
    cap = StepPolicy().max_step
    for a, b in zip(in_phase.points, in_phase.points[1:]):
        assert np.linalg.norm(b.vector - a.vector) <= cap * (1 + 1e-6) + 1e-12
        assert b.arclength > a.arclength


def test_unstable_count_changes_only_at_bifurcations(in_phase):
    brackets = set()
    for b in in_phase.bifurcations:
        lo, hi = sorted((b.tau, b.tau))
        brackets.add((lo, hi))
    for a, b in zip(in_phase.points, in_phase.points[1:]):
        if a.n_unstable != b.n_unstable:
            lo, hi = sorted((a.tau, b.tau))
            assert any(lo - 1e-6 <= t <= hi + 1e-6 for t, _ in brackets)


def test_in_phase_bifurcations(in_phase):
    kinds = {b.kind for b in in_phase.bifurcations}
    assert {"pitchfork", "hopf"} <= kinds
    for b in in_phase.bifurcations:
        assert 0.3 <= b.tau <= 2.0
        assert abs(b.critical_root.real) < 1e-3
        if b.kind == "pitchfork":
            assert b.symmetry_broken
            assert abs(b.critical_root) < 1e-3
        if b.kind == "hopf":
            assert abs(b.critical_root.imag) > 0


def test_decoupled_branch_is_flat(relax, primary_eq):
    p = relax.replace(K=0.0)
    eq = newton_solve(p, primary_eq(0, 0.4).__class__(np.full(4, 1.7), np.zeros(3), 2.43, 0.4))
    br = continue_branch(p, eq, (0.3, 1.0))
    assert len(br) > 3
    assert np.max(np.abs(br.omegas - 2.43)) < 1e-12
    assert br.bifurcations == []
    assert detect_bifurcations(br) == []


def test_seed_outside_range_fails(relax, primary_eq):
    with pytest.raises(ConvergenceError):
        continue_branch(relax, primary_eq(0, 0.4), (0.5, 1.0))


def test_switching_gives_mirror_children(relax, in_phase):
    bif = next(b for b in in_phase.bifurcations if b.kind == "pitchfork")
    plus = switch_branch(relax, bif, +1)
    minus = switch_branch(relax, bif, -1)
    assert classify_isotropy(plus).order == 2 and classify_isotropy(minus).order == 2
    g = broken_element(bif)
    assert g is not None and g not in classify_isotropy(plus).elements
    assert unknowns_distance(act_on_equilibrium(g, plus), minus) < 1e-6


def test_switching_needs_pitchfork(relax, in_phase):
    hopf = next(b for b in in_phase.bifurcations if b.kind == "hopf")
    with pytest.raises(ValueError):
        switch_branch(relax, hopf)


def test_subgroup_chain(relax, in_phase):
    bif = next(b for b in in_phase.bifurcations if b.kind == "pitchfork")
    child = child_branch(relax, bif, (0.3, 2.0), step=StepPolicy(max_points=300))
    assert {pt.isotropy.label for pt in child.points} == {"H20"}
    inner = [b for b in child.bifurcations if b.kind == "pitchfork" and b.isotropy.order == 2]
    assert inner
    grand = switch_branch(relax, inner[0], +1)
    assert classify_isotropy(grand).label == "H10"


def test_tangent_shape(in_phase):
    assert in_phase.points[0].vector.shape == (DIM,)
