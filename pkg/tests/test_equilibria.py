import numpy as np
import pytest

from delayring.equilibria import (
    PrimaryAnsatz,
    RelativeEquilibrium,
    expand_primary,
    newton_solve,
    primary_oracle,
    primary_residual,
    residual,
    wrap,
)
from delayring.errors import InvalidStateError


def test_decoupled_residual_is_exactly_zero(relax):
    p = relax.replace(K=0.0, gamma=0.2)
    eq = RelativeEquilibrium(np.full(4, 1.7), [0.3, 4.0, 1.0], 2.43 - 0.2 * 2.89, 0.6)
    # 1.7**2 rounds to 2.8899999999999997, so compare to rounding level
    assert np.max(np.abs(residual(p, eq))) < 1e-14
    assert np.sqrt(2.89) == 1.7


def test_newton_returns_exact_decoupled_guess(relax):
    p = relax.replace(K=0.0)
    guess = RelativeEquilibrium(np.full(4, 1.7), [0.3, 4.0, 1.0], 2.43, 0.6)
    eq, its = newton_solve(p, guess, full_output=True)
    assert its == 0
    assert np.array_equal(eq.unknowns, guess.unknowns)


def test_newton_with_perturbed_decoupled_guess(relax):
    p = relax.replace(K=0.0)
    guess = RelativeEquilibrium([1.6, 1.8, 1.75, 1.65], [0.3, 4.0, 1.0], 2.0, 0.6)
    eq = newton_solve(p, guess)
    assert np.max(np.abs(eq.r - 1.7)) < 1e-10
    assert abs(eq.omega_collective - 2.43) < 1e-10


def test_newton_matches_oracle_quickly(relax):
    ans = primary_oracle(relax, 0, 1.7, 2.43, tau=0.9)
    eq, its = newton_solve(relax, expand_primary(ans), full_output=True)
    assert its <= 3
    assert np.max(np.abs(eq.r - ans.r0)) < 1e-9
    assert abs(eq.omega_collective - ans.omega_collective) < 1e-9
    assert np.max(np.abs(residual(relax, eq))) < 1e-10


def test_newton_rejects_nonpositive_radius(relax):
    with pytest.raises(InvalidStateError):
        newton_solve(relax, RelativeEquilibrium([1.7, -0.1, 1.7, 1.7], [0, 0, 0], 2.43, 0.9))


def test_oracle_decoupled(relax):
    p = relax.replace(K=0.0, gamma=0.1)
    for m in range(4):
        ans = primary_oracle(p, m, 1.0, 1.0, tau=0.7)
        assert abs(ans.r0 - 1.7) < 1e-12
        assert abs(ans.omega_collective - (2.43 - 0.1 * 2.89)) < 1e-12


def test_oracle_residual_and_bad_index(relax):
    ans = primary_oracle(relax, 3, 1.7, 2.43, tau=1.2)
    assert np.max(np.abs(primary_residual(relax, ans))) < 1e-12
    with pytest.raises(ValueError):
        primary_oracle(relax, 4, 1.7, 2.43)


def test_expand_primary_phases():
    assert np.array_equal(expand_primary(PrimaryAnsatz(0, 1.0, 1.0, 0.5)).psi, np.zeros(3))
    assert np.allclose(expand_primary(PrimaryAnsatz(2, 1.0, 1.0, 0.5)).psi, [np.pi, 0.0, np.pi], atol=1e-15)
    # psi_j = (j - 4) * pi / 2 for the splay state
    assert np.allclose(expand_primary(PrimaryAnsatz(1, 1.0, 1.0, 0.5)).psi,
                       [np.pi / 2, np.pi, 3 * np.pi / 2], atol=1e-15)


def test_expanded_splay_has_small_residual(relax):
    ans = primary_oracle(relax, 1, 1.7, 2.43, tau=0.8)
    assert np.max(np.abs(residual(relax, expand_primary(ans)))) < 1e-10


def test_oracle_equivalence_grid(relax):
    for m in range(4):
        r0, om = 1.7, 2.43
        for tau in np.linspace(0.3, 2.0, 50):
            ans = primary_oracle(relax, m, r0, om, tau=tau)
            r0, om = ans.r0, ans.omega_collective
            assert np.max(np.abs(residual(relax, expand_primary(ans)))) < 1e-9


def test_newton_preserves_primary_ansatz(relax):
    for m in range(4):
        ans = primary_oracle(relax, m, 1.7, 2.43, tau=1.1)
        start = expand_primary(ans)
        guess = RelativeEquilibrium(start.r * 1.01, start.psi, ans.omega_collective + 0.01, 1.1)
        eq = newton_solve(relax, guess)
        assert np.ptp(eq.r) < 1e-9
        lags = wrap(np.diff(np.r_[eq.phases(), eq.phases()[0]]))
        assert np.ptp(np.cos(lags)) < 1e-9 and np.ptp(np.sin(lags)) < 1e-9
        assert np.all((eq.psi >= 0) & (eq.psi < 2 * np.pi))


def explicit_primary_branch(params, m, theta):
    """Primary branch parametrised by the coupling argument theta."""
    pair = params.interaction
    r2 = params.lam + params.K * pair.h_r(theta)
    om = params.omega[0] - params.gamma * r2 + params.K * pair.h_phi(theta)
    return np.sqrt(r2), om, (2 * np.pi * m / 4 - theta) / om


def test_oracle_finds_coexisting_solutions(relax):
    # with gamma = -1 the in-phase branch folds near tau = 2.26
    p = relax.replace(gamma=-1.0)
    theta = np.linspace(0, -15, 300001)
    r0, om, tau = explicit_primary_branch(p, 0, theta)
    target = 2.265
    idx = np.where(np.diff(np.sign(tau - target)) != 0)[0]
    assert len(idx) >= 3
    found = []
    for i in idx:
        ans = primary_oracle(p, 0, r0[i] + 1e-3, om[i] + 1e-3, tau=target)
        assert abs(ans.omega_collective - om[i]) < 1e-3
        found.append(ans.omega_collective)
    assert len(np.unique(np.round(found, 8))) == len(idx)


def test_oracle_matches_explicit_parametrisation(relax):
    theta = np.linspace(-0.5, -4.0, 15)
    for m in range(4):
        r0, om, tau = explicit_primary_branch(relax, m, theta + np.pi * m / 2)
        for a, b, t in zip(r0, om, tau):
            ans = primary_oracle(relax, m, a + 1e-2, b + 1e-2, tau=t)
            assert abs(ans.r0 - a) < 1e-12 and abs(ans.omega_collective - b) < 1e-12


def test_wrap_range():
    x = wrap(np.array([-1e-18, -2 * np.pi, 7.0, 2 * np.pi]))
    assert np.all((x >= 0) & (x < 2 * np.pi))
