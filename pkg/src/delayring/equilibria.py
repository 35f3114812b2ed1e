"""Relative equilibria (rigidly rotating cluster states) of the ring.

A relative equilibrium is stored as radii, phase offsets relative to
oscillator 4, the common frequency Omega, and the delay at which it
exists.  The unknown vector used by the solvers is
``x = (r1, r2, r3, r4, psi1, psi2, psi3, Omega)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidStateError, SingularJacobianError
from .model import MIN_RADIUS, N_OSC, Parameters

TWO_PI = 2.0 * np.pi
RESIDUAL_TOL = 1e-10


def wrap(angle):
    """Map angles into [0, 2 pi)."""
    out = np.mod(angle, TWO_PI)
    # np.mod can round up to exactly 2 pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass(frozen=True)
class RelativeEquilibrium:
    r: np.ndarray
    psi: np.ndarray
    omega_collective: float
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(N_OSC))
        object.__setattr__(self, "psi", np.asarray(self.psi, dtype=float).reshape(N_OSC - 1))
        object.__setattr__(self, "omega_collective", float(self.omega_collective))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def unknowns(self) -> np.ndarray:
        return np.concatenate([self.r, self.psi, [self.omega_collective]])

    @classmethod
    def from_unknowns(cls, x, tau, *, normalize=True) -> "RelativeEquilibrium":
        x = np.asarray(x, dtype=float)
        psi = wrap(x[4:7]) if normalize else x[4:7]
        return cls(x[:4], psi, x[7], tau)

    def normalized(self) -> "RelativeEquilibrium":
        return RelativeEquilibrium(self.r, wrap(self.psi), self.omega_collective, self.tau)

    def phases(self) -> np.ndarray:
        """Phases of all four oscillators in the frame of oscillator 4."""
        return np.append(self.psi, 0.0)

    def to_dict(self) -> dict:
        return {
            "r": self.r.tolist(),
            "psi": self.psi.tolist(),
            "Omega": self.omega_collective,
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, d) -> "RelativeEquilibrium":
        return cls(d["r"], d["psi"], d["Omega"], d["tau"])


@dataclass(frozen=True)
class PrimaryAnsatz:
    """Equal radii r0 and equal neighbour lags 2 pi m / 4."""

    m: int
    r0: float
    omega_collective: float
    tau: float

    @property
    def phase_lag(self) -> float:
        return TWO_PI * self.m / N_OSC


def residual_vec(params: Parameters, x, tau) -> np.ndarray:
    """Steady-rotation residual on the 8 unknowns at delay ``tau``."""
    r = x[:4]
    if np.any(~(r > MIN_RADIUS)):
        raise InvalidStateError(f"non-positive radius in {r}")
    psi = np.append(x[4:7], 0.0)
    omega_c = x[7]
    r_next = np.roll(r, -1)
    theta = np.roll(psi, -1) - psi - omega_c * tau
    pair = params.interaction
    radial = (params.lam - r * r) * r + params.K * r_next * pair.h_r(theta)
    phase = params.omega_array - params.gamma * r * r + params.K * (r_next / r) * pair.h_phi(theta) - omega_c
    return np.concatenate([radial, phase])


def residual(params: Parameters, eq: RelativeEquilibrium) -> np.ndarray:
    """Four radial, three phase-difference and one frequency residual.

    The fourth phase row is the implicit dphi_4/dt equation with the
    common frequency substituted, so a zero residual means oscillator 4
    (and with it every oscillator) rotates at ``eq.omega_collective``.
    """
    return residual_vec(params, eq.unknowns, eq.tau)


def fd_jacobian(fun, x, f0=None, rel_step=1e-7):
    """Forward-difference Jacobian with steps scaled by |x_i|."""
    x = np.asarray(x, dtype=float)
    if f0 is None:
        f0 = fun(x)
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xp[i] += h
        jac[:, i] = (fun(xp) - f0) / (xp[i] - x[i])
    return jac


def damped_newton(fun, x0, *, tol=RESIDUAL_TOL, max_iter=50, jac=None, min_step=2.0**-20,
                  rank_tol=1e-13):
    """Armijo-damped Newton on a square system.

    Returns ``(x, iterations)``.  Convergence is declared on the max-norm
    of the residual.  A rank-deficient Jacobian gets the minimum-norm
    least-squares step (this handles neutral families such as K = 0);
    if the iteration then fails, :class:`SingularJacobianError` is raised.
    """
    x = np.array(x0, dtype=float)
    f = fun(x)
    merit = 0.5 * f @ f
    singular = None

    def fail(message, it):
        cls = SingularJacobianError if singular is not None else ConvergenceError
        if singular is not None:
            message += f"; rank-deficient Jacobian (sigma_min/sigma_max={singular:.2e})"
        return cls(message, last=x, residual=np.max(np.abs(f)), iterations=it)

    for it in range(max_iter + 1):
        if np.max(np.abs(f)) < tol:
            return x, it
        if it == max_iter:
            break
        J = jac(x) if jac is not None else fd_jacobian(fun, x, f)
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] <= rank_tol * sv[0]:
            singular = sv[-1] / sv[0] if sv[0] > 0 else 0.0
            dx = np.linalg.lstsq(J, -f, rcond=1e3 * rank_tol)[0]
        else:
            dx = np.linalg.solve(J, -f)
        t = 1.0
        while True:
            x_new = x + t * dx
            try:
                f_new = fun(x_new)
            except InvalidStateError:
                f_new = None
            if f_new is not None and np.all(np.isfinite(f_new)):
                merit_new = 0.5 * f_new @ f_new
                # Armijo condition with c = 1e-4 on the squared residual
                if merit_new <= (1.0 - 2e-4 * t) * merit or np.max(np.abs(f_new)) < tol:
                    break
            t *= 0.5
            if t < min_step:
                raise fail("line search failed", it)
        x, f, merit = x_new, f_new, merit_new
    raise fail(f"no convergence in {max_iter} iterations", max_iter)


def newton_solve(params: Parameters, guess: RelativeEquilibrium, *, tol=RESIDUAL_TOL,
                 max_iter=50, full_output=False):
    """Converge ``guess`` onto a relative equilibrium at delay ``guess.tau``.

    Returns the equilibrium with psi normalised to [0, 2 pi); with
    ``full_output=True`` also the number of Newton iterations taken.
    """
    if np.any(~(guess.r > 0)):
        raise InvalidStateError("guess radii must be positive")
    tau = guess.tau
    x, its = damped_newton(lambda z: residual_vec(params, z, tau), guess.unknowns,
                           tol=tol, max_iter=max_iter)
    eq = RelativeEquilibrium.from_unknowns(x, tau)
    return (eq, its) if full_output else eq


def _primary_system(params, m, tau, z):
    r0, om = z
    theta = TWO_PI * m / N_OSC - om * tau
    pair = params.interaction
    return np.array([
        params.lam - r0 * r0 + params.K * pair.h_r(theta),
        params.omega[0] - params.gamma * r0 * r0 + params.K * pair.h_phi(theta) - om,
    ])


def _primary_jac(params, m, tau, z):
    r0, om = z
    theta = TWO_PI * m / N_OSC - om * tau
    pair = params.interaction
    return np.array([
        [-2.0 * r0, -tau * params.K * pair.h_r.deriv(theta)],
        [-2.0 * params.gamma * r0, -tau * params.K * pair.h_phi.deriv(theta) - 1.0],
    ])


def primary_residual(params: Parameters, ansatz: PrimaryAnsatz) -> np.ndarray:
    p = params.replace(tau=ansatz.tau)
    return _primary_system(p, ansatz.m, ansatz.tau, (ansatz.r0, ansatz.omega_collective))


def primary_oracle(params: Parameters, m: int, r0_guess: float, omega_guess: float,
                   *, tau: float | None = None, tol=1e-12, max_iter=50) -> PrimaryAnsatz:
    """Solve the two-unknown primary-state system for (r0, Omega_m).

    Uses the identical-oscillator frequency ``params.omega[0]``.
    """
    if m not in (0, 1, 2, 3):
        raise ValueError(f"cluster index m must be 0..3, got {m!r}")
    tau = params.tau if tau is None else float(tau)
    z, _ = damped_newton(
        lambda z: _primary_system(params, m, tau, z),
        np.array([r0_guess, omega_guess], dtype=float),
        jac=lambda z: _primary_jac(params, m, tau, z),
        tol=tol, max_iter=max_iter, rank_tol=1e-15,
    )
    if z[0] <= 0:
        z[0] = -z[0]
    return PrimaryAnsatz(m, float(z[0]), float(z[1]), tau)


def expand_primary(ansatz: PrimaryAnsatz) -> RelativeEquilibrium:
    """Full relative equilibrium with r_j = r0 and phi_j = j * lag."""
    lag = ansatz.phase_lag
    psi = wrap(np.array([(j - N_OSC) * lag for j in (1, 2, 3)]))
    return RelativeEquilibrium(np.full(N_OSC, ansatz.r0), psi, ansatz.omega_collective, ansatz.tau)
