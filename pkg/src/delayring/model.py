"""Delay-coupled ring of four Stuart-Landau oscillators.

Full model: radii r_j and phases phi_j, with oscillator j driven by
oscillator j+1 (mod 4) through the delayed argument
``phi_{j+1}(t - tau) - phi_j(t)``.

Reduced model: phases are measured relative to oscillator 4,
``psi_j = phi_j - phi_4`` (j = 1..3).  The frequency of oscillator 4 enters
through an implicit scalar equation that is re-solved on every evaluation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .coupling import InteractionPair, builtin_relaxation, builtin_sinusoidal
from .errors import ConvergenceError, InvalidStateError

N_OSC = 4
MIN_RADIUS = 1e-8
# index of the driving neighbour j+1 (mod 4)
NEXT = np.array([1, 2, 3, 0])


@dataclass(frozen=True)
class Parameters:
    lam: float
    omega: tuple
    gamma: float
    K: float
    tau: float
    interaction: InteractionPair

    def __post_init__(self):
        om = np.broadcast_to(np.asarray(self.omega, dtype=float), (N_OSC,))
        object.__setattr__(self, "omega", tuple(float(w) for w in om))
        arr = np.array(self.omega)
        arr.setflags(write=False)
        object.__setattr__(self, "_omega_arr", arr)
        for name in ("lam", "gamma", "K", "tau"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.tau < 0:
            raise InvalidStateError("delay must be non-negative")

    @property
    def omega_array(self) -> np.ndarray:
        return self._omega_arr

    def replace(self, **changes) -> "Parameters":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "omega": list(self.omega),
            "gamma": self.gamma,
            "K": self.K,
            "tau": self.tau,
            "interaction": self.interaction.to_dict(),
        }


PRESETS = {
    "relaxation": dict(lam=2.89, omega=2.43, K=0.189, interaction=builtin_relaxation),
    "smooth": dict(lam=1.1025, omega=3.4228, K=0.3, interaction=builtin_sinusoidal),
}


def preset(name: str, *, gamma: float = 0.0, tau: float = 1.0, **overrides) -> Parameters:
    """Named parameter set; gamma defaults to 0 because no value is published."""
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    base["interaction"] = base["interaction"]()
    base.update(gamma=gamma, tau=tau)
    base.update(overrides)
    return Parameters(**base)


@dataclass(frozen=True)
class FullState:
    r: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(N_OSC))
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float).reshape(N_OSC))

    def vector(self) -> np.ndarray:
        return np.concatenate([self.r, self.phi])

    @classmethod
    def from_vector(cls, x) -> "FullState":
        x = np.asarray(x, dtype=float)
        return cls(x[:N_OSC], x[N_OSC:])


@dataclass(frozen=True)
class ReducedState:
    r: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(N_OSC))
        object.__setattr__(self, "psi", np.asarray(self.psi, dtype=float).reshape(N_OSC - 1))

    def vector(self) -> np.ndarray:
        return np.concatenate([self.r, self.psi])

    @classmethod
    def from_vector(cls, y) -> "ReducedState":
        y = np.asarray(y, dtype=float)
        return cls(y[:N_OSC], y[N_OSC:])


def _check_radii(r, what):
    if np.any(~(np.asarray(r) > MIN_RADIUS)):
        raise InvalidStateError(f"{what} radius below {MIN_RADIUS:g}: {np.asarray(r)}")


# -- full model ---------------------------------------------------------------


def full_rhs_vec(params: Parameters, x_now, x_del) -> np.ndarray:
    """Vector form of :func:`rhs_full` on 8-vectors (r1..r4, phi1..phi4).

    Leading axes are treated as a batch of independent states.
    """
    r, phi = x_now[..., :N_OSC], x_now[..., N_OSC:]
    if not np.all(r > MIN_RADIUS):
        _check_radii(r, "current")
    r_next = x_del[..., NEXT]
    hr, hphi = params.interaction.both(x_del[..., N_OSC + NEXT] - phi)
    rr = r * r
    out = np.empty(np.shape(x_now))
    out[..., :N_OSC] = (params.lam - rr) * r + params.K * r_next * hr
    out[..., N_OSC:] = params.omega_array - params.gamma * rr + params.K * (r_next / r) * hphi
    return out


def rhs_full(params: Parameters, now: FullState, delayed: FullState) -> np.ndarray:
    """(dr_1..dr_4, dphi_1..dphi_4) of the full delayed ring."""
    return full_rhs_vec(params, now.vector(), delayed.vector())


# -- reduced model ------------------------------------------------------------


def _phi4_dot(params: Parameters, r4, r1_del, psi1_del, seed, max_iter=100):
    c = params.omega[3] - params.gamma * r4 * r4
    q = params.K * r1_del / r4
    tau = params.tau
    h = params.interaction.h_phi
    if q == 0.0:
        return c
    if tau == 0.0:
        return c + q * h(psi1_del)

    def g(x):
        return c + q * h(psi1_del - x * tau) - x

    x = float(seed)
    gx = g(x)
    for _ in range(max_iter):
        if abs(gx) < 1e-13:
            return x
        dg = -q * tau * h.deriv(psi1_del - x * tau) - 1.0
        if dg == 0.0 or not np.isfinite(dg):
            break
        step = -gx / dg
        t = 1.0
        while t > 2.0**-20:
            x_new = x + t * step
            g_new = g(x_new)
            if abs(g_new) < (1.0 - 1e-4 * t) * abs(gx):
                break
            t *= 0.5
        else:
            break
        if abs(x_new - x) <= 4e-16 * (1.0 + abs(x)):
            x, gx = x_new, g_new
            break
        x, gx = x_new, g_new
    if abs(gx) <= 1e-12:
        return x

    # Fallback: bisection on a bracket around the seed, widened to the
    # guaranteed enclosure |x - c| <= |q| max|H_phi| if needed.
    half = abs(params.omega[3]) + abs(params.gamma) * r4 * r4 + abs(q) * h.max_abs_bound
    lo, hi = seed - half, seed + half
    if np.sign(g(lo)) == np.sign(g(hi)):
        bound = abs(q) * h.max_abs_bound + 1e-12
        lo, hi = c - bound, c + bound
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise ConvergenceError("phi4-dot: no sign change on bracket", last=x, residual=gx)
    x = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=max_iter)
    if abs(g(x)) > 1e-12:
        raise ConvergenceError("phi4-dot did not converge", last=x, residual=g(x))
    return x


def solve_phi4_dot(params: Parameters, now: ReducedState, delayed: ReducedState, seed: float) -> float:
    """Instantaneous frequency of oscillator 4 from its implicit equation.

    Damped Newton started at ``seed`` (so the branch of roots that is
    continuous in the caller's history is selected), with a bisection
    fallback.  Raises :class:`ConvergenceError` if neither succeeds.
    """
    _check_radii(now.r[3:], "current")
    _check_radii(delayed.r[:1], "delayed")
    return _phi4_dot(params, now.r[3], delayed.r[0], delayed.psi[0], seed)


def reduced_rhs_vec(params: Parameters, y_now, y_del, seed):
    """Vector form of :func:`rhs_reduced` on 7-vectors (r1..r4, psi1..psi3)."""
    r, psi = y_now[:N_OSC], y_now[N_OSC:]
    r_del, psi_del = y_del[:N_OSC], y_del[N_OSC:]
    _check_radii(r, "current")
    _check_radii(r_del[:1], "delayed")
    x = _phi4_dot(params, r[3], r_del[0], psi_del[0], seed)
    psi_full = np.append(psi, 0.0)
    psi_del_full = np.append(psi_del, 0.0)
    r_next = np.roll(r_del, -1)
    arg = np.roll(psi_del_full, -1) - psi_full - x * params.tau
    pair = params.interaction
    rdot = (params.lam - r * r) * r + params.K * r_next * pair.h_r(arg)
    w = params.omega_array[:3]
    psidot = (
        w
        - params.gamma * r[:3] ** 2
        + params.K * (r_next[:3] / r[:3]) * pair.h_phi(arg[:3])
        - x
    )
    return np.concatenate([rdot, psidot]), x


def rhs_reduced(params: Parameters, now: ReducedState, delayed: ReducedState, phi4_seed: float):
    """Reduced 7-dimensional vector field and the solved dphi_4/dt.

    Returns ``(dy, phi4_dot)``; feed ``phi4_dot`` back as the next seed.
    """
    return reduced_rhs_vec(params, now.vector(), delayed.vector(), phi4_seed)
