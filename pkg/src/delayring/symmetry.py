"""Symmetries of the ring: global phase shifts times cyclic relabelling.

An element ``(phase_shift, rotation)`` maps a state (r, phi) to
``(G^j r, G^j phi + phase_shift)`` where ``(G x)_i = x_{i+1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibria import TWO_PI, RelativeEquilibrium, wrap
from .errors import InvalidStateError
from .model import N_OSC, FullState


def _wrap_scalar(a: float) -> float:
    a = a % TWO_PI
    return 0.0 if a >= TWO_PI else a


@dataclass(frozen=True)
class GroupElement:
    phase_shift: float = 0.0
    rotation: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase_shift", _wrap_scalar(float(self.phase_shift)))
        object.__setattr__(self, "rotation", int(self.rotation) % N_OSC)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return compose(self, other)

    def inverse(self) -> "GroupElement":
        return GroupElement(-self.phase_shift, -self.rotation)


IDENTITY = GroupElement(0.0, 0)


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    return GroupElement(g1.phase_shift + g2.phase_shift, g1.rotation + g2.rotation)


def permute(x, j: int) -> np.ndarray:
    """Apply G^j: component i of the result is x_{i+j} (indices mod 4)."""
    return np.roll(np.asarray(x), -(j % N_OSC), axis=-1)


def act(g: GroupElement, state: FullState) -> FullState:
    return FullState(permute(state.r, g.rotation), permute(state.phi, g.rotation) + g.phase_shift)


def act_vector(g: GroupElement, x) -> np.ndarray:
    """Action on an 8-vector (r1..r4, phi1..phi4)."""
    x = np.asarray(x, dtype=float)
    return np.concatenate([permute(x[:4], g.rotation), permute(x[4:], g.rotation) + g.phase_shift])


def act_on_equilibrium(g: GroupElement, eq: RelativeEquilibrium) -> RelativeEquilibrium:
    """Image of a relative equilibrium, re-expressed relative to oscillator 4.

    The phase-shift part drops out after re-referencing.
    """
    phi = permute(eq.phases(), g.rotation)
    return RelativeEquilibrium(permute(eq.r, g.rotation), wrap(phi[:3] - phi[3]),
                               eq.omega_collective, eq.tau)


def act_on_tangent(g: GroupElement, v) -> np.ndarray:
    """Linearised action on a perturbation of the unknowns (r, psi, Omega).

    Extra trailing components (e.g. a delay direction) are left unchanged.
    """
    v = np.asarray(v)
    dphi = permute(np.append(v[4:7], 0.0), g.rotation)
    out = v.copy()
    out[:4] = permute(v[:4], g.rotation)
    out[4:7] = dphi[:3] - dphi[3]
    return out


# -- isotropy -----------------------------------------------------------------

_PATTERNS = {
    "H40": "in-phase",
    "H41": "splay",
    "H42": "2-cluster",
    "H43": "reverse-splay",
    "H20": "compressed-2-cluster",
    "H21": "open-2-cluster-family",
    "H10": "asymmetric",
}


@dataclass(frozen=True)
class IsotropyClass:
    label: str
    order: int
    pattern_name: str
    elements: tuple = (IDENTITY,)

    @classmethod
    def from_label(cls, label: str) -> "IsotropyClass":
        return cls(label, int(label[1]), _PATTERNS[label], subgroup_elements(label))

    def __str__(self):
        return self.label


def subgroup_elements(label: str) -> tuple:
    order, k = int(label[1]), int(label[2])
    if order == 4:
        return tuple(GroupElement(-k * j * np.pi / 2, j) for j in range(4))
    if order == 2:
        return (IDENTITY, GroupElement(k * np.pi, 2))
    return (IDENTITY,)


def _angle_dist(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b) + np.pi, TWO_PI) - np.pi
    return np.abs(d)


def fixing_shift(eq: RelativeEquilibrium, j: int, tol: float) -> float | None:
    """Phase shift making (shift, j) fix ``eq``, or None if no such element."""
    r, phi = eq.r, eq.phases()
    if np.max(np.abs(permute(r, j) - r)) > tol:
        return None
    phi_rot = permute(phi, j)
    shift = _wrap_scalar(phi[0] - phi_rot[0])
    if np.max(_angle_dist(phi_rot + shift, phi)) > tol:
        return None
    return shift


def classify_isotropy(eq: RelativeEquilibrium, tol: float = 1e-6) -> IsotropyClass:
    """Label of the subgroup of symmetries fixing ``eq``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    shifts = {j: fixing_shift(eq, j, tol) for j in (1, 2, 3)}
    if shifts[1] is not None:
        m = int(np.rint(-shifts[1] / (np.pi / 2))) % 4
        return IsotropyClass.from_label(f"H4{m}")
    if shifts[2] is not None:
        k = 1 if _angle_dist(shifts[2], np.pi) < _angle_dist(shifts[2], 0.0) else 0
        return IsotropyClass.from_label(f"H2{k}")
    return IsotropyClass.from_label("H10")


# -- parameter symmetry -------------------------------------------------------

_C = np.array([0.0, np.pi / 2, np.pi, 3 * np.pi / 2])


def parameter_shift(eq: RelativeEquilibrium, j: int) -> RelativeEquilibrium:
    """Map a cluster state at tau to its partner at tau + j pi / (2 Omega).

    Phases advance by j (0, pi/2, pi, 3pi/2); radii and Omega are kept.
    Stability is not preserved by this map.
    """
    j = int(j)
    if j == 0:
        return eq
    om = eq.omega_collective
    if om == 0.0:
        raise InvalidStateError("parameter shift needs a nonzero collective frequency")
    tau_new = eq.tau + j * np.pi / (2.0 * om)
    if tau_new < 0:
        raise InvalidStateError(f"shift j={j} gives negative delay {tau_new:.6g}")
    phi = eq.phases() + j * _C
    return RelativeEquilibrium(eq.r, wrap(phi[:3] - phi[3]), om, tau_new)
