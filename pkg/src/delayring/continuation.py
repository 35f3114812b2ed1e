"""Pseudo-arclength continuation of relative equilibria in the delay.

Branches live in the 9-dimensional space ``X = (r1..r4, psi1..psi3,
Omega, tau)``.  Phases are kept unwrapped internally so the secant
predictor never sees a 2 pi jump; stored equilibria are wrapped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .equilibria import (
    RESIDUAL_TOL,
    TWO_PI,
    RelativeEquilibrium,
    damped_newton,
    fd_jacobian,
    newton_solve,
    residual_vec,
)
from .errors import BranchSwitchError, ConvergenceError, InvalidStateError
from .model import Parameters
from .stability import (
    CharacteristicRoot,
    characteristic_roots,
    count_unstable,
    linearize_reduced,
    refine_root,
    search_floor,
)
from .symmetry import (
    IsotropyClass,
    act_on_tangent,
    classify_isotropy,
)

log = logging.getLogger(__name__)

DIM = 9
TAU = 8
BISECT_TOL = 1e-6
ISO_TOL = 1e-6


class ContinuationError(ConvergenceError):
    """The corrector failed at the seed of a branch."""


@dataclass
class StepPolicy:
    initial: float = 1e-2
    min_step: float = 1e-4
    max_step: float = 5e-2
    grow: float = 1.3
    shrink: float = 0.5
    max_points: int = 10_000
    max_corrector_iter: int = 10


@dataclass
class BranchPoint:
    eq: RelativeEquilibrium
    leading_roots: list
    n_unstable: int
    isotropy: IsotropyClass
    arclength: float
    vector: np.ndarray = field(repr=False, default=None)
    tangent: np.ndarray = field(repr=False, default=None)

    @property
    def tau(self) -> float:
        return self.eq.tau

    @property
    def omega_collective(self) -> float:
        return self.eq.omega_collective

    @property
    def re_rightmost(self) -> float:
        return self.leading_roots[0].real if self.leading_roots else float("nan")


@dataclass
class Bifurcation:
    kind: str
    tau: float
    omega_collective: float
    index: tuple
    critical_eigenvector: np.ndarray
    eq: RelativeEquilibrium
    isotropy: IsotropyClass
    critical_root: complex = 0j
    symmetry_broken: bool = False
    vector: np.ndarray = field(repr=False, default=None)


@dataclass
class Branch:
    params: Parameters
    points: list
    bifurcations: list = field(default_factory=list)
    seed_description: str = ""
    termination: str = ""

    def __len__(self):
        return len(self.points)

    @property
    def taus(self) -> np.ndarray:
        return np.array([p.tau for p in self.points])

    @property
    def omegas(self) -> np.ndarray:
        return np.array([p.omega_collective for p in self.points])

    def stable_mask(self) -> np.ndarray:
        return np.array([p.n_unstable == 0 for p in self.points])


# -- low-level helpers --------------------------------------------------------


def _F(params, X):
    return residual_vec(params, X[:8], X[TAU])


def _jac(params, X, f0=None):
    return fd_jacobian(lambda z: _F(params, z), X, f0)


def null_tangent(params, X, orient=None) -> np.ndarray:
    """Unit null vector of the 8x9 Jacobian, sign-aligned with ``orient``."""
    _, _, vt = np.linalg.svd(_jac(params, X))
    t = vt[-1]
    if orient is not None and t @ orient < 0:
        t = -t
    return t / np.linalg.norm(t)


def _angle_delta(a, b):
    """Componentwise difference a - b with psi entries taken mod 2 pi."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d[4:7] = np.mod(d[4:7] + np.pi, TWO_PI) - np.pi
    return d


def correct(params, X_pred, X_base, t, h, max_iter=10, tol=RESIDUAL_TOL):
    """Newton on F(X) = 0 plus t.(X - X_base) = h.  Returns (X, iterations)."""
    X = np.array(X_pred, dtype=float)
    for it in range(max_iter + 1):
        try:
            f = _F(params, X)
        except InvalidStateError:
            return None, it
        g = np.append(f, t @ (X - X_base) - h)
        if not np.all(np.isfinite(g)):
            return None, it
        if np.max(np.abs(f)) < tol and abs(g[-1]) < 1e-12 * max(1.0, abs(h)):
            return X, it
        if it == max_iter:
            break
        J = np.vstack([_jac(params, X, f), t])
        try:
            dx = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            return None, it
        if not np.all(np.isfinite(dx)) or np.linalg.norm(dx) > 10 * max(abs(h), 1e-3):
            return None, it
        X = X + dx
    return None, max_iter


def _analyse(params, X, n_roots):
    eq = RelativeEquilibrium.from_unknowns(X[:8], X[TAU])
    p = params.replace(tau=X[TAU])
    roots = characteristic_roots(linearize_reduced(p, eq), n_roots,
                                 re_min=search_floor(params))
    return eq, roots, count_unstable(roots), classify_isotropy(eq, ISO_TOL)


def _make_point(params, X, s, n_roots, tangent=None):
    eq, roots, nu, iso = _analyse(params, X, n_roots)
    return BranchPoint(eq, roots, nu, iso, s, np.array(X, dtype=float), tangent)


# -- continuation ---------------------------------------------------------------


def continue_branch(params: Parameters, start: RelativeEquilibrium, tau_range, step: StepPolicy | None = None,
                    *, direction=1, n_roots=10, detect=True, seed_description="") -> Branch:
    """Trace the branch through ``start`` while tau stays inside ``tau_range``.

    ``direction`` is +1/-1 (initial sense of tau) or a 9-vector the initial
    tangent should point along.  Stops on leaving the range, on closing a
    loop, on step underflow, or after ``step.max_points`` points.
    """
    step = step or StepPolicy()
    lo, hi = float(tau_range[0]), float(tau_range[1])
    try:
        eq0 = newton_solve(params, start)
    except (ConvergenceError, InvalidStateError) as exc:
        raise ContinuationError(f"corrector failed at the seed: {exc}") from exc
    # keep the caller's unwrapped phases if they were close
    x0 = eq0.unknowns
    x0[4:7] = start.psi + np.mod(eq0.psi - start.psi + np.pi, TWO_PI) - np.pi
    X0 = np.append(x0, eq0.tau)
    if not lo <= X0[TAU] <= hi:
        raise ContinuationError(f"seed delay {X0[TAU]} outside {tau_range}")

    if np.ndim(direction) == 0:
        orient = np.zeros(DIM)
        orient[TAU] = float(direction)
    else:
        orient = np.asarray(direction, dtype=float)
    t = null_tangent(params, X0, orient)
    if np.ndim(direction) == 0 and abs(t[TAU]) < 1e-12:
        log.warning("seed sits at a fold; initial orientation arbitrary")

    points = [_make_point(params, X0, 0.0, n_roots)]
    X, s, h = X0, 0.0, step.initial
    termination = "max-points"
    while len(points) < step.max_points:
        X_new, its = correct(params, X + h * t, X, t, h, step.max_corrector_iter)
        if X_new is None or its >= step.max_corrector_iter:
            h *= step.shrink
            if h < step.min_step:
                termination = "step-underflow"
                break
            continue
        if not lo <= X_new[TAU] <= hi:
            termination = "left-range"
            break
        d = np.linalg.norm(X_new - X)
        if d > step.max_step:
            # the chord overshoots the predictor length on curved stretches
            h *= 0.98 * step.max_step / d
            continue
        t_new = (X_new - X) / d
        s += d

        # loop closure: start point reachable within the next step
        gap = _angle_delta(X0, X_new)
        if s > 3 * step.max_step and np.linalg.norm(gap) < 1.5 * max(h, d) and gap @ t_new > 0:
            X_close, _ = correct(params, X_new + gap, X_new, t_new, float(gap @ t_new))
            if X_close is not None and np.linalg.norm(_angle_delta(X_close, X0)) < 1e-6:
                points.append(_make_point(params, X_new, s, n_roots))
                termination = "closed-loop"
                break

        points.append(_make_point(params, X_new, s, n_roots))
        X, t = X_new, t_new
        if its <= 2:
            h = min(h * step.grow, step.max_step)
        elif its >= 6:
            h = max(h * step.shrink, step.min_step)

    _attach_tangents(params, points)
    branch = Branch(params, points, [], seed_description, termination)
    if detect and len(points) >= 2:
        branch.bifurcations = detect_bifurcations(branch)
    return branch


def _attach_tangents(params, points):
    for i, p in enumerate(points):
        if p.tangent is not None:
            continue
        if len(points) == 1:
            orient = None
        elif i == 0:
            orient = points[1].vector - p.vector
        else:
            orient = p.vector - points[i - 1].vector
        p.tangent = null_tangent(params, p.vector, orient)


# -- bifurcation detection ----------------------------------------------------


def _real_parity(roots):
    return sum(1 for r in roots if r.is_real and r.real > 0) % 2


def _complex_parity(roots):
    return sum(1 for r in roots if not r.is_real and r.real > 0) % 2


def _corrected_between(params, Xa, Xb, sigma):
    """Corrected branch vector a fraction sigma of the chord from Xa to Xb."""
    chord = Xb - Xa
    d = np.linalg.norm(chord)
    u = chord / d
    X, _ = correct(params, Xa + sigma * chord, Xa, u, sigma * d, max_iter=20)
    if X is None:
        raise ConvergenceError("corrector failed inside a bracket")
    return X, u


def _point_between(params, a: BranchPoint, b: BranchPoint, sigma, n_roots):
    """Branch point a fraction sigma of the secant length from a towards b."""
    X, u = _corrected_between(params, a.vector, b.vector, sigma)
    p = _make_point(params, X, a.arclength + sigma * (b.arclength - a.arclength), n_roots)
    p.tangent = null_tangent(params, X, u)
    return p


def _bisect(params, Xa, Xb, test):
    """Shrink [Xa, Xb] until tau differs by < BISECT_TOL.

    ``test(X, tangent)`` must differ between the two ends; only the cheap
    test is evaluated at intermediate points.
    """
    fa = test(Xa, Xb - Xa)
    for _ in range(60):
        if abs(Xb[TAU] - Xa[TAU]) < BISECT_TOL or np.linalg.norm(Xb - Xa) < 1e-12:
            break
        X, u = _corrected_between(params, Xa, Xb, 0.5)
        if test(X, u) == fa:
            Xa = X
        else:
            Xb = X
    return Xa, Xb


def _lin_at(params, X):
    eq = RelativeEquilibrium.from_unknowns(X[:8], X[TAU])
    return linearize_reduced(params.replace(tau=X[TAU]), eq)


def _det_sign(params, X, _u=None):
    """Sign of det M(0); negative exactly when an odd number of real roots is positive."""
    lin = _lin_at(params, X)
    return int(np.sign(np.linalg.det(lin.char_matrix(0.0))))


def _turn_sign(params, X, u):
    return int(np.sign(null_tangent(params, X, u)[TAU]))


def _tracked_root_test(params, n_roots, s0):
    """Sign of Re of one complex root followed by Newton from bracket to bracket."""
    state = {"s": complex(s0)}

    def test(X, _u):
        lin = _lin_at(params, X)
        s, _, ok = refine_root(lin, state["s"])
        jumped = abs(s - state["s"]) > 0.1 * max(1.0, abs(state["s"]))
        # near a real-axis collision Newton can slide onto a real root
        if not ok or jumped or abs(s.imag) <= 1e-6 * max(1.0, abs(s)):
            roots = characteristic_roots(lin, n_roots, re_min=search_floor(params))
            cands = [r.value for r in roots if not r.is_real]
            if not cands:
                return 0
            s = min(cands, key=lambda z: abs(z - state["s"]))
        state["s"] = complex(s.real, abs(s.imag))
        return int(np.sign(s.real))

    return test


def _locate(params, a, b, test, n_roots):
    Xa, Xb = _bisect(params, a.vector, b.vector, test)
    sigma = 0.5 if abs(Xb[TAU] - Xa[TAU]) > 0 else 0.0
    X, u = _corrected_between(params, Xa, Xb, sigma) if sigma else (Xa, Xb - Xa)
    frac = 0.5 * (np.linalg.norm(Xa - a.vector) + np.linalg.norm(Xb - a.vector))
    p = _make_point(params, X, a.arclength + frac, n_roots)
    p.tangent = null_tangent(params, X, u)
    return p


def _null_vector_8(params, X):
    J = _jac(params, X)[:, :8]
    _, _, vt = np.linalg.svd(J)
    v = vt[-1]
    k = np.argmax(np.abs(v))
    return v * np.sign(v[k])


def _hopf_vector(params, X, s):
    eq = RelativeEquilibrium.from_unknowns(X[:8], X[TAU])
    lin = linearize_reduced(params.replace(tau=X[TAU]), eq)
    _, _, vh = np.linalg.svd(lin.char_matrix(s))
    v = vh[-1].conj()
    k = np.argmax(np.abs(v))
    return v * (abs(v[k]) / v[k])


def breaks_symmetry(v, isotropy: IsotropyClass, tol=1e-4) -> bool:
    """True if some element of ``isotropy`` does not fix the direction v."""
    v = np.asarray(v)
    nv = np.linalg.norm(v)
    for g in isotropy.elements:
        if g.rotation == 0:
            continue
        if np.linalg.norm(act_on_tangent(g, v)[: len(v)] - v) > tol * nv:
            return True
    return False


def _near_axis_root(roots, want_complex):
    cands = [r for r in roots if (not r.is_real) == want_complex]
    return min(cands, key=lambda r: abs(r.real)) if cands else None


def _segment_events(a, b):
    events = []
    if _real_parity(a.leading_roots) != _real_parity(b.leading_roots):
        events.append("real")
    if _complex_parity(a.leading_roots) != _complex_parity(b.leading_roots):
        events.append("hopf")
    if np.sign(a.tangent[TAU]) != np.sign(b.tangent[TAU]):
        events.append("turn")
    return events


def _consistent(a, b, events):
    dn = abs(b.n_unstable - a.n_unstable)
    real = "real" in events
    # a real crossing changes the count by 1, a Hopf crossing by 2
    if dn % 2 != int(real):
        return False
    return dn <= int(real) + 2 * int("hopf" in events)


def _split(params, a, b, n_roots, depth):
    if depth == 0 or _consistent(a, b, _segment_events(a, b)):
        return [b]
    try:
        mid = _point_between(params, a, b, 0.5, n_roots)
    except ConvergenceError:
        return [b]
    return _split(params, a, mid, n_roots, depth - 1) + _split(params, mid, b, n_roots, depth - 1)


def _refine_segments(branch, n_roots, max_depth=6):
    """Insert midpoints where unstable-root bookkeeping is ambiguous."""
    pts = branch.points
    out = [pts[0]]
    for b in pts[1:]:
        out.extend(_split(branch.params, out[-1], b, n_roots, max_depth))
    pts[:] = out


def _real_test(params, a, b, n_roots):
    det = lambda X, u: _det_sign(params, X)
    if det(a.vector, None) != det(b.vector, None):
        return det

    # the determinant sign disagrees with the root list; fall back to full roots
    def parity(X, _u):
        eq, roots, _, _ = _analyse(params, X, n_roots)
        return _real_parity(roots)

    return parity


def _hopf_test(params, a, b, n_roots):
    cands = [r for p in (a, b) for r in p.leading_roots if not r.is_real]
    s0 = min(cands, key=lambda r: abs(r.real)).value
    return _tracked_root_test(params, n_roots, s0)


def detect_bifurcations(branch: Branch, n_roots: int = 10) -> list:
    """Locate fold, pitchfork and Hopf points between consecutive branch points.

    Test quantities: parity of positive real roots, parity of unstable
    complex pairs, and the sign of d tau along the tangent.  A real
    crossing at a tau turning point is a fold; otherwise the symmetry of
    the critical null vector decides between pitchfork (symmetry broken)
    and fold.  A turning point without a real crossing is where this
    branch passes through its parent, recorded as a pitchfork.
    """
    params = branch.params
    _attach_tangents(params, branch.points)
    _refine_segments(branch, n_roots)
    found = []
    pts = branch.points
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        events = _segment_events(a, b)
        if not events:
            continue
        iso = a.isotropy if a.isotropy.order >= b.isotropy.order else b.isotropy
        if "real" in events or "turn" in events:
            if "real" in events:
                loc = _locate(params, a, b, _real_test(params, a, b, n_roots), n_roots)
            else:
                loc = _locate(params, a, b, lambda X, u: _turn_sign(params, X, u), n_roots)
            v = _null_vector_8(params, loc.vector)
            broken = breaks_symmetry(v, iso)
            if "real" in events and "turn" in events:
                kind = "fold"
            elif "real" in events:
                kind = "pitchfork" if broken else "fold"
            else:
                kind = "pitchfork"
            crit = _near_axis_root(loc.leading_roots, False)
            found.append(Bifurcation(kind, loc.tau, loc.omega_collective, (i, i + 1), v, loc.eq, iso,
                                     crit.value if crit else 0j, broken, loc.vector))
        if "hopf" in events:
            loc = _locate(params, a, b, _hopf_test(params, a, b, n_roots), n_roots)
            crit = _near_axis_root(loc.leading_roots, True)
            if crit is None or abs(crit.real) > 1e-3:
                log.info("discarding complex-parity change at tau=%.6f (root collision)", loc.tau)
                continue
            v = _hopf_vector(params, loc.vector, complex(0.0, crit.imag))
            found.append(Bifurcation("hopf", loc.tau, loc.omega_collective, (i, i + 1), v, loc.eq, iso,
                                     crit.value, breaks_symmetry(v, iso), loc.vector))
    return found


# -- branch switching -----------------------------------------------------------


def _centered(v):
    """Map (r, psi, Omega) perturbations to (r, phi - mean phi, Omega)."""
    v = np.asarray(v, dtype=float)
    dphi = np.append(v[4:7], 0.0)
    return np.concatenate([v[:4], dphi - dphi.mean(), v[7:8]])


def broken_element(bif: Bifurcation):
    """Element of the parent isotropy that reverses the critical direction."""
    v = bif.critical_eigenvector
    best, err = None, np.inf
    for g in bif.isotropy.elements:
        if g.rotation == 0:
            continue
        e = np.linalg.norm(_centered(act_on_tangent(g, v)) + _centered(v))
        if e < err:
            best, err = g, e
    return best


def _symmetrized(bif: Bifurcation):
    v = np.asarray(bif.critical_eigenvector, dtype=float)
    g = broken_element(bif)
    if g is not None:
        v = 0.5 * (v - act_on_tangent(g, v))
    return v / np.linalg.norm(_centered(v))


def switch_branch(params: Parameters, bif: Bifurcation, direction: int = 1, epsilon: float = 1e-3,
                  *, full_output=False):
    """Converge onto the symmetry-broken branch born at a pitchfork.

    The seed is the bifurcation point displaced by ``direction * epsilon *
    |state|`` along the critical null vector.  Newton is first run at fixed
    delay 1e-3 either side of the bifurcation; if both attempts fall back
    to the parent, the displacement is imposed as a constraint and the
    delay is solved for.  With ``full_output`` the 9-vector of the child
    and a tangent pointing away from the parent are returned as well.
    """
    if bif.kind != "pitchfork":
        raise ValueError("branch switching needs a pitchfork")
    X_b = np.asarray(bif.vector, dtype=float)
    x_b = X_b[:8]
    v = _symmetrized(bif)
    amp = direction * epsilon * np.linalg.norm(_centered(x_b))
    parent_order = bif.isotropy.order

    def accept(eq):
        iso = classify_isotropy(eq, ISO_TOL)
        return iso.order < parent_order and parent_order % iso.order == 0

    child = None
    for side in (1.0, -1.0):
        tau = X_b[TAU] + side * 1e-3
        try:
            x, _ = damped_newton(lambda z: residual_vec(params, z, tau), x_b + amp * v)
        except (ConvergenceError, InvalidStateError):
            continue
        eq = RelativeEquilibrium.from_unknowns(x, tau)
        offset = _centered(x - x_b) @ _centered(v)
        if accept(eq) and np.sign(offset) == np.sign(amp):
            child = np.append(x, tau)
            break

    if child is None:
        pv = _centered(v)

        def G(Z):
            return np.append(residual_vec(params, Z[:8], Z[TAU]), _centered(Z[:8] - x_b) @ pv - amp)

        try:
            Z, _ = damped_newton(G, np.append(x_b + amp * v, X_b[TAU]))
        except (ConvergenceError, InvalidStateError) as exc:
            raise BranchSwitchError(f"no branch found at tau={bif.tau:.6f}: {exc}") from exc
        eq = RelativeEquilibrium.from_unknowns(Z[:8], Z[TAU])
        if not accept(eq):
            raise BranchSwitchError(f"Newton fell back onto the parent at tau={bif.tau:.6f}; increase epsilon")
        child = Z

    eq = RelativeEquilibrium.from_unknowns(child[:8], child[TAU])
    if not full_output:
        return eq
    away = child - X_b
    return eq, child, null_tangent(params, child, away)


def child_branch(params: Parameters, bif: Bifurcation, tau_range, direction: int = 1,
                 epsilon: float = 1e-3, step: StepPolicy | None = None, **kwargs) -> Branch:
    """Switch at a pitchfork and continue the child away from the parent."""
    eq, X, t = switch_branch(params, bif, direction, epsilon, full_output=True)
    start = RelativeEquilibrium(X[:4], X[4:7], X[7], X[TAU])
    desc = f"pitchfork@tau={bif.tau:.6f} ({bif.isotropy.label}) dir={direction:+d}"
    return continue_branch(params, start, tau_range, step, direction=t,
                           seed_description=kwargs.pop("seed_description", desc), **kwargs)
