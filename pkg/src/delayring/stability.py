"""Linear stability of relative equilibria.

The linearised delay system ``y'(t) = A0 y(t) + A1 y(t - tau)`` has
characteristic roots s with ``det(s I - A0 - A1 exp(-s tau)) = 0``.  Roots
are located by Chebyshev collocation of the solution operator's generator
on [-tau, 0] and then polished by Newton's method on the determinant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibria import RelativeEquilibrium
from .model import Parameters, full_rhs_vec, reduced_rhs_vec

FD_STEP = 1e-6
REFINE_TOL = 1e-8
MATCH_TOL = 1e-6


@dataclass(frozen=True)
class LinearizedDde:
    a_now: np.ndarray
    a_delayed: np.ndarray
    tau: float

    @property
    def dim(self) -> int:
        return self.a_now.shape[0]

    def char_matrix(self, s):
        n = self.dim
        return s * np.eye(n) - self.a_now - self.a_delayed * np.exp(-s * self.tau)


@dataclass(frozen=True)
class CharacteristicRoot:
    value: complex
    residual: float
    refined: bool = True

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag

    @property
    def is_real(self) -> bool:
        return self.value.imag == 0.0


def _central_jacobians(fun, u_now, u_del, step=FD_STEP):
    n = u_now.size
    a0 = np.empty((n, n))
    a1 = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        a0[:, i] = (fun(u_now + e, u_del) - fun(u_now - e, u_del)) / (2 * step)
        a1[:, i] = (fun(u_now, u_del + e) - fun(u_now, u_del - e)) / (2 * step)
    return a0, a1


def linearize_reduced(params: Parameters, eq: RelativeEquilibrium, *, step=FD_STEP) -> LinearizedDde:
    """Jacobians of the reduced 7D field w.r.t. current and delayed state.

    The oscillator-4 frequency is re-solved at every perturbed evaluation,
    which differentiates through the implicit equation numerically.
    """
    p = params.replace(tau=eq.tau)
    y = np.concatenate([eq.r, eq.psi])
    seed = eq.omega_collective

    def f(y_now, y_del):
        return reduced_rhs_vec(p, y_now, y_del, seed)[0]

    a0, a1 = _central_jacobians(f, y, y.copy(), step)
    if p.K == 0.0:
        a1[:] = 0.0
    return LinearizedDde(a0, a1, eq.tau)


def linearize_full_rotating(params: Parameters, eq: RelativeEquilibrium, *, step=FD_STEP) -> LinearizedDde:
    """8D linearisation of the unreduced model in the frame rotating at Omega.

    With phi_j = Omega t + theta_j the delayed coupling argument becomes
    theta_{j+1}(t - tau) - Omega tau - theta_j(t); the global phase shift
    leaves a root at s = 0.
    """
    p = params.replace(tau=eq.tau)
    om = eq.omega_collective
    shift = np.concatenate([np.zeros(4), np.full(4, om * eq.tau)])
    rot = np.concatenate([np.zeros(4), np.full(4, om)])
    x = np.concatenate([eq.r, eq.phases()])

    def f(x_now, x_del):
        return full_rhs_vec(p, x_now, x_del - shift) - rot

    a0, a1 = _central_jacobians(f, x, x.copy(), step)
    if p.K == 0.0:
        a1[:] = 0.0
    return LinearizedDde(a0, a1, eq.tau)


def cheb(m: int):
    """Chebyshev points x_k = cos(pi k / m) and differentiation matrix."""
    if m == 0:
        return np.array([1.0]), np.zeros((1, 1))
    x = np.cos(np.pi * np.arange(m + 1) / m)
    c = np.ones(m + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(m + 1)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(m + 1))
    d -= np.diag(d.sum(axis=1))
    return x, d


def collocation_matrix(lin: LinearizedDde, m: int) -> np.ndarray:
    """Discretised generator on m+1 Chebyshev nodes of [-tau, 0].

    Node 0 is theta = 0 (where the DDE itself holds), node m is -tau.
    """
    n = lin.dim
    _, d = cheb(m)
    big = np.kron((2.0 / lin.tau) * d, np.eye(n))
    big[:n, :] = 0.0
    big[:n, :n] = lin.a_now
    big[:n, m * n:] += lin.a_delayed
    return big


def _det_scale(lin: LinearizedDde) -> float:
    return 1.0 + abs(np.linalg.det(lin.char_matrix(0.0)))


def char_residual(lin: LinearizedDde, s, scale=None) -> float:
    """|det(s I - A0 - A1 e^{-s tau})| relative to 1 + |det at s = 0|."""
    if scale is None:
        scale = _det_scale(lin)
    with np.errstate(over="ignore", invalid="ignore"):
        return float(abs(np.linalg.det(lin.char_matrix(s))) / scale)


def refine_root(lin: LinearizedDde, s0, *, max_iter=40, scale=None):
    """Newton on det via s <- s - 1 / tr(M(s)^-1 M'(s)).

    Returns ``(s, residual, converged)``.
    """
    if scale is None:
        scale = _det_scale(lin)
    n = lin.dim
    eye = np.eye(n)
    s = complex(s0)
    best = (s, char_residual(lin, s, scale))
    # spurious deep collocation eigenvalues can overflow exp(-s tau)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            e = np.exp(-s * lin.tau)
            mat = s * eye - lin.a_now - lin.a_delayed * e
            dmat = eye + lin.tau * lin.a_delayed * e
            try:
                tr = np.trace(np.linalg.solve(mat, dmat))
            except np.linalg.LinAlgError:
                break
            if not np.isfinite(tr) or tr == 0:
                break
            step = 1.0 / tr
            s = s - step
            res = char_residual(lin, s, scale)
            if res < best[1]:
                best = (s, res)
            if abs(step) <= 1e-14 * (1.0 + abs(s)):
                break
    s, res = best
    return s, res, res < REFINE_TOL


def _canonical(values, tol=1e-9):
    """Upper half-plane plus real axis, duplicates merged."""
    out = []
    for v in values:
        v = complex(v)
        if abs(v.imag) <= tol * max(1.0, abs(v)):
            v = complex(v.real, 0.0)
        elif v.imag < 0:
            v = v.conjugate()
        if all(abs(v - w) > 1e-7 * max(1.0, abs(v)) for w in out):
            out.append(v)
    return out


def _roots_at(lin: LinearizedDde, m: int, count: int, re_min: float, scale: float):
    if lin.tau == 0.0 or not np.any(lin.a_delayed):
        eigs = np.linalg.eigvals(lin.a_now + (lin.a_delayed if lin.tau == 0.0 else 0.0))
    else:
        eigs = np.linalg.eigvals(collocation_matrix(lin, m))
    eigs = eigs[np.isfinite(eigs)]
    eigs = eigs[eigs.real > re_min - 1.0]
    order = np.argsort(-eigs.real)
    found = []
    for s0 in eigs[order]:
        if s0.imag < -1e-9 * max(1.0, abs(s0)):
            continue
        s, res, ok = refine_root(lin, s0, scale=scale)
        if not ok:
            # keep the unrefined estimate only if it looks like a genuine root
            if abs(s - s0) > 1e-3 * max(1.0, abs(s0)):
                continue
            s = s0
            res = char_residual(lin, s, scale)
        if s.real <= re_min:
            continue
        found.append((s, res, ok))
        if len(found) >= 3 * count + 6:
            break
    merged = []
    for s, res, ok in found:
        c = _canonical([s])[0]
        if all(abs(c - m_[0]) > 1e-7 * max(1.0, abs(c)) for m_ in merged):
            merged.append((c, res, ok))
    merged.sort(key=lambda t: (-t[0].real, -t[0].imag))
    return merged[:count]


def characteristic_roots(lin: LinearizedDde, count: int = 10, *, re_min: float = -np.inf,
                         m_start: int = 20, m_max: int = 320) -> list[CharacteristicRoot]:
    """Rightmost ``count`` characteristic roots, sorted by decreasing real part.

    Complex roots are reported once (non-negative imaginary part).  The
    collocation order doubles from ``m_start`` until two successive
    resolutions agree on the leading roots to 1e-6.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    scale = _det_scale(lin)
    m = m_start
    prev = _roots_at(lin, m, count, re_min, scale)
    no_delay = lin.tau == 0.0 or not np.any(lin.a_delayed)
    while not no_delay and m < m_max:
        m *= 2
        cur = _roots_at(lin, m, count, re_min, scale)
        if len(cur) == len(prev) and all(
            abs(a[0] - b[0]) < MATCH_TOL for a, b in zip(cur, prev)
        ):
            prev = cur
            break
        prev = cur
    return [CharacteristicRoot(complex(s), float(res), bool(ok)) for s, res, ok in prev]


def count_unstable(roots) -> int:
    """Roots with positive real part; complex roots count twice."""
    return sum((1 if r.is_real else 2) for r in roots if r.real > 0)


def rightmost(roots) -> CharacteristicRoot | None:
    return roots[0] if roots else None


def search_floor(params: Parameters) -> float:
    """Lower real-part bound of the root search, -2|lambda| with a little slack.

    The slack keeps the exact decoupled root -2 lambda inside the window
    despite finite-difference Jacobians.
    """
    return -2.0 * abs(params.lam) * (1.0 + 1e-6) - 1e-6


def equilibrium_roots(params: Parameters, eq: RelativeEquilibrium, count: int = 10):
    """Leading roots of the reduced problem, searched for Re > -2|lambda|."""
    lin = linearize_reduced(params, eq)
    return characteristic_roots(lin, count, re_min=search_floor(params))
