"""Fixed-step time integration of the full delayed ring.

The integrator is classical RK4; delayed values come from the cubic
Hermite interpolant built from stored states and derivatives (or from the
history function before t = 0).  With a step dividing tau, the delayed
breaking points land on grid nodes and the scheme keeps fourth order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .equilibria import TWO_PI, RelativeEquilibrium, wrap
from .errors import InvalidStateError, PeakDetectionError, SimulationError
from .model import MIN_RADIUS, N_OSC, FullState, Parameters, full_rhs_vec
from .symmetry import IsotropyClass, classify_isotropy

DEFAULT_DT_CAP = 1e-2
LOOSE_TOL = 5e-2


def default_dt(tau: float) -> float:
    """tau/40 capped at 1e-2, shrunk so that it still divides tau."""
    if tau <= 0:
        return DEFAULT_DT_CAP
    return tau / max(40, math.ceil(tau / DEFAULT_DT_CAP))


def _hermite(x0, f0, x1, f1, dt, theta):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + theta) * dt * f0
            + (-2 * t3 + 3 * t2) * x1 + (t3 - t2) * dt * f1)


def _as_vector(value) -> np.ndarray:
    if isinstance(value, FullState):
        return value.vector()
    return np.asarray(value, dtype=float).reshape(2 * N_OSC)


@dataclass
class Trajectory:
    """Uniform-step solution with its derivatives for dense output."""

    times: np.ndarray
    values: np.ndarray = field(repr=False)
    derivs: np.ndarray = field(repr=False)
    dt: float
    tau: float = 0.0
    history: object = field(default=None, repr=False)

    @property
    def r(self) -> np.ndarray:
        return self.values[:, :N_OSC]

    @property
    def phi(self) -> np.ndarray:
        return self.values[:, N_OSC:]

    @property
    def states(self) -> list:
        return [FullState.from_vector(v) for v in self.values]

    def __len__(self):
        return len(self.times)

    def at(self, t: float) -> np.ndarray:
        """Dense output on [t0 - tau, t_end] as an 8-vector."""
        t0 = self.times[0]
        if t < t0:
            if self.history is None or t < t0 - self.tau - 1e-12:
                raise ValueError(f"t={t} outside the solution interval")
            return _as_vector(self.history(t))
        u = (t - t0) / self.dt
        n = len(self.times) - 1
        if u > n + 1e-9:
            raise ValueError(f"t={t} beyond the end of the trajectory")
        k = min(int(math.floor(u)), n - 1) if n > 0 else 0
        if n == 0:
            return self.values[0].copy()
        return _hermite(self.values[k], self.derivs[k], self.values[k + 1], self.derivs[k + 1],
                        self.dt, u - k)


def _check_dt(tau, dt):
    dt = default_dt(tau) if dt is None else float(dt)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if tau > 0 and dt > tau / 4 * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds tau/4 (tau={tau})")
    return dt


def _rk4(params, history, t_end, dt, stop=None):
    """Core stepper on arrays of any leading shape; returns (xs, fs)."""
    tau = params.tau
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        n_steps = int(math.ceil(t_end / dt))
    lag = tau / dt
    x0 = np.asarray(history(0.0), dtype=float)
    xs = np.empty((n_steps + 1,) + x0.shape)
    fs = np.empty_like(xs)
    xs[0] = x0

    def delayed(u, n):
        # u = time / dt of the current stage; nodes 0..n are stored
        ud = u - lag
        if ud <= 0.0:
            return np.asarray(history(ud * dt), dtype=float)
        k = min(int(math.floor(ud)), n - 1)
        theta = ud - k
        if theta <= 1e-12:
            return xs[k]
        return _hermite(xs[k], fs[k], xs[k + 1], fs[k + 1], dt, theta)

    def rhs(x, u, n):
        xd = x if tau == 0.0 else delayed(u, n)
        try:
            return full_rhs_vec(params, x, xd)
        except InvalidStateError as exc:
            raise SimulationError(f"radius collapse at t={u * dt:.6g}: {exc}") from exc

    fs[0] = rhs(xs[0], 0.0, 0)
    for n in range(n_steps):
        x = xs[n]
        k1 = fs[n]
        k2 = rhs(x + 0.5 * dt * k1, n + 0.5, n)
        k3 = rhs(x + 0.5 * dt * k2, n + 0.5, n)
        k4 = rhs(x + dt * k3, n + 1.0, n)
        x_new = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x_new)) or np.any(x_new[..., :N_OSC] <= MIN_RADIUS):
            raise SimulationError(f"radius collapse at t={(n + 1) * dt:.6g}: r={x_new[..., :N_OSC]}")
        xs[n + 1] = x_new
        fs[n + 1] = rhs(x_new, n + 1.0, n + 1)
        if stop is not None and stop((n + 1) * dt, x_new):
            return xs[: n + 2], fs[: n + 2]
    return xs, fs


def integrate_dde(params: Parameters, history, t_end: float, dt: float | None = None,
                  *, stop=None) -> Trajectory:
    """Integrate the full model from t = 0 to ``t_end``.

    ``history(t)`` gives the state (FullState or 8-vector) for t in
    [-tau, 0].  ``dt`` defaults to tau/40, capped at 1e-2.  ``stop(t, x)``
    may end the run early by returning True.  Raises
    :class:`SimulationError` if a radius collapses below 1e-8.
    """
    dt = _check_dt(params.tau, dt)
    xs, fs = _rk4(params, lambda t: _as_vector(history(t)), t_end, dt, stop)
    times = np.arange(len(xs)) * dt
    return Trajectory(times, xs, fs, dt, params.tau, history)


def equilibrium_history(eq: RelativeEquilibrium, offset=None):
    """History of a rigidly rotating state, phi_j(t) = psi_j + Omega t."""
    base = np.concatenate([eq.r, eq.phases()])
    rot = np.concatenate([np.zeros(N_OSC), np.full(N_OSC, eq.omega_collective)])
    if offset is not None:
        base = base + np.asarray(offset, dtype=float)

    def history(t):
        return base + rot * t

    return history


# -- perturbation decay -------------------------------------------------------


class SaturationError(SimulationError):
    """The perturbation left the linear regime before a usable fit window."""

    def __init__(self, message, partial_rate=None):
        super().__init__(message)
        self.partial_rate = partial_rate


def _reduced(values):
    """(r, psi) of full states, psi taken relative to oscillator 4."""
    return values[..., :N_OSC], values[..., N_OSC:N_OSC + 3] - values[..., N_OSC + 3:]


def _reduced_distance(x, y):
    rx, px = _reduced(x)
    ry, py = _reduced(y)
    dpsi = np.mod(px - py + np.pi, TWO_PI) - np.pi
    return np.sqrt(np.sum((rx - ry) ** 2, axis=-1) + np.sum(dpsi ** 2, axis=-1))


def random_direction(rng) -> np.ndarray:
    """Random unit 8-vector with no component along the global phase."""
    v = rng.standard_normal(2 * N_OSC)
    v[N_OSC:] -= v[N_OSC:].mean()
    return v / np.linalg.norm(v)


def _fit_rate(t, d):
    """Slope of log d; uses the envelope of local maxima when d oscillates."""
    logd = np.log(d)
    peaks, _ = find_peaks(logd)
    if len(peaks) >= 4:
        t, logd = t[peaks], logd[peaks]
    return float(np.polyfit(t, logd, 1)[0])


def perturb_and_measure_rate(params: Parameters, eq: RelativeEquilibrium, epsilon: float | None = None, *,
                             direction=None, rng=0, t_max: float = 400.0, dt: float | None = None,
                             transient: float = 0.5) -> float:
    """Estimate Re of the dominant root from the decay or growth of a kick.

    The equilibrium history is offset by ``epsilon`` times a unit direction
    (random and orthogonal to the global phase unless given).  The run ends
    when the deviation exceeds max(1e-2, 10 epsilon), falls below
    1e-8, or at ``t_max``; the log-deviation is fitted
    over the final ``1 - transient`` of the run.

    With ``epsilon=None`` a kick of 1e-3 is tried first (room to decay) and
    the run is repeated at 1e-6 if the deviation grew (room to grow).
    """
    if epsilon is None:
        kw = dict(direction=direction, rng=rng, t_max=t_max, dt=dt, transient=transient)
        try:
            rate = perturb_and_measure_rate(params, eq, 1e-3, **kw)
        except SaturationError:
            rate = np.inf
        if rate > 0:
            rate = perturb_and_measure_rate(params, eq, 1e-6, **kw)
        return rate
    if not 1e-6 <= epsilon <= 1e-2:
        raise ValueError("epsilon must lie in [1e-6, 1e-2]")
    if direction is None:
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        direction = random_direction(gen)
    else:
        direction = np.asarray(direction, dtype=float)
        direction = direction / np.linalg.norm(direction)
    p = params.replace(tau=eq.tau)
    dt = _check_dt(p.tau, dt)
    base = equilibrium_history(eq)
    kick = epsilon * direction

    # the unperturbed run is carried along so the integrator's own
    # O(dt^4) offset from the exact equilibrium cancels
    def history(t):
        x = base(t)
        return np.stack([x + kick, x])

    # rounding of the growing unwrapped phases puts a floor near 1e-10
    upper, lower = max(1e-2, 10 * epsilon), 1e-8

    def stop(_t, x):
        dev = _reduced_distance(x[0], x[1])
        return dev > upper or dev < lower

    xs, _ = _rk4(p, history, t_max, dt, stop)
    d = _reduced_distance(xs[:, 0], xs[:, 1])
    t = np.arange(len(xs)) * dt
    window = t >= transient * t[-1]
    rate = _fit_rate(t[window], d[window]) if window.sum() >= 3 else float("nan")
    if d[-1] > upper and (window.sum() < 20 or d[-1] < 10 * d[0]):
        raise SaturationError(f"deviation saturated at t={t[-1]:.4g} before a clean fit window",
                              partial_rate=rate)
    return rate


# -- phase extraction and classification -------------------------------------


def peak_times(t, x, *, min_peaks: int = 3) -> np.ndarray:
    """Times of local maxima, refined by a 3-point parabola."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    idx, _ = find_peaks(x)
    idx = idx[(idx > 0) & (idx < len(x) - 1)]
    if len(idx) < min_peaks:
        raise PeakDetectionError(f"found {len(idx)} maxima, need at least {min_peaks}")
    y0, y1, y2 = x[idx - 1], x[idx], x[idx + 1]
    denom = y0 - 2 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        shift = np.where(denom != 0, 0.5 * (y0 - y2) / denom, 0.0)
    h = t[idx + 1] - t[idx]
    return t[idx] + shift * h


def extract_phase(t, x):
    """Peak-to-peak phase: 2 pi k at the k-th maximum, linear in between.

    Returns ``(times, phase)`` restricted to the span of the detected peaks.
    """
    t = np.asarray(t, dtype=float)
    peaks = peak_times(t, x)
    inside = (t >= peaks[0]) & (t <= peaks[-1])
    phase = np.interp(t[inside], peaks, TWO_PI * np.arange(len(peaks)))
    return t[inside], phase


@dataclass(frozen=True)
class ClusterObservation:
    mean_frequency: float
    mean_phase_diffs: np.ndarray
    amplitude_means: np.ndarray
    classification: IsotropyClass
    window: tuple = (0.0, 0.0)

    def to_dict(self) -> dict:
        return {
            "mean_frequency": self.mean_frequency,
            "mean_phase_diffs": [float(v) for v in self.mean_phase_diffs],
            "amplitude_means": [float(v) for v in self.amplitude_means],
            "classification": self.classification.label,
            "pattern": self.classification.pattern_name,
            "window": list(self.window),
        }


def classify_trajectory(traj: Trajectory, tail_fraction: float = 0.5, *, tol: float = LOOSE_TOL,
                        min_periods: int = 5) -> ClusterObservation:
    """Observed cluster pattern over the last ``tail_fraction`` of a run.

    Each oscillator's r_j cos(phi_j) is turned into a peak-to-peak phase;
    phase differences to oscillator 4 are averaged on the circle.
    """
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    t = traj.times
    start = t[0] + (1 - tail_fraction) * (t[-1] - t[0])
    sel = t >= start
    ts = t[sel]
    signals = traj.r[sel] * np.cos(traj.phi[sel])
    peaks = [peak_times(ts, signals[:, j], min_peaks=min_periods + 1) for j in range(N_OSC)]
    lo = max(p[0] for p in peaks)
    hi = min(p[-1] for p in peaks)
    if hi <= lo:
        raise PeakDetectionError("peak spans of the oscillators do not overlap")
    grid = ts[(ts >= lo) & (ts <= hi)]
    phases = [np.interp(grid, p, TWO_PI * np.arange(len(p))) for p in peaks]
    diffs = np.array([
        np.angle(np.mean(np.exp(1j * (phases[j] - phases[3])))) for j in range(3)
    ])
    freqs = [TWO_PI * (len(p) - 1) / (p[-1] - p[0]) for p in peaks]
    amps = traj.r[sel].mean(axis=0)
    mean_freq = float(np.mean(freqs))
    eq = RelativeEquilibrium(amps, wrap(diffs), mean_freq, traj.tau)
    return ClusterObservation(mean_freq, wrap(diffs), amps, classify_isotropy(eq, tol),
                              (float(ts[0]), float(ts[-1])))
