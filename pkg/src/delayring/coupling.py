"""Fifth-order Fourier interaction functions H_r and H_phi."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORDER = 5
_N = np.arange(ORDER + 1)


@dataclass(frozen=True, eq=False)
class FourierSeries:
    """sum_{n=0}^{5} a[n] cos(n theta) + b[n] sin(n theta).

    ``b[0]`` multiplies sin(0) and is pinned to zero.
    """

    a: np.ndarray
    b: np.ndarray
    max_abs_bound: float = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float).reshape(-1)
        if a.shape != (ORDER + 1,) or b.shape != (ORDER + 1,):
            raise ValueError(f"need {ORDER + 1} cosine and sine coefficients")
        if b[0] != 0.0:
            raise ValueError("b[0] must be exactly 0")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "max_abs_bound", float(np.abs(a).sum() + np.abs(b).sum()))

    def __call__(self, theta):
        return evaluate(self, theta)

    def deriv(self, theta):
        return evaluate_deriv(self, theta)

    def coefficients(self) -> dict:
        return {"a": self.a.tolist(), "b": self.b.tolist()}

    def __eq__(self, other):
        if not isinstance(other, FourierSeries):
            return NotImplemented
        return bool(np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b))

    __hash__ = None


def evaluate(series: FourierSeries, theta):
    """Value of the series at ``theta`` (scalar or array, no range reduction)."""
    t = np.asarray(theta, dtype=float)
    nt = np.multiply.outer(t, _N)
    out = np.cos(nt) @ series.a + np.sin(nt) @ series.b
    return float(out) if out.ndim == 0 else out


def evaluate_deriv(series: FourierSeries, theta):
    """d/dtheta of :func:`evaluate`."""
    t = np.asarray(theta, dtype=float)
    nt = np.multiply.outer(t, _N)
    out = np.cos(nt) @ (_N * series.b) - np.sin(nt) @ (_N * series.a)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class InteractionPair:
    h_r: FourierSeries
    h_phi: FourierSeries
    name: str = "custom"

    def both(self, theta):
        """(H_r(theta), H_phi(theta)) for an array, sharing the trig work."""
        nt = np.multiply.outer(np.asarray(theta, dtype=float), _N)
        c, s = np.cos(nt), np.sin(nt)
        return c @ self.h_r.a + s @ self.h_r.b, c @ self.h_phi.a + s @ self.h_phi.b

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "a_r": self.h_r.a.tolist(),
            "b_r": self.h_r.b[1:].tolist(),
            "a_phi": self.h_phi.a.tolist(),
            "b_phi": self.h_phi.b[1:].tolist(),
        }


# Table of experimentally fitted coefficients for the relaxation regime,
# stored exactly as published (five decimals, no renormalisation).
_RELAX_A_R = (0.45579, -0.97948, 0.36110, 0.29724, 0.05846, -0.11558)
_RELAX_B_R = (0.0, -1.82354, -0.07963, 0.54854, 0.09098, -0.09251)
_RELAX_A_PHI = (0.0, -0.00610, -0.35811, -0.25341, -0.13541, -0.07183)
_RELAX_B_PHI = (0.0, 0.31622, 0.29020, -0.05585, 0.00799, 0.00425)


def builtin_relaxation() -> InteractionPair:
    return InteractionPair(
        FourierSeries(_RELAX_A_R, _RELAX_B_R),
        FourierSeries(_RELAX_A_PHI, _RELAX_B_PHI),
        name="relaxation",
    )


def builtin_sinusoidal() -> InteractionPair:
    """H_r = cos, H_phi = sin: the plain Stuart-Landau polar coupling."""
    e1 = np.zeros(ORDER + 1)
    e1[1] = 1.0
    zero = np.zeros(ORDER + 1)
    return InteractionPair(FourierSeries(e1, zero), FourierSeries(zero, e1), name="sinusoidal")


BUILTINS = {"relaxation": builtin_relaxation, "sinusoidal": builtin_sinusoidal}


def interaction_by_name(name: str) -> InteractionPair:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown interaction {name!r}; choose from {sorted(BUILTINS)}") from None


def _floats(text, n: int, key: str) -> list[float]:
    if isinstance(text, str):
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    else:
        vals = [float(v) for v in text]
    if len(vals) != n:
        raise ValueError(f"{key} needs {n} values, got {len(vals)}")
    return vals


def interaction_from_mapping(section) -> InteractionPair:
    """Build a pair from ``a_r``/``b_r``/``a_phi``/``b_phi`` entries.

    ``a_*`` hold n = 0..5 (six values), ``b_*`` hold n = 1..5 (five values).
    A ``name`` entry naming a built-in short-circuits the inline form.
    """
    if "name" in section and not any(k in section for k in ("a_r", "b_r", "a_phi", "b_phi")):
        return interaction_by_name(section["name"].strip())
    a_r = _floats(section["a_r"], 6, "a_r")
    b_r = [0.0] + _floats(section["b_r"], 5, "b_r")
    a_phi = _floats(section["a_phi"], 6, "a_phi")
    b_phi = [0.0] + _floats(section["b_phi"], 5, "b_phi")
    return InteractionPair(
        FourierSeries(a_r, b_r), FourierSeries(a_phi, b_phi), name=section.get("name", "custom")
    )
