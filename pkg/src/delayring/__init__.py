"""Cluster states of a ring of four delay-coupled Stuart-Landau oscillators.

Modules: ``coupling`` (Fourier interaction functions), ``model`` (full and
reduced vector fields), ``equilibria`` (rotating-wave solutions),
``stability`` (characteristic roots), ``symmetry`` (group action and
isotropy), ``continuation`` (branches in the delay), ``simulate`` (time
integration) and ``cli``.
"""

from .coupling import FourierSeries, InteractionPair, builtin_relaxation, builtin_sinusoidal
from .equilibria import (
    PrimaryAnsatz,
    RelativeEquilibrium,
    expand_primary,
    newton_solve,
    primary_oracle,
    residual,
)
from .errors import (
    BranchSwitchError,
    ConvergenceError,
    DelayRingError,
    InvalidStateError,
    PeakDetectionError,
    SimulationError,
    SingularJacobianError,
)
from .model import FullState, Parameters, ReducedState, preset, rhs_full, rhs_reduced
from .symmetry import GroupElement, IsotropyClass, act, classify_isotropy, parameter_shift

__version__ = "0.1.0"

__all__ = [
    "BranchSwitchError",
    "ConvergenceError",
    "DelayRingError",
    "FourierSeries",
    "FullState",
    "GroupElement",
    "InteractionPair",
    "InvalidStateError",
    "IsotropyClass",
    "Parameters",
    "PeakDetectionError",
    "PrimaryAnsatz",
    "ReducedState",
    "RelativeEquilibrium",
    "SimulationError",
    "SingularJacobianError",
    "act",
    "builtin_relaxation",
    "builtin_sinusoidal",
    "classify_isotropy",
    "expand_primary",
    "newton_solve",
    "parameter_shift",
    "preset",
    "primary_oracle",
    "residual",
    "rhs_full",
    "rhs_reduced",
]
