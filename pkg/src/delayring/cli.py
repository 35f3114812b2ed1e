"""Command-line front end.

Subcommands: oracle, continue, simulate, stability, classify, shift.
Output files go to ``--outdir``, else ``$DELAYRING_OUTDIR``, else the
current directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import records
from .continuation import StepPolicy, child_branch, continue_branch
from .equilibria import (
    RelativeEquilibrium,
    expand_primary,
    newton_solve,
    primary_oracle,
    residual_vec,
)
from .errors import (
    BranchSwitchError,
    ConvergenceError,
    InvalidStateError,
    PeakDetectionError,
    SimulationError,
)
from .simulate import classify_trajectory, equilibrium_history, integrate_dde, random_direction
from .stability import equilibrium_roots
from .symmetry import classify_isotropy, parameter_shift

OUTDIR_ENV = "DELAYRING_OUTDIR"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
EXIT_INPUT = 4
EXIT_SIMULATION = 5
EXIT_SWITCH = 6
EXIT_PEAKS = 7
EXIT_AUDIT = 8

AUDIT_TOL = 1e-9

log = logging.getLogger("delayring")


class AuditFailure(Exception):
    """Some requested points did not converge or failed a check."""


# -- shared helpers -----------------------------------------------------------


def _params(args):
    config = records.read_config(args.config) if args.config else {}
    record = getattr(args, "record", None)
    if not config and args.preset is None and record:
        # fall back to the parameter block stored with the record
        stored = records.read_equilibrium(record)[1].get("params")
        if stored is not None:
            config = dict(stored)
    return records.build_parameters(
        config, preset=args.preset, lam=args.lam, omega=args.omega, gamma=args.gamma, K=args.K,
    )


def _effective(args, params) -> dict:
    opts = {k: v for k, v in sorted(vars(args).items())
            if k not in ("func", "config", "outdir", "verbose") and v is not None}
    return {"command": args.command, "params": params.to_dict(), "options": opts}


def _outdir(args) -> Path:
    d = Path(args.outdir or os.environ.get(OUTDIR_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write(path: Path, text: str):
    path.write_text(text)
    log.info("wrote %s", path)


def _primary_seed(params, m, tau):
    guess_om = params.omega[0] - params.gamma * params.lam
    ans = primary_oracle(params, m, np.sqrt(max(params.lam, 1e-6)), guess_om, tau=tau)
    return expand_primary(ans)


def _parse_seed(text):
    """'primary:m@tau' -> (m, tau)."""
    kind, _, rest = text.partition(":")
    if kind != "primary" or "@" not in rest:
        raise ValueError(f"seed must look like primary:m@tau, got {text!r}")
    m, tau = rest.split("@")
    m = int(m)
    if m not in range(4):
        raise ValueError(f"cluster index m must be 0..3, got {m}")
    return m, float(tau)


def _load_state(args, params) -> RelativeEquilibrium:
    if getattr(args, "record", None):
        eq, _ = records.read_equilibrium(args.record)
        return eq
    if getattr(args, "seed", None):
        m, tau = _parse_seed(args.seed)
        return _primary_seed(params, m, tau)
    raise ValueError("give an equilibrium record or --seed primary:m@tau")


# -- subcommands --------------------------------------------------------------


def cmd_oracle(args) -> int:
    params = _params(args)
    taus = records.parse_grid(args.tau)
    effective = _effective(args, params)
    chash = records.config_hash(effective)
    r0 = np.sqrt(max(params.lam, 1e-6))
    om = params.omega[0] - params.gamma * params.lam
    rows, failed = [], []
    for tau in taus:
        try:
            ans = primary_oracle(params, args.m, r0, om, tau=tau)
            res = np.max(np.abs(residual_vec(params, expand_primary(ans).unknowns, tau)))
            if res > AUDIT_TOL:
                raise ConvergenceError(f"8D residual {res:.2e}")
        except (ConvergenceError, InvalidStateError) as exc:
            failed.append((tau, str(exc)))
            continue
        r0, om = ans.r0, ans.omega_collective
        rows.append([repr(float(tau)), args.m, repr(ans.r0), repr(ans.omega_collective)])
    out = _outdir(args) / (args.name or f"oracle_m{args.m}.csv")
    _write(out, records._csv_text(["tau", "m", "r0", "Omega"], rows, chash))
    if failed:
        for tau, msg in failed:
            print(f"unconverged tau={tau:.6g}: {msg}", file=sys.stderr)
        raise AuditFailure(f"{len(failed)} grid points did not converge")
    return EXIT_OK


def cmd_continue(args) -> int:
    params = _params(args)
    lo, hi = records.parse_interval(args.range)
    step = StepPolicy(max_points=args.max_points)
    if args.from_pitchfork:
        path, _, idx = args.from_pitchfork.partition(":")
        bif = records.read_bifurcation(path, int(idx) if idx else None)
        branch = child_branch(params, bif, (lo, hi), args.direction, args.epsilon, step, n_roots=args.n_roots)
    else:
        start = _load_state(args, params)
        desc = args.seed or f"record {args.record}"
        branch = continue_branch(params, start, (lo, hi), step, direction=args.direction,
                                 n_roots=args.n_roots, seed_description=desc)
    effective = _effective(args, params)
    chash = records.config_hash(effective)
    d = _outdir(args)
    name = args.name or "branch"
    _write(d / f"{name}_branch.csv", records.branch_csv(branch, chash))
    _write(d / f"{name}_bifurcations.csv", records.bifurcation_csv(branch.bifurcations, chash))
    records.write_json(d / f"{name}.json", records.branch_bundle(branch, effective))
    print(f"{len(branch)} points, {len(branch.bifurcations)} bifurcations, stop: {branch.termination}")
    if branch.termination == "step-underflow":
        raise AuditFailure("continuation stopped on step underflow")
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _params(args)
    eq = _load_state(args, params)
    eq = newton_solve(params, eq)
    p = params.replace(tau=eq.tau)
    offset = None
    if args.perturb:
        offset = args.perturb * random_direction(np.random.default_rng(args.rng))
    traj = integrate_dde(p, equilibrium_history(eq, offset), args.t_end, args.dt)
    effective = _effective(args, params)
    chash = records.config_hash(effective)
    d = _outdir(args)
    name = args.name or "trajectory"
    _write(d / f"{name}.csv", records.trajectory_csv(traj, args.every, chash))
    obs = classify_trajectory(traj, args.tail)
    payload = {"observation": obs.to_dict(), "seed": eq.to_dict(), "config": effective, "config_hash": chash}
    records.write_json(d / f"{name}_observation.json", payload)
    print(obs.classification.label)
    return EXIT_OK


def cmd_stability(args) -> int:
    params = _params(args)
    eq = _load_state(args, params)
    if args.converge:
        eq = newton_solve(params, eq)
    roots = equilibrium_roots(params, eq, args.count)
    print("re,im")
    for r in roots:
        print(f"{r.real!r},{r.imag!r}")
    return EXIT_OK


def cmd_classify(args) -> int:
    eq, _ = records.read_equilibrium(args.record)
    iso = classify_isotropy(eq, args.tol)
    print(iso.label if not args.verbose else f"{iso.label} {iso.pattern_name}")
    return EXIT_OK


def cmd_shift(args) -> int:
    params = _params(args)
    eq, _ = records.read_equilibrium(args.record)
    shifted = newton_solve(params, parameter_shift(eq, args.j))
    iso = classify_isotropy(shifted)
    effective = _effective(args, params)
    rec = records.equilibrium_record(shifted, params, isotropy=iso.label, config=effective,
                                     config_hash=records.config_hash(effective))
    out = _outdir(args) / (args.name or "shifted.json")
    records.write_json(out, rec)
    print(f"{iso.label} tau={shifted.tau!r}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _model_options(p):
    g = p.add_argument_group("model")
    g.add_argument("--preset", choices=["relaxation", "smooth"])
    g.add_argument("--config", help="key-value config file")
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--omega", help="one value or four comma-separated")
    g.add_argument("--gamma", type=float)
    g.add_argument("--K", type=float)


def _output_options(p, default_help):
    p.add_argument("--outdir", help=f"output directory (default ${OUTDIR_ENV} or .)")
    p.add_argument("--name", help=default_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delayring", description="Cluster states of a delay-coupled oscillator ring")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="primary states on a delay grid")
    _model_options(p)
    _output_options(p, "CSV file name")
    p.add_argument("--m", type=int, required=True, choices=range(4))
    p.add_argument("--tau", required=True, help="grid a:b:n")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("continue", help="continue a branch in tau")
    _model_options(p)
    _output_options(p, "file name prefix")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--seed", help="primary:m@tau")
    src.add_argument("--record", help="equilibrium record or branch bundle (JSON)")
    src.add_argument("--from-pitchfork", help="bundle.json[:index] of a pitchfork")
    p.add_argument("--range", default="0.1:2.6", help="tau interval a:b")
    p.add_argument("--direction", type=int, choices=(-1, 1), default=1)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--n-roots", type=int, default=10)
    p.add_argument("--max-points", type=int, default=10_000)
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("simulate", help="integrate from an equilibrium")
    _model_options(p)
    _output_options(p, "file name prefix")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--seed", help="primary:m@tau")
    src.add_argument("--record")
    p.add_argument("--t-end", type=float, default=200.0)
    p.add_argument("--dt", type=float)
    p.add_argument("--perturb", type=float, default=0.0, help="size of a random initial kick")
    p.add_argument("--rng", type=int, default=0)
    p.add_argument("--tail", type=float, default=0.5)
    p.add_argument("--every", type=int, default=1, help="write every k-th sample")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stability", help="leading characteristic roots")
    _model_options(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--seed", help="primary:m@tau")
    src.add_argument("--record")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--converge", action="store_true", help="re-run Newton on the record first")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("classify", help="isotropy label of a record")
    p.add_argument("record")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("shift", help="map a record to tau + j pi / (2 Omega)")
    _model_options(p)
    _output_options(p, "output JSON name")
    p.add_argument("record")
    p.add_argument("--j", type=int, required=True)
    p.set_defaults(func=cmd_shift)
    return parser


_ERROR_CODES = (
    (AuditFailure, EXIT_AUDIT),
    (BranchSwitchError, EXIT_SWITCH),
    (PeakDetectionError, EXIT_PEAKS),
    (SimulationError, EXIT_SIMULATION),
    (ConvergenceError, EXIT_CONVERGENCE),
    (InvalidStateError, EXIT_INPUT),
    (ValueError, EXIT_INPUT),
    (OSError, EXIT_INPUT),
    (KeyError, EXIT_INPUT),
    (json.JSONDecodeError, EXIT_INPUT),
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        for cls, code in _ERROR_CODES:
            if isinstance(exc, cls):
                msg = f"error: {exc}"
                if isinstance(exc, ConvergenceError) and exc.residual is not None:
                    msg += f" (residual {exc.residual:.3e} after {exc.iterations} iterations)"
                print(msg, file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
