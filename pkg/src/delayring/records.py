"""Config files, equilibrium records and branch output formats."""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .continuation import Bifurcation, Branch
from .coupling import interaction_by_name, interaction_from_mapping
from .equilibria import RelativeEquilibrium
from .model import PRESETS, Parameters, preset
from .symmetry import IsotropyClass

BRANCH_HEADER = ["tau", "Omega", "r1", "r2", "r3", "r4", "psi1", "psi2", "psi3",
                 "n_unstable", "re_rightmost", "isotropy"]
BIFURCATION_HEADER = ["kind", "tau", "Omega"]
TRAJECTORY_HEADER = ["t", "r1", "phi1", "r2", "phi2", "r3", "phi3", "r4", "phi4"]

_MODEL_KEYS = {"lambda": "lam", "lam": "lam", "omega": "omega", "gamma": "gamma", "k": "K", "tau": "tau"}
_COEFF_KEYS = ("a_r", "b_r", "a_phi", "b_phi")


# -- ranges -------------------------------------------------------------------


def parse_interval(text: str) -> tuple[float, float]:
    """'a:b' -> (a, b) with a < b."""
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"expected a:b, got {text!r}")
    a, b = float(parts[0]), float(parts[1])
    if not a < b:
        raise ValueError(f"empty interval {text!r}")
    return a, b


def parse_grid(text: str) -> np.ndarray:
    """'a:b:n' -> n equally spaced points including both ends."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected a:b:n, got {text!r}")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ValueError("grid needs at least one point")
    return np.linspace(a, b, n)


# -- configuration ------------------------------------------------------------


def read_config(path) -> dict:
    """Flat key-value config; an optional ``[interaction]`` section holds coefficients.

    Keys outside any section are accepted.  Returns a dict of strings with
    lower-cased keys and the interaction entries under ``"interaction"``.
    """
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    out: dict = {}
    for name in cp.sections():
        section = {k.lower(): v.strip() for k, v in cp[name].items()}
        if name.lower() == "interaction":
            out["interaction"] = section
        else:
            for k, v in section.items():
                if k in _COEFF_KEYS:
                    out.setdefault("interaction", {})[k] = v
                else:
                    out[k] = v
    if isinstance(out.get("interaction"), str):
        out["interaction"] = {"name": out["interaction"]}
    return out


def build_parameters(config: dict | None = None, **overrides) -> Parameters:
    """Parameters from a preset, config entries and explicit overrides (in that order)."""
    config = dict(config or {})
    overrides = {k: v for k, v in overrides.items() if v is not None}
    name = overrides.pop("preset", None) or config.get("preset")
    if name is not None and name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    values = {}
    for key, val in list(config.items()) + list(overrides.items()):
        k = _MODEL_KEYS.get(key.lower())
        if k is None:
            continue
        if k == "omega":
            om = [float(v) for v in str(val).replace(";", ",").split(",")] if isinstance(val, str) \
                else np.atleast_1d(val).tolist()
            if len(om) not in (1, 4):
                raise ValueError("omega needs one or four values")
            values[k] = tuple(om) if len(om) == 4 else om[0]
        else:
            values[k] = float(val)
    inter = overrides.get("interaction", config.get("interaction"))
    if isinstance(inter, str):
        inter = interaction_by_name(inter)
    elif isinstance(inter, dict):
        inter = interaction_from_mapping(inter)
    if inter is not None:
        values["interaction"] = inter
    if name is not None:
        return preset(name, **values)
    missing = {"lam", "omega", "K"} - set(values)
    if missing:
        raise ValueError(f"config without preset must set {sorted(missing)}")
    values.setdefault("gamma", 0.0)
    values.setdefault("tau", 1.0)
    values.setdefault("interaction", interaction_by_name("relaxation"))
    return Parameters(**values)


def parameters_from_dict(d: dict) -> Parameters:
    """Inverse of :meth:`Parameters.to_dict`."""
    pair = interaction_from_mapping(d["interaction"])
    return Parameters(d["lambda"], tuple(d["omega"]), d["gamma"], d["K"], d["tau"], pair)


def config_hash(effective: dict) -> str:
    """SHA-256 of the canonical JSON form of a config dict."""
    blob = json.dumps(effective, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# -- equilibrium records -------------------------------------------------------


def equilibrium_record(eq: RelativeEquilibrium, params: Parameters | None = None, **extra) -> dict:
    rec = {"equilibrium": eq.to_dict()}
    if params is not None:
        rec["params"] = params.to_dict()
    rec.update(extra)
    return rec


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_equilibrium(path) -> tuple[RelativeEquilibrium, dict]:
    """Equilibrium from a record, a branch bundle (first point) or a bare dict."""
    data = json.loads(Path(path).read_text())
    if "equilibrium" in data:
        return RelativeEquilibrium.from_dict(data["equilibrium"]), data
    if "points" in data:
        return RelativeEquilibrium.from_dict(data["points"][0]), data
    return RelativeEquilibrium.from_dict(data), data


# -- branch output ------------------------------------------------------------


def _csv_text(header, rows, chash=None) -> str:
    buf = io.StringIO()
    if chash:
        buf.write(f"# config_hash={chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def branch_rows(branch: Branch) -> list:
    rows = []
    for p in branch.points:
        e = p.eq
        rows.append([repr(e.tau), repr(e.omega_collective), *map(repr, e.r.tolist()),
                     *map(repr, e.psi.tolist()), p.n_unstable, repr(p.re_rightmost), p.isotropy.label])
    return rows


def branch_csv(branch: Branch, chash=None) -> str:
    return _csv_text(BRANCH_HEADER, branch_rows(branch), chash)


def bifurcation_csv(bifs, chash=None) -> str:
    rows = [[b.kind, repr(b.tau), repr(b.omega_collective)] for b in bifs]
    return _csv_text(BIFURCATION_HEADER, rows, chash)


def trajectory_csv(traj, every: int = 1, chash=None) -> str:
    vals = traj.values[::every]
    inter = np.empty((len(vals), 8))
    inter[:, 0::2] = vals[:, :4]
    inter[:, 1::2] = vals[:, 4:]
    rows = [[repr(t), *map(repr, row)] for t, row in zip(traj.times[::every].tolist(), inter.tolist())]
    return _csv_text(TRAJECTORY_HEADER, rows, chash)


def _complex_list(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return {"re": v.real.tolist(), "im": v.imag.tolist()}
    return v.tolist()


def _from_complex_list(v):
    if isinstance(v, dict):
        return np.asarray(v["re"]) + 1j * np.asarray(v["im"])
    return np.asarray(v, dtype=float)


def bifurcation_to_dict(b: Bifurcation) -> dict:
    return {
        "kind": b.kind,
        "tau": b.tau,
        "Omega": b.omega_collective,
        "index": list(b.index),
        "isotropy": b.isotropy.label,
        "symmetry_broken": bool(b.symmetry_broken),
        "critical_root": [b.critical_root.real, b.critical_root.imag],
        "critical_eigenvector": _complex_list(b.critical_eigenvector),
        "vector": None if b.vector is None else np.asarray(b.vector).tolist(),
        "equilibrium": b.eq.to_dict(),
    }


def bifurcation_from_dict(d: dict) -> Bifurcation:
    return Bifurcation(
        d["kind"], d["tau"], d["Omega"], tuple(d["index"]), _from_complex_list(d["critical_eigenvector"]),
        RelativeEquilibrium.from_dict(d["equilibrium"]), IsotropyClass.from_label(d["isotropy"]),
        complex(*d["critical_root"]), d["symmetry_broken"],
        None if d["vector"] is None else np.asarray(d["vector"], dtype=float),
    )


def branch_bundle(branch: Branch, effective: dict | None = None) -> dict:
    points = []
    for p in branch.points:
        d = p.eq.to_dict()
        d.update(n_unstable=p.n_unstable, isotropy=p.isotropy.label, arclength=p.arclength,
                 leading_roots=[[r.real, r.imag] for r in p.leading_roots])
        points.append(d)
    out = {
        "seed": branch.seed_description,
        "termination": branch.termination,
        "params": branch.params.to_dict(),
        "points": points,
        "bifurcations": [bifurcation_to_dict(b) for b in branch.bifurcations],
    }
    if effective is not None:
        out["config"] = effective
        out["config_hash"] = config_hash(effective)
    return out


def read_bifurcation(path, index: int | None = None, kind: str = "pitchfork") -> Bifurcation:
    """Bifurcation ``index`` of a bundle, or the first of the given kind."""
    data = json.loads(Path(path).read_text())
    bifs = data["bifurcations"] if "bifurcations" in data else [data]
    if index is not None:
        return bifurcation_from_dict(bifs[index])
    for b in bifs:
        if b["kind"] == kind:
            return bifurcation_from_dict(b)
    raise ValueError(f"no {kind} bifurcation in {path}")
