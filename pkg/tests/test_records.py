import json

import numpy as np
import pytest

from delayring import records
from delayring.continuation import continue_branch
from delayring.equilibria import RelativeEquilibrium
from delayring.model import preset


@pytest.fixture(scope="module")
def short_branch(relax, primary_eq):
    return continue_branch(relax, primary_eq(0, 0.4), (0.35, 0.7))


def test_parse_ranges():
    assert records.parse_interval("0.3:2") == (0.3, 2.0)
    assert np.allclose(records.parse_grid("0:1:5"), [0, 0.25, 0.5, 0.75, 1])
    for bad in ("1:0", "1", "a:b"):
        with pytest.raises(ValueError):
            records.parse_interval(bad)
    with pytest.raises(ValueError):
        records.parse_grid("0:1:0")


def test_config_file_with_inline_interaction(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "lambda = 1.5\nomega = 2.0, 2.1, 2.2, 2.3\nK = 0.2\ntau = 0.7\n"
        "[interaction]\na_r = 0, 1, 0, 0, 0, 0\nb_r = 0, 0, 0, 0, 0\n"
        "a_phi = 0, 0, 0, 0, 0, 0\nb_phi = 1, 0, 0, 0, 0\n"
    )
    p = records.build_parameters(records.read_config(path))
    assert p.lam == 1.5 and p.omega == (2.0, 2.1, 2.2, 2.3) and p.K == 0.2 and p.tau == 0.7
    assert p.gamma == 0.0
    assert p.interaction.h_phi.b[1] == 1.0 and p.interaction.h_r.a[1] == 1.0


def test_config_preset_with_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("preset = smooth\ngamma = 0.25\ninteraction = relaxation\n")
    p = records.build_parameters(records.read_config(path), K=0.1)
    assert (p.lam, p.gamma, p.K) == (1.1025, 0.25, 0.1)
    assert p.interaction.h_r.a[1] == -0.97948
    with pytest.raises(ValueError):
        records.build_parameters({"lambda": "1.0"})
    with pytest.raises(ValueError):
        records.build_parameters({}, preset="nope")


def test_parameters_round_trip(relax):
    again = records.parameters_from_dict(json.loads(json.dumps(relax.to_dict())))
    assert again == relax


def test_equilibrium_record_round_trip(tmp_path, primary_eq, relax):
    eq = primary_eq(3, 1.1)
    path = tmp_path / "eq.json"
    records.write_json(path, records.equilibrium_record(eq, relax))
    back, data = records.read_equilibrium(path)
    assert np.array_equal(back.unknowns, eq.unknowns) and back.tau == eq.tau
    assert data["params"]["K"] == relax.K


def test_branch_csv_header_and_hash(short_branch):
    text = records.branch_csv(short_branch, "abc")
    lines = text.splitlines()
    assert lines[0] == "# config_hash=abc"
    assert lines[1] == "tau,Omega,r1,r2,r3,r4,psi1,psi2,psi3,n_unstable,re_rightmost,isotropy"
    assert len(lines) == 2 + len(short_branch)
    assert records.bifurcation_csv(short_branch.bifurcations).splitlines()[0] == "kind,tau,Omega"


def test_bundle_round_trip_is_bit_identical(tmp_path, short_branch):
    path = tmp_path / "b.json"
    records.write_json(path, records.branch_bundle(short_branch, {"x": 1}))
    data = json.loads(path.read_text())
    for stored, pt in zip(data["points"], short_branch.points):
        eq = RelativeEquilibrium.from_dict(stored)
        assert np.array_equal(eq.unknowns, pt.eq.unknowns) and eq.tau == pt.eq.tau
    first, _ = records.read_equilibrium(path)
    assert np.array_equal(first.unknowns, short_branch.points[0].eq.unknowns)
    assert data["config_hash"] == records.config_hash({"x": 1})
    for i, b in enumerate(short_branch.bifurcations):
        back = records.read_bifurcation(path, i)
        assert back.kind == b.kind and back.tau == b.tau
        assert np.array_equal(back.critical_eigenvector, b.critical_eigenvector)
        assert np.array_equal(back.vector, b.vector)


def test_config_hash_is_canonical():
    assert records.config_hash({"a": 1, "b": 2}) == records.config_hash({"b": 2, "a": 1})
    assert records.config_hash({"a": 1}) != records.config_hash({"a": 2})


def test_trajectory_csv_layout():
    from delayring.simulate import integrate_dde

    p = preset("smooth", tau=0.4)
    traj = integrate_dde(p, lambda t: np.r_[np.ones(4), 3.4 * t + np.arange(4.0)], 0.2)
    lines = records.trajectory_csv(traj, every=2).splitlines()
    assert lines[0] == "t,r1,phi1,r2,phi2,r3,phi3,r4,phi4"
    row = [float(v) for v in lines[1].split(",")]
    assert row[1::2] == traj.r[0].tolist() and row[2::2] == traj.phi[0].tolist()
