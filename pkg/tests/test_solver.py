import numpy as np
import pytest

from pcprhd import meshgen
from pcprhd.driver import project_initial
from pcprhd.physics import EosParams, is_admissible, prim_to_cons
from pcprhd.problems import get_problem
from pcprhd.solver import (
    OUTFLOW,
    REFLECTIVE,
    BoundaryCondition,
    Solver,
    SolverAbort,
    SolverConfig,
)

EOS = EosParams(5.0 / 3.0)


@pytest.fixture(scope="module")
def box():
    return meshgen.rectangle(0, 1, 0, 1, 8, 8, jitter=0.2, seed=4)


def test_free_stream_preserved(box):
    W = (0.7, 0.4, -0.3, 2.0)
    U = np.tile(prim_to_cons(W, EOS), (box.ncells, 1))
    s = Solver(box, BoundaryCondition("inflow", state=W), SolverConfig(eos=EOS))
    assert np.abs(s.residual(U)).max() < 1e-12
    U2, t, log = s.advance(U, 0.0, 1.0, max_steps=5)
    assert np.abs(U2 - U).max() < 1e-13
    assert len(log) == 5 and t > 0


def test_reflective_box_conserves(box):
    rng = np.random.default_rng(0)
    W = np.column_stack([rng.uniform(0.5, 2, box.ncells), rng.uniform(-0.5, 0.5, (box.ncells, 2)),
                         rng.uniform(0.5, 3, box.ncells)])
    U = prim_to_cons(W, EOS)
    s = Solver(box, REFLECTIVE, SolverConfig(eos=EOS))
    tot0 = s.totals(U)
    U2, _, log = s.advance(U, 0.0, 1.0, max_steps=10)
    drift = np.abs(s.totals(U2) - tot0)
    # momentum is exchanged with the walls; mass and energy are closed
    assert drift[0] < 1e-13 * tot0[0] and drift[3] < 1e-13 * tot0[3]
    assert np.all(is_admissible(U2))


def test_dt_positive_and_scales_with_cfl(box):
    U = np.tile(prim_to_cons((1.0, 0.5, 0.0, 1.0), EOS), (box.ncells, 1))
    a = Solver(box, OUTFLOW, SolverConfig(eos=EOS, cfl=0.5))
    b = Solver(box, OUTFLOW, SolverConfig(eos=EOS, cfl=0.25))
    da, db = a.compute_dt(a.operator(U, 0.0)), b.compute_dt(b.operator(U, 0.0))
    assert da > 0 and db == pytest.approx(da / 2, rel=1e-15)


def test_limiter_off_aborts_on_vacuum_jump():
    m = meshgen.rectangle(0, 1, -0.01, 0.01, 40, 2)
    x = m.centroid[:, 0]
    W = np.where((x < 0.5)[:, None], [1.0, 0.0, 0.0, 1e4], [1.0, 0.0, 0.0, 1e-8])
    U = prim_to_cons(W, EOS)
    s = Solver(m, OUTFLOW, SolverConfig(eos=EOS, limiter=False))
    with pytest.raises(SolverAbort) as exc:
        s.advance(U, 0.0, 0.45)
    assert 0 <= exc.value.cell < m.ncells
    assert exc.value.U.shape == U.shape
    on = Solver(m, OUTFLOW, SolverConfig(eos=EOS))
    U2, _, _ = on.advance(U, 0.0, 0.45, max_steps=20)
    assert np.all(is_admissible(U2))


def test_inadmissible_input_aborts(box):
    U = np.tile(prim_to_cons((1.0, 0.0, 0.0, 1.0), EOS), (box.ncells, 1))
    U[3, 1] = 10.0
    with pytest.raises(SolverAbort) as exc:
        Solver(box, OUTFLOW, SolverConfig(eos=EOS)).operator(U, 0.0)
    assert exc.value.cell == 3


def test_stage_hook_sees_every_stage(box):
    U = np.tile(prim_to_cons((1.0, 0.1, 0.0, 1.0), EOS), (box.ncells, 1))
    s = Solver(box, OUTFLOW, SolverConfig(eos=EOS))
    seen = []
    s.stage_hook = lambda stage, t: seen.append((t, stage.points.shape))
    s.advance(U, 0.0, 1.0, max_steps=2)
    assert len(seen) == 6
    assert all(shape == (box.ncells, 6, 4) for _, shape in seen)


def test_log_records(box):
    U = np.tile(prim_to_cons((1.0, 0.1, 0.0, 1.0), EOS), (box.ncells, 1))
    s = Solver(box, OUTFLOW, SolverConfig(eos=EOS))
    _, t, log = s.advance(U, 0.0, 0.05)
    assert t == pytest.approx(0.05, rel=1e-14)
    assert [r.step for r in log] == list(range(1, len(log) + 1))
    assert all(r.theta_ratio == 0.0 and r.retries == 0 for r in log)


def test_axisymmetric_rest_state():
    m = meshgen.rectangle(0, 1, 0, 1, 6, 6)
    W = (1.0, 0.0, 0.0, 1.0)
    U = np.tile(prim_to_cons(W, EOS), (m.ncells, 1))
    s = Solver(m, BoundaryCondition("inflow", state=W), SolverConfig(eos=EOS, axisymmetric=True))
    # -p/r in the radial momentum balances the radial pressure flux
    res = s.residual(U)
    np.testing.assert_allclose(res[:, [0, 2, 3]], 0.0, atol=1e-12)
    assert s.compute_dt(s.operator(U, 0.0)) > 0


def test_axisymmetric_rejects_negative_radius():
    m = meshgen.rectangle(-1, 1, 0, 1, 4, 4)
    with pytest.raises(ValueError):
        Solver(m, OUTFLOW, SolverConfig(axisymmetric=True))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(cfl=0.0)
    with pytest.raises(ValueError):
        SolverConfig(weights="bogus")
    with pytest.raises(ValueError):
        SolverConfig(recovery="bogus")


def test_vortex_short_run_is_accurate():
    p = get_problem("vortex")
    m = p.mesh(1.0)
    U = project_initial(p, m)
    s = Solver(m, p.boundary, SolverConfig(eos=p.eos))
    U2, _, log = s.advance(U, 0.0, 0.02)
    assert np.all(is_admissible(U2))
    assert np.abs(U2 - U).max() < 0.2


def test_source_bound_example_and_axis_points():
    from pcprhd.solver import _source_bound

    Up = np.zeros((1, 9, 4))
    Up[..., 3] = 1.0  # g = E - sqrt(D^2 + |m|^2) = 1
    Wp = np.zeros((1, 9, 4))
    Wp[..., 1], Wp[..., 3] = 0.5, 1.0
    pts = np.ones((1, 9, 2))
    pts[0, :6, 0] = 0.0  # edge points on the axis do not enter the bound
    assert _source_bound(Up, Wp, pts) == pytest.approx(1.0)
    Wp[..., 1] = -0.5
    assert _source_bound(Up, Wp, pts) == np.inf
