import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fd_jacobian, random_normals, random_primitives
from pcprhd.physics import (
    AdmissibilityError,
    EosParams,
    eigensystem,
    eigenvalues,
    flux,
    g_fn,
    in_primitive_set,
    is_admissible,
    prim_to_cons,
    rotated_flux,
    sound_speed,
    spectral_radius,
)

speeds = st.floats(0.0, 0.995)
angles = st.floats(0.0, 2 * np.pi)
logs = st.floats(-3.0, 3.0)


@st.composite
def primitive(draw):
    r, a = draw(speeds), draw(angles)
    return np.array([10 ** draw(logs), r * np.cos(a), r * np.sin(a), 10 ** draw(logs)])


def test_eos_bounds():
    with pytest.raises(ValueError):
        EosParams(1.0)
    with pytest.raises(ValueError):
        EosParams(2.5)
    EosParams(2.0)


def test_prim_to_cons_example(eos):
    U = prim_to_cons([1.0, 0.6, 0.0, 1.0], eos)
    np.testing.assert_allclose(U, [1.25, 3.28125, 0.0, 4.46875], rtol=1e-14)


def test_prim_to_cons_at_rest(eos):
    # m = 0, D = rho, E = rho + p/(Gamma-1)
    np.testing.assert_allclose(prim_to_cons([2.0, 0, 0, 3.0], eos), [2.0, 0, 0, 6.5])


def test_prim_to_cons_rejects_superluminal(eos):
    with pytest.raises(AdmissibilityError):
        prim_to_cons([1.0, 0.8, 0.7, 1.0], eos)
    with pytest.raises(AdmissibilityError):
        prim_to_cons([1.0, 0.0, 0.0, -1.0], eos)


def test_flux_example(eos):
    W = np.array([1.0, 0.6, 0.0, 1.0])
    U = prim_to_cons(W, eos)
    np.testing.assert_allclose(flux(U, W, 1), [0.75, 2.96875, 0.0, 3.28125], rtol=1e-14)
    np.testing.assert_allclose(flux(U, W, 2), [0, 0, 1.0, 0], atol=1e-15)
    with pytest.raises(ValueError):
        flux(U, W, 3)


@given(primitive(), angles)
def test_rotated_flux_is_linear_combination(W, t):
    eos = EosParams(5 / 3)
    U = prim_to_cons(W, eos)
    n = np.array([np.cos(t), np.sin(t)])
    expected = n[0] * flux(U, W, 1) + n[1] * flux(U, W, 2)
    np.testing.assert_allclose(rotated_flux(U, W, n), expected, rtol=1e-13, atol=1e-13 * np.abs(U).max())


def test_g_example(eos):
    U = prim_to_cons([1.0, 0.6, 0.0, 1.0], eos)
    assert g_fn(U) == pytest.approx(4.46875 - np.sqrt(1.25**2 + 3.28125**2), rel=1e-14)
    assert g_fn(U) == pytest.approx(0.957466, abs=5e-6)


def test_admissibility_boundary():
    assert not is_admissible([1.0, 0.0, 0.0, 1.0])
    assert not is_admissible([-1.0, 0.0, 0.0, 5.0])
    assert is_admissible([1.0, 0.0, 0.0, 1.0 + 1e-12])


@given(primitive())
def test_forward_map_lands_in_admissible_set(W):
    eos = EosParams(5 / 3)
    assert in_primitive_set(W)
    assert is_admissible(prim_to_cons(W, eos))


@given(primitive(), st.floats(1e-3, 1e3))
def test_homogeneity(W, zeta):
    eos = EosParams(5 / 3)
    Ws = W * np.array([zeta, 1, 1, zeta])
    U, Us = prim_to_cons(W, eos), prim_to_cons(Ws, eos)
    np.testing.assert_allclose(Us, zeta * U, rtol=1e-13, atol=1e-13 * zeta * np.abs(U).max())
    np.testing.assert_allclose(flux(Us, Ws, 1), zeta * flux(U, W, 1), rtol=1e-13, atol=1e-13 * zeta * np.abs(U).max())
    assert g_fn(Us) == pytest.approx(zeta * g_fn(U), rel=1e-9)
    n = np.array([0.6, 0.8])
    np.testing.assert_allclose(eigenvalues(Ws, n, eos), eigenvalues(W, n, eos), rtol=1e-13, atol=1e-15)


def test_sound_speed_example(eos):
    assert sound_speed([1.0, 0, 0, 1.0], eos) == pytest.approx(np.sqrt(10 / 21), rel=1e-14)


@given(primitive())
def test_sound_speed_bound(W):
    # c_s^2 < Gamma - 1 for the ideal gas
    eos = EosParams(5 / 3)
    assert 0 < sound_speed(W, eos) < np.sqrt(eos.Gamma - 1)


def test_eigenvalues_at_rest(eos):
    W = np.array([1.0, 0, 0, 1.0])
    lam = eigenvalues(W, (0.6, 0.8), eos)
    c = sound_speed(W, eos)
    np.testing.assert_allclose(lam, [-c, 0, 0, c], atol=1e-15)


def test_eigenvalues_velocity_addition(eos):
    W = np.array([1.0, 0.6, 0.0, 1.0])
    c = sound_speed(W, eos)
    lam = eigenvalues(W, (1.0, 0.0), eos)
    assert lam[3] == pytest.approx((0.6 + c) / (1 + 0.6 * c), rel=1e-13)
    assert lam[0] == pytest.approx((0.6 - c) / (1 - 0.6 * c), rel=1e-13)
    # quoted six-digit values are rounded loosely; the closed forms above are the oracle
    assert lam[3] == pytest.approx(0.912324, abs=5e-6)
    assert lam[0] == pytest.approx(-0.153700, abs=1e-5)


@given(primitive(), angles, angles)
def test_eigenvalues_rotation_consistency(W, t, phi):
    eos = EosParams(5 / 3)
    n = np.array([np.cos(t), np.sin(t)])
    # rotate the frame so that n becomes (1, 0)
    c, s = np.cos(t), np.sin(t)
    Wr = W.copy()
    Wr[1], Wr[2] = c * W[1] + s * W[2], -s * W[1] + c * W[2]
    np.testing.assert_allclose(eigenvalues(W, n, eos), eigenvalues(Wr, (1.0, 0.0), eos), atol=1e-13)


@given(primitive(), angles)
def test_eigenvalue_ordering_and_subluminality(W, t):
    eos = EosParams(5 / 3)
    n = np.array([np.cos(t), np.sin(t)])
    lam = eigenvalues(W, n, eos)
    assert -1 < lam[0] <= lam[1] == lam[2] <= lam[3] < 1
    sr = spectral_radius(W, n, eos)
    assert sr < 1
    assert sr == pytest.approx(max(abs(lam[0]), abs(lam[3])), abs=1e-13)


def test_spectral_radius_random(eos):
    rng = np.random.default_rng(11)
    W = random_primitives(rng, 5000, (-3, 3), 0.999)
    n = random_normals(rng, 5000)
    lam = eigenvalues(W, n, eos)
    sr = spectral_radius(W, n, eos)
    np.testing.assert_allclose(sr, np.maximum(np.abs(lam[:, 0]), np.abs(lam[:, 3])), atol=1e-13)
    assert np.all(sr < 1)


def test_eigensystem_inverse(eos):
    rng = np.random.default_rng(5)
    W = random_primitives(rng, 2000)
    es = eigensystem(W, random_normals(rng, 2000), eos)
    assert np.abs(es.R @ es.Rinv - np.eye(4)).max() < 1e-10


def test_eigensystem_inverse_wide_range_is_conditioning_limited(eos):
    # far from unit scales the residual is bounded by roundoff times cond(R)
    rng = np.random.default_rng(6)
    W = random_primitives(rng, 2000, (-4, 4), 0.999)
    es = eigensystem(W, random_normals(rng, 2000), eos)
    err = np.abs(es.R @ es.Rinv - np.eye(4)).max(axis=(1, 2))
    cond = np.linalg.cond(es.R)
    assert np.all(err <= 1e-14 * cond + 1e-13)


def test_eigensystem_against_fd_jacobian(eos):
    rng = np.random.default_rng(7)
    W = random_primitives(rng, 500)
    n = random_normals(rng, 500)
    es = eigensystem(W, n, eos)
    A = fd_jacobian(prim_to_cons(W, eos), n, eos)
    res = A @ es.R - es.R * es.lambdas[:, None, :]
    assert (np.abs(res).max(axis=1) / np.abs(es.R).max(axis=1)).max() < 1e-6


def test_eigensystem_zero_velocity_is_finite(eos):
    es = eigensystem(np.array([1.0, 0, 0, 1.0]), np.array([1.0, 0.0]), eos)
    assert np.all(np.isfinite(es.R)) and np.all(np.isfinite(es.Rinv))
    np.testing.assert_allclose(es.R @ es.Rinv, np.eye(4), atol=1e-14)


def test_eigensystem_scale_invariant(eos):
    W = np.array([0.7, 0.3, -0.5, 2.0])
    n = np.array([0.28, 0.96])
    a = eigensystem(W, n, eos)
    b = eigensystem(W * [10, 1, 1, 10], n, eos)
    np.testing.assert_allclose(b.R, a.R, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(b.Rinv, a.Rinv, rtol=1e-13, atol=1e-14)


def test_gu2_characterisation(eos):
    # admissible U keep E - m.v* - D sqrt(1-|v*|^2) > 0 for every v* in the unit disk
    rng = np.random.default_rng(9)
    U = prim_to_cons(random_primitives(rng, 200), eos)
    vs = random_primitives(rng, 1000, vmax=1.0)[:, 1:3]
    vv = (vs**2).sum(1)
    vals = U[:, None, 3] - U[:, None, 1] * vs[None, :, 0] - U[:, None, 2] * vs[None, :, 1] - U[:, None, 0] * np.sqrt(1 - vv)[None]
    assert np.all(vals > 0)
    # inadmissible with D > 0: the choice v* = m/sqrt(D^2+|m|^2) gives E - sqrt(D^2+|m|^2) <= 0
    bad = U.copy()
    bad[:, 3] = np.sqrt(bad[:, 0] ** 2 + bad[:, 1] ** 2 + bad[:, 2] ** 2) * rng.uniform(0.5, 1.0, 200)
    norm = np.sqrt(bad[:, 0] ** 2 + bad[:, 1] ** 2 + bad[:, 2] ** 2)
    v = bad[:, 1:3] / norm[:, None]
    val = bad[:, 3] - (bad[:, 1:3] * v).sum(1) - bad[:, 0] * np.sqrt(1 - (v**2).sum(1))
    assert np.all(val <= 1e-12 * norm)
