import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcprhd import meshgen
from pcprhd.mesh import Mesh, interior_quadrature
from pcprhd.physics import EosParams, prim_to_cons
from pcprhd.reconstruction import (
    GAMMA_LINEAR,
    MODE_CONSTANT,
    MODE_LINEAR,
    MODE_WENO,
    WenoGeometry,
    evaluate,
    fit_linear,
    fit_quadratic,
    nonlinear_weights,
    reconstruct,
    smoothness_indicators,
    weno_characteristic,
    weno_scalar,
)

EOS = EosParams(5.0 / 3.0)


@pytest.fixture(scope="module")
def geo():
    return WenoGeometry(meshgen.rectangle(0, 1, 0, 1, 7, 6, jitter=0.25, seed=5))


def ext_means(geo, f):
    """Exact-for-quadratics averages over cells and ghosts."""
    q, w = interior_quadrature(geo.mesh.ext_vertices)
    return np.einsum("q,mq...->m...", w, f(q[..., 0], q[..., 1]))


def interior(geo):
    return [c for c in range(geo.mesh.ncells) if geo.mode[c] == MODE_WENO]


def test_basis_has_zero_mean(geo):
    np.testing.assert_allclose(geo.psi_avg[:, 0, :], 0.0, atol=1e-13)


def test_gamma_normalised(geo):
    np.testing.assert_allclose(geo.gamma.sum(1), 1.0, rtol=1e-15)
    full = geo.lin_ok.all(1)
    np.testing.assert_allclose(geo.gamma[full], np.broadcast_to(GAMMA_LINEAR, (full.sum(), 5)))


def test_quadratic_fit_exact_for_quadratics(geo):
    f = lambda x, y: 1.0 + 2 * x - y + 3 * x * y - x * x + 0.5 * y * y
    ub = ext_means(geo, f)
    for c in interior(geo):
        quad = fit_quadratic(geo, c, ub)
        pts = geo.points[c]
        np.testing.assert_allclose(evaluate(geo, c, quad.mean, quad.a, pts[:, 0], pts[:, 1]),
                                   f(pts[:, 0], pts[:, 1]), atol=1e-12)


def test_linear_candidates_exact_for_linears(geo):
    f = lambda x, y: 0.3 - 1.5 * x + 2.0 * y
    ub = ext_means(geo, f)
    for c in interior(geo):
        for l in range(4):
            if geo.lin_ok[c, l]:
                lin = fit_linear(geo, c, ub, l)
                pts = geo.points[c]
                val = evaluate(geo, c, lin.mean, np.r_[lin.b, 0, 0, 0], pts[:, 0], pts[:, 1])
                np.testing.assert_allclose(val, f(pts[:, 0], pts[:, 1]), atol=1e-13)


def test_weno_exact_for_linear_data_any_weights(geo):
    f = lambda x, y: 5.0 + x - 3.0 * y
    ub = ext_means(geo, f)
    for variant in ("invariant", "original"):
        for c in range(geo.mesh.ncells):
            poly = weno_scalar(geo, c, ub, variant)
            pts = geo.points[c]
            np.testing.assert_allclose(evaluate(geo, c, poly.mean, poly.a, pts[:, 0], pts[:, 1]),
                                       f(pts[:, 0], pts[:, 1]), atol=1e-12)


def test_weights_are_convex(geo):
    rng = np.random.default_rng(0)
    ub = rng.normal(size=geo.mesh.ncells + geo.mesh.nghosts)
    for c in interior(geo):
        _, w = weno_scalar(geo, c, ub, return_weights=True)
        assert w.varpi.sum() == pytest.approx(1.0, rel=1e-14)
        assert np.all(w.varpi >= 0)
        assert w.tau >= 0 and w.epsilon > 0


def test_smooth_data_keeps_linear_weights(geo):
    ub = ext_means(geo, lambda x, y: 1.0 + 0.1 * np.sin(x + y))
    for c in interior(geo):
        _, w = weno_scalar(geo, c, ub, return_weights=True)
        np.testing.assert_allclose(w.varpi, w.gamma, atol=1e-3)


def test_jump_moves_weight_off_quadratic(geo):
    ub = ext_means(geo, lambda x, y: np.where(x < 0.5, 1.0, 10.0))
    m = geo.mesh
    near = [c for c in interior(geo) if abs(m.centroid[c, 0] - 0.5) < 0.1]
    w0 = [weno_scalar(geo, c, ub, return_weights=True)[1].varpi[0] for c in near]
    assert min(w0) < 0.5


def test_zero_data_falls_back_to_linear_weights(geo):
    ub = np.zeros(geo.mesh.ncells + geo.mesh.nghosts)
    c = interior(geo)[0]
    _, w = weno_scalar(geo, c, ub, return_weights=True)
    np.testing.assert_array_equal(w.varpi, w.gamma)


def test_indicators_scale_with_data(geo):
    ub = ext_means(geo, lambda x, y: np.exp(x) * np.cos(2 * y))
    c = interior(geo)[3]
    quad = fit_quadratic(geo, c, ub)
    lins = [fit_linear(geo, c, ub, l) for l in range(4)]
    b1 = smoothness_indicators(geo, c, quad, lins)
    quad2 = fit_quadratic(geo, c, 3 * ub)
    lins2 = [fit_linear(geo, c, 3 * ub, l) for l in range(4)]
    np.testing.assert_allclose(smoothness_indicators(geo, c, quad2, lins2), 9 * b1, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-12, 12))
def test_invariant_weights_homogeneous(seed, logz):
    geo = _GEO
    rng = np.random.default_rng(seed)
    ub = rng.lognormal(size=geo.mesh.ncells + geo.mesh.nghosts)
    z = 10.0 ** logz
    c = int(rng.integers(geo.mesh.ncells))
    p1, w1 = weno_scalar(geo, c, ub, return_weights=True)
    p2, w2 = weno_scalar(geo, c, z * ub, return_weights=True)
    if w1 is not None:
        np.testing.assert_allclose(w2.varpi, w1.varpi, rtol=1e-12)
    np.testing.assert_allclose(p2.a, z * p1.a, rtol=1e-11, atol=1e-13 * z * np.abs(p1.a).max())


def test_original_weights_not_scaling_invariant():
    geo = _GEO
    ub = ext_means(geo, lambda x, y: np.where(x + y < 1.0, 1.0, 3.0))
    c = next(c for c in interior(geo) if abs(geo.mesh.centroid[c].sum() - 1.0) < 0.1)
    varpi = []
    for z in (1e-4, 1e4):
        _, w = weno_scalar(geo, c, z * ub, variant="original", return_weights=True)
        varpi.append(w.varpi)
    # tau^2 / (beta + eps) scales like z^2: weights drift with the data scale
    assert np.abs(varpi[0] - varpi[1]).max() > 1e-3
    _, w = weno_scalar(geo, c, 1e4 * ub, variant="invariant", return_weights=True)
    _, w1 = weno_scalar(geo, c, ub, variant="invariant", return_weights=True)
    np.testing.assert_allclose(w.varpi, w1.varpi, rtol=1e-12)


def test_unknown_variant(geo):
    with pytest.raises(ValueError):
        nonlinear_weights(geo, interior(geo)[0], np.ones(5), np.ones(200), "bogus")


def _random_field(geo, rng):
    m = geo.mesh
    ext = m.ncells + m.nghosts
    cx = m.ext_centroid[:, 0]
    rho = 1.0 + 0.5 * np.sin(3 * cx) + rng.uniform(0, 0.2, ext)
    rho[cx > 0.6] *= 5.0
    W = np.stack([rho, rng.uniform(-0.5, 0.5, ext), rng.uniform(-0.5, 0.5, ext), rng.lognormal(0, 1, ext)], 1)
    return prim_to_cons(W, EOS), W


@pytest.mark.parametrize("variant", ["invariant", "original"])
def test_batch_kernel_matches_reference(geo, variant):
    rng = np.random.default_rng(8)
    U, W = _random_field(geo, rng)
    coef, pts = reconstruct(geo, U, W[: geo.mesh.ncells], EOS, variant)
    for c in range(geo.mesh.ncells):
        if geo.mode[c] != MODE_WENO:
            continue
        ref = weno_characteristic(geo, c, U, W[c], EOS, variant)
        np.testing.assert_allclose(coef[c], ref, rtol=1e-9, atol=1e-11 * np.abs(U).max())
        vals = evaluate(geo, c, U[c], ref, geo.points[c, :, 0], geo.points[c, :, 1])
        np.testing.assert_allclose(pts[c], vals, rtol=1e-9, atol=1e-11 * np.abs(U).max())


def test_batch_dump_records_weights(geo):
    rng = np.random.default_rng(9)
    U, W = _random_field(geo, rng)
    dump = np.empty((geo.mesh.ncells, 11))
    reconstruct(geo, U, W[: geo.mesh.ncells], EOS, "invariant", dump)
    w = dump[geo.mode == MODE_WENO, 6:]
    np.testing.assert_allclose(w.sum(1), 1.0, rtol=1e-13)
    assert np.all(dump[:, :6] >= 0)


def test_characteristic_reconstruction_is_homogeneous(geo):
    rng = np.random.default_rng(3)
    U, W = _random_field(geo, rng)
    M = geo.mesh.ncells
    c1, _ = reconstruct(geo, U, W[:M], EOS)
    for z in (1e-2, 1e-4):
        W2 = W.copy()
        W2[:, [0, 3]] *= z
        c2, _ = reconstruct(geo, z * U, W2[:M], EOS)
        np.testing.assert_allclose(c2, z * c1, rtol=1e-9, atol=1e-12 * z * np.abs(c1).max())


def test_batch_exact_for_linear_conserved_data(geo):
    M = geo.mesh.ncells
    f = lambda x, y: np.stack([1 + 0.1 * x, 0.2 * y, -0.1 * x, 3 + 0.2 * x - 0.1 * y], -1)
    U = ext_means(geo, f)
    W = np.tile([1.0, 0.05, -0.02, 1.0], (M, 1))
    _, pts = reconstruct(geo, U, W, EOS)
    g = geo.points
    np.testing.assert_allclose(pts, f(g[..., 0], g[..., 1]), atol=1e-12)


def test_small_mesh_falls_back():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    geo = WenoGeometry(Mesh(nodes, np.array([[0, 1, 2], [0, 2, 3]]), np.ones(4, dtype=int)))
    assert set(geo.mode.tolist()) <= {MODE_LINEAR, MODE_CONSTANT}
    ub = ext_means(geo, lambda x, y: 2.0 + x + 0 * y)
    with pytest.raises(np.linalg.LinAlgError):
        fit_quadratic(geo, 0, ub)
    poly = weno_scalar(geo, 0, ub)
    assert np.all(poly.a[2:] == 0)


def test_axisymmetric_extra_points_inside():
    m = meshgen.rectangle(0, 1, 0, 1, 3, 3)
    geo = WenoGeometry(m, extra_points=True)
    assert geo.npoints == 9
    assert np.all(geo.points[:, 6:, 0] > 0)


def test_point_values_converge_third_order():
    f = lambda x, y: np.exp(-(x * x + y * y) / 2) * (1 + 0.3 * np.sin(x))
    errs = []
    for m in meshgen.nested_family(meshgen.lattice(-3, 3, -3, 3, 0.5), 3):
        geo = WenoGeometry(m)
        ub = ext_means(geo, f)
        U = np.stack([2 + ub, 0 * ub, 0 * ub, 5 + ub], 1)
        W = np.tile([1.0, 0.0, 0.0, 1.0], (m.ncells, 1))
        _, pts = reconstruct(geo, U, W, EOS)
        errs.append(np.abs(pts[..., 0] - 2 - f(geo.points[..., 0], geo.points[..., 1])).max())
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert slopes[-1] > 2.7


_GEO = WenoGeometry(meshgen.rectangle(0, 1, 0, 1, 5, 5, jitter=0.2, seed=1))
