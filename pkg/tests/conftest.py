import numpy as np
import pytest

from pcprhd.physics import EosParams


@pytest.fixture
def eos():
    return EosParams(5.0 / 3.0)


def random_primitives(rng, n, log_range=(-1.0, 1.0), vmax=0.99):
    """rho, p log-uniform; velocity uniform over the disk of radius vmax."""
    rho = 10.0 ** rng.uniform(*log_range, n)
    p = 10.0 ** rng.uniform(*log_range, n)
    r = vmax * np.sqrt(rng.uniform(0, 1, n))
    a = rng.uniform(0, 2 * np.pi, n)
    return np.stack([rho, r * np.cos(a), r * np.sin(a), p], -1)


def random_normals(rng, n):
    t = rng.uniform(0, 2 * np.pi, n)
    return np.stack([np.cos(t), np.sin(t)], -1)


def fd_jacobian(U, n, eos, rel=1e-6):
    """Central-difference Jacobian of the rotated flux composed with recovery."""
    from pcprhd.physics import rotated_flux
    from pcprhd.recovery import recover_batch

    U = np.atleast_2d(U)
    n = np.atleast_2d(n)
    h = rel * np.abs(U).max(axis=1)
    A = np.empty(U.shape[:1] + (4, 4))
    for k in range(4):
        Up, Um = U.copy(), U.copy()
        Up[:, k] += h
        Um[:, k] -= h
        Fp = rotated_flux(Up, recover_batch(Up, eos)[0], n)
        Fm = rotated_flux(Um, recover_batch(Um, eos)[0], n)
        A[:, :, k] = (Fp - Fm) / (2 * h[:, None])
    return A


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("ab")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>3}: {'PASS' if ok else 'FAIL'}  {detail}")
