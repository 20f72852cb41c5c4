import numpy as np
import pytest

from cv_entangle import build_params

SEED = 20240611


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def weak():
    """Weak readout with a bath slightly below vacuum noise (n_th = -0.1)."""
    return build_params(q_m=1e3, omega_q=0.02, omega_f=0.02)


@pytest.fixture
def moderate():
    return build_params(q_m=1e3, omega_q=0.1, omega_f=0.1)


@pytest.fixture
def thermal():
    return build_params(q_m=1e3, omega_q=0.1, n_th=100.0)


@pytest.fixture
def uncoupled_thermal():
    return build_params(q_m=1e3, omega_q=0.0, n_th=100.0)


def random_symplectic(rng, n, max_squeeze=0.8):
    """Product of random local rotations/squeezers and two-mode mixers."""
    S = np.eye(2 * n)
    for _ in range(3):
        for k in range(n):
            th, r = rng.uniform(0, 2 * np.pi), rng.uniform(-max_squeeze, max_squeeze)
            c, s = np.cos(th), np.sin(th)
            L = np.array([[c, s], [-s, c]]) @ np.diag([np.exp(r), np.exp(-r)])
            M = np.eye(2 * n)
            M[2 * k:2 * k + 2, 2 * k:2 * k + 2] = L
            S = M @ S
        if n > 1:
            i, j = rng.choice(n, 2, replace=False)
            r = rng.uniform(-max_squeeze, max_squeeze)
            M = np.eye(2 * n)
            ch, sh = np.cosh(r), np.sinh(r)
            Z = np.diag([1.0, -1.0])
            for a, b, blk in ((i, i, ch * np.eye(2)), (j, j, ch * np.eye(2)),
                              (i, j, sh * Z), (j, i, sh * Z)):
                M[2 * a:2 * a + 2, 2 * b:2 * b + 2] = blk
            S = M @ S
    return S


def random_state(rng, n, max_squeeze=0.8, max_thermal=3.0):
    S = random_symplectic(rng, n, max_squeeze)
    nu = 1.0 + rng.uniform(0, max_thermal, n)
    return S @ np.diag(np.repeat(nu, 2)) @ S.T, np.sort(nu)


def tms(r):
    """Two-mode squeezed vacuum in (x1, p1, x2, p2) order."""
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    return np.array([[c, 0, s, 0], [0, c, 0, -s], [s, 0, c, 0], [0, -s, 0, c]])
