import math

import numpy as np
import pytest

from cv_entangle import DegeneracyError, StructureError
from cv_entangle.gaussian import (
    check_physicality,
    log_negativity,
    partial_transpose,
    symplectic_eigenvalues,
    symplectic_form,
    two_mode_min_symplectic,
)

from conftest import random_state, random_symplectic, tms

N_CASES = 1000


def test_vacuum_and_thermal():
    assert np.allclose(symplectic_eigenvalues(np.eye(6)), 1.0, atol=1e-12)
    assert np.allclose(symplectic_eigenvalues(7.0 * np.eye(2)), [7.0], atol=1e-12)
    res = log_negativity(np.eye(4), [0])
    assert res.e_n == 0.0 and res.below_unity_count == 0


def test_two_mode_squeezed_reference():
    V = tms(0.5)
    assert np.allclose(symplectic_eigenvalues(V), [1, 1], atol=1e-12)
    pt = symplectic_eigenvalues(partial_transpose(V, [0]))
    assert np.allclose(pt, [math.exp(-1), math.e], atol=1e-12)
    res = log_negativity(V, [0])
    assert res.e_n == pytest.approx(1.0, abs=1e-12)
    assert res.below_unity_count == 1
    assert two_mode_min_symplectic(V) == pytest.approx(math.exp(-1), abs=1e-12)


def test_methods_agree():
    V = tms(0.3)
    for m in ("eig", "hermitian"):
        assert np.allclose(symplectic_eigenvalues(V, m), [1, 1], atol=1e-10)


def test_unphysical_detected():
    ok, margin = check_physicality(np.diag([0.5, 0.5]))
    assert not ok and margin == pytest.approx(-0.5)
    ok, margin = check_physicality(np.eye(4))
    assert ok and abs(margin) < 1e-12


@pytest.mark.parametrize("V", [np.eye(3), np.ones((2, 3)), np.array([[1.0, 0.2], [0.0, 1.0]]),
                               np.array([[np.nan, 0], [0, 1]])])
def test_structure_errors(V):
    with pytest.raises(StructureError):
        symplectic_eigenvalues(V)


def test_partial_transpose_bad_subset():
    with pytest.raises(StructureError):
        partial_transpose(np.eye(4), [2])
    with pytest.raises(StructureError):
        partial_transpose(np.eye(4), [])


def test_two_mode_requires_4x4():
    with pytest.raises(StructureError):
        two_mode_min_symplectic(np.eye(6))


def test_two_mode_degenerate_input():
    with pytest.raises(DegeneracyError):
        two_mode_min_symplectic(np.kron([[1.0, 2.0], [2.0, 1.0]], np.eye(2)))


def test_symplectic_generator_is_symplectic(rng):
    J = symplectic_form(3)
    for _ in range(20):
        S = random_symplectic(rng, 3)
        assert np.allclose(S @ J @ S.T, J, atol=1e-10)


# ---- property suites (fixed seed) ------------------------------------------


def test_williamson_spectrum_and_physicality(rng):
    for _ in range(N_CASES):
        n = int(rng.integers(1, 5))
        V, nu = random_state(rng, n)
        spec = symplectic_eigenvalues(V)
        assert np.allclose(spec, nu, rtol=1e-9)
        ok, margin = check_physicality(V)
        assert ok and margin >= -1e-9


def test_local_symplectic_invariance(rng):
    for _ in range(N_CASES):
        n = int(rng.integers(2, 5))
        V, _ = random_state(rng, n)
        k = int(rng.integers(1, n))
        S = np.zeros((2 * n, 2 * n))
        S[:2 * k, :2 * k] = random_symplectic(rng, k)
        S[2 * k:, 2 * k:] = random_symplectic(rng, n - k)
        part = list(range(k))
        before = symplectic_eigenvalues(partial_transpose(V, part))
        after = symplectic_eigenvalues(partial_transpose(S @ V @ S.T, part))
        assert np.allclose(before, after, rtol=1e-8)
        e0, e1 = log_negativity(V, part).e_n, log_negativity(S @ V @ S.T, part).e_n
        assert abs(e0 - e1) <= 1e-8 * max(1.0, e0)


def test_partial_transpose_involution(rng):
    for _ in range(N_CASES):
        n = int(rng.integers(1, 6))
        V, _ = random_state(rng, n)
        sub = rng.choice(n, int(rng.integers(1, n + 1)), replace=False)
        assert np.array_equal(partial_transpose(partial_transpose(V, sub), sub), V)


def test_eigenvalue_pairing(rng):
    for _ in range(N_CASES):
        n = int(rng.integers(1, 5))
        V, _ = random_state(rng, n)
        ev = np.linalg.eigvals(symplectic_form(n) @ partial_transpose(V, [0]))
        # spectrum of J V is {+-i nu}
        assert np.max(np.abs(ev.real)) <= 1e-10 * np.max(np.abs(ev))
        im = np.sort(ev.imag)
        assert np.allclose(im, -im[::-1], rtol=0, atol=1e-10 * np.max(np.abs(im)))


def test_two_mode_closed_form_matches_general(rng):
    for _ in range(N_CASES):
        V, _ = random_state(rng, 2)
        general = symplectic_eigenvalues(partial_transpose(V, [0]))[0]
        assert two_mode_min_symplectic(V) == pytest.approx(general, rel=1e-10)


def test_hermitian_route_matches_eig(rng):
    for _ in range(100):
        n = int(rng.integers(2, 12))
        V, _ = random_state(rng, n)
        assert np.allclose(symplectic_eigenvalues(V, "eig"), symplectic_eigenvalues(V, "hermitian"),
                           rtol=1e-9)
