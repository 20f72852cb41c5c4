"""Finite-mode Gaussian-state tools: symplectic spectra, partial transpose, negativity.

Quadratures are ordered ``(q1, p1, q2, p2, ...)`` everywhere (see
:data:`QUAD_ORDER`) and normalized so the vacuum covariance is the identity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DegeneracyError, StructureError

log = logging.getLogger(__name__)

QUAD_ORDER = "interleaved"  # (q1, p1, q2, p2, ...)

SYMMETRY_RTOL = 1e-12
PHYSICALITY_TOL = 1e-6
PAIRING_TOL = 1e-10
# eigenvalues this close to one are rounding noise of large assembled matrices
UNITY_TOL = 1e-8
# above this size the Cholesky/Hermitian route replaces the general eigensolver
_DENSE_EIG_MAX = 400

__all__ = [
    "QUAD_ORDER",
    "EntanglementResult",
    "symplectic_form",
    "validate_covariance",
    "symplectic_eigenvalues",
    "partial_transpose",
    "log_negativity",
    "negativity_from_spectrum",
    "two_mode_min_symplectic",
    "check_physicality",
]


@dataclass
class EntanglementResult:
    """Outcome of a PPT negativity evaluation."""

    symplectic_spectrum: np.ndarray
    e_n: float
    below_unity_count: int
    convergence_info: dict = field(default_factory=dict)

    @property
    def lambda_min(self) -> float:
        return float(self.symplectic_spectrum[0]) if len(self.symplectic_spectrum) else np.nan


def symplectic_form(n_modes: int) -> np.ndarray:
    """Real symplectic form J with ``[X_i, X_j] = 2i J_ij``."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def validate_covariance(V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise StructureError(f"covariance must be square, got shape {V.shape}")
    if V.shape[0] % 2:
        raise StructureError("covariance dimension must be even")
    if not np.all(np.isfinite(V)):
        raise StructureError("covariance has non-finite entries")
    scale = max(np.abs(V).max(), 1e-300)
    if np.abs(V - V.T).max() > SYMMETRY_RTOL * scale:
        raise StructureError("covariance is not symmetric")
    return V


def _raw_moduli(V):
    n = V.shape[0] // 2
    return np.sort(np.abs(np.linalg.eigvals(symplectic_form(n) @ V)))


def symplectic_eigenvalues(V, method="auto") -> np.ndarray:
    """Sorted symplectic eigenvalues of ``V`` (vacuum -> all ones).

    ``method="eig"`` takes the moduli of the eigenvalues of ``J V`` and keeps
    one member of each pair. ``method="hermitian"`` uses a Cholesky factor
    ``V = L L^T`` and the real antisymmetric matrix ``L^T J L``, whose
    eigenvalues are ``+-i nu``; it is much faster for large grids but needs a
    positive-definite input. ``"auto"`` picks ``eig`` for small matrices.
    """
    V = validate_covariance(V)
    n = V.shape[0] // 2
    if method == "auto":
        method = "eig" if V.shape[0] <= _DENSE_EIG_MAX else "hermitian"
    if method == "eig":
        moduli = _raw_moduli(V)
        return moduli[::2].copy()
    if method == "hermitian":
        try:
            L = np.linalg.cholesky(V)
        except np.linalg.LinAlgError:
            log.debug("covariance not positive definite; falling back to eig")
            return _raw_moduli(V)[::2].copy()
        S = L.T @ symplectic_form(n) @ L
        # i S is Hermitian with spectrum {+nu, -nu}
        w = sla.eigvalsh(1j * S, driver="evr", overwrite_a=True, check_finite=False)
        return np.sort(w[w.size // 2:])
    raise ValueError(f"unknown method {method!r}")


def partial_transpose(V, subset) -> np.ndarray:
    """Flip the sign of every momentum of the modes in ``subset`` (0-based)."""
    V = validate_covariance(V)
    n = V.shape[0] // 2
    subset = list(np.atleast_1d(subset).astype(int))
    if not subset:
        raise StructureError("partial transpose needs a non-empty subset")
    if min(subset) < 0 or max(subset) >= n:
        raise StructureError(f"mode index out of range for {n} modes: {subset}")
    sign = np.ones(2 * n)
    sign[[2 * k + 1 for k in subset]] = -1.0
    return V * np.outer(sign, sign)


def negativity_from_spectrum(spectrum, info=None, unity_tol=UNITY_TOL) -> EntanglementResult:
    """Sum ``-ln nu`` over eigenvalues below ``1 - unity_tol``."""
    spectrum = np.sort(np.asarray(spectrum, dtype=float))
    below = spectrum[spectrum < 1.0 - unity_tol]
    e_n = max(-float(np.sum(np.log(below))), 0.0) if below.size else 0.0
    return EntanglementResult(spectrum, e_n, int(below.size), dict(info or {}))


def log_negativity(V, partition, method="auto", check=True, unity_tol=UNITY_TOL) -> EntanglementResult:
    """Logarithmic negativity of ``V`` across ``partition`` | rest.

    All partially transposed symplectic eigenvalues below one contribute; the
    count is reported in ``below_unity_count``.
    """
    V = validate_covariance(V)
    if check:
        ok, margin = check_physicality(V, method=method)
        if not ok:
            log.warning("input covariance violates the uncertainty relation by %.3g", -margin)
    spec = symplectic_eigenvalues(partial_transpose(V, partition), method=method)
    return negativity_from_spectrum(spec, {"dim": V.shape[0], "method": method}, unity_tol)


def two_mode_min_symplectic(V) -> float:
    """Smallest partially transposed symplectic eigenvalue of a 4x4 covariance.

    Closed form from the 2x2 blocks ``[[A, C], [C^T, B]]``.
    """
    V = validate_covariance(V)
    if V.shape != (4, 4):
        raise StructureError("two_mode_min_symplectic needs a 4x4 covariance")
    A, B, C = V[:2, :2], V[2:, 2:], V[:2, 2:]
    delta = np.linalg.det(A) + np.linalg.det(B) - 2.0 * np.linalg.det(C)
    det_v = np.linalg.det(V)
    disc = delta**2 - 4.0 * det_v
    if disc < 0:
        if disc < -1e-10 * max(1.0, delta**2):
            raise DegeneracyError(f"negative discriminant {disc!r}")
        disc = 0.0
    # product of the two roots is det V; avoids cancellation when nu is small
    big = (delta + np.sqrt(disc)) / 2.0
    nu2 = det_v / big if big > 0 else (delta - np.sqrt(disc)) / 2.0
    if nu2 < 0:
        raise DegeneracyError(f"negative squared eigenvalue {nu2!r}")
    return float(np.sqrt(nu2))


def check_physicality(V, tol=PHYSICALITY_TOL, method="auto"):
    """Return ``(ok, margin)`` where ``margin = min symplectic eigenvalue - 1``."""
    spec = symplectic_eigenvalues(V, method=method)
    margin = float(spec[0]) - 1.0
    return margin >= -tol, margin
