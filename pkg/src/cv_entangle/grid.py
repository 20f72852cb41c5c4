"""Finite-mode reference evaluator for oscillator-versus-field entanglement.

The past output field on ``[-T, 0]`` is expanded in an orthonormal set of real
temporal modes. The record is cut into intervals whose lengths grow
geometrically into the past. Short intervals (less than one mechanical
period) carry shifted Legendre polynomials; longer ones carry Legendre
envelopes multiplying ``cos`` and ``sin`` of the mechanical carrier, which is
where the correlated part of the output lives. Each interval's functions are
orthonormalized exactly, so every mode pair ``(X_f, Y_f) = (int f b1,
int f b2)`` is canonical and the delta parts of the field kernel reduce to
the identity.

All smooth kernels are finite exponential sums, so matrix elements are
integrals of ``polynomial * exp(z u)`` over ``[0, 1]`` or over the triangle
``0 < u < u' < 1``. Small ``|z|`` uses Gauss-Legendre quadrature, which is
exact to rounding there; large ``|z|`` uses the closed-form antiderivative
``e^{zu} sum_k (-1)^k p^(k)(u) / z^(k+1)``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial import Legendre

from .errors import ConfigError, ConvergenceError
from .gaussian import (
    UNITY_TOL,
    EntanglementResult,
    check_physicality,
    log_negativity,
    negativity_from_spectrum,
)
from .kernels import ExpSum, LagKernel, OscState, field_kernel, stationary_state
from .params import SystemParams

log = logging.getLogger(__name__)

__all__ = [
    "GridSpec",
    "Basis",
    "default_grid",
    "build_basis",
    "build_grid_covariance",
    "set_oscillator",
    "entanglement_grid",
]

MAX_MODES = 2048
_QUAD_NODES = 96


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the retained past field.

    ``horizon`` is the retained duration T. ``degree`` is the Legendre degree
    of the envelope on carrier intervals; intervals shorter than a period use
    ``2 * degree + 1`` so every interval holds ``2 * degree + 2`` modes.
    ``dt`` is the finest time resolution, the first interval length divided by
    its mode count. ``growth`` is the length ratio of consecutive intervals
    and ``max_block`` caps their length.
    """

    horizon: float
    dt: float = 0.05
    degree: int = 3
    growth: float = 1.4
    max_block: float = math.inf
    tol: float = 1e-3
    max_refinements: int = 4

    def validate(self, omega_m: float = 1.0):
        if not (self.horizon > 0 and self.dt > 0):
            raise ConfigError("horizon and dt must be positive")
        if self.dt * omega_m > 0.1 + 1e-12:
            raise ConfigError(f"dt*omega_m = {self.dt * omega_m:g} exceeds 0.1")
        if not 0 <= self.degree <= 5:
            raise ConfigError("degree must lie in 0..5")
        if self.growth <= 1.0:
            raise ConfigError("growth must exceed 1")
        if self.max_block <= 0:
            raise ConfigError("max_block must be positive")
        if self.tol <= 0 or self.max_refinements < 1:
            raise ConfigError("tol must be positive and max_refinements at least 1")

    @property
    def modes_per_interval(self) -> int:
        return 2 * self.degree + 2

    def refined(self) -> "GridSpec":
        """Next member of the refinement schedule."""
        return replace(
            self,
            horizon=self.horizon * 1.5,
            dt=self.dt / 2,
            degree=min(self.degree + 1, 5),
            growth=1.0 + (self.growth - 1.0) / 1.4,
        )


def default_grid(params: SystemParams, **overrides) -> GridSpec:
    """Horizon ``max(10/gamma_m, 50/omega_m)``, finest resolution ``0.05/omega_m``."""
    wm = params.omega_m
    kw = dict(horizon=max(10.0 / params.gamma_m, 50.0 / wm), dt=0.05 / wm)
    kw.update(overrides)
    return GridSpec(**kw)


# ---------------------------------------------------------------------------
# polynomial-exponential integrals on [0, 1]


@dataclass(frozen=True)
class _Family:
    """Shifted Legendre polynomials ``p_0..p_D`` and the products ``p_a p_b^(k)``."""

    degree: int
    base_nodes: np.ndarray   # (D+1, n)      p_a(u_n)
    base_d0: np.ndarray      # (D+1, K)      p_a^(k)(0)
    base_d1: np.ndarray      # (D+1, K)      p_a^(k)(1)
    prod_nodes: np.ndarray   # (D+1, D+1, D+1, n)  p_a p_b^(k) at nodes
    prod_d0: np.ndarray      # (D+1, D+1, D+1, K)
    prod_d1: np.ndarray
    inner_nodes: np.ndarray  # (D+1, n, n)   p_a(u_i s_j) for the triangle rule


@lru_cache(maxsize=None)
def _gauss():
    x, w = np.polynomial.legendre.leggauss(_QUAD_NODES)
    return (x + 1) / 2, w / 2


def _derivs(poly, K):
    out0, out1 = np.zeros(K), np.zeros(K)
    q = poly
    for k in range(K):
        out0[k], out1[k] = q(0.0), q(1.0)
        q = q.deriv()
    return out0, out1


@lru_cache(maxsize=None)
def _family(D: int) -> _Family:
    u, _ = _gauss()
    K = 2 * D + 1
    polys = [Legendre.basis(a, domain=[0, 1]) for a in range(D + 1)]
    ders = [[p.deriv(k) if k else p for k in range(D + 1)] for p in polys]
    base_nodes = np.array([p(u) for p in polys])
    base = [_derivs(p, K) for p in polys]
    n = u.size
    prod_nodes = np.zeros((D + 1, D + 1, D + 1, n))
    prod_d0 = np.zeros((D + 1, D + 1, D + 1, K))
    prod_d1 = np.zeros_like(prod_d0)
    for a in range(D + 1):
        for b in range(D + 1):
            for k in range(D + 1):
                pr = polys[a] * ders[b][k]
                prod_nodes[a, b, k] = pr(u)
                prod_d0[a, b, k], prod_d1[a, b, k] = _derivs(pr, K)
    inner = np.array([p(np.outer(u, u)) for p in polys])
    return _Family(D, base_nodes, np.array([b[0] for b in base]), np.array([b[1] for b in base]),
                   prod_nodes, prod_d0, prod_d1, inner)


def _threshold(D: int) -> float:
    # the antiderivative series is cancellation-free once |z| exceeds ~degree^2
    return max(40.0, (2 * D + 1) ** 2 / 2)


def _moment(nodes, d0, d1, z, D, shift=0.0):
    """``e^{-shift} int_0^1 r(u) e^{z u} du`` for a family of polynomials ``r``."""
    z = complex(z)
    if abs(z) < _threshold(D):
        u, w = _gauss()
        return nodes @ (w * np.exp(z * u - shift))
    K = d0.shape[-1]
    v = (-1.0) ** np.arange(K) / z ** np.arange(1, K + 1)
    return np.exp(z - shift) * (d1 @ v) - np.exp(-shift) * (d0 @ v)


def _triangle(fam: _Family, x1, x2) -> np.ndarray:
    """``T[a, b] = int int_{0<u<u'<1} p_a(u) e^{x1 u} p_b(u') e^{x2 u'}``."""
    D = fam.degree
    tau = _threshold(D)
    x1, x2 = complex(x1), complex(x2)
    K = fam.base_d0.shape[-1]
    if abs(x1) >= tau:
        # inner integral in closed form; family index [b, a, k] = p_b p_a^(k)
        v = (-1.0) ** np.arange(K) / x1 ** np.arange(1, K + 1)
        Mz = _moment(fam.prod_nodes, fam.prod_d0, fam.prod_d1, x1 + x2, D)  # (b, a, k)
        first = np.einsum("bak,k->ab", Mz, v[: D + 1])
        a0 = fam.base_d0 @ v
        return first - np.outer(a0, _moment(fam.base_nodes, fam.base_d0, fam.base_d1, x2, D))
    if abs(x2) >= tau:
        v = (-1.0) ** np.arange(K) / x2 ** np.arange(1, K + 1)
        b1 = np.exp(x2) * (fam.base_d1 @ v)
        Mz = _moment(fam.prod_nodes, fam.prod_d0, fam.prod_d1, x1 + x2, D)  # (a, b, k)
        second = np.einsum("abk,k->ab", Mz, v[: D + 1])
        return np.outer(_moment(fam.base_nodes, fam.base_d0, fam.base_d1, x1, D), b1) - second
    u, w = _gauss()
    inner = np.einsum("aij,ij,j->ai", fam.inner_nodes, np.exp(x1 * np.outer(u, u)), w) * u
    outer = fam.base_nodes * (w * np.exp(x2 * u))
    return inner @ outer.T


# ---------------------------------------------------------------------------
# basis


@dataclass
class Basis:
    """Orthonormal real temporal modes grouped by interval.

    On interval ``b`` (start ``starts[b]``, length ``lengths[b]``, local
    coordinate ``u``) the functions are
    ``sum_{s, j} coeffs[b][f, s, j] p_j(u) exp(kappas[b][s] u)``.
    """

    starts: np.ndarray
    lengths: np.ndarray
    degrees: list
    kappas: list
    coeffs: list
    owner: np.ndarray

    @property
    def size(self) -> int:
        return int(self.owner.size)

    def evaluate(self, t) -> np.ndarray:
        """Sample every basis function at times ``t`` (rows: functions)."""
        t = np.asarray(t, dtype=float)
        rows = []
        for a, L, D, kap, C in zip(self.starts, self.lengths, self.degrees, self.kappas, self.coeffs):
            u = (t - a) / L
            inside = (u >= 0) & (u < 1)
            uu = np.where(inside, u, 0.0)
            P = np.array([Legendre.basis(j, domain=[0, 1])(uu) for j in range(D + 1)])
            E = np.exp(np.outer(kap, uu))
            vals = np.einsum("fsj,ju,su->fu", C, P, E).real
            rows.append(vals * inside)
        return np.vstack(rows)


def _interval_modes(L, omega, D_env):
    """Exponents and orthonormal coefficients for one interval."""
    if omega * L < 2 * math.pi:
        D = 2 * D_env + 1
        kap = np.array([0.0 + 0.0j])
        C0 = np.eye(D + 1, dtype=complex)[:, None, :]
    else:
        D = D_env
        th = omega * L
        kap = np.array([1j * th, -1j * th])
        C0 = np.zeros((2 * (D + 1), 2, D + 1), dtype=complex)
        for j in range(D + 1):
            C0[2 * j, :, j] = [0.5, 0.5]
            C0[2 * j + 1, :, j] = [-0.5j, 0.5j]
    fam = _family(D)
    # Gram matrix of the raw functions, exact
    G = np.zeros((C0.shape[0],) * 2, dtype=complex)
    for s, ks in enumerate(kap):
        for r, kr in enumerate(kap):
            Mz = _moment(fam.prod_nodes[:, :, 0], fam.prod_d0[:, :, 0], fam.prod_d1[:, :, 0], ks + kr, D)
            G += C0[:, s, :] @ Mz @ C0[:, r, :].T
    G = L * G.real
    G = 0.5 * (G + G.T)
    evals, evecs = np.linalg.eigh(G)
    if evals.min() <= 1e-10 * evals.max():
        raise ConfigError("interval basis is numerically degenerate")
    W = (evecs / np.sqrt(evals)) @ evecs.T
    C = np.einsum("gf,fsj->gsj", W, C0)
    return D, kap, C


def build_basis(grid: GridSpec, omega: float) -> Basis:
    """Lay out geometrically growing intervals from ``t = 0`` back to ``-T``."""
    starts, lengths, degrees, kappas, coeffs = [], [], [], [], []
    L = grid.dt * grid.modes_per_interval
    edge = 0.0
    while -edge < grid.horizon * (1 - 1e-12):
        L_b = min(L, grid.horizon + edge)
        D, kap, C = _interval_modes(L_b, omega, grid.degree)
        edge -= L_b
        starts.append(edge)
        lengths.append(L_b)
        degrees.append(D)
        kappas.append(kap)
        coeffs.append(C)
        L = min(L * grid.growth, grid.max_block)
        if sum(c.shape[0] for c in coeffs) > MAX_MODES:
            raise ConfigError(f"more than {MAX_MODES} field modes needed; "
                              "use the Wiener-Hopf solver for this regime")
    owner = np.concatenate([np.full(C.shape[0], b) for b, C in enumerate(coeffs)])
    return Basis(np.array(starts), np.array(lengths), degrees, kappas, coeffs, owner)


def _moments(basis: Basis, rate: complex, offset=None) -> np.ndarray:
    """``int f(t) exp(rate (t - a_f)) dt`` for every basis function.

    With ``offset`` the result is multiplied by ``exp(rate * offset_b)`` per
    interval, folded into the exponent so long intervals cannot overflow.
    """
    out = []
    for b, (L, D, kap, C) in enumerate(zip(basis.lengths, basis.degrees, basis.kappas,
                                            basis.coeffs)):
        fam = _family(D)
        pre = 0.0 if offset is None else rate * offset[b]
        shift = max((rate * L).real, 0.0)
        acc = np.zeros(C.shape[0], dtype=complex)
        for s, ks in enumerate(kap):
            acc += C[:, s, :] @ _moment(fam.base_nodes, fam.base_d0, fam.base_d1, ks + rate * L, D,
                                        shift=shift)
        out.append(L * np.exp(pre + shift) * acc)
    return np.concatenate(out)


def _expsum_projection(basis: Basis, f: ExpSum) -> np.ndarray:
    """``int f_basis(t) f(t) dt`` for every basis function."""
    tot = np.zeros(basis.size, dtype=complex)
    for amp, rate in zip(f.amps, f.rates):
        tot += amp * _moments(basis, rate, offset=basis.starts)
    return tot.real


def _causal_matrix(basis: Basis, kern: LagKernel) -> np.ndarray:
    """``K[f, g] = int int_{t < t'} f(t) kappa(t' - t) g(t') dt dt'``."""
    n = basis.size
    K = np.zeros((n, n))
    a = basis.starts[basis.owner]
    # owner index grows into the past
    later = basis.owner[:, None] > basis.owner[None, :]
    for c, mu in zip(kern.amps, kern.rates):
        # interval offsets combine into a decaying factor exp(mu (a_J - a_I))
        phase = np.exp(mu * (a[None, :] - a[:, None]) * later)
        K += (c * np.outer(_moments(basis, -mu), _moments(basis, mu)) * phase * later).real
    # same-interval triangles
    pos = 0
    for L, D, kap, C in zip(basis.lengths, basis.degrees, basis.kappas, basis.coeffs):
        fam = _family(D)
        m = C.shape[0]
        blk = np.zeros((m, m), dtype=complex)
        for c, mu in zip(kern.amps, kern.rates):
            for s, ks in enumerate(kap):
                for r, kr in enumerate(kap):
                    T = _triangle(fam, ks - mu * L, kr + mu * L)
                    blk += c * (C[:, s, :] @ T @ C[:, r, :].T)
        K[pos:pos + m, pos:pos + m] += (L * L * blk).real
        pos += m
    return K


def set_oscillator(V: np.ndarray, basis: Basis, osc: OscState) -> np.ndarray:
    """Overwrite the oscillator rows and columns of ``V`` in place."""
    dim = V.shape[0]
    V[:2, :2] = osc.a_block
    for i in range(2):
        V[i, 2:dim:2] = _expsum_projection(basis, osc.cross[i][0])
        V[i, 3:dim:2] = _expsum_projection(basis, osc.cross[i][1])
    V[2:, :2] = V[:2, 2:].T
    return V


def build_grid_covariance(params: SystemParams, grid: GridSpec, osc: OscState | None = None,
                          basis: Basis | None = None) -> np.ndarray:
    """Covariance over ``[x, p, X_1, Y_1, X_2, Y_2, ...]``.

    ``osc`` replaces the stationary oscillator state (used after free
    evolution); the field blocks are always the stationary ones.
    """
    grid.validate(params.omega_m)
    if basis is None:
        basis = build_basis(grid, params.omega_d)
    n = basis.size
    if n > MAX_MODES:
        raise ConfigError(f"{n} field modes exceed the limit of {MAX_MODES}; "
                          "use the Wiener-Hopf solver for this regime")
    if osc is None:
        osc = stationary_state(params)
    kern = field_kernel(params)
    dim = 2 + 2 * n
    V = np.zeros((dim, dim))
    set_oscillator(V, basis, osc)
    xi, yi = slice(2, dim, 2), slice(3, dim, 2)
    b12 = _causal_matrix(basis, kern.b12)
    k22 = _causal_matrix(basis, kern.b22)
    V[xi, xi] = np.eye(n)
    V[xi, yi] = b12
    V[yi, xi] = b12.T
    V[yi, yi] = np.eye(n) + k22 + k22.T
    return V


def _evaluate(params, grid, method):
    t0 = time.perf_counter()
    V = build_grid_covariance(params, grid)
    res = log_negativity(V, [0], method=method, check=False)
    if res.below_unity_count > 1:
        # near-vacuum field modes inherit the discretization error of the block;
        # measure against its physicality floor instead of the bare tolerance
        _, margin = check_physicality(V, method=method)
        floor = max(UNITY_TOL, 2.0 * max(-margin, 0.0))
        if floor > 1e-3:
            log.warning("field block violates the uncertainty relation by %.3g; "
                        "eigenvalues above %.4g are not counted", -margin, 1.0 - floor)
        res = negativity_from_spectrum(res.symplectic_spectrum, res.convergence_info, floor)
        res.convergence_info.update(unity_floor=floor)
    return res, V.shape[0], time.perf_counter() - t0


def entanglement_grid(params: SystemParams, grid: GridSpec | None = None, *,
                      method="auto") -> EntanglementResult:
    """Refine the basis until E_N changes by less than ``grid.tol``."""
    grid = grid or default_grid(params)
    grid.validate(params.omega_m)
    trace = []
    prev = None
    for level in range(grid.max_refinements):
        try:
            res, dim, secs = _evaluate(params, grid, method)
        except ConfigError as exc:
            raise ConvergenceError(f"refinement stopped at level {level}: {exc}", trace) from exc
        trace.append(dict(level=level, dim=dim, horizon=grid.horizon, dt=grid.dt,
                          e_n=res.e_n, lambda_min=res.lambda_min,
                          below_unity=res.below_unity_count, seconds=secs))
        log.debug("grid level %d: dim=%d E_N=%.6g", level, dim, res.e_n)
        if prev is not None and abs(res.e_n - prev) < grid.tol:
            if res.below_unity_count > 1:
                log.warning("%d partially transposed eigenvalues below one", res.below_unity_count)
            res.convergence_info.update(trace=trace, converged=True, method="grid")
            return res
        prev = res.e_n
        grid = grid.refined()
    raise ConvergenceError(f"no convergence to {grid.tol:g} in {len(trace)} refinements", trace)
