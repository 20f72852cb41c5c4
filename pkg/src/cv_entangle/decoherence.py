"""How long oscillator-field entanglement survives after the coupling is switched off.

At ``t = 0`` the readout stops; the oscillator then evolves under thermal
noise alone for a time ``tau`` while the recorded output field is left as it
was. Only the oscillator rows of the covariance change (see
:func:`cv_entangle.kernels.propagate_free`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, NoEntanglementError
from .gaussian import UNITY_TOL, check_physicality, log_negativity
from .grid import GridSpec, build_basis, build_grid_covariance, default_grid, set_oscillator
from .kernels import propagate_free, stationary_state
from .params import SystemParams

log = logging.getLogger(__name__)

__all__ = [
    "SurvivalResult",
    "entanglement_after",
    "survival_time",
    "survival_time_transcendental",
    "survival_time_closed_form",
    "transcendental_residual",
]

THETA_TOL = 1e-3
MAX_DOUBLINGS = 30
SCAN_MAX = 1e3
SCAN_STEP = 1e-2
RESIDUAL_TOL = 1e-9


@dataclass
class SurvivalResult:
    tau_s: float
    theta_s: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def entanglement_after(params: SystemParams, tau: float, grid: GridSpec | None = None, *,
                       method="auto"):
    """E_N between the oscillator at time ``tau`` and the field recorded before 0."""
    grid = grid or default_grid(params)
    osc = propagate_free(stationary_state(params), tau, params)
    V = build_grid_covariance(params, grid, osc=osc)
    res = log_negativity(V, [0], method=method, check=False)
    res.convergence_info.update(tau=tau, dim=V.shape[0])
    return res


class _Ladder:
    """Reuses the field block while the oscillator is propagated."""

    def __init__(self, params, grid, method):
        self.params = params
        self.method = method
        self.basis = build_basis(grid, params.omega_d)
        self.stationary = stationary_state(params)
        self.V = build_grid_covariance(params, grid, basis=self.basis)
        _, margin = check_physicality(self.V, method=method)
        # the crossing is measured against the physicality floor of the field block
        self.threshold = 1.0 - max(UNITY_TOL, 2.0 * max(-margin, 0.0))
        self.samples = []

    def lam(self, tau):
        osc = propagate_free(self.stationary, tau, self.params)
        set_oscillator(self.V, self.basis, osc)
        res = log_negativity(self.V, [0], method=self.method, check=False)
        self.samples.append((float(tau), res.lambda_min))
        return res.lambda_min

    def gap(self, tau):
        return self.lam(tau) - self.threshold


def _non_monotone(samples, tol=1e-9):
    pts = sorted(samples)
    return [(a[0], b[0]) for a, b in zip(pts, pts[1:]) if b[1] < a[1] - tol]


def survival_time(params: SystemParams, grid: GridSpec | None = None, *, theta_tol=THETA_TOL,
                  method="auto") -> SurvivalResult:
    """Grid-engine survival time: first ``tau`` where the smallest eigenvalue reaches one.

    The upper bracket starts at ``pi / omega_m`` and doubles. The root is then
    located to ``omega_m * d tau <= theta_tol``.
    """
    grid = grid or default_grid(params)
    lad = _Ladder(params, grid, method)
    if lad.gap(0.0) >= 0:
        raise NoEntanglementError("no entanglement at tau = 0")
    wm = params.omega_m
    lo, hi = 0.0, math.pi / wm
    for _ in range(MAX_DOUBLINGS):
        if lad.gap(hi) >= 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise ConvergenceError(f"entanglement persists beyond tau = {hi:g}",
                               [dict(tau=t, lambda_min=l) for t, l in lad.samples])
    bracket = (lo, hi)
    # brentq's bracket stays valid, so the step tolerance below is the final width
    tau = brentq(lad.gap, lo, hi, xtol=theta_tol / wm * 1e-3, rtol=1e-14)
    lam = lad.lam(tau)
    flagged = _non_monotone(lad.samples)
    if flagged:
        log.warning("smallest eigenvalue decreases with tau on %d sampled intervals", len(flagged))
    diag = dict(bracket=bracket, lambda_at_root=lam, threshold=lad.threshold,
                evaluations=len(lad.samples), samples=lad.samples, non_monotone=flagged,
                dim=lad.V.shape[0])
    return SurvivalResult(tau, wm * tau, "grid-bisection", diag)


def transcendental_residual(params: SystemParams, theta):
    wm, wq, wf = params.omega_m, params.omega_q, params.omega_f
    theta = np.asarray(theta, dtype=float)
    return 4 * wf**4 * theta**2 - (2 * wf**2 + wq**2) ** 2 * np.sin(theta) ** 2 - 25 * wm**4


def survival_time_transcendental(params: SystemParams) -> SurvivalResult:
    """Smallest positive root of ``4 W_F^4 th^2 - (2 W_F^2 + W_q^2)^2 sin^2 th - 25 w_m^4``."""
    f = lambda th: float(transcendental_residual(params, th))
    grid = np.arange(SCAN_STEP, SCAN_MAX + SCAN_STEP / 2, SCAN_STEP)
    vals = transcendental_residual(params, grid)
    idx = np.nonzero(vals >= 0)[0]
    if idx.size == 0:
        raise ConvergenceError(f"no positive root in (0, {SCAN_MAX:g}]",
                               [dict(theta=SCAN_MAX, residual=float(vals[-1]))])
    i = idx[0]
    lo = grid[i - 1] if i > 0 else 0.0
    theta = brentq(f, lo, grid[i], xtol=1e-15, rtol=4 * np.finfo(float).eps)
    res = abs(f(theta))
    if res > RESIDUAL_TOL:
        # a step of one ulp in theta moves f by f' * eps * theta
        log.debug("residual %.3g above %.1g at theta=%.17g", res, RESIDUAL_TOL, theta)
    return SurvivalResult(theta / params.omega_m, theta, "transcendental",
                          dict(residual=res, bracket=(float(lo), float(grid[i]))))


def survival_time_closed_form(params: SystemParams) -> SurvivalResult:
    """Weak-coupling limit ``theta_s = (5/2) (w_m / W_F)^2 = 5 Q / (2 n + 1)``."""
    theta = 2.5 * (params.omega_m / params.omega_f) ** 2
    return SurvivalResult(theta / params.omega_m, theta, "high-Q closed form", {})
