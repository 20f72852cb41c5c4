"""Single temporal modes of the output field and their entanglement with the oscillator.

A mode is a pair of real weights ``(g1, g2)`` on the past half-line, read as
the complex function ``f = g1 + i g2``. Its quadratures are

    X = int (g1 b1 - g2 b2) dt,    Y = int (g2 b1 + g1 b2) dt,

i.e. ``X + iY = int f (b1 + i b2)``. Multiplying ``f`` by a phase rotates
``(X, Y)``, which leaves the negativity unchanged.

The parametric family is ``g_k = A_k exp(gamma_g t) cos(omega_g t + theta_k)``
with ``theta_1 = pi/2`` and ``theta_2 = 0``. Every weight is held as an
:class:`~cv_entangle.kernels.ExpSum`, so all covariance entries are closed-form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import mpmath
import numpy as np
from scipy.optimize import minimize

from .errors import DegeneracyError, DomainError
from .gaussian import log_negativity, two_mode_min_symplectic
from .kernels import ExpSum, field_kernel, stationary_state
from .params import SystemParams

log = logging.getLogger(__name__)

__all__ = [
    "ModeWeight",
    "ModeOptimum",
    "make_mode",
    "mode_norm",
    "mode_overlap",
    "subsystem_covariance",
    "sub_negativity",
    "mode_negativity",
    "subsystem_covariance_exact",
    "exact_min_symplectic",
    "optimize_mode",
    "mode_scan",
    "next_order_mode",
    "lo_waveform",
    "fitted_frequency",
]

THETA = (math.pi / 2, 0.0)
NORM_TOL = 1e-10
# oscillator variance above which double precision cannot resolve the 4x4 spectrum
EXACT_THRESHOLD = 1e4
XATOL = 1e-6
FATOL = 1e-6
MAX_EVALS = 500


def _cos_term(amp, gamma, omega, theta) -> ExpSum:
    # A e^{gt} cos(wt + th) = A/2 (e^{i th} e^{(g+iw)t} + c.c.)
    ph = np.exp(1j * theta)
    return ExpSum([amp * ph / 2, amp * np.conj(ph) / 2],
                  [gamma + 1j * omega, gamma - 1j * omega])


@dataclass(frozen=True)
class ModeWeight:
    """Normalized mode from the decaying-cosine family.

    ``g1`` and ``g2`` hold the actual weights. After deflation against earlier
    modes they are no longer a single decaying cosine; ``projected`` marks
    that case and the scalar fields then describe the seed candidate.
    """

    omega_g: float
    gamma_g: float
    zeta: float
    a_1: float
    a_2: float
    g1: ExpSum = field(repr=False, compare=False)
    g2: ExpSum = field(repr=False, compare=False)
    projected: bool = False

    theta_1 = THETA[0]
    theta_2 = THETA[1]

    def __call__(self, t):
        """Sample ``(g1(t), g2(t))``."""
        return self.g1(t).real, self.g2(t).real

    @property
    def complex_weight(self) -> ExpSum:
        return self.g1 + self.g2 * 1j


def amplitude_squared(k: int, gamma_g: float, omega_g: float, zeta: float) -> float:
    """Closed-form ``A_k^2`` making ``int (g1^2 + g2^2) = 1``."""
    th = THETA[k - 1]
    r2 = gamma_g**2 + omega_g**2
    num = 4.0 * gamma_g * r2 * math.cos(zeta + k * math.pi / 2) ** 2
    den = r2 + gamma_g**2 * math.cos(2 * th) + gamma_g * omega_g * math.sin(2 * th)
    return num / den


def make_mode(params: SystemParams, omega_g: float, zeta: float, *, check=True) -> ModeWeight:
    """Build the normalized mode with frequency ``omega_g`` and mixing angle ``zeta``.

    The decay rate follows from ``omega_g^2 - gamma_g^2 = omega_m^2 - gamma_m^2``.
    """
    floor2 = params.omega_m**2 - params.gamma_m**2
    gg2 = omega_g**2 - floor2
    if not np.isfinite(omega_g) or gg2 < 0:
        raise DomainError(f"omega_g={omega_g!r} is below the floor {math.sqrt(floor2)!r}")
    if not 0.0 <= zeta < math.pi / 2:
        raise DomainError(f"zeta={zeta!r} outside [0, pi/2)")
    gamma_g = math.sqrt(gg2)
    if gamma_g == 0.0:
        raise DomainError("gamma_g = 0 gives a non-normalizable weight")
    # negative a_1 puts zeta = pi/4 on the exp(-i omega_g t) sideband
    a1 = -math.sqrt(amplitude_squared(1, gamma_g, omega_g, zeta))
    a2 = math.sqrt(amplitude_squared(2, gamma_g, omega_g, zeta))
    mode = ModeWeight(omega_g, gamma_g, zeta, a1, a2,
                      _cos_term(a1, gamma_g, omega_g, THETA[0]),
                      _cos_term(a2, gamma_g, omega_g, THETA[1]))
    if check:
        err = abs(mode_norm(mode) - 1.0)
        if err > NORM_TOL:
            raise DegeneracyError(f"mode normalization off by {err:.3g}")
    return mode


def mode_norm(mode: ModeWeight) -> float:
    return (mode.g1.inner(mode.g1) + mode.g2.inner(mode.g2)).real


def mode_overlap(prev: ModeWeight, mode: ModeWeight) -> complex:
    """Hermitian overlap ``int conj(f_prev) f``."""
    p1, p2, g1, g2 = prev.g1, prev.g2, mode.g1, mode.g2
    re = (p1.inner(g1) + p2.inner(g2)).real
    im = (p1.inner(g2) - p2.inner(g1)).real
    return complex(re, im)


def _field_cov(kern, u, w) -> float:
    # u, w: weights on (b1, b2)
    val = u[0].inner(w[0]) + u[1].inner(w[1])
    val += kern.b12.causal_form(u[0], w[1]) + kern.b12.causal_form(w[0], u[1])
    val += kern.b22.symmetric_form(u[1], w[1])
    return float(np.real(val))


def subsystem_covariance(params: SystemParams, mode: ModeWeight, osc=None) -> np.ndarray:
    """4x4 covariance over ``[x, p, X, Y]`` for the oscillator and one field mode."""
    osc = osc or stationary_state(params)
    kern = field_kernel(params)
    ux = (mode.g1, -mode.g2)
    uy = (mode.g2, mode.g1)
    V = np.zeros((4, 4))
    V[:2, :2] = osc.a_block
    for i in range(2):
        c = osc.cross[i]
        V[i, 2] = np.real(c[0].inner(ux[0]) + c[1].inner(ux[1]))
        V[i, 3] = np.real(c[0].inner(uy[0]) + c[1].inner(uy[1]))
    V[2, 2] = _field_cov(kern, ux, ux)
    V[3, 3] = _field_cov(kern, uy, uy)
    V[2, 3] = _field_cov(kern, ux, uy)
    V[2:, :2] = V[:2, 2:].T
    V[3, 2] = V[2, 3]
    return V


def sub_negativity(V4, *, cross_check=True) -> float:
    """Log-negativity across ``(x, p) | (X, Y)``."""
    res = log_negativity(V4, [0], check=False)
    if cross_check:
        nu = two_mode_min_symplectic(V4)
        if abs(nu - res.lambda_min) > 1e-8 * max(1.0, nu):
            raise DegeneracyError(f"two-mode closed form {nu!r} disagrees with {res.lambda_min!r}")
    return res.e_n


def _mp_terms(f: ExpSum):
    return [(mpmath.mpc(complex(a)), mpmath.mpc(complex(r))) for a, r in zip(f.amps, f.rates)]


def _mp_inner(f, g):
    return mpmath.fsum(a * b / (r + s) for a, r in f for b, s in g)


def _mp_retarded(kern, f):
    # kern: [(c, mu)] on tau >= 0
    return [(a * mpmath.fsum(c / (r - mu) for c, mu in kern), r) for a, r in f]


def _mp_model(params):
    w = mpmath.mpf(params.omega_m)
    g = w / (2 * mpmath.mpf(params.q_m))
    wd = mpmath.sqrt(w * w - g * g)
    k = mpmath.mpf(params.omega_q) * mpmath.sqrt(2 / w)
    D = 4 * mpmath.mpf(params.omega_f) ** 2 / w
    a = (k * k + D) / (4 * g)
    F = mpmath.matrix([[0, w], [-w, -2 * g]])
    mu = [-g + 1j * wd, -g - 1j * wd]
    eye = mpmath.eye(2)
    R = [(F - mu[1] * eye) / (mu[0] - mu[1]), (F - mu[0] * eye) / (mu[1] - mu[0])]
    cross = [([(k * R[n][i, 1], -mu[n]) for n in range(2)],
              [(k * a * R[n][i, 0], -mu[n]) for n in range(2)]) for i in range(2)]
    b12 = [(k * k * R[n][0, 1], mu[n]) for n in range(2)]
    b22 = [(k * k * a * R[n][0, 0], mu[n]) for n in range(2)]
    return a, cross, b12, b22


def subsystem_covariance_exact(params: SystemParams, mode: ModeWeight, dps=None):
    """Stationary 4x4 covariance in extended precision (``mpmath.matrix``).

    Strongly driven high-Q points carry variances near ``1e9`` while the
    partially transposed spectrum sits near one, so the cancellation needs
    roughly ``2 log10(variance)`` extra digits.
    """
    if dps is None:
        var = (params.omega_q**2 + 2 * params.omega_f**2) / (2 * params.gamma_m * params.omega_m)
        dps = 30 + int(2 * math.log10(max(var, 1.0)))
    with mpmath.workdps(dps):
        a, cross, b12, b22 = _mp_model(params)
        g1, g2 = _mp_terms(mode.g1), _mp_terms(mode.g2)
        neg = lambda f: [(-c, r) for c, r in f]
        ux, uy = (g1, neg(g2)), (g2, g1)

        def fcov(u, v):
            val = _mp_inner(u[0], v[0]) + _mp_inner(u[1], v[1])
            val += _mp_inner(_mp_retarded(b12, u[0]), v[1])
            val += _mp_inner(_mp_retarded(b12, v[0]), u[1])
            val += _mp_inner(_mp_retarded(b22, u[1]), v[1]) + _mp_inner(_mp_retarded(b22, v[1]), u[1])
            return mpmath.re(val)

        V = mpmath.matrix(4, 4)
        V[0, 0] = V[1, 1] = a
        for i in range(2):
            c = cross[i]
            V[i, 2] = V[2, i] = mpmath.re(_mp_inner(c[0], ux[0]) + _mp_inner(c[1], ux[1]))
            V[i, 3] = V[3, i] = mpmath.re(_mp_inner(c[0], uy[0]) + _mp_inner(c[1], uy[1]))
        V[2, 2] = fcov(ux, ux)
        V[3, 3] = fcov(uy, uy)
        V[2, 3] = V[3, 2] = fcov(ux, uy)
    return V, dps


def exact_min_symplectic(V, dps) -> float:
    """Smallest partially transposed symplectic eigenvalue of an ``mpmath`` 4x4 covariance."""
    with mpmath.workdps(dps):
        det2 = lambda i, j: V[i, i] * V[j, j] - V[i, j] * V[j, i]
        det_a, det_b = det2(0, 1), det2(2, 3)
        det_c = V[0, 2] * V[1, 3] - V[0, 3] * V[1, 2]
        delta = det_a + det_b - 2 * det_c
        disc = delta**2 - 4 * mpmath.det(V)
        nu2 = (delta - mpmath.sqrt(max(disc, 0))) / 2
        if nu2 < 0:
            raise DegeneracyError(f"negative squared eigenvalue {float(nu2)!r}")
        return float(mpmath.sqrt(nu2))


def mode_negativity(params: SystemParams, mode: ModeWeight, exact=None) -> float:
    """Subsystem negativity; ``exact=None`` switches to extended precision when needed."""
    if exact is None:
        exact = params.omega_q > 0 and (params.omega_q**2 + 2 * params.omega_f**2) / (
            2 * params.gamma_m * params.omega_m) > EXACT_THRESHOLD
    if not exact:
        return sub_negativity(subsystem_covariance(params, mode))
    nu = exact_min_symplectic(*subsystem_covariance_exact(params, mode))
    return max(-math.log(nu), 0.0)


def fitted_frequency(params: SystemParams) -> float:
    """Empirical optimum ``sqrt(0.64 Omega_F^2 + 0.57 Omega_q^2)`` for strong fields."""
    return math.sqrt(0.64 * params.omega_f**2 + 0.57 * params.omega_q**2)


def _fold_zeta(z: float) -> float:
    # amplitudes depend on sin^2, cos^2 only
    z = z % math.pi
    return math.pi - z if z > math.pi / 2 else z


def _gamma_from_omega(params, omega_g):
    floor2 = params.omega_m**2 - params.gamma_m**2
    return math.sqrt(max(omega_g**2 - floor2, 0.0))


def _omega_from_gamma(params, gamma_g):
    return math.sqrt(params.omega_m**2 - params.gamma_m**2 + gamma_g**2)


def _candidate(params, x):
    omega_g = _omega_from_gamma(params, math.exp(x[0]))
    zeta = _fold_zeta(x[1])
    if zeta >= math.pi / 2:
        zeta = math.nextafter(math.pi / 2, 0.0)
    return make_mode(params, omega_g, zeta, check=False)


@dataclass
class ModeOptimum:
    mode: ModeWeight
    e_n_sub: float
    diagnostics: dict


def _seeds(params):
    wm = params.omega_m
    fit = fitted_frequency(params)
    omegas = [wm, 2 * wm, fit, 0.5 * fit]
    zetas = [math.pi / 4, math.pi / 3]
    out = []
    for i, w in enumerate(omegas):
        g = max(_gamma_from_omega(params, w), params.gamma_m)
        out.append((math.log(g), zetas[i % 2]))
    return out


def _search(params, objective, seeds):
    traces, best = [], None
    for x0 in seeds:
        hist = []

        def f(x):
            try:
                val = objective(x)
            except (DomainError, DegeneracyError):
                val = 1.0
            hist.append((float(x[0]), float(x[1]), -val))
            return val

        init = np.array([x0, [x0[0] + 0.25, x0[1]], [x0[0], x0[1] + 0.2]])
        res = minimize(f, np.asarray(x0, float), method="Nelder-Mead",
                       options=dict(xatol=XATOL, fatol=FATOL, maxfev=MAX_EVALS,
                                    initial_simplex=init))
        traces.append(dict(start=tuple(x0), x=tuple(res.x), e_n_sub=-res.fun,
                           evaluations=res.nfev, success=bool(res.success), history=hist))
        if best is None or res.fun < best.fun:
            best = res
    return best, traces


def optimize_mode(params: SystemParams, *, seeds=None) -> ModeOptimum:
    """Maximize the single-mode negativity over ``(omega_g, zeta)``.

    Nelder-Mead runs in ``(ln gamma_g, zeta)``, which keeps every candidate on
    the allowed branch. Four starts are used unless ``seeds`` overrides them.
    """
    seeds = list(seeds) if seeds is not None else _seeds(params)
    best, traces = _search(params, lambda x: -mode_negativity(params, _candidate(params, x)), seeds)
    mode = _candidate(params, best.x)
    mode = make_mode(params, mode.omega_g, mode.zeta)
    e_n = max(-best.fun, 0.0)
    if e_n == 0.0:
        log.info("no start improved on the separable baseline")
    return ModeOptimum(mode, e_n, dict(starts=traces, best_x=tuple(best.x)))


def mode_scan(params: SystemParams, omega_g, zeta: float):
    """``(omega_g, E_N^sub)`` rows; points below the frequency floor give NaN."""
    rows = []
    for w in np.atleast_1d(omega_g):
        try:
            e = mode_negativity(params, make_mode(params, float(w), zeta))
        except DomainError:
            e = float("nan")
        rows.append((float(w), e))
    return rows


def _deflate(mode: ModeWeight, previous) -> ModeWeight:
    g1, g2 = mode.g1, mode.g2
    start = mode_norm(mode)
    for _ in range(2):
        for p in previous:
            c = mode_overlap(p, replace(mode, g1=g1, g2=g2))
            g1 = (g1 - p.g1 * c.real + p.g2 * c.imag).simplify()
            g2 = (g2 - p.g2 * c.real - p.g1 * c.imag).simplify()
    out = replace(mode, g1=g1, g2=g2, projected=True)
    nrm = mode_norm(out)
    if nrm <= 1e-10 * start:
        raise DegeneracyError("candidate lies in the span of the previous modes")
    s = 1.0 / math.sqrt(nrm)
    return replace(out, g1=g1 * s, g2=g2 * s)


def next_order_mode(params: SystemParams, previous, *, seeds=None) -> ModeOptimum:
    """Best mode of the family after projecting out ``previous`` (assumed orthonormal)."""
    previous = list(previous)
    seeds = list(seeds) if seeds is not None else _seeds(params)
    best, traces = _search(
        params,
        lambda x: -mode_negativity(params, _deflate(_candidate(params, x), previous)),
        seeds)
    if not np.isfinite(best.fun) or best.fun >= 1.0:
        raise DegeneracyError("no admissible candidate orthogonal to the previous modes")
    mode = _deflate(_candidate(params, best.x), previous)
    return ModeOptimum(mode, max(-best.fun, 0.0), dict(starts=traces, best_x=tuple(best.x)))


def lo_waveform(mode: ModeWeight, zeta_q: float, t):
    """Baseband local-oscillator envelopes ``(L1, L2)`` on the grid ``t <= 0``.

    ``zeta_q = pi/2`` gives ``(g1, g2)``; ``zeta_q = 0`` gives ``(g2, -g1)``.
    """
    g1, g2 = mode(np.asarray(t, dtype=float))
    s, c = math.sin(zeta_q), math.cos(zeta_q)
    return g1 * s + g2 * c, g2 * s - g1 * c
