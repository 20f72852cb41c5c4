r"""Semi-analytic symplectic eigenvalue via Wiener-Hopf factorization.

The eigenvalue problem of the partially transposed covariance of oscillator
plus continuum reduces to a 2x2 determinant once the field block is inverted
on the past half-line. The field block couples through the symbol

.. math::

    m(\Omega) = \Lambda + k^2 D |H(\Omega)|^2 + i\lambda k^2 (H - H^*),
    \qquad H = \omega_m \tilde G(\Omega),\quad \Lambda = 1 - \lambda^2,

i.e. ``m = P(Omega) / |den(Omega)|^2`` with the quartic

``P = Lambda |den|^2 - 8 lambda Omega_q^2 gamma_m Omega + 8 Omega_q^2 Omega_F^2``

and ``den = omega_m^2 - Omega^2 - 2 i gamma_m Omega``. It splits as
``m = psi_minus * psi_plus`` where ``psi_plus`` has all zeros and poles in the
lower half-plane. With ``f~(W) = int e^{iWt} f(t) dt`` a function living on
``t <= 0`` has its poles in the upper half-plane, which is therefore the
half kept by :func:`causal_part`.

For exponential sums ``p = sum a_k e^{s_k t}`` and ``q = sum b_j e^{r_j t}``
the bilinear form of the inverse is

``p^T M^{-1} q = sum_kj a_k b_j / (psi_minus(-i s_k) psi_plus(i r_j) (s_k + r_j))``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import AmbiguityError, DegeneracyError, DomainError, ParameterError
from .gaussian import EntanglementResult
from .kernels import ExpSum, field_kernel, osc_steady_covariance, stationary_state
from .params import SystemParams

log = logging.getLogger(__name__)

__all__ = [
    "SpectralSymbol",
    "Factorization",
    "PoleResidue",
    "symbol_polynomial",
    "symbol_direct",
    "factorize",
    "causal_part",
    "anticausal_part",
    "characteristic_det",
    "solve_lambda",
]

REAL_ROOT_TOL = 1e-9
NEAR_DEGENERATE = 1e-7
LAMBDA_LO, LAMBDA_HI = 1e-6, 1.0 - 1e-6
SCAN_POINTS = 64
ROOT_XTOL = 1e-10
POLE_REJECT = 1e-2


@dataclass(frozen=True)
class SpectralSymbol:
    """``P(Omega) / den(Omega)`` with real polynomial coefficients (highest first).

    ``den_roots`` holds the four roots ``+-w_d +- i gamma_m`` of the denominator,
    kept in closed form because they crowd the real axis at high Q.
    """

    lam: float
    quartic: np.ndarray
    denominator: np.ndarray
    den_roots: np.ndarray
    tail: tuple = (0.0, 0.0)

    def den(self, w):
        # nearly vanishes at resonance, so use the factored form
        w = np.asarray(w, dtype=complex)
        return self.denominator[0] * np.prod(w[..., None] - self.den_roots, axis=-1)

    def numerator(self, w):
        """``(1 - lam^2) den + c1 W + c0``, free of the cancellation in ``quartic``."""
        w = np.asarray(w, dtype=complex)
        return (1.0 - self.lam**2) * self.den(w) + self.tail[0] * w + self.tail[1]

    def __call__(self, omega):
        return self.numerator(omega) / self.den(omega)


@dataclass(frozen=True)
class Factorization:
    """``symbol = psi_minus * psi_plus``.

    ``psi_plus = sqrt(norm) prod(W - zeros_lower) / prod(W - poles_lower)``;
    ``psi_minus`` uses the upper-half-plane lists.
    """

    norm: float
    zeros_lower: np.ndarray
    zeros_upper: np.ndarray
    poles_lower: np.ndarray
    poles_upper: np.ndarray

    @staticmethod
    def _ratio(w, zeros, poles, c):
        w = np.asarray(w, dtype=complex)
        num = np.prod(w[..., None] - zeros, axis=-1)
        den = np.prod(w[..., None] - poles, axis=-1)
        return c * num / den

    def psi_plus(self, w):
        return self._ratio(w, self.zeros_lower, self.poles_lower, np.sqrt(self.norm))

    def psi_minus(self, w):
        return self._ratio(w, self.zeros_upper, self.poles_upper, np.sqrt(self.norm))

    def residual(self, symbol: SpectralSymbol, omega) -> np.ndarray:
        """Relative mismatch ``|psi_minus psi_plus - symbol| / |symbol|``."""
        ref = symbol(omega)
        return np.abs(self.psi_minus(omega) * self.psi_plus(omega) - ref) / np.abs(ref)


@dataclass(frozen=True)
class PoleResidue:
    """Rational function ``sum_k residues[k] / (W - poles[k])``."""

    poles: np.ndarray
    residues: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    def __post_init__(self):
        object.__setattr__(self, "poles", np.atleast_1d(np.asarray(self.poles, complex)))
        object.__setattr__(self, "residues", np.atleast_1d(np.asarray(self.residues, complex)))
        if self.poles.shape != self.residues.shape:
            raise ValueError("poles and residues must have equal length")

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        return (1.0 / (w[..., None] - self.poles)) @ self.residues

    def __add__(self, other):
        return PoleResidue(np.concatenate([self.poles, other.poles]),
                           np.concatenate([self.residues, other.residues]))

    @classmethod
    def from_expsum(cls, f: ExpSum) -> "PoleResidue":
        """Fourier transform of a past-supported exponential sum."""
        return cls(1j * f.rates, -1j * f.amps)

    def to_expsum(self) -> ExpSum:
        """Inverse of :meth:`from_expsum`; needs every pole in the upper half-plane."""
        if np.any(self.poles.imag <= 0):
            raise DegeneracyError("only upper-half-plane poles map to past functions")
        return ExpSum(1j * self.residues, -1j * self.poles)


def _split(pr: PoleResidue, upper: bool) -> PoleResidue:
    scale = max(1.0, float(np.max(np.abs(pr.poles), initial=0.0)))
    if np.any(np.abs(pr.poles.imag) < 1e-14 * scale):
        raise DegeneracyError("pole on the real axis")
    keep = pr.poles.imag > 0 if upper else pr.poles.imag < 0
    return PoleResidue(pr.poles[keep], pr.residues[keep])


def causal_part(pr: PoleResidue) -> PoleResidue:
    """Terms whose transform is supported on the past half-line (upper-half-plane poles)."""
    return _split(pr, upper=True)


def anticausal_part(pr: PoleResidue) -> PoleResidue:
    return _split(pr, upper=False)


def _check_lambda(lam):
    if not (0.0 < lam < 1.0):
        raise DomainError(f"lambda must lie in (0, 1), got {lam!r}")


def _den_poly(params: SystemParams) -> np.ndarray:
    w2, g = params.omega_m**2, params.gamma_m
    return np.polymul([-1.0, -2j * g, w2], [-1.0, 2j * g, w2]).real


def symbol_polynomial(params: SystemParams, lam: float) -> SpectralSymbol:
    _check_lambda(lam)
    k2, D = params.coupling**2, params.thermal_intensity
    wm, g = params.omega_m, params.gamma_m
    den = _den_poly(params)
    tail = (-4.0 * lam * k2 * wm * g, k2 * D * wm**2)
    P = (1.0 - lam**2) * den
    P[-2] += tail[0]
    P[-1] += tail[1]
    wd = params.omega_d
    roots = np.array([wd - 1j * g, -wd - 1j * g, wd + 1j * g, -wd + 1j * g])
    return SpectralSymbol(float(lam), P, den, roots, tail)


def symbol_direct(params: SystemParams, lam: float, omega):
    """Symbol evaluated from the response function, without the polynomial expansion."""
    omega = np.asarray(omega, dtype=float)
    k2, D = params.coupling**2, params.thermal_intensity
    H = params.omega_m / (params.omega_m**2 - omega**2 - 2j * params.gamma_m * omega)
    val = (1.0 - lam**2) + k2 * D * np.abs(H) ** 2 + 1j * lam * k2 * (H - np.conj(H))
    return val.real


def _roots(symbol: SpectralSymbol, iters=4):
    # companion-matrix eigenvalues, then Newton on the factored numerator
    roots = np.roots(symbol.quartic)
    d = np.polyder(symbol.quartic)
    for _ in range(iters):
        step = symbol.numerator(roots) / np.polyval(d, roots)
        roots = roots - np.where(np.isfinite(step), step, 0.0)
    return roots


def _factor_once(symbol: SpectralSymbol) -> Factorization:
    lam_c = 1.0 - symbol.lam**2
    zeros = _roots(symbol)
    poles = symbol.den_roots
    scale = max(1.0, float(np.max(np.abs(zeros))))
    if zeros.size != 4 or np.any(np.abs(zeros.imag) < REAL_ROOT_TOL * scale):
        raise DegeneracyError(f"symbol has a real root: {zeros}")
    zl, zu = zeros[zeros.imag < 0], zeros[zeros.imag > 0]
    pl, pu = poles[poles.imag < 0], poles[poles.imag > 0]
    if len(zl) != 2 or len(pl) != 2:
        raise DegeneracyError("unbalanced half-plane split")
    return Factorization(lam_c, zl, zu, pl, pu)


def factorize(symbol: SpectralSymbol) -> Factorization:
    """Split the symbol into half-plane factors.

    Nearly coincident zeros trigger one re-solve at a slightly shifted lambda.
    """
    fac = _factor_once(symbol)
    zeros = np.concatenate([fac.zeros_lower, fac.zeros_upper])
    gaps = np.abs(zeros[:, None] - zeros[None, :])
    gaps[np.diag_indices(4)] = np.inf
    scale = max(1.0, float(np.max(np.abs(zeros))))
    if gaps.min() < NEAR_DEGENERATE * scale:
        shifted = symbol.quartic + (symbol.lam**2 - (symbol.lam + 1e-9) ** 2) * symbol.denominator
        log.debug("near-degenerate zeros at lambda=%g; shifting by 1e-9", symbol.lam)
        fac = _factor_once(SpectralSymbol(symbol.lam + 1e-9, shifted, symbol.denominator,
                                           symbol.den_roots, symbol.tail))
    return fac


def _bilinear_inverse(fac: Factorization, p: ExpSum, q: ExpSum) -> complex:
    # h = [q~ / psi_plus]_causal, evaluated as a residue sum
    qt = PoleResidue.from_expsum(q)
    h = causal_part(PoleResidue(qt.poles, qt.residues / fac.psi_plus(qt.poles)))
    h = h.to_expsum()
    return ExpSum(p.amps / fac.psi_minus(-1j * p.rates), p.rates).inner(h)


def _flip_p(osc_cross):
    # partial transpose of the oscillator: p -> -p
    return ((osc_cross[0][0], osc_cross[0][1]), (-osc_cross[1][0], -osc_cross[1][1]))


_SIGMA_Y = np.array([[0.0, -1j], [1j, 0.0]])


def characteristic_det(params: SystemParams, lam: float, *, fac: Factorization | None = None):
    """Real determinant whose zero in ``(0, 1)`` is the smallest symplectic eigenvalue."""
    _check_lambda(lam)
    if fac is None:
        fac = factorize(symbol_polynomial(params, lam))
    kern = field_kernel(params)
    cross = _flip_p(stationary_state(params).cross)
    ps, qs = [], []
    for u1, u2 in cross:
        b21u = kern.b12.retarded(u1)
        ps.append(u2 - b21u + u1 * (1j * lam))
        qs.append(u2 - b21u - u1 * (1j * lam))
    S = np.empty((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            S[i, j] = cross[i][0].inner(cross[j][0]) + _bilinear_inverse(fac, ps[i], qs[j])
    a = osc_steady_covariance(params) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    det = np.linalg.det(a + lam * _SIGMA_Y - S)
    if abs(det.imag) > 1e-6 * max(1.0, abs(det)):
        log.debug("determinant has imaginary part %g at lambda=%g", det.imag, lam)
    return float(det.real)


def _safe_det(params, lam):
    try:
        return characteristic_det(params, lam)
    except DegeneracyError:
        return np.nan


def solve_lambda(params: SystemParams, *, scan_points=SCAN_POINTS, xtol=ROOT_XTOL) -> EntanglementResult:
    """Smallest partially transposed symplectic eigenvalue and ``E_N = -ln lambda``."""
    if params.omega_q <= 0:
        raise ParameterError("solve_lambda needs omega_q > 0")
    grid = np.geomspace(LAMBDA_LO, LAMBDA_HI, scan_points)
    vals = np.array([_safe_det(params, x) for x in grid])
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if not (np.isfinite(fa) and np.isfinite(fb)) or np.sign(fa) == np.sign(fb):
            continue
        r = brentq(lambda x: characteristic_det(params, x), a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
        # a sign change across a pole is not a root: |det| blows up there
        if abs(characteristic_det(params, r)) <= POLE_REJECT * max(abs(fa), abs(fb)):
            roots.append(r)
    info = {"method": "wiener-hopf", "scan": grid.tolist(), "det": vals.tolist(), "roots": roots,
            "degenerate_points": int(np.sum(~np.isfinite(vals)))}
    if len(roots) > 1:
        raise AmbiguityError(f"{len(roots)} roots of the characteristic determinant", roots)
    if not roots:
        log.info("no sign change of the characteristic determinant: no entanglement")
        return EntanglementResult(np.array([]), 0.0, 0, info)
    lam = roots[0]
    return EntanglementResult(np.array([lam]), -float(np.log(lam)), 1, info)
