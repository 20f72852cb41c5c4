r"""Closed-form stationary correlations of the oscillator and the outgoing field.

Math note
---------
With the conventions of :mod:`cv_entangle.params` the normalized equations are

.. math::

    \dot X = \omega_m P, \qquad
    \dot P = -\omega_m X - 2\gamma_m P + k\,a_1 + \xi, \qquad
    b_1 = a_1, \qquad b_2 = a_2 + k X,

where ``k = Omega_q sqrt(2/omega_m)`` and the thermal kick ``xi`` has white
intensity ``D = 4 Omega_F^2 / omega_m``. Using one coefficient ``k`` for both
the kick and the readout keeps ``[b_2(t), b_2(t')] = 0`` and
``[X(0), b_j(t < 0)] = 0``, so the commutator matrix is
``diag(2 sigma_y, 2 sigma_y delta(t - t'))`` with no cross terms.

The drift matrix ``F = [[0, w], [-w, -2 g]]`` has eigenvalues
``mu = -g +- i w_d`` (``w_d = sqrt(w^2 - g^2)``) and
``exp(F tau) = sum_k R_k exp(mu_k tau)``. Everything below is a finite sum of
such exponentials:

* ``A = a I`` with ``a = (k^2 + D) / (4 g)``; ``<XP>_sym = 0``.
* ``<X_i(0) b_1(t)> = k [exp(-F t)]_{iP}`` and
  ``<X_i(0) b_2(t)> = k a [exp(-F t)]_{iX}`` for ``t <= 0``.
* ``B_12(t, t') = k^2 [exp(F (t' - t))]_{XP}`` for ``t' > t`` and 0 otherwise.
* ``B_22(t, t') = delta(t - t') + k^2 a [exp(F |t - t'|)]_{XX}``.

The position Green's function of the unnormalized equation
``x'' + 2 g x' + w^2 x = F/m`` is ``exp(-g t) sin(w_d t) / w_d``; the
normalized response of ``X`` to a kick on ``P`` is ``w`` times it.

Functions of one time on the past half-line are held as :class:`ExpSum`
(``sum a exp(s t)``, ``Re s > 0``); lag kernels as :class:`LagKernel`
(``sum c exp(mu tau)`` for ``tau >= 0``, ``Re mu < 0``). The Fourier
convention is ``f~(W) = int exp(+i W t) f(t) dt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .params import SystemParams

__all__ = [
    "ExpSum",
    "LagKernel",
    "FieldKernel",
    "OscState",
    "drift_matrix",
    "propagator_terms",
    "transition_matrix",
    "greens_function",
    "osc_steady_covariance",
    "stationary_state",
    "cross_covariance",
    "field_kernel",
    "propagate_free",
    "thermal_diffusion",
]


class ExpSum:
    """Function ``f(t) = sum_k amps[k] * exp(rates[k] * t)`` on ``t <= 0``."""

    __slots__ = ("amps", "rates")

    def __init__(self, amps=(), rates=()):
        self.amps = np.atleast_1d(np.asarray(amps, dtype=complex))
        self.rates = np.atleast_1d(np.asarray(rates, dtype=complex))
        if self.amps.shape != self.rates.shape:
            raise ValueError("amps and rates must have equal length")

    def __repr__(self):
        return f"ExpSum({self.amps!r}, {self.rates!r})"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(np.multiply.outer(t, self.rates)) @ self.amps

    def __add__(self, other):
        if not isinstance(other, ExpSum):
            return NotImplemented
        return ExpSum(np.concatenate([self.amps, other.amps]),
                      np.concatenate([self.rates, other.rates]))

    def __neg__(self):
        return ExpSum(-self.amps, self.rates)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        return ExpSum(self.amps * c, self.rates)

    __rmul__ = __mul__

    def __len__(self):
        return self.amps.size

    def conj(self):
        return ExpSum(self.amps.conj(), self.rates.conj())

    def inner(self, other) -> complex:
        """Bilinear ``int_{-inf}^0 f(t) g(t) dt`` (no conjugation)."""
        if not len(self) or not len(other):
            return 0.0
        return complex(self.amps @ (1.0 / np.add.outer(self.rates, other.rates)) @ other.amps)

    def fourier(self, omega):
        omega = np.asarray(omega)
        return (1.0 / (1j * omega[..., None] + self.rates)) @ self.amps

    def simplify(self, tol=1e-13):
        """Merge terms with coinciding rates and drop zero amplitudes."""
        rates, amps = [], []
        for a, s in zip(self.amps, self.rates):
            for i, r in enumerate(rates):
                if abs(r - s) <= tol * max(1.0, abs(s)):
                    amps[i] += a
                    break
            else:
                rates.append(s)
                amps.append(a)
        keep = [i for i, a in enumerate(amps) if a != 0]
        return ExpSum([amps[i] for i in keep], [rates[i] for i in keep])


@dataclass(frozen=True)
class LagKernel:
    """Kernel ``kappa(tau) = sum_k amps[k] exp(rates[k] tau)`` for ``tau >= 0``."""

    amps: np.ndarray
    rates: np.ndarray

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.exp(np.multiply.outer(tau, self.rates)) @ self.amps

    def laplace(self, s):
        """``int_0^inf kappa(tau) exp(-s tau) d tau``."""
        s = np.asarray(s, dtype=complex)
        return (1.0 / (s[..., None] - self.rates)) @ self.amps

    def fourier(self, omega):
        return self.laplace(-1j * np.asarray(omega, dtype=complex))

    def retarded(self, f: ExpSum) -> ExpSum:
        """``(K f)(t) = int_{-inf}^t kappa(t - s) f(s) ds`` on ``t <= 0``."""
        return ExpSum(f.amps * self.laplace(f.rates), f.rates)

    def causal_form(self, u: ExpSum, w: ExpSum) -> complex:
        """``int int_{t < t'} u(t) kappa(t' - t) w(t') dt dt'``."""
        return self.retarded(u).inner(w)

    def symmetric_form(self, u: ExpSum, w: ExpSum) -> complex:
        """``int int u(t) kappa(|t - t'|) w(t') dt dt'``."""
        return self.causal_form(u, w) + self.causal_form(w, u)

    def scaled(self, c):
        return LagKernel(self.amps * c, self.rates)


@dataclass(frozen=True)
class FieldKernel:
    """Field block B: delta parts plus smooth two-time kernels.

    ``b12`` gives ``B_12(t, t') = b12(t' - t)`` for ``t' > t`` (zero before);
    ``b22`` gives the smooth part ``b22(|t - t'|)`` of ``B_22``. ``B_11`` has
    no smooth part.
    """

    delta_coeff: np.ndarray
    b12: LagKernel
    b22: LagKernel

    def smooth(self, i, j, t, tp):
        """Evaluate the smooth part of ``B_ij(t, t')`` pointwise (1-based i, j)."""
        t, tp = np.broadcast_arrays(np.asarray(t, float), np.asarray(tp, float))
        if (i, j) == (1, 1):
            return np.zeros(t.shape)
        if (i, j) == (1, 2):
            return np.where(tp > t, self.b12(np.abs(tp - t)).real, 0.0)
        if (i, j) == (2, 1):
            return np.where(t > tp, self.b12(np.abs(t - tp)).real, 0.0)
        if (i, j) == (2, 2):
            return self.b22(np.abs(t - tp)).real
        raise IndexError((i, j))


@dataclass(frozen=True)
class OscState:
    """Oscillator covariance plus its correlations with the past field.

    ``cross[i][j]`` is ``<X_i b_j(t)>_sym`` (``X_0 = x``, ``X_1 = p``,
    ``b_0 = b1``, ``b_1 = b2``) as an :class:`ExpSum` on ``t <= 0``.
    """

    a_block: np.ndarray
    cross: tuple = field(repr=False)

    def cross_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.array([[self.cross[i][j](t).real for j in range(2)] for i in range(2)])


def drift_matrix(params: SystemParams) -> np.ndarray:
    w, g = params.omega_m, params.gamma_m
    return np.array([[0.0, w], [-w, -2.0 * g]])


def propagator_terms(params: SystemParams):
    """Rates ``mu`` (2,) and residues ``R`` (2, 2, 2) with ``exp(F t) = sum R_k e^{mu_k t}``."""
    F = drift_matrix(params)
    g, wd = params.gamma_m, params.omega_d
    mu = np.array([-g + 1j * wd, -g - 1j * wd])
    eye = np.eye(2)
    R = np.array([(F - mu[1] * eye) / (mu[0] - mu[1]), (F - mu[0] * eye) / (mu[1] - mu[0])])
    return mu, R


def transition_matrix(params: SystemParams, tau: float) -> np.ndarray:
    """``exp(F tau)`` in closed form."""
    g, wd = params.gamma_m, params.omega_d
    F = drift_matrix(params)
    c, s = np.cos(wd * tau), np.sin(wd * tau)
    return np.exp(-g * tau) * (c * np.eye(2) + (s / wd) * (F + g * np.eye(2)))


def greens_function(t, params: SystemParams):
    """Position response ``exp(-g t) sin(w_d t) / w_d`` to a unit force impulse."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("greens_function is defined for t >= 0")
    g, wd = params.gamma_m, params.omega_d
    out = np.exp(-g * t) * np.sin(wd * t) / wd
    return out if out.ndim else float(out)


def _variance(params: SystemParams) -> float:
    k2, D = params.coupling**2, params.thermal_intensity
    return (k2 + D) / (4.0 * params.gamma_m)


def osc_steady_covariance(params: SystemParams) -> np.ndarray:
    """Stationary 2x2 covariance of ``(x, p)``: ``(Omega_q^2 + 2 Omega_F^2)/(2 g w) * I``."""
    return _variance(params) * np.eye(2)


def _stationary_cross(params: SystemParams):
    k = params.coupling
    a = _variance(params)
    mu, R = propagator_terms(params)
    rates = -mu
    return tuple(
        (ExpSum(k * R[:, i, 1], rates), ExpSum(k * a * R[:, i, 0], rates)) for i in range(2)
    )


def stationary_state(params: SystemParams) -> OscState:
    return OscState(osc_steady_covariance(params), _stationary_cross(params))


def cross_covariance(params: SystemParams, t) -> np.ndarray:
    """``[[<x b1(t)>, <x b2(t)>], [<p b1(t)>, <p b2(t)>]]`` for ``t <= 0``."""
    if np.any(np.asarray(t) > 0):
        raise DomainError("cross_covariance is defined for t <= 0")
    return stationary_state(params).cross_at(t)


def field_kernel(params: SystemParams) -> FieldKernel:
    k2 = params.coupling**2
    a = _variance(params)
    mu, R = propagator_terms(params)
    return FieldKernel(
        delta_coeff=np.eye(2),
        b12=LagKernel(k2 * R[:, 0, 1], mu),
        b22=LagKernel(k2 * a * R[:, 0, 0], mu),
    )


def thermal_diffusion(params: SystemParams, tau: float) -> np.ndarray:
    """Noise added during free thermal evolution: ``int_0^tau e^{Fs} diag(0, D) e^{F^T s} ds``.

    Closed form ``A_th - Phi A_th Phi^T`` with ``A_th = D/(4 g) I`` solving the
    thermal-only Lyapunov equation.
    """
    if tau < 0:
        raise DomainError("tau must be non-negative")
    a_th = params.thermal_intensity / (4.0 * params.gamma_m)
    Phi = transition_matrix(params, tau)
    return a_th * (np.eye(2) - Phi @ Phi.T)


def propagate_free(osc: OscState, tau: float, params: SystemParams) -> OscState:
    """Evolve the oscillator for ``tau`` with the coupling switched off.

    The past field is untouched and the new thermal noise is independent of it,
    so only the oscillator rows change.
    """
    if tau < 0:
        raise DomainError("tau must be non-negative")
    Phi = transition_matrix(params, tau)
    a_new = Phi @ osc.a_block @ Phi.T + thermal_diffusion(params, tau)
    a_new = 0.5 * (a_new + a_new.T)
    cross = tuple(
        tuple(Phi[i, 0] * osc.cross[0][j] + Phi[i, 1] * osc.cross[1][j] for j in range(2))
        for i in range(2)
    )
    return OscState(a_new, cross)
