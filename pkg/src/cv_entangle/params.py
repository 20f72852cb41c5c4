"""Physical parameters in the normalized unit system.

Conventions used throughout the package:

* hbar = m = 1 and every frequency is measured in units of ``omega_m``.
* Oscillator quadratures are scaled to their zero-point values, so
  ``[x, p] = 2i`` and the ground state has unit variance per quadrature.
* Field quadratures obey ``[b1(t), b2(t')] = 2i delta(t - t')`` with the
  vacuum symmetrized spectrum equal to ``delta(t - t')``.

The thermal bath enters through ``Omega_F`` with
``Omega_F**2 = gamma_m * omega_m * (2 n_th + 1)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .errors import ConflictError, ParameterError

log = logging.getLogger(__name__)

__all__ = ["SystemParams", "build_params"]


@dataclass(frozen=True)
class SystemParams:
    """Immutable set of model parameters.

    ``gamma_m`` is the amplitude damping rate, so ``Q_m = omega_m / (2 gamma_m)``.
    """

    omega_m: float
    gamma_m: float
    omega_q: float
    omega_f: float
    n_th: float

    def __post_init__(self):
        for name in ("omega_m", "gamma_m", "omega_q", "omega_f", "n_th"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.omega_m <= 0 or self.gamma_m <= 0:
            raise ParameterError("omega_m and gamma_m must be positive")
        if self.gamma_m >= self.omega_m:
            raise ParameterError("overdamped oscillator (gamma_m >= omega_m) is not supported")
        if self.omega_q < 0 or self.omega_f < 0:
            raise ParameterError("omega_q and omega_f must be non-negative")

    @property
    def q_m(self) -> float:
        return self.omega_m / (2.0 * self.gamma_m)

    @property
    def omega_d(self) -> float:
        """Damped oscillation frequency sqrt(omega_m**2 - gamma_m**2)."""
        return math.sqrt(self.omega_m**2 - self.gamma_m**2)

    @property
    def ratio(self) -> float:
        """Omega_q / Omega_F (inf when the bath is switched off)."""
        if self.omega_f == 0:
            return math.inf if self.omega_q > 0 else 0.0
        return self.omega_q / self.omega_f

    @property
    def coupling(self) -> float:
        """Coupling constant k of the normalized equations.

        The radiation-pressure kick on the normalized momentum and the
        position readout in b2 share the same coefficient; with
        ``alpha**2 = hbar m Omega_q**2`` this is ``Omega_q * sqrt(2/omega_m)``.
        """
        return self.omega_q * math.sqrt(2.0 / self.omega_m)

    @property
    def thermal_intensity(self) -> float:
        """White-noise intensity of the thermal kick on the normalized momentum."""
        return 4.0 * self.omega_f**2 / self.omega_m

    def with_(self, **changes) -> "SystemParams":
        """Rebuild through :func:`build_params` with some fields replaced."""
        kw = dict(omega_m=self.omega_m, q_m=self.q_m, omega_q=self.omega_q)
        if "n_th" in changes:
            kw["n_th"] = changes.pop("n_th")
        else:
            kw["omega_f"] = changes.pop("omega_f", self.omega_f)
        kw.update(changes)
        return build_params(**kw)


def build_params(omega_m=1.0, q_m=1e3, omega_q=0.0, omega_f=None, n_th=None, *, rtol=1e-9):
    """Validate inputs and derive the missing bath descriptor.

    Exactly one of ``omega_f`` and ``n_th`` is normally given; with neither the
    bath is taken at zero temperature. Supplying both is accepted only when
    they agree to ``rtol``.
    """
    vals = dict(omega_m=omega_m, q_m=q_m, omega_q=omega_q)
    for name, v in vals.items():
        if v is None or not math.isfinite(v):
            raise ParameterError(f"{name} must be finite")
    if omega_m <= 0:
        raise ParameterError("omega_m must be positive")
    if q_m <= 0.5:
        raise ParameterError("q_m must exceed 1/2 (underdamped oscillator)")
    if omega_q < 0:
        raise ParameterError("omega_q must be non-negative")
    gamma_m = omega_m / (2.0 * q_m)
    scale = gamma_m * omega_m

    if omega_f is not None and n_th is not None:
        if not (math.isfinite(omega_f) and math.isfinite(n_th)):
            raise ParameterError("omega_f and n_th must be finite")
        expected = scale * (2.0 * n_th + 1.0)
        if not math.isclose(omega_f**2, expected, rel_tol=rtol, abs_tol=1e-300):
            raise ConflictError(
                f"omega_f={omega_f!r} and n_th={n_th!r} disagree "
                f"(omega_f**2 should be {expected!r})"
            )
    elif omega_f is None:
        n_th = 0.0 if n_th is None else n_th
        if not math.isfinite(n_th):
            raise ParameterError("n_th must be finite")
        if 2.0 * n_th + 1.0 < 0:
            raise ParameterError("n_th below -1/2 gives a negative noise intensity")
        omega_f = math.sqrt(scale * (2.0 * n_th + 1.0))
    else:
        if not math.isfinite(omega_f) or omega_f < 0:
            raise ParameterError("omega_f must be finite and non-negative")
        n_th = (omega_f**2 / scale - 1.0) / 2.0

    if n_th < 0:
        log.warning(
            "n_th=%.3g is below zero: the Markovian bath is weaker than vacuum "
            "noise and covariance matrices may fail the uncertainty relation",
            n_th,
        )
    return SystemParams(omega_m=float(omega_m), gamma_m=gamma_m, omega_q=float(omega_q),
                        omega_f=float(omega_f), n_th=float(n_th))
