"""Stochastic cross-check of the stationary covariances.

The linear Langevin equations are integrated as classical SDEs. For Gaussian
linear dynamics the symmetrized quantum moments obey the same equations as
classical covariances with the same noise strengths, so the ensemble second
moments must converge to the analytic ones.

Each trajectory starts at rest, is carried over the burn-in ``t_relax`` by
the exact Ornstein-Uhlenbeck transition (Van Loan), and is then integrated
with Euler-Maruyama over the recorded window ``[-T, 0]``. Output bin ``j``
covers ``[-(j+1) w, -j w]`` and holds ``X_j = int b1 / sqrt(w)`` and
``Y_j = int b2 / sqrt(w)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError
from .kernels import field_kernel, stationary_state
from .params import SystemParams

log = logging.getLogger(__name__)

__all__ = [
    "SimConfig",
    "CovEstimate",
    "ValidationReport",
    "simulate_trajectory",
    "simulate_ensemble",
    "estimate_covariance",
    "binned_covariance",
    "validate",
    "halving_check",
]

Z_GATE = 5.0
PASS_FRACTION = 0.99
JACKKNIFE_BLOCKS = 20
CHUNK = 256


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_relax: float | None = None
    n_traj: int = 10_000
    seed: int = 12345
    bin_width: float = 0.2
    n_bins: int = 32

    @property
    def horizon(self) -> float:
        return self.bin_width * self.n_bins

    @property
    def steps_per_bin(self) -> int:
        return int(round(self.bin_width / self.dt))

    def relax_time(self, params: SystemParams) -> float:
        return self.t_relax if self.t_relax is not None else 10.0 / params.gamma_m

    def validate(self, params: SystemParams):
        if self.dt <= 0 or self.dt * max(params.omega_m, params.gamma_m) > 0.01 + 1e-15:
            raise ConfigError(f"dt={self.dt!r} violates dt*max(omega_m, gamma_m) <= 0.01")
        if self.relax_time(params) < 10.0 / params.gamma_m * (1 - 1e-12):
            raise ConfigError("t_relax must be at least 10/gamma_m")
        if self.n_traj < 1000:
            raise ConfigError("n_traj must be at least 1000")
        if self.n_bins < 1 or self.bin_width <= 0:
            raise ConfigError("need at least one bin of positive width")
        if abs(self.steps_per_bin * self.dt - self.bin_width) > 1e-9 * self.bin_width:
            raise ConfigError("bin_width must be a whole number of steps")


@dataclass
class CovEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    n_traj: int


@dataclass
class ValidationReport:
    passed: bool
    fraction_within: float
    max_abs_z: float
    n_entries: int
    n_traj: int
    z: np.ndarray

    def as_dict(self):
        return dict(passed=self.passed, fraction_within=self.fraction_within,
                    max_abs_z=self.max_abs_z, n_entries=self.n_entries, n_traj=self.n_traj)


def _drift(params):
    w, g = params.omega_m, params.gamma_m
    return np.array([[0.0, w], [-w, -2.0 * g]])


def _burn_in_transition(params, t):
    """Van Loan: transition and accumulated noise covariance over ``t``."""
    F = _drift(params)
    Q = np.diag([0.0, params.coupling**2 + params.thermal_intensity])
    M = np.block([[-F, Q], [np.zeros((2, 2)), F.T]])
    E = sla.expm(M * t)
    Phi = E[2:, 2:].T
    S = Phi @ E[:2, 2:]
    return Phi, 0.5 * (S + S.T)


def _stream(seed, index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(int(index),))))


def _draws(params, cfg, indices):
    """Noise for a batch of trajectories, one private substream each."""
    n_steps = cfg.steps_per_bin * cfg.n_bins
    init = np.empty((len(indices), 2))
    inc = np.empty((len(indices), n_steps, 3))
    for row, i in enumerate(indices):
        rng = _stream(cfg.seed, i)
        init[row] = rng.standard_normal(2)
        inc[row] = rng.standard_normal((n_steps, 3))
    return init, inc


def _integrate(params, cfg, init, inc):
    """Vectorized Euler-Maruyama over the recorded window."""
    Phi, S = _burn_in_transition(params, cfg.relax_time(params))
    # start at rest, so the state after burn-in is pure accumulated noise
    ev, U = np.linalg.eigh(S)
    L = U * np.sqrt(np.clip(ev, 0.0, None))
    state = init @ L.T
    x, p = state[:, 0].copy(), state[:, 1].copy()
    w, g = params.omega_m, params.gamma_m
    k, D = params.coupling, params.thermal_intensity
    dt, sdt = cfg.dt, math.sqrt(cfg.dt)
    nb, spb = cfg.n_bins, cfg.steps_per_bin
    X = np.zeros((len(x), nb))
    Y = np.zeros((len(x), nb))
    acc1 = np.zeros(len(x))
    acc2 = np.zeros(len(x))
    step = 0
    # forward in time: the first recorded bin is the oldest, index nb - 1
    for b in range(nb - 1, -1, -1):
        acc1[:] = 0.0
        acc2[:] = 0.0
        for _ in range(spb):
            dw1 = sdt * inc[:, step, 0]
            dw2 = sdt * inc[:, step, 1]
            dwt = sdt * inc[:, step, 2]
            acc1 += dw1
            acc2 += dw2 + k * x * dt
            x, p = x + w * p * dt, p + (-w * x - 2 * g * p) * dt + k * dw1 + math.sqrt(D) * dwt
            step += 1
        X[:, b] = acc1 / math.sqrt(cfg.bin_width)
        Y[:, b] = acc2 / math.sqrt(cfg.bin_width)
    return np.column_stack([x, p, X, Y])


def simulate_trajectory(params: SystemParams, cfg: SimConfig, index: int = 0) -> np.ndarray:
    """Sample ``[x, p, X_0..X_{n-1}, Y_0..Y_{n-1}]`` of trajectory ``index`` at ``t = 0``."""
    cfg.validate(params)
    init, inc = _draws(params, cfg, [index])
    return _integrate(params, cfg, init, inc)[0]


def simulate_ensemble(params: SystemParams, cfg: SimConfig, indices=None) -> np.ndarray:
    cfg.validate(params)
    indices = np.arange(cfg.n_traj) if indices is None else np.asarray(indices)
    out = []
    for lo in range(0, len(indices), CHUNK):
        init, inc = _draws(params, cfg, indices[lo:lo + CHUNK])
        out.append(_integrate(params, cfg, init, inc))
    return np.vstack(out)


def _jackknife(samples, blocks=JACKKNIFE_BLOCKS):
    n, d = samples.shape
    blocks = min(blocks, n)
    edges = np.linspace(0, n, blocks + 1).astype(int)
    sums = np.stack([np.einsum("ni,nj->ij", samples[a:b], samples[a:b])
                     for a, b in zip(edges[:-1], edges[1:])])
    counts = np.diff(edges).astype(float)
    total = sums.sum(axis=0)
    mean = total / n
    loo = (total[None] - sums) / (n - counts)[:, None, None]
    dev = loo - loo.mean(axis=0)
    se = np.sqrt((blocks - 1) / blocks * np.sum(dev**2, axis=0))
    return mean, se


def estimate_covariance(params: SystemParams, cfg: SimConfig, samples=None) -> CovEstimate:
    """Ensemble second moments (zero mean is exact) with block-jackknife errors."""
    if samples is None:
        samples = simulate_ensemble(params, cfg)
    mean, se = _jackknife(samples)
    return CovEstimate(0.5 * (mean + mean.T), 0.5 * (se + se.T), samples.shape[0])


def _segment(terms, t0, t1):
    # int_{t0}^{t1} sum a e^{r t} dt
    amps, rates = terms
    return np.sum(amps * (np.exp(rates * t1) - np.exp(rates * t0)) / rates, axis=-1)


def _pair_kernel(amps, rates, w, starts):
    """``P[i, j] = int_{bin i} int_{bin j} kappa(t' - t) [t' > t]`` for lag kernel ``kappa``."""
    n = len(starts)
    P = np.zeros((n, n), dtype=complex)
    for c, mu in zip(amps, rates):
        e_out = (np.exp(-mu * (starts + w)) - np.exp(-mu * starts)) / -mu
        e_in = (np.exp(mu * (starts + w)) - np.exp(mu * starts)) / mu
        later = starts[None, :] > starts[:, None]
        P += c * np.where(later, np.outer(e_out, e_in), 0.0)
        P += c * np.eye(n) * (np.expm1(mu * w) - mu * w) / mu**2
    return P.real


def binned_covariance(params: SystemParams, n_bins: int, bin_width: float) -> np.ndarray:
    """Closed-form covariance of ``[x, p, X_j, Y_j]`` for top-hat output bins."""
    w = bin_width
    starts = -(np.arange(n_bins) + 1.0) * w
    osc = stationary_state(params)
    kern = field_kernel(params)
    n = n_bins
    V = np.zeros((2 + 2 * n, 2 + 2 * n))
    V[:2, :2] = osc.a_block
    for i in range(2):
        for j, sl in enumerate((slice(2, 2 + n), slice(2 + n, 2 + 2 * n))):
            f = osc.cross[i][j]
            V[i, sl] = _segment((f.amps[None], f.rates[None]), starts[:, None], starts[:, None] + w).real / math.sqrt(w)
    V[2:, :2] = V[:2, 2:].T
    b12 = _pair_kernel(kern.b12.amps, kern.b12.rates, w, starts) / w
    b22 = _pair_kernel(kern.b22.amps, kern.b22.rates, w, starts) / w
    V[2:2 + n, 2:2 + n] = np.eye(n)
    V[2:2 + n, 2 + n:] = b12
    V[2 + n:, 2:2 + n] = b12.T
    V[2 + n:, 2 + n:] = np.eye(n) + b22 + b22.T
    return V


def _compare(est: CovEstimate, ref: np.ndarray) -> ValidationReport:
    iu = np.triu_indices_from(ref)
    z = (est.mean - ref)[iu] / est.stderr[iu]
    within = float(np.mean(np.abs(z) <= Z_GATE))
    return ValidationReport(within >= PASS_FRACTION, within, float(np.max(np.abs(z))),
                            z.size, est.n_traj, z)


def validate(params: SystemParams, cfg: SimConfig, *, samples=None) -> ValidationReport:
    """Element-wise z-scores of the ensemble estimate against the closed form."""
    est = estimate_covariance(params, cfg, samples)
    report = _compare(est, binned_covariance(params, cfg.n_bins, cfg.bin_width))
    log.info("validation: %.4f of %d entries within %g SE", report.fraction_within,
             report.n_entries, Z_GATE)
    return report


def halving_check(params: SystemParams, cfg: SimConfig, *, samples=None):
    """RMS error ratio between half and full ensembles; ``sqrt(2)`` is ideal.

    Returns ``(ratio, passed)`` with the factor-two window ``[sqrt(2)/2, 2 sqrt(2)]``.
    """
    if samples is None:
        samples = simulate_ensemble(params, cfg)
    ref = binned_covariance(params, cfg.n_bins, cfg.bin_width)
    iu = np.triu_indices_from(ref)

    def rms(s):
        est = estimate_covariance(params, cfg, s)
        return float(np.sqrt(np.mean((est.mean - ref)[iu] ** 2)))

    half = samples[: samples.shape[0] // 2]
    ratio = rms(half) / rms(samples)
    return ratio, math.sqrt(2) / 2 <= ratio <= 2 * math.sqrt(2)
