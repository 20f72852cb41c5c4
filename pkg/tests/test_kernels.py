import math

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.integrate import dblquad, quad, solve_ivp

from cv_entangle import DomainError, build_params
from cv_entangle.kernels import (
    ExpSum,
    LagKernel,
    cross_covariance,
    drift_matrix,
    field_kernel,
    greens_function,
    osc_steady_covariance,
    propagate_free,
    stationary_state,
    thermal_diffusion,
    transition_matrix,
)


def _noise(p):
    return np.diag([0.0, p.coupling**2 + p.thermal_intensity])


def _spectral_variance(p):
    """Var x from the force spectrum integrated against |chi|^2."""
    w, g = p.omega_m, p.gamma_m
    S = p.coupling**2 + p.thermal_intensity
    f = lambda W: S * w**2 / ((w**2 - W**2) ** 2 + 4 * g**2 * W**2) / math.pi
    lo, hi = w - 50 * g, w + 50 * g
    parts = [quad(f, 0, lo, limit=500), quad(f, lo, hi, points=[w], limit=2000),
             quad(f, hi, np.inf, limit=500)]
    return sum(v for v, _ in parts)


def test_greens_function_reference():
    p = build_params(q_m=1e3)
    assert greens_function(0.0, p) == 0.0
    t = np.linspace(0, 50, 201)
    via_expm = np.array([sla.expm(drift_matrix(p) * s)[0, 1] for s in t]) / p.omega_m
    assert np.allclose(greens_function(t, p), via_expm, atol=1e-12)
    h = 1e-6
    assert (greens_function(h, p) - greens_function(0.0, p)) / h == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(DomainError):
        greens_function(-1.0, p)


def test_transition_matrix_matches_expm(rng):
    for _ in range(50):
        p = build_params(omega_m=10 ** rng.uniform(-1, 1), q_m=10 ** rng.uniform(0.5, 4))
        tau = rng.uniform(0, 30)
        assert np.allclose(transition_matrix(p, tau), sla.expm(drift_matrix(p) * tau), atol=1e-12)


def test_vacuum_and_thermal_equipartition():
    p0 = build_params(q_m=1e3)
    assert np.allclose(osc_steady_covariance(p0), np.eye(2), atol=1e-12)
    p = build_params(q_m=1e3, n_th=100.0)
    assert np.allclose(osc_steady_covariance(p), 201 * np.eye(2), rtol=1e-12)
    assert _spectral_variance(p) == pytest.approx(201, rel=1e-6)


def test_variance_formula():
    p = build_params(q_m=1e3, omega_q=0.02, omega_f=0.02)
    expected = (p.omega_q**2 + 2 * p.omega_f**2) / (2 * p.gamma_m * p.omega_m)
    assert osc_steady_covariance(p)[0, 0] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.2, rel=1e-12)
    assert _spectral_variance(p) == pytest.approx(expected, rel=1e-6)


def test_steady_state_solves_lyapunov(rng):
    for _ in range(100):
        p = build_params(q_m=10 ** rng.uniform(0.5, 5), omega_q=rng.uniform(0, 2), n_th=rng.uniform(0, 50))
        ref = sla.solve_continuous_lyapunov(drift_matrix(p), -_noise(p))
        assert np.allclose(osc_steady_covariance(p), ref, rtol=1e-8)


def test_spectral_variance_property(rng):
    for _ in range(20):
        p = build_params(q_m=10 ** rng.uniform(1, 3), omega_q=rng.uniform(0, 1), n_th=rng.uniform(0, 20))
        assert osc_steady_covariance(p)[0, 0] == pytest.approx(_spectral_variance(p), rel=1e-8)


def test_cross_covariance_matches_response(moderate):
    p = moderate
    F, A, k = drift_matrix(p), osc_steady_covariance(p), p.coupling
    for t in (-0.0, -0.3, -2.0, -17.5, -400.0):
        back = sla.expm(-F * t)
        # b1 kicks p with strength k; b2 reads out k x
        ref = np.column_stack([k * back[:, 1], k * (back @ A)[:, 0]])
        assert np.allclose(cross_covariance(p, t), ref, atol=1e-10)
    with pytest.raises(DomainError):
        cross_covariance(p, 0.5)


def test_cross_covariance_vanishes_without_coupling():
    p = build_params(q_m=1e3, n_th=5.0)
    assert np.allclose(cross_covariance(p, np.array(-3.0)), 0.0)
    kern = field_kernel(p)
    assert np.allclose(kern.b12.amps, 0) and np.allclose(kern.b22.amps, 0)


def test_cross_covariance_decays_into_past(thermal):
    osc = stationary_state(thermal)
    for row in osc.cross:
        for f in row:
            # t <= 0 support: every exponent must decay towards -inf
            assert np.all(f.rates.real > 0)
    far = np.abs(cross_covariance(thermal, -40.0 / thermal.gamma_m)).max()
    assert far < 1e-12 * np.abs(cross_covariance(thermal, 0.0)).max() + 1e-12


def test_field_kernels_match_response(moderate):
    p = moderate
    F, A, k = drift_matrix(p), osc_steady_covariance(p), p.coupling
    kern = field_kernel(p)
    for tau in (0.0, 0.4, 3.1, 25.0):
        E = sla.expm(F * tau)
        assert kern.b12(tau).real == pytest.approx(k**2 * E[0, 1], abs=1e-12)
        assert kern.b22(tau).real == pytest.approx(k**2 * (E @ A)[0, 0], abs=1e-10)
    assert np.all(kern.b12.rates.real < 0) and np.all(kern.b22.rates.real < 0)


def test_b12_causality(moderate, rng):
    kern = field_kernel(moderate)
    t = rng.uniform(-50, 0, 500)
    tp = rng.uniform(-50, 0, 500)
    v12 = kern.smooth(1, 2, t, tp)
    assert np.all(v12[tp < t] == 0.0)
    assert np.any(v12[tp > t] != 0.0)
    assert np.array_equal(kern.smooth(2, 1, t, tp), kern.smooth(1, 2, tp, t))
    assert np.all(kern.smooth(1, 1, t, tp) == 0.0)
    assert np.allclose(kern.smooth(2, 2, t, tp), kern.smooth(2, 2, tp, t))


def test_expsum_inner_and_fourier():
    f = ExpSum([1.0, 0.5j], [0.7 + 0.3j, 1.1])
    g = ExpSum([2.0], [0.4 - 1.0j])
    ref = quad(lambda t: (f(t) * g(t)).real, -np.inf, 0)[0] + 1j * quad(
        lambda t: (f(t) * g(t)).imag, -np.inf, 0)[0]
    assert f.inner(g) == pytest.approx(ref, abs=1e-10)
    W = 0.8
    ref = quad(lambda t: (f(t) * np.exp(1j * W * t)).real, -np.inf, 0)[0] + 1j * quad(
        lambda t: (f(t) * np.exp(1j * W * t)).imag, -np.inf, 0)[0]
    assert f.fourier(W) == pytest.approx(ref, abs=1e-10)
    assert len(ExpSum([1, 2, 3], [1, 1, 2]).simplify()) == 2


def test_lag_kernel_forms():
    kap = LagKernel(np.array([0.3 + 0.1j, 0.3 - 0.1j]), np.array([-0.5 + 1j, -0.5 - 1j]))
    u = ExpSum([1.0], [0.9])
    w = ExpSum([0.5, 0.5], [0.6 + 0.2j, 0.6 - 0.2j])
    fn = lambda tp, t: (u(t) * kap(tp - t) * w(tp)).real
    causal = dblquad(fn, -40, 0, lambda t: t, lambda t: 0, epsabs=1e-12)[0]
    assert kap.causal_form(u, w).real == pytest.approx(causal, abs=1e-8)
    # split along the kink at t = t'
    swapped = dblquad(lambda tp, t: (w(t) * kap(tp - t) * u(tp)).real, -40, 0, lambda t: t,
                      lambda t: 0, epsabs=1e-12)[0]
    sym = causal + swapped
    assert kap.symmetric_form(u, w).real == pytest.approx(sym, abs=1e-8)


def test_propagate_free_limits(thermal):
    osc = stationary_state(thermal)
    same = propagate_free(osc, 0.0, thermal)
    assert np.allclose(same.a_block, osc.a_block, atol=1e-12)
    assert np.allclose(same.cross_at(-2.0), osc.cross_at(-2.0), atol=1e-12)
    far = propagate_free(osc, 60.0 / thermal.gamma_m, thermal)
    a_th = thermal.thermal_intensity / (4 * thermal.gamma_m)
    assert np.allclose(far.a_block, a_th * np.eye(2), rtol=1e-10)
    assert np.abs(far.cross_at(-1.0)).max() < 1e-10
    with pytest.raises(DomainError):
        propagate_free(osc, -1.0, thermal)


def test_propagate_free_matches_lyapunov_ode(thermal):
    p = thermal
    F = drift_matrix(p)
    Q = np.diag([0.0, p.thermal_intensity])
    osc = stationary_state(p)
    tau = 7.3

    def rhs(_, y):
        A = y.reshape(2, 2)
        return (F @ A + A @ F.T + Q).ravel()

    sol = solve_ivp(rhs, (0, tau), osc.a_block.ravel(), rtol=1e-11, atol=1e-11)
    out = propagate_free(osc, tau, p)
    assert np.allclose(out.a_block, sol.y[:, -1].reshape(2, 2), rtol=1e-8)
    assert np.allclose(out.cross_at(-1.5), sla.expm(F * tau) @ osc.cross_at(-1.5), atol=1e-10)


def test_thermal_diffusion_integral(thermal):
    p, tau = thermal, 2.2
    F = drift_matrix(p)
    Q = np.diag([0.0, p.thermal_intensity])
    integrand = lambda s: (sla.expm(F * s) @ Q @ sla.expm(F.T * s)).ravel()
    ref = np.array([quad(lambda s, i=i: integrand(s)[i], 0, tau, epsabs=1e-13)[0] for i in range(4)])
    assert np.allclose(thermal_diffusion(p, tau).ravel(), ref, atol=1e-10)


def test_greens_function_special_times():
    p = build_params(q_m=1e3)
    assert abs(greens_function(math.pi / p.omega_d, p)) < 1e-15
    hq = build_params(q_m=1e12)
    assert greens_function(math.pi / (2 * hq.omega_m), hq) == pytest.approx(1 / hq.omega_m, rel=1e-9)


def test_field_kernel_structure(moderate):
    kern = field_kernel(moderate)
    assert np.array_equal(kern.delta_coeff, np.eye(2))
    var = osc_steady_covariance(moderate)[0, 0]
    assert kern.smooth(2, 2, -3.0, -3.0) == pytest.approx(moderate.coupling**2 * var, rel=1e-12)


def test_half_cycle_free_evolution():
    p = build_params(q_m=1e9, omega_q=0.1, omega_f=0.0)
    osc = stationary_state(p)
    tau = math.pi / p.omega_m
    out = propagate_free(osc, tau, p)
    F = drift_matrix(p)
    sol = solve_ivp(lambda _, y: (F @ y.reshape(2, 2) + y.reshape(2, 2) @ F.T).ravel(), (0, tau),
                    osc.a_block.ravel(), rtol=1e-12, atol=1e-12)
    assert np.allclose(out.a_block, sol.y[:, -1].reshape(2, 2), rtol=1e-8)
    # half a turn maps (x, p) -> (-x, -p)
    assert np.allclose(out.cross_at(-0.7), -osc.cross_at(-0.7), rtol=1e-6, atol=1e-12)
    assert np.abs(thermal_diffusion(p, tau)).max() < 1e-12
