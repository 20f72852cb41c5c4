import math

import numpy as np
import pytest

from cv_entangle import ConflictError, ParameterError, build_params
from cv_entangle.decoherence import survival_time_closed_form


def test_defaults_and_derived_rates():
    p = build_params(omega_m=2.0, q_m=500.0, omega_q=0.3)
    assert p.gamma_m == pytest.approx(2.0 / 1000.0)
    assert p.q_m == pytest.approx(500.0, rel=1e-14)
    assert p.n_th == 0.0
    assert p.omega_f**2 == pytest.approx(p.gamma_m * p.omega_m)
    assert p.omega_d == pytest.approx(math.sqrt(4.0 - p.gamma_m**2))


def test_bath_descriptors_round_trip():
    p = build_params(q_m=1e3, n_th=100.0)
    assert p.omega_f**2 == pytest.approx(p.gamma_m * p.omega_m * 201, rel=1e-14)
    q = build_params(q_m=1e3, omega_f=p.omega_f)
    assert q.n_th == pytest.approx(100.0, rel=1e-12)


def test_both_descriptors_consistent_or_conflict():
    p = build_params(q_m=1e3, n_th=3.0)
    same = build_params(q_m=1e3, n_th=3.0, omega_f=p.omega_f)
    assert same.n_th == 3.0
    with pytest.raises(ConflictError):
        build_params(q_m=1e3, n_th=3.0, omega_f=1.01 * p.omega_f)


@pytest.mark.parametrize("kw", [
    dict(omega_m=0.0), dict(omega_m=-1.0), dict(q_m=0.5), dict(q_m=0.1),
    dict(omega_q=-0.1), dict(omega_f=-0.1), dict(n_th=-0.6), dict(omega_q=math.nan),
    dict(q_m=math.inf),
])
def test_invalid_inputs(kw):
    with pytest.raises(ParameterError):
        build_params(**kw)


def test_negative_occupation_warns(caplog):
    p = build_params(q_m=1e3, omega_q=0.02, omega_f=0.02)
    assert p.n_th == pytest.approx(-0.1, rel=1e-12)
    assert "below zero" in caplog.text


def test_ratio_and_coupling():
    p = build_params(q_m=1e3, omega_q=0.3, omega_f=0.1)
    assert p.ratio == pytest.approx(3.0)
    assert p.coupling == pytest.approx(0.3 * math.sqrt(2))
    assert build_params(q_m=1e3, omega_q=0.3, omega_f=0.0).ratio == math.inf


def test_with_rebuilds():
    p = build_params(q_m=1e3, omega_q=0.1, n_th=5.0)
    q = p.with_(n_th=10.0)
    assert q.n_th == pytest.approx(10.0) and q.omega_q == 0.1 and q.q_m == pytest.approx(1e3)
    assert p.with_(omega_q=0.2).omega_f == p.omega_f
    with pytest.raises(ParameterError):
        p.with_(q_m=0.2)


def test_survival_forms_equal(rng):
    for _ in range(50):
        q_m = 10 ** rng.uniform(1, 6)
        n = rng.uniform(0, 1e3)
        p = build_params(q_m=q_m, n_th=n)
        theta = survival_time_closed_form(p).theta_s
        assert theta == pytest.approx(5 * q_m / (2 * n + 1), rel=1e-12)


def test_round_trip_property(rng):
    for _ in range(1000):
        q_m, n = 10 ** rng.uniform(0, 7), rng.uniform(-0.49, 1e4)
        wm = 10 ** rng.uniform(-2, 2)
        p = build_params(omega_m=wm, q_m=q_m, n_th=n)
        back = build_params(omega_m=wm, q_m=q_m, omega_f=p.omega_f)
        assert np.isclose(back.n_th, n, rtol=1e-9, atol=1e-9)
