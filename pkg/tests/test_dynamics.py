import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrdicke.dynamics import (
    Kind, approach_lambdas, chiral_metrics, fit_power_law, fourier_spectrum, omega0_scaling, trim_transient,
)
from nrdicke.integrate import Mode, Trajectory
from nrdicke.model import ModelParams


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.0))
def test_spectrum_finds_odd_comb(w0):
    dt = 0.5
    t = dt * np.arange(1 << 15)
    x = np.sin(w0 * t) + 0.3 * np.sin(3 * w0 * t + 0.4) + 0.05 * np.sin(5 * w0 * t)
    rep = fourier_spectrum(x, dt)
    assert rep.omega0 == pytest.approx(w0, abs=rep.resolution)
    assert rep.odd_harmonic_score == 1.0


def test_spectrum_even_harmonic_lowers_score():
    dt, w0 = 0.5, 0.3
    t = dt * np.arange(1 << 14)
    x = np.sin(w0 * t) + 0.5 * np.sin(2 * w0 * t) + 0.3 * np.sin(3 * w0 * t)
    rep = fourier_spectrum(x, dt)
    assert rep.odd_harmonic_score is None or rep.odd_harmonic_score < 1.0


def test_spectrum_of_constant_and_short_input():
    rep = fourier_spectrum(np.ones(2048), 0.1)
    assert rep.omega0 is None and rep.peaks == []
    with pytest.raises(ValueError):
        fourier_spectrum(np.zeros(100), 0.1)


@given(st.floats(0.05, 2.0), st.floats(0.01, 10.0), st.floats(10.0, 60.0))
def test_power_law_fit_is_exact(beta, amp, lam_star):
    lams = approach_lambdas(lam_star)
    w = amp * np.abs(lams - lam_star) ** beta
    b, a = fit_power_law(lams, w, lam_star)
    assert b == pytest.approx(beta, rel=1e-9) and a == pytest.approx(amp, rel=1e-9)


def test_scaling_with_injected_measurement():
    lam_star = 50.0

    def fake(q):
        d = lam_star - q.lam[0]
        return None if d > 0.03 else 2.0 * d ** 0.1

    fit = omega0_scaling(2 * math.pi / 3, approach_lambdas(lam_star), ModelParams.homogeneous(gamma=0.05),
                         lam_star, omega0_fn=fake)
    assert fit.beta == pytest.approx(0.1, rel=1e-9)
    assert len(fit.excluded) >= 1
    with pytest.raises(ValueError):
        omega0_scaling(1.0, [1.0, 2.0], ModelParams(), 3.0, omega0_fn=fake)


def _rotating(direction: float, n: int = 4000, dt: float = 0.05) -> Trajectory:
    t = dt * np.arange(n)
    y = np.zeros((n, 11))
    for k in range(3):
        th = direction * t + 2 * math.pi * k / 3
        y[:, 3 * k] = 0.6 * np.cos(th)
        y[:, 3 * k + 1] = 0.6 * np.sin(th)
        y[:, 3 * k + 2] = -0.8
    y[:, 9] = 0.1
    return Trajectory(t, y, ModelParams.homogeneous(lam=10.0), Mode.ADIABATIC)


@pytest.mark.parametrize("direction", [1.0, -1.0])
def test_chiral_metrics_on_ideal_rotation(direction):
    m = chiral_metrics(_rotating(direction))
    assert np.allclose(m.velocities, direction, atol=1e-12)
    assert m.velocity_spread < 1e-12 and m.velocity_error < 1e-12
    assert m.lock_residual < 1e-12 and m.phase_error < 1e-12
    assert m.cavity_cv == pytest.approx(0.0, abs=1e-12)


def test_trim_transient():
    tr = _rotating(1.0, n=200)
    assert len(trim_transient(tr, 0.5)) == 100
    with pytest.raises(ValueError):
        trim_transient(tr, 0.9)
    with pytest.raises(ValueError):
        trim_transient(tr, 1.0)


def test_kinds_are_stable_strings():
    assert {k.value for k in Kind} == {"Stationary", "Chiral", "Swap", "Chaotic", "Unresolved"}
