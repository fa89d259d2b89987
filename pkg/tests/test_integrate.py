import io

import numpy as np
import pytest

from nrdicke import _core
from nrdicke.integrate import (
    IntegrationError, IntegratorConfig, Mode, continue_from, integrate, np_seed_state, perturb, read_csv,
)
from nrdicke.model import ModelParams, SystemState, cavity_adiabatic, random_state

needs_compiled = pytest.mark.skipif(_core._kernels is None, reason="compiled kernels not built")


@needs_compiled
@pytest.mark.parametrize("mode", [_core.FULL, _core.ADIABATIC])
def test_backend_rhs_agree(mode):
    rng = np.random.default_rng(0)
    par = _core.pack_params(ModelParams(lam=(20.0, 25.0, 30.0), phi=1.1, gamma=0.05, weight=(1.0, 2.0, 1.0)))
    for _ in range(20):
        s = random_state(rng)
        y = s.to_vector(mode == _core.FULL)
        a = _core.rhs_packed(mode, par, y, backend="cython")
        b = _core.rhs_packed(mode, par, y, backend="python")
        assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


@needs_compiled
def test_backend_trajectories_agree(base):
    p = base.with_lambda(35.0)
    cfg = IntegratorConfig(t_end=20.0, sample_dt=0.5)
    a = integrate(np_seed_state(1e-3), p, cfg, backend="cython")
    b = integrate(np_seed_state(1e-3), p, cfg, backend="python")
    assert np.max(np.abs(a.y - b.y)) < 1e-8


def test_unknown_backend(base):
    with pytest.raises(ValueError):
        integrate(np_seed_state(), base, IntegratorConfig(t_end=1.0), backend="fortran")


def test_normal_state_is_fixed(base):
    tr = integrate(SystemState.normal(), base.with_lambda(40.0), IntegratorConfig(t_end=10.0))
    assert np.all(tr.y[:, :9] == tr.y[0, :9])
    assert len(tr) == 101 and tr.dt == pytest.approx(0.1)


def test_full_mode_tracks_adiabatic(base):
    p = base.with_lambda(10.8)
    s0 = np_seed_state(1e-2)
    s0 = SystemState(s0.spins, cavity_adiabatic(s0.spins, p))
    a = integrate(s0, p, IntegratorConfig(t_end=20.0, sample_dt=1.0))
    b = integrate(s0, p, IntegratorConfig(t_end=20.0, sample_dt=1.0, mode=Mode.FULL))
    # corrections are of order 1 / omega_c
    assert np.max(np.abs(a.y[:, :9] - b.y[:, :9])) < 1e-2


def test_csv_roundtrip_with_comment(base):
    tr = integrate(np_seed_state(1e-3), base.with_lambda(20.0), IntegratorConfig(t_end=2.0, sample_dt=0.5))
    buf = io.StringIO()
    buf.write('# {"tool": "test"}\n')
    tr.to_csv(buf)
    buf.seek(0)
    back = read_csv(buf, tr.params)
    assert np.array_equal(back.times, tr.times) and np.array_equal(back.y, tr.y)


def test_continue_from_extends(base):
    p = base.with_lambda(20.0)
    cfg = IntegratorConfig(t_end=4.0, sample_dt=0.5)
    a = integrate(np_seed_state(1e-3), p, cfg)
    b = continue_from(a, cfg)
    assert b.times[0] == a.times[-1] and b.times[-1] == pytest.approx(8.0)
    assert np.array_equal(b.y[0, :9], a.y[-1, :9])


def test_perturb_is_deterministic_and_physical():
    a = perturb(SystemState.normal(), 0.1, 7)
    b = perturb(SystemState.normal(), 0.1, 7)
    assert a.distance(b) == 0.0 and a.is_physical(1e-12)
    assert perturb(SystemState.normal(), 0.1, 8).distance(a) > 0
    with pytest.raises(ValueError):
        perturb(SystemState.normal(), -1.0, 0)


def test_rejects_bad_input(base):
    with pytest.raises(ValueError):
        integrate(SystemState(np.ones((3, 3))), base, IntegratorConfig(t_end=1.0))
    with pytest.raises(ValueError):
        IntegratorConfig(t_end=1.0, sample_dt=2.0)
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)


def test_step_budget_raises(base):
    with pytest.raises(IntegrationError) as err:
        integrate(np_seed_state(1e-3), base.with_lambda(30.0), IntegratorConfig(t_end=100.0, max_steps=10))
    assert err.value.t_last < 100.0
