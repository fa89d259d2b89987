import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrdicke.model import (
    ModelParams, SystemState, SymmetryOp, apply_symmetry, cavity_adiabatic, collective_coords,
    energy_eff, energy_eff_grad, energy_eff_hessian, mirror_params, random_state, reduced_jacobian,
    reduced_rhs, rhs_adiabatic, rhs_full,
)

seeds = st.integers(0, 2 ** 32 - 1)
phis = st.floats(0.0, math.pi)
lams = st.floats(0.0, 80.0)


def _vec(s: SystemState) -> np.ndarray:
    return s.to_vector(True)


@settings(max_examples=50, deadline=None)
@given(seeds, phis, lams, st.floats(0.0, 0.5))
def test_parity_equivariance(seed, phi, lam, gamma):
    p = ModelParams.homogeneous(lam=lam, phi=phi, gamma=gamma)
    s = random_state(np.random.default_rng(seed))
    lhs = rhs_full(apply_symmetry(s, SymmetryOp.Z2_PARITY), p)
    rhs = apply_symmetry(rhs_full(s, p), SymmetryOp.Z2_PARITY)
    assert np.allclose(_vec(lhs), _vec(rhs), atol=1e-12 * (1 + lam))


@settings(max_examples=50, deadline=None)
@given(seeds, phis, lams, st.floats(0.0, 0.5))
def test_mirror_maps_phi_to_pi_minus_phi(seed, phi, lam, gamma):
    p = ModelParams(phi=phi, gamma=gamma, lam=(lam, 0.7 * lam, 1.1 * lam), omega=(1.0, 1.3, 0.8))
    s = random_state(np.random.default_rng(seed))
    lhs = rhs_full(apply_symmetry(s, SymmetryOp.SPECIES_MIRROR), mirror_params(p))
    rhs = apply_symmetry(rhs_full(s, p), SymmetryOp.SPECIES_MIRROR)
    assert np.allclose(_vec(lhs), _vec(rhs), atol=1e-12 * (1 + lam))


@settings(max_examples=50, deadline=None)
@given(seeds, lams)
def test_cyclic_symmetry_at_two_pi_over_three(seed, lam):
    p = ModelParams.homogeneous(lam=lam, phi=2 * math.pi / 3, gamma=0.05)
    s = random_state(np.random.default_rng(seed))
    lhs = rhs_full(apply_symmetry(s, SymmetryOp.Z3_CYCLIC), p)
    rhs = apply_symmetry(rhs_full(s, p), SymmetryOp.Z3_CYCLIC)
    assert np.allclose(_vec(lhs), _vec(rhs), atol=1e-12 * (1 + lam))


@settings(max_examples=50, deadline=None)
@given(seeds, phis, lams, st.floats(0.0, 0.5))
def test_flow_is_tangent_to_sphere(seed, phi, lam, gamma):
    p = ModelParams.homogeneous(lam=lam, phi=phi, gamma=gamma)
    s = random_state(np.random.default_rng(seed))
    d = rhs_adiabatic(s, p)
    assert np.allclose(np.sum(d * s.spins, axis=1), 0.0, atol=1e-12 * (1 + lam))
    d = rhs_full(s, p).spins
    assert np.allclose(np.sum(d * s.spins, axis=1), 0.0, atol=1e-12 * (1 + lam))


@settings(max_examples=30, deadline=None)
@given(seeds, phis, lams)
def test_adiabatic_equals_full_with_slaved_cavity(seed, phi, lam):
    p = ModelParams.homogeneous(lam=lam, phi=phi, gamma=0.05)
    s = random_state(np.random.default_rng(seed), with_cavity=False)
    a = cavity_adiabatic(s, p)
    full = rhs_full(SystemState(s.spins, a), p)
    assert np.allclose(full.spins, rhs_adiabatic(s, p), atol=1e-12 * (1 + lam))


@settings(max_examples=30, deadline=None)
@given(seeds, phis, lams, st.sampled_from([-1.0, 1.0]))
def test_reduced_chart_matches_flow_and_jacobian(seed, phi, lam, sign):
    p = ModelParams.homogeneous(lam=lam, phi=phi, gamma=0.05)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.6, 0.6, 6)
    sigma = np.full(3, sign)
    sz = sigma * np.sqrt(1 - x[:3] ** 2 - x[3:] ** 2)
    d = rhs_adiabatic(np.column_stack([x[:3], x[3:], sz]), p)
    assert np.allclose(reduced_rhs(x, sigma, p), np.concatenate([d[:, 0], d[:, 1]]), atol=1e-12 * (1 + lam))
    h = 1e-6
    fd = np.column_stack([(reduced_rhs(x + h * e, sigma, p) - reduced_rhs(x - h * e, sigma, p)) / (2 * h)
                          for e in np.eye(6)])
    assert np.allclose(reduced_jacobian(x, sigma, p), fd, atol=1e-6 * (1 + lam))


@settings(max_examples=50, deadline=None)
@given(seeds, phis, lams)
def test_energy_derivatives(seed, phi, lam):
    p = ModelParams.homogeneous(lam=lam, phi=phi, kappa=0.0)
    x = np.random.default_rng(seed).uniform(-0.9, 0.9, 3)
    h = 1e-6
    eye = np.eye(3)
    g_fd = np.array([(energy_eff(x + h * e, p) - energy_eff(x - h * e, p)) / (2 * h) for e in eye])
    assert np.allclose(energy_eff_grad(x, p), g_fd, atol=1e-7 * (1 + lam))
    h_fd = np.column_stack([(energy_eff_grad(x + h * e, p) - energy_eff_grad(x - h * e, p)) / (2 * h) for e in eye])
    assert np.allclose(energy_eff_hessian(x, p), h_fd, atol=1e-6 * (1 + lam))


def test_normal_state_is_stationary():
    p = ModelParams.homogeneous(lam=30.0, phi=1.0, gamma=0.05)
    d = rhs_full(SystemState.normal(), p)
    assert np.max(np.abs(d.spins)) == 0.0 and d.cavity == 0


def test_collective_coordinates_are_orthonormal():
    basis = np.array([collective_coords(np.column_stack([e, np.zeros(3), np.zeros(3)])) for e in np.eye(3)])
    assert np.allclose(basis @ basis.T, np.eye(3), atol=1e-15)


def test_params_validation_and_rescaling():
    with pytest.raises(ValueError):
        ModelParams(omega_c=-1.0)
    with pytest.raises(ValueError):
        ModelParams(lam=(1.0, -1.0, 1.0))
    with pytest.raises(ValueError):
        ModelParams(gamma=float("nan"))
    p = ModelParams(lam=(2.0, 1.0, 2.0), weight=(1.0, 4.0, 1.0))
    q = p.with_lambda(10.0)
    assert q.lam[1] * math.sqrt(q.weight[1]) == pytest.approx(10.0)
    assert ModelParams.from_dict(p.to_dict()) == p
    assert np.allclose(p.spin_coupling * p.cavity_coupling, np.asarray(p.lam) ** 2)


def test_state_vector_roundtrip():
    s = random_state(np.random.default_rng(3))
    assert SystemState.from_vector(s.to_vector()).distance(s) == 0.0
    with pytest.raises(ValueError):
        SystemState.from_vector(np.zeros(5))
    assert s.spin(1) == tuple(s.spins[2])
