import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from nrdicke.model import ModelParams
from nrdicke.stability import (
    analyze_matrix, detect_ep, dyn_matrix_np, lambda_c, mu_nu_np_analytic, np_max_re, p_function, phi_c,
)


def _jordan_family(x0):
    """Real 4x4 family with a single exceptional point at x0 (pair +-sqrt(x - x0))."""
    rot = np.linalg.qr(np.random.default_rng(1).standard_normal((4, 4)))[0]

    def at(x):
        m = np.diag([0.0, 0.0, -1.0, -2.0])
        m[0, 1] = 1.0
        m[1, 0] = x - x0
        return rot @ m @ rot.T
    return at


@pytest.mark.parametrize("x0", [0.0137, -0.31])
def test_detect_synthetic_ep(x0):
    scan = detect_ep(np.linspace(-1.0, 1.0, 41), _jordan_family(x0))
    assert len(scan.locations) == 1
    loc = scan.locations[0]
    assert abs(loc.param - x0) < 1e-7
    assert abs(loc.eigenvalue) < 1e-3 and loc.cond > 1e6
    assert scan.break_at is None


def test_no_ep_for_normal_family():
    scan = detect_ep(np.linspace(0.0, 1.0, 21), lambda x: np.diag([-x, -2 * x - 1, 1.0]))
    assert scan.locations == []


def test_break_is_refined():
    at = _jordan_family(5.0)
    scan = detect_ep(np.linspace(0.0, 1.0, 11), lambda x: None if x > 0.437 else at(x))
    assert scan.break_at == pytest.approx(0.437, abs=1e-5)


def test_analyze_matrix_flags():
    rep = analyze_matrix(np.diag([-1.0, -2.0]))
    assert rep.stable and not rep.marginal and not rep.ep_flag
    rep = analyze_matrix(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert rep.marginal and rep.linearly_stable and not rep.unstable
    rep = analyze_matrix(np.array([[1e-3, 0.0], [0.0, -1.0]]))
    assert rep.unstable


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, math.pi), st.floats(0.0, 80.0), st.floats(0.0, 0.3))
def test_np_spectrum_closed_form(phi, lam, gamma):
    p = ModelParams.homogeneous(lam=lam, phi=phi, gamma=gamma)
    num = np.linalg.eigvals(dyn_matrix_np(p))
    ref = mu_nu_np_analytic(p)
    # match as multisets: ties in the real part make any fixed ordering fragile
    cost = np.abs(num[:, None] - ref[None, :])
    r, c = linear_sum_assignment(cost)
    assert cost[r, c].max() < 1e-9 * (1 + lam)


def test_phi_c_are_roots_of_p():
    p = ModelParams.homogeneous()
    roots = phi_c(p)
    assert roots
    for r in roots:
        assert 0 <= r <= math.pi
        assert abs(p_function(r, p)) < 1e-6 * 500.0 ** 2


def test_lambda_c_is_np_threshold():
    p = ModelParams.homogeneous(gamma=0.0)
    phi = 0.2
    lc = lambda_c(phi, p)
    assert lc is not None
    q = p.replace(phi=phi)
    assert np_max_re(q.with_lambda(lc * 0.99)) <= 1e-8
    assert np_max_re(q.with_lambda(lc * 1.01)) > 1e-8
