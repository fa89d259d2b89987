import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrdicke.landscape import ground_phase, local_spin_minimum, minimize_energy, reciprocal
from nrdicke.model import ModelParams
from nrdicke.stationary import Phase


@given(st.floats(22.4, 200.0))
def test_local_minimum_closed_form(lam):
    p = ModelParams.homogeneous()
    ref = math.sqrt(1.0 - (p.omega[1] * p.omega_c / lam ** 2) ** 2)
    assert local_spin_minimum(lam, p) == pytest.approx(ref, abs=1e-12)


def test_local_minimum_below_threshold():
    assert local_spin_minimum(10.0, ModelParams.homogeneous()) == 0.0


@pytest.mark.parametrize("phi,lam,tag", [
    (0.3, 10.0, Phase.NP), (0.0, 40.0, Phase.SOP), (math.pi, 40.0, Phase.SOP), (math.pi / 3, 75.0, Phase.FSOP),
])
def test_ground_phase(phi, lam, tag):
    assert ground_phase(phi, lam, ModelParams.homogeneous(gamma=0.05)).tag is tag


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, math.pi), st.floats(25.0, 80.0))
def test_minima_are_critical_points(phi, lam):
    p = reciprocal(ModelParams.homogeneous(lam=lam, phi=phi))
    mins = minimize_energy(p)
    assert mins
    for g in mins:
        assert g.gradient_norm(p) < 1e-8
    # parity pairs the nontrivial minima
    nontrivial = [g for g in mins if not g.is_trivial]
    for g in nontrivial:
        assert min(np.max(np.abs(g.sx + h.sx)) for h in nontrivial) < 1e-6
