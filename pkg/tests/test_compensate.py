import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from nrdicke.compensate import (
    CompensationPlan, compensated_params, distortion, make_plan, params_from_plan, pop_ratio,
)
from nrdicke.model import ModelParams

phis = st.floats(0.0, math.pi)


@given(phis, st.floats(0.1, 100.0), st.booleans())
def test_renormalized_couplings_uniform(phi, lam, freq):
    assume(abs(math.cos(phi)) > 1e-3)
    plan = make_plan(phi, lam, freq)
    r = plan.renormalized()
    assert np.allclose(r, r[0], rtol=1e-12)
    q = params_from_plan(plan, ModelParams())
    assert np.allclose(q.cavity_coupling, q.cavity_coupling[0], rtol=1e-12)
    assert q.with_lambda(2 * lam).lam[0] == pytest.approx(2 * q.lam[0])


@given(phis, st.floats(0.1, 100.0))
def test_plan_json_roundtrip(phi, lam):
    assume(abs(math.cos(phi)) > 1e-3)
    plan = make_plan(phi, lam)
    assert CompensationPlan.from_json(plan.to_json()) == plan


def test_ratios():
    assert pop_ratio(0.0) == 1.0
    assert pop_ratio(math.pi / 3) == pytest.approx(2.0)
    plan = make_plan(math.pi / 3, 10.0)
    assert plan.freq_ratio == pytest.approx(0.5)
    assert make_plan(math.pi / 3, 10.0, compensate_freq=False).freq_ratio == 1.0
    with pytest.raises(ValueError):
        pop_ratio(math.pi / 2)
    q = compensated_params(math.pi / 3, 10.0, ModelParams(gamma=0.3))
    assert q.omega == pytest.approx((1.0, 0.5, 1.0)) and q.gamma == 0.3


def test_distortion():
    ang = np.arange(6) * math.pi / 3
    hexagon = np.column_stack([np.cos(ang), np.sin(ang)])
    assert distortion(hexagon) == pytest.approx(0.0, abs=1e-15)
    bent = hexagon.copy()
    bent[0] *= 1.5
    assert distortion(bent) > 0.3
    holes = hexagon.copy()
    holes[2] = np.nan
    assert distortion(holes) == pytest.approx(0.0, abs=1e-15)
    assert distortion(np.full((6, 2), np.nan)) == math.inf
