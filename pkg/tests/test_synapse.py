"""Bistable stochastic synapse: drift, jumps, efficacy, clock oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attractornet.synapse import BistableSynapse, SynapseParams
from oracles import clock_synapse, random_synapse_scenario, run_event_synapse


def test_param_invariants():
    with pytest.raises(ValueError):
        SynapseParams(j_pot=0.1, j_dep=0.2)
    with pytest.raises(ValueError):
        SynapseParams(x_theta=0.0)
    with pytest.raises(ValueError):
        SynapseParams(jump_up=0.0)


def test_x0_must_be_in_unit_interval():
    with pytest.raises(ValueError):
        BistableSynapse(x0=1.5)


# ---------------------------------------------------------------------- drift


def test_drift_up_clamps_at_one():
    s = BistableSynapse(SynapseParams(drift_up=1.0), x0=0.7)
    s.drift_to(0.5)
    assert s.x == 1.0


def test_drift_down_arithmetic():
    s = BistableSynapse(SynapseParams(drift_down=1.0), x0=0.3)
    s.drift_to(0.1)
    assert s.x == pytest.approx(0.2)


def test_zero_dt_is_identity():
    s = BistableSynapse(x0=0.3)
    s.drift_to(0.0)
    assert s.x == 0.3


def test_exactly_at_threshold_stays_put():
    s = BistableSynapse(SynapseParams(x_theta=0.5), x0=0.5)
    s.drift_to(10.0)
    assert s.x == 0.5
    assert s.potentiated is False  # threshold itself counts as depressed


def test_time_reversal_is_an_error():
    s = BistableSynapse()
    s.drift_to(1.0)
    with pytest.raises(ValueError):
        s.drift_to(0.5)


# ---------------------------------------------------------------------- jumps


def test_gated_jump_crosses_threshold():
    p = SynapseParams(x_theta=0.5, jump_up=0.1, v_gate=0.8)
    s = BistableSynapse(p, x0=0.45)
    s.on_presynaptic_spike(v_post=0.9, t=0.0)
    assert s.x == pytest.approx(0.55)
    assert s.potentiated is True


def test_ungated_jump_clamps_at_zero():
    p = SynapseParams(jump_down=0.1)
    s = BistableSynapse(p, x0=0.05)
    s.on_presynaptic_spike(v_post=0.1, t=0.0)
    assert s.x == 0.0


def test_non_plastic_synapse_never_changes():
    s = BistableSynapse(x0=0.45, is_plastic=False)
    s.on_presynaptic_spike(v_post=0.9, t=0.0)
    assert s.x == 0.45


# ------------------------------------------------------------------- efficacy


def test_binary_efficacy():
    p = SynapseParams(j_pot=0.24, j_dep=0.003)
    assert BistableSynapse(p, x0=0.9).efficacy() == 0.24
    assert BistableSynapse(p, x0=0.1).efficacy() == 0.003


def test_inhibitory_sign_convention():
    p = SynapseParams(j_pot=0.24, j_dep=0.003)
    s = BistableSynapse(p, x0=0.9, is_excitatory=False)
    assert s.efficacy() == -0.24


def test_stability_at_rest():
    """With no activity the binary state never changes, from either side."""
    for x0 in (0.1, 0.9):
        s = BistableSynapse(x0=x0)
        before = s.potentiated
        for t in np.linspace(0.5, 100.0, 40):
            s.drift_to(float(t))
            assert s.potentiated == before
        assert s.x in (0.0, 1.0)  # drift deepened the state


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0001, 0.1), st.floats(0.0, 1.0)),
                min_size=1, max_size=60),
       st.floats(0.0, 1.0))
def test_x_stays_in_unit_interval(steps, x0):
    s = BistableSynapse(x0=x0)
    t = 0.0
    for dt, v_post in steps:
        t += dt
        s.drift_to(t)
        s.on_presynaptic_spike(v_post, t)
        assert 0.0 <= s.x <= 1.0
        assert s.potentiated == (s.x > s.params.x_theta)


# --------------------------------------------------------------- clock oracle


def test_event_driven_matches_clock_oracle():
    rng = np.random.default_rng(99)
    params = SynapseParams()
    for _ in range(10):
        x0, events, t_end = random_synapse_scenario(rng)
        x_ref = clock_synapse(params, x0, events, t_end)
        x = run_event_synapse(params, x0, events, t_end)
        assert abs(x - x_ref) <= 1e-9
