"""Bistable stochastic Hebbian synapse.

The synapse carries an internal analog variable X in [0, 1].  Away from the
bistability threshold ``x_theta``, X drifts toward the nearer extreme, which
makes the two efficacy states stable at rest.  Each presynaptic spike kicks X
up if the postsynaptic membrane potential is above ``v_gate`` (the Hebbian
coincidence signal) and down otherwise; the stochasticity of transitions stems
entirely from the irregularity of the spike trains.  The expressed efficacy is
binary: ``j_pot`` when X is above threshold, ``j_dep`` below.

Default jump and drift magnitudes are calibration choices, validated to place
the potentiation/depression crossover inside the 0-100 Hz operating range (see
the calibration notes in the README).  The up/down jump asymmetry is required:
with potential gating, a firing postsynaptic neuron spends well under half of
its time above the gate, so symmetric jumps could never potentiate.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class SynapseParams:
    j_pot: float = 0.25       # potentiated efficacy, potential units
    j_dep: float = 0.003      # depressed efficacy
    x_theta: float = 0.5      # bistability threshold on X
    jump_up: float = 0.15     # X increment on a gated presynaptic spike
    jump_down: float = 0.006  # X decrement on an ungated presynaptic spike
    drift_up: float = 0.15    # drift rate toward 1 when X > x_theta, 1/s
    drift_down: float = 0.15  # drift rate toward 0 when X < x_theta, 1/s
    v_gate: float = 0.55      # postsynaptic potential separating up from down jumps

    def __post_init__(self) -> None:
        if not self.j_pot > self.j_dep >= 0:
            raise ValueError("need j_pot > j_dep >= 0")
        if not 0 < self.x_theta < 1:
            raise ValueError("x_theta must lie in (0, 1)")
        if min(self.jump_up, self.jump_down, self.drift_up, self.drift_down) <= 0:
            raise ValueError("jump and drift magnitudes must be positive")


class BistableSynapse:
    """Scalar reference implementation of one plastic synapse."""

    def __init__(
        self,
        params: SynapseParams | None = None,
        x0: float = 0.0,
        is_plastic: bool = True,
        is_excitatory: bool = True,
    ) -> None:
        if not 0.0 <= x0 <= 1.0:
            raise ValueError("x0 must lie in [0, 1]")
        self.params = params or SynapseParams()
        self.x = float(x0)
        self.last_update = 0.0
        self.is_plastic = is_plastic
        self.is_excitatory = is_excitatory

    @property
    def potentiated(self) -> bool:
        # X exactly at threshold counts as depressed
        return self.x > self.params.x_theta

    def drift_to(self, t: float) -> None:
        """Advance the bistability drift to time t."""
        dt = t - self.last_update
        if dt < 0:
            raise ValueError(f"drift_to moving backwards: {t} < {self.last_update}")
        p = self.params
        if self.x > p.x_theta:
            self.x = min(1.0, self.x + p.drift_up * dt)
        elif self.x < p.x_theta:
            self.x = max(0.0, self.x - p.drift_down * dt)
        self.last_update = t

    def on_presynaptic_spike(self, v_post: float, t: float) -> None:
        """Apply the spike-triggered jump; caller must have drifted to t.

        No-op on non-plastic synapses.
        """
        if not self.is_plastic:
            return
        p = self.params
        if v_post > p.v_gate:
            self.x = min(1.0, self.x + p.jump_up)
        else:
            self.x = max(0.0, self.x - p.jump_down)

    def efficacy(self) -> float:
        """Current expressed efficacy; negated for inhibitory synapses."""
        p = self.params
        j = p.j_pot if self.potentiated else p.j_dep
        return j if self.is_excitatory else -j
