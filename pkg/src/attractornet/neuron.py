"""Integrate-and-fire neuron with constant leak, reflecting barrier and refractoriness.

The membrane potential is dimensionless: the firing threshold sits at
``theta`` and a reflecting barrier at ``floor``.  Between events the potential
decays linearly at ``leak`` potential-units per second; each incoming spike
moves it by the synaptic efficacy.  Inputs arriving inside the absolute
refractory period are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import stream_rng


@dataclass
class NeuronParams:
    theta: float = 1.0        # firing threshold
    v_reset: float = 0.0      # potential after a spike
    leak: float = 20.0        # constant decay rate, units/s
    tau_arp: float = 0.002    # absolute refractory period, s
    floor: float = 0.0        # lower reflecting barrier

    def __post_init__(self) -> None:
        if not self.theta > self.floor:
            raise ValueError(f"theta ({self.theta}) must exceed floor ({self.floor})")
        if not (self.floor <= self.v_reset < self.theta):
            raise ValueError(f"v_reset ({self.v_reset}) must lie in [floor, theta)")
        if self.leak < 0:
            raise ValueError("leak must be >= 0")
        if self.tau_arp < 0:
            raise ValueError("tau_arp must be >= 0")


def decay_potential(v, leak, dt, floor):
    """Linear decay clamped at the reflecting barrier.  Broadcasts over arrays."""
    return np.maximum(floor, v - leak * dt)


class Neuron:
    """Scalar reference implementation of one integrate-and-fire unit."""

    def __init__(self, params: NeuronParams | None = None) -> None:
        self.params = params or NeuronParams()
        self.v = self.params.v_reset
        self.last_update = 0.0
        self.refractory_until = 0.0

    def integrate_to(self, t: float) -> None:
        """Advance the potential to time t (leak only; never spikes)."""
        dt = t - self.last_update
        if dt < 0:
            raise ValueError(f"integrate_to moving backwards: {t} < {self.last_update}")
        p = self.params
        self.v = float(decay_potential(self.v, p.leak, dt, p.floor))
        self.last_update = t

    def receive(self, efficacy: float, t: float) -> bool:
        """Apply one input at time t; caller must have integrated to t.

        Returns True if the input drove the potential to threshold.  Inputs
        inside the refractory period are discarded.
        """
        if t < self.refractory_until:
            return False
        p = self.params
        v = self.v + efficacy
        if efficacy > 0 and v >= p.theta:
            self.v = p.v_reset
            self.refractory_until = t + p.tau_arp
            return True
        self.v = min(max(v, p.floor), p.theta)
        return False


def transfer_function(
    params: NeuronParams,
    n_sources: int,
    rate_each: float,
    efficacy_each: float,
    duration: float,
    rng: np.random.Generator,
    inh_rate: float = 0.0,
    inh_efficacy: float = 0.0,
) -> tuple[float, float]:
    """Measure one neuron's mean output rate under independent Poisson drive.

    ``n_sources`` independent trains at ``rate_each`` Hz with identical
    efficacy superpose into a single Poisson train, which is what is
    simulated.  An optional inhibitory Poisson background of total rate
    ``inh_rate`` delivers ``-inh_efficacy`` per event (magnitude given
    positive).  Returns (rate_hz, stderr_hz) with a Poisson-count standard
    error.
    """
    if duration < 1.0:
        raise ValueError("transfer_function needs duration >= 1 s")
    if rate_each < 0 or inh_rate < 0:
        raise ValueError("rate must be non-negative")
    exc_rate = n_sources * rate_each
    total_rate = exc_rate + inh_rate
    if total_rate == 0:
        return 0.0, 0.0
    p_exc = exc_rate / total_rate
    neuron = Neuron(params)
    n_spikes = 0
    t = 0.0
    scale = 1.0 / total_rate
    while True:
        arrivals = t + np.cumsum(rng.exponential(scale, size=4096))
        stop = int(np.searchsorted(arrivals, duration))
        kinds = rng.random(stop) < p_exc
        for at, is_exc in zip(arrivals[:stop], kinds):
            neuron.integrate_to(at)
            w = efficacy_each if is_exc else -inh_efficacy
            if neuron.receive(w, at):
                n_spikes += 1
        if stop < len(arrivals):
            break
        t = arrivals[-1]
    rate = n_spikes / duration
    return rate, float(np.sqrt(n_spikes)) / duration


def gain_curve(
    params: NeuronParams,
    rates: list[float],
    n_sources: int = 64,
    efficacy_each: float = 0.05,
    duration: float = 10.0,
    seed: int = 0,
) -> list[tuple[float, float, float]]:
    """Sweep the per-source rate and return (input_rate_hz, output_rate_hz, stderr_hz) rows."""
    rows = []
    for i, r in enumerate(rates):
        rng = stream_rng(seed, f"gain-curve/{i}")
        out, se = transfer_function(params, n_sources, r, efficacy_each, duration, rng)
        rows.append((float(r), out, se))
    return rows


def write_gain_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("input_rate_hz,output_rate_hz,stderr_hz\n")
        for r, out, se in rows:
            fh.write(f"{r:g},{out:.6f},{se:.6f}\n")
