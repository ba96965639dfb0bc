"""Reference oracles for the event-driven dynamics.

Both oracles advance state on a fixed 1 microsecond clock, recomputing the
continuous dynamics tick by tick, and must agree with the lazy event-driven
implementations to within 1e-9 on identical input traces.
"""

from collections import defaultdict

US_PER_S = 1_000_000


def clock_neuron(params, inputs, t_end_us):
    """Fixed-step integrate-and-fire: 1 us decay steps plus input deliveries.

    ``inputs`` is a sorted list of (t_us, efficacy); several inputs in one
    tick are applied in list order.  Returns (final_v, [spike times, us]).
    """
    by_tick = defaultdict(list)
    for t_us, w in inputs:
        by_tick[t_us].append(w)
    v = params.v_reset
    refractory_until = 0.0
    spikes = []
    step = params.leak * 1e-6
    for t_us in range(t_end_us + 1):
        if t_us > 0:
            v = max(params.floor, v - step)
        if t_us not in by_tick:
            continue
        t = t_us / US_PER_S
        for w in by_tick[t_us]:
            if t < refractory_until:
                continue
            nv = v + w
            if w > 0 and nv >= params.theta:
                spikes.append(t_us)
                v = params.v_reset
                refractory_until = t + params.tau_arp
            else:
                v = min(max(nv, params.floor), params.theta)
    return v, spikes


def clock_synapse(params, x0, events, t_end_us):
    """Fixed-step bistable synapse: 1 us drift steps plus presynaptic jumps.

    ``events`` is a sorted list of (t_us, v_post).  Returns the final x.
    """
    by_tick = defaultdict(list)
    for t_us, v_post in events:
        by_tick[t_us].append(v_post)
    x = x0
    up = params.drift_up * 1e-6
    down = params.drift_down * 1e-6
    for t_us in range(t_end_us + 1):
        if t_us > 0:
            if x > params.x_theta:
                x = min(1.0, x + up)
            elif x < params.x_theta:
                x = max(0.0, x - down)
        for v_post in by_tick.get(t_us, ()):
            if v_post > params.v_gate:
                x = min(1.0, x + params.jump_up)
            else:
                x = max(0.0, x - params.jump_down)
    return x


def random_neuron_scenario(rng, max_t_us=50_000):
    """Random input trace for one neuron: mixed-sign efficacies, ~2 kHz."""
    n = int(rng.integers(20, 120))
    times = sorted(int(t) for t in rng.integers(1, max_t_us, size=n))
    weights = rng.uniform(-0.3, 0.4, size=n)
    return [(t, float(w)) for t, w in zip(times, weights)], max_t_us


def random_synapse_scenario(rng, max_t_us=50_000):
    """Random presynaptic spike trace with random postsynaptic potentials."""
    n = int(rng.integers(10, 80))
    times = sorted(int(t) for t in rng.integers(1, max_t_us, size=n))
    v_posts = rng.uniform(0.0, 1.0, size=n)
    x0 = float(rng.random())
    return x0, [(t, float(v)) for t, v in zip(times, v_posts)], max_t_us


def run_event_neuron(params, inputs, t_end_us):
    """Drive the event-driven Neuron with the same trace as clock_neuron."""
    from attractornet.neuron import Neuron

    neuron = Neuron(params)
    spikes = []
    for t_us, w in inputs:
        t = t_us / US_PER_S
        neuron.integrate_to(t)
        if neuron.receive(w, t):
            spikes.append(t_us)
    neuron.integrate_to(t_end_us / US_PER_S)
    return neuron.v, spikes


def run_event_synapse(params, x0, events, t_end_us):
    """Drive the event-driven BistableSynapse with the clock oracle's trace."""
    from attractornet.synapse import BistableSynapse

    syn = BistableSynapse(params, x0=x0)
    for t_us, v_post in events:
        syn.drift_to(t_us / US_PER_S)
        syn.on_presynaptic_spike(v_post, t_us / US_PER_S)
    syn.drift_to(t_end_us / US_PER_S)
    return syn.x
