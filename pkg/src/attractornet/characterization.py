"""Control-procedure experiments: gain inversion, LTP/LTD probability map, ETF.

Three runnable characterizations mirror how the system is tuned before any
learning experiment:

1. the single-neuron gain curve (see `neuron.transfer_function`) and its
   numerical inversion, used to find the drive that makes a probe neuron fire
   at a requested rate;
2. the LTP/LTD transition-probability map over the (nu_pre, nu_post) plane,
   measured with probe neurons whose firing is set by non-plastic drive while
   zero-efficacy plastic synapses observe controlled presynaptic trains;
3. the Effective Transfer Function (ETF) of an excitatory subpopulation: its
   recurrent output is severed and replaced by Poisson trains at a clamped
   rate nu_in through the same efficacies, the rest of the network (inhibition
   included) reacting freely; the measured output rate as a function of nu_in
   crosses the identity at the candidate attractor rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .events import stream_rng
from .network import Network, NetworkConfig, population_rate
from .neuron import NeuronParams, transfer_function


class CalibrationError(RuntimeError):
    pass


def calibrate_drive(
    params: NeuronParams,
    target_hz: float,
    n_sources: int = 64,
    efficacy: float = 0.05,
    max_rate_each: float = 200.0,
    duration: float = 5.0,
    tolerance: float = 0.1,
    seed: int = 0,
    inh_rate: float = 0.0,
    inh_efficacy: float = 0.0,
) -> float:
    """Per-source Poisson rate that makes the neuron fire at target_hz.

    Inverts the measured transfer function by monotone bisection; accepts
    when the check measurement lands within ``tolerance`` (relative) of the
    target.  Raises CalibrationError when the target is outside the
    achievable range.  An inhibitory Poisson background, if given, stays
    fixed while the excitatory drive is searched.
    """
    if target_hz == 0:
        return 0.0

    # low targets need longer windows: the rate estimate's relative noise is
    # 1/sqrt(target * T), so hold target * T at >= 400 spikes (5% noise)
    duration = max(duration, 400.0 / target_hz)
    calls = [0]

    def measure(rate_each: float, t: float = duration) -> float:
        calls[0] += 1
        rng = stream_rng(seed, f"calibration/{calls[0]}")
        return transfer_function(params, n_sources, rate_each, efficacy, t, rng,
                                 inh_rate, inh_efficacy)[0]

    hi_out = measure(max_rate_each)
    if hi_out < target_hz:
        raise CalibrationError(
            f"target {target_hz} Hz unreachable: achievable range is about [0, {hi_out:.1f}] Hz"
        )
    lo, hi = 0.0, max_rate_each
    for _ in range(14):
        mid = 0.5 * (lo + hi)
        if measure(mid) < target_hz:
            lo = mid
        else:
            hi = mid
    rate = 0.5 * (lo + hi)
    check = measure(rate, 2 * duration)
    if abs(check - target_hz) > tolerance * target_hz:
        raise CalibrationError(
            f"calibration for {target_hz} Hz converged to {check:.2f} Hz "
            f"(outside {tolerance:.0%}); achievable range is about [0, {hi_out:.1f}] Hz"
        )
    return rate


# ------------------------------------------------------------ plasticity map


@dataclass
class PlasticityProtocol:
    n_neurons: int = 64          # probe neurons per grid point
    n_nonplastic: int = 64       # excitatory driving synapses per probe neuron
    j_nonplastic: float = 0.05   # their efficacy
    n_plastic: int = 64          # observed zero-efficacy plastic synapses per neuron
    window: float = 2.0          # observation window, s
    n_trials: int = 1
    # balanced background: fixed inhibitory Poisson drive so that low output
    # rates come with a low-hanging potential, as in the recurrent network,
    # instead of a slow full-range ramp
    inh_rate: float = 4000.0     # total inhibitory event rate, Hz
    j_inh_source: float = 0.05   # magnitude per inhibitory event


@dataclass
class PlasticityMap:
    nu_pre: np.ndarray
    nu_post: np.ndarray
    p_ltp: np.ndarray     # shape (len(nu_pre), len(nu_post))
    p_ltp_se: np.ndarray
    p_ltd: np.ndarray
    p_ltd_se: np.ndarray
    n_probes: int
    protocol: PlasticityProtocol = field(default_factory=PlasticityProtocol)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("nu_pre,nu_post,p_ltp,p_ltp_se,p_ltd,p_ltd_se,n\n")
            for i, fpre in enumerate(self.nu_pre):
                for j, fpost in enumerate(self.nu_post):
                    fh.write(
                        f"{fpre:g},{fpost:g},{self.p_ltp[i, j]:.6f},{self.p_ltp_se[i, j]:.6f},"
                        f"{self.p_ltd[i, j]:.6f},{self.p_ltd_se[i, j]:.6f},{self.n_probes}\n"
                    )


def _probe_neuron_anchors(params: NeuronParams, exc_rate: float, efficacy: float,
                          window: float, rng, inh_rate: float = 0.0,
                          inh_efficacy: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one probe neuron; return (anchor_times, anchor_potentials).

    The potential at any t is max(floor, v_k - leak*(t - t_k)) for the last
    anchor k at or before t.  Anchors are laid down at every accepted input.
    Excitatory and inhibitory Poisson drives are merged into one train.
    """
    anchors_t = [0.0]
    anchors_v = [params.v_reset]
    total_rate = exc_rate + inh_rate
    if total_rate > 0:
        p_exc = exc_rate / total_rate
        arrivals = []
        t = 0.0
        while True:
            chunk = t + np.cumsum(rng.exponential(1.0 / total_rate, size=2048))
            stop = int(np.searchsorted(chunk, window))
            arrivals.append(chunk[:stop])
            if stop < len(chunk):
                break
            t = chunk[-1]
        arrivals = np.concatenate(arrivals)
        kinds = rng.random(len(arrivals)) < p_exc
        v = params.v_reset
        t_prev = 0.0
        refr_until = 0.0
        for at, is_exc in zip(arrivals, kinds):
            v = max(params.floor, v - params.leak * (at - t_prev))
            t_prev = at
            if at < refr_until:
                continue
            v += efficacy if is_exc else -inh_efficacy
            if v >= params.theta:
                v = params.v_reset
                refr_until = at + params.tau_arp
            v = min(max(v, params.floor), params.theta)
            anchors_t.append(at)
            anchors_v.append(v)
    return np.asarray(anchors_t), np.asarray(anchors_v)


def _synapse_walk(x0: float, pre_times: np.ndarray, counts: np.ndarray,
                  neuron_of_syn: np.ndarray, anchors_t: np.ndarray, anchors_v: np.ndarray,
                  t_big: float, params_n: NeuronParams, params_s, window: float) -> np.ndarray:
    """Vectorized internal-variable walk for many synapses sharing probe neurons.

    ``pre_times`` is (n_syn, max_count) with per-synapse sorted spike times,
    valid up to ``counts``.  ``anchors_t`` holds all neurons' anchors offset
    by neuron_index * t_big, so one searchsorted resolves the post potential.
    """
    n_syn = len(counts)
    x = np.full(n_syn, x0)
    t_prev = np.zeros(n_syn)
    base = neuron_of_syn * t_big
    for k in range(pre_times.shape[1]):
        live = k < counts
        if not np.any(live):
            break
        t_k = pre_times[:, k]
        dt = np.where(live, t_k - t_prev, 0.0)
        up = x > params_s.x_theta
        down = x < params_s.x_theta
        x = np.where(up, np.minimum(1.0, x + params_s.drift_up * dt), x)
        x = np.where(down, np.maximum(0.0, x - params_s.drift_down * dt), x)
        q = base + np.where(live, t_k, 0.0)
        j = np.searchsorted(anchors_t, q, side="right") - 1
        v_post = np.maximum(params_n.floor, anchors_v[j] - params_n.leak * (q - anchors_t[j]))
        gate = v_post > params_s.v_gate
        jumped = np.where(gate, np.minimum(1.0, x + params_s.jump_up),
                          np.maximum(0.0, x - params_s.jump_down))
        x = np.where(live, jumped, x)
        t_prev = np.where(live, t_k, t_prev)
    # final drift to the end of the window
    dt = window - t_prev
    up = x > params_s.x_theta
    down = x < params_s.x_theta
    x = np.where(up, np.minimum(1.0, x + params_s.drift_up * dt), x)
    x = np.where(down, np.maximum(0.0, x - params_s.drift_down * dt), x)
    return x


def measure_plasticity_map(
    nu_pre_grid,
    nu_post_grid,
    neuron_params: NeuronParams | None = None,
    synapse_params=None,
    protocol: PlasticityProtocol | None = None,
    seed: int = 0,
) -> PlasticityMap:
    """LTP/LTD transition probabilities over the (nu_pre, nu_post) grid.

    Each probe neuron is driven to nu_post by calibrated non-plastic Poisson
    drive while its zero-efficacy plastic synapses receive independent trains
    at nu_pre; transitions of the binary state after the observation window
    are counted.
    """
    from .synapse import SynapseParams

    neuron_params = neuron_params or NeuronParams()
    synapse_params = synapse_params or SynapseParams()
    protocol = protocol or PlasticityProtocol()
    nu_pre_grid = np.asarray(nu_pre_grid, dtype=float)
    nu_post_grid = np.asarray(nu_post_grid, dtype=float)
    if np.any(nu_pre_grid < 0) or np.any(nu_post_grid < 0):
        raise ValueError("grid rates must be non-negative")

    drives = {
        float(nu): calibrate_drive(
            neuron_params, float(nu), protocol.n_nonplastic, protocol.j_nonplastic, seed=seed,
            inh_rate=protocol.inh_rate, inh_efficacy=protocol.j_inh_source,
        )
        for nu in np.unique(nu_post_grid)
    }

    n_syn = protocol.n_neurons * protocol.n_plastic
    n_probes = n_syn * protocol.n_trials
    t_big = protocol.window + 10.0
    shape = (len(nu_pre_grid), len(nu_post_grid))
    p_ltp = np.zeros(shape)
    p_ltd = np.zeros(shape)

    for j, nu_post in enumerate(nu_post_grid):
        for i, nu_pre in enumerate(nu_pre_grid):
            ltp_hits = 0
            ltd_hits = 0
            for trial in range(protocol.n_trials):
                rng = stream_rng(seed, f"plasticity-map/{nu_pre:g}/{nu_post:g}/{trial}")
                anchors_t = []
                anchors_v = []
                for n in range(protocol.n_neurons):
                    at, av = _probe_neuron_anchors(
                        neuron_params,
                        protocol.n_nonplastic * drives[float(nu_post)],
                        protocol.j_nonplastic,
                        protocol.window,
                        rng,
                        inh_rate=protocol.inh_rate,
                        inh_efficacy=protocol.j_inh_source,
                    )
                    anchors_t.append(at + n * t_big)
                    anchors_v.append(av)
                anchors_t = np.concatenate(anchors_t)
                anchors_v = np.concatenate(anchors_v)
                neuron_of_syn = np.repeat(np.arange(protocol.n_neurons), protocol.n_plastic)

                def pre_trains(rng):
                    counts = rng.poisson(nu_pre * protocol.window, size=n_syn)
                    mx = max(1, counts.max())
                    times = np.sort(rng.random((n_syn, mx)) * protocol.window, axis=1)
                    # invalidate entries beyond each synapse's count
                    col = np.arange(mx)
                    times[col[None, :] >= counts[:, None]] = protocol.window
                    return times, counts

                if nu_pre > 0:
                    times, counts = pre_trains(rng)
                    x_end = _synapse_walk(0.0, times, counts, neuron_of_syn, anchors_t,
                                          anchors_v, t_big, neuron_params, synapse_params,
                                          protocol.window)
                    ltp_hits += int(np.sum(x_end > synapse_params.x_theta))
                    times, counts = pre_trains(rng)
                    x_end = _synapse_walk(1.0, times, counts, neuron_of_syn, anchors_t,
                                          anchors_v, t_big, neuron_params, synapse_params,
                                          protocol.window)
                    ltd_hits += int(np.sum(x_end <= synapse_params.x_theta))
            p_ltp[i, j] = ltp_hits / n_probes
            p_ltd[i, j] = ltd_hits / n_probes

    se = lambda p: np.sqrt(np.maximum(p * (1 - p), 1e-12) / n_probes)
    return PlasticityMap(nu_pre_grid, nu_post_grid, p_ltp, se(p_ltp), p_ltd, se(p_ltd),
                         n_probes, protocol)


# -------------------------------------------------------------------- ETF


@dataclass
class EtfCurve:
    nu_in: np.ndarray
    nu_out: np.ndarray
    stderr: np.ndarray
    stationary: np.ndarray        # per-sample steady-state flag
    potentiated_fraction: float

    def fixed_points(self) -> list[tuple[float, str]]:
        return find_fixed_points(self.nu_in, self.nu_out)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("nu_in,nu_out,stderr,potentiated_fraction\n")
            for i in range(len(self.nu_in)):
                fh.write(
                    f"{self.nu_in[i]:g},{self.nu_out[i]:.6f},{self.stderr[i]:.6f},"
                    f"{self.potentiated_fraction:g}\n"
                )
            for rate, kind in self.fixed_points():
                fh.write(f"# fixed_point,{rate:.6f},{kind}\n")


def _etf_point(
    config: NetworkConfig,
    subpop: np.ndarray,
    nu_in: float,
    fraction: float,
    duration: float,
    discard: float,
    seed_tag: str,
) -> tuple[float, float, bool]:
    net = Network(config)
    net.force_potentiated_fraction(subpop, fraction, config.rng(f"etf-matrix/{fraction:g}"))
    net.plasticity_enabled = False

    # merged replacement sources: severed synapses grouped by (post, efficacy)
    sp = config.synapse
    flags = net.potentiated_flags()
    pre_of = net.ee.pre_of_edges()
    in_sub = np.zeros(net.n_exc, dtype=bool)
    in_sub[subpop] = True
    groups: dict[tuple[int, float], int] = {}
    sev = np.nonzero(in_sub[pre_of])[0]
    for e in sev:
        key = (int(net.ee.post[e]), sp.j_pot if flags[e] else sp.j_dep)
        groups[key] = groups.get(key, 0) + 1
    for i in np.nonzero(in_sub)[0]:
        lo, hi = net.ei.indptr[i], net.ei.indptr[i + 1]
        for q in net.ei.post[lo:hi]:
            key = (int(q), config.j_ei)
            groups[key] = groups.get(key, 0) + 1
    net.sever_output(subpop)

    if nu_in > 0:
        rng = stream_rng(config.seed, f"etf-input/{seed_tag}")
        for (post, w), k in sorted(groups.items()):
            sid = net.add_source(np.array([post]), np.array([w]))
            net.scheduler.poisson_source(k * nu_in, ("X", sid), (0.0, duration), rng)

    log = net.run_until(duration)
    t_mid = discard + (duration - discard) / 2
    r1 = population_rate(log, "E", subpop, (discard, t_mid))
    r2 = population_rate(log, "E", subpop, (t_mid, duration))
    nu_out = population_rate(log, "E", subpop, (discard, duration))
    n_spk = nu_out * len(subpop) * (duration - discard)
    se = np.sqrt(max(n_spk, 1.0)) / (len(subpop) * (duration - discard))
    half_se = np.sqrt(max(n_spk, 1.0) / 2) / (len(subpop) * (duration - discard) / 2)
    stationary = abs(r1 - r2) < 2 * np.sqrt(2) * half_se + 1e-9
    return nu_out, float(se), bool(stationary)


def measure_etf(
    config: NetworkConfig,
    subpop,
    nu_in_grid,
    potentiated_fraction: float,
    duration: float = 1.5,
    discard: float = 0.5,
) -> EtfCurve:
    """ETF of a subpopulation at a forced potentiated-fraction level.

    The subpopulation's recurrent output is severed and each severed synapse
    replaced by an independent Poisson train at nu_in through its frozen
    efficacy (merged per target for speed; superposed Poisson trains are
    equivalent).  Plasticity is frozen throughout.
    """
    subpop = np.asarray(subpop, dtype=int)
    nu_in_grid = np.asarray(nu_in_grid, dtype=float)
    out = np.zeros(len(nu_in_grid))
    se = np.zeros(len(nu_in_grid))
    flags = np.zeros(len(nu_in_grid), dtype=bool)
    for i, nu in enumerate(nu_in_grid):
        out[i], se[i], flags[i] = _etf_point(
            config, subpop, float(nu), potentiated_fraction, duration, discard,
            seed_tag=f"{potentiated_fraction:g}/{nu:g}",
        )
    return EtfCurve(nu_in_grid, out, se, flags, potentiated_fraction)


def find_fixed_points(nu_in, nu_out, merge_tol: float = 0.5) -> list[tuple[float, str]]:
    """Fixed points of nu_out(nu) = nu by linear interpolation between samples.

    Returns (rate, 'stable'|'unstable') in increasing rate order; stability is
    first-order only, from the secant slope across the crossing.  Roots closer
    than ``merge_tol`` are reported once.  A root at exactly zero with
    nu_out(0) = 0 is always reported stable: the silent state generates no
    recurrent input and is therefore absorbing.
    """
    nu_in = np.asarray(nu_in, dtype=float)
    nu_out = np.asarray(nu_out, dtype=float)
    if len(nu_in) < 3:
        raise ValueError("need at least 3 samples to locate fixed points")
    g = nu_out - nu_in
    roots: list[tuple[float, float]] = []  # (rate, slope)

    def secant(i):
        return (nu_out[i + 1] - nu_out[i]) / (nu_in[i + 1] - nu_in[i])

    for i in range(len(nu_in)):
        if g[i] == 0.0:
            if i == 0:
                slope = secant(0)
            elif i == len(nu_in) - 1:
                slope = secant(i - 1)
            else:
                slope = (nu_out[i + 1] - nu_out[i - 1]) / (nu_in[i + 1] - nu_in[i - 1])
            roots.append((float(nu_in[i]), slope))
        if i + 1 < len(nu_in) and g[i] * g[i + 1] < 0:
            r = nu_in[i] - g[i] * (nu_in[i + 1] - nu_in[i]) / (g[i + 1] - g[i])
            roots.append((float(r), secant(i)))

    roots.sort()
    merged: list[tuple[float, str]] = []
    for rate, slope in roots:
        if merged and abs(rate - merged[-1][0]) <= merge_tol:
            continue
        if rate == 0.0 and nu_out[0] == 0.0:
            # the silent state is absorbing: with no activity there is no
            # recurrent input, so it persists regardless of the local slope
            merged.append((0.0, "stable"))
            continue
        merged.append((rate, "stable" if slope < 1.0 else "unstable"))
    return merged


def bifurcation_sweep(
    config: NetworkConfig,
    subpop,
    fractions,
    nu_in_grid,
    duration: float = 1.5,
    discard: float = 0.5,
) -> dict[float, EtfCurve]:
    """Measure the ETF at each potentiated fraction; used to locate the
    transition from one to two stable fixed points."""
    return {
        float(f): measure_etf(config, subpop, nu_in_grid, float(f), duration, discard)
        for f in fractions
    }
