"""Two-population recurrent network with sparse random topology and plastic E->E synapses.

The network runs as one event-driven system: every delivered spike first
updates the plastic synapses leaving its source (drift plus the gated jump,
using each post-neuron's potential at spike time), then injects the resulting
efficacies into the post-neurons, emitting and scheduling any new spikes.

Internally neurons live in flat arrays (global index: excitatory first, then
inhibitory) and each projection is stored CSR-style grouped by presynaptic
unit, so a spike touches all of its targets in one vectorized pass.  The
arithmetic is the same as in the scalar `Neuron`/`BistableSynapse` reference
classes, which the test suite holds it to.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .events import EventLog, Scheduler, stream_rng, to_us, US_PER_S
from .neuron import NeuronParams
from .synapse import SynapseParams

RETINA_SIDE = 128
GRID_SIDE = 14


@dataclass
class NetworkConfig:
    n_exc: int = 196
    n_inh: int = 43
    p_ee: float = 0.25           # E -> E connection probability
    p_ie: float = 0.5            # I -> E
    p_ei: float = 0.3            # E -> I
    p_retina_inh: float = 0.02   # retina macro-pixel -> I
    initial_potentiated_fraction: float = 0.05
    j_ei: float = 0.08           # E -> I efficacy
    j_inh: float = 0.10          # I -> E efficacy magnitude (applied negative)
    j_stim: float = 0.45         # retina -> E efficacy
    j_stim_inh: float = 1.0      # retina -> I efficacy (strong, so a new
                                 # stimulus can quench a running attractor)
    delay: float = 0.0005        # base spike delivery latency, s
    delay_jitter: float = 0.002  # per-neuron uniform latency spread, s
    seed: int = 1
    neuron_mismatch_cv: float = 0.1
    synapse_mismatch_cv: float = 0.4  # per-synapse jump/drift spread; the
                                      # high-jump_down tail keeps the mature
                                      # matrix churning while the bulk
                                      # consolidates (see README)
    neuron: NeuronParams = field(default_factory=NeuronParams)
    synapse: SynapseParams = field(default_factory=SynapseParams)
    stream_seeds: dict = field(default_factory=dict)  # per-stream seed overrides

    def __post_init__(self) -> None:
        for name in ("p_ee", "p_ie", "p_ei", "p_retina_inh", "initial_potentiated_fraction"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.n_exc <= 0 or self.n_inh <= 0:
            raise ValueError("population sizes must be positive")
        if self.delay < 0:
            raise ValueError("delay must be >= 0")

    def rng(self, stream: str) -> np.random.Generator:
        return stream_rng(self.stream_seeds.get(stream, self.seed), stream)


class MacroPixelMap:
    """Balanced 14x14 tiling of the 128x128 retina, one E neuron per cell.

    128 does not divide by 14; stripe boundaries are floor(i*128/14), which
    interleaves twelve stripes of 9 pixels with two of 10 in each dimension.
    Cell (r, c) maps bijectively to excitatory neuron r*14 + c.
    """

    def __init__(self, retina_side: int = RETINA_SIDE, grid_side: int = GRID_SIDE) -> None:
        self.retina_side = retina_side
        self.grid_side = grid_side
        self.boundaries = np.array(
            [i * retina_side // grid_side for i in range(grid_side + 1)], dtype=int
        )

    @property
    def n_cells(self) -> int:
        return self.grid_side ** 2

    def neuron_of_cell(self, row: int, col: int) -> int:
        return row * self.grid_side + col

    def cell_of_neuron(self, idx: int) -> tuple[int, int]:
        return divmod(idx, self.grid_side)

    def stripe_sizes(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def pixels_in_cell(self, row: int, col: int) -> int:
        sizes = self.stripe_sizes()
        return int(sizes[row] * sizes[col])


@dataclass
class Projection:
    """CSR adjacency for one projection: targets grouped by presynaptic unit."""
    indptr: np.ndarray   # int64, len n_pre + 1
    post: np.ndarray     # int32 global neuron ids, ascending within each pre

    @property
    def n_edges(self) -> int:
        return int(self.indptr[-1])

    def pre_of_edges(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.indptr) - 1), np.diff(self.indptr))


def _sample_projection(rng, n_pre, n_post, p, post_offset=0, ban_self=False) -> Projection:
    mask = rng.random((n_pre, n_post)) < p
    if ban_self:
        np.fill_diagonal(mask, False)
    counts = mask.sum(axis=1)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    post = (np.nonzero(mask)[1] + post_offset).astype(np.int32)
    return Projection(indptr, post)


def _jitter(rng, nominal: float, cv: float, size: int) -> np.ndarray:
    vals = np.full(size, nominal, dtype=np.float64)
    if cv > 0:
        vals = vals * np.maximum(0.05, 1.0 + cv * rng.standard_normal(size))
    return vals


class Network:
    """One built network instance: topology, neuron state, scheduler and sources."""

    def __init__(self, config: NetworkConfig) -> None:
        self.cfg = config
        self.map = MacroPixelMap()
        if config.n_exc != self.map.n_cells:
            raise ValueError(
                f"n_exc ({config.n_exc}) must equal the macro-pixel count ({self.map.n_cells})"
            )
        rng_top = config.rng("topology")
        rng_mis = config.rng("mismatch")
        ne, ni = config.n_exc, config.n_inh
        n = ne + ni
        self.n_exc, self.n_inh = ne, ni

        # projections, drawn in a fixed order from the topology stream
        self.ee = _sample_projection(rng_top, ne, ne, config.p_ee, ban_self=True)
        self.ei = _sample_projection(rng_top, ne, ni, config.p_ei, post_offset=ne)
        self.ie = _sample_projection(rng_top, ni, ne, config.p_ie)
        self.retina_i = _sample_projection(rng_top, ne, ni, config.p_retina_inh, post_offset=ne)
        self.ee_x = np.where(
            rng_top.random(self.ee.n_edges) < config.initial_potentiated_fraction, 1.0, 0.0
        )
        self.ee_last_us = np.zeros(self.ee.n_edges, dtype=np.int64)

        # per-neuron parameters with optional mismatch jitter
        np_ = config.neuron
        cv = config.neuron_mismatch_cv
        self.theta = _jitter(rng_mis, np_.theta, cv, n)
        self.leak = _jitter(rng_mis, np_.leak, cv, n)
        self.v_reset = np.full(n, np_.v_reset)
        self.floor = np.full(n, np_.floor)
        self.tau_arp_us = np.full(n, to_us(np_.tau_arp), dtype=np.int64)

        # per-synapse plasticity parameters with optional mismatch jitter;
        # a dedicated stream so load_topology can reproduce the same draws
        self._draw_synapse_mismatch()

        # neuron state
        self.v = np.full(n, np_.v_reset, dtype=np.float64)
        self.last_us = np.zeros(n, dtype=np.int64)
        self.refr_us = np.zeros(n, dtype=np.int64)

        self.plasticity_enabled = True
        self._severed = np.zeros(ne, dtype=bool)
        # per-neuron output latency: a fixed base plus a once-drawn uniform
        # spread, standing in for heterogeneous circuit/routing delays.  The
        # spread keeps recurrent activity asynchronous; with zero-latency
        # delivery the whole population locks into all-fire/all-silent waves.
        lat = config.delay + config.delay_jitter * rng_mis.random(n)
        self._delay_us = np.maximum(1, np.rint(lat * US_PER_S)).astype(np.int64)

        # external sources: address ("R", k) drives macro-pixel k's targets;
        # ("X", i) drives a registered generic source
        self._retina_targets: list[np.ndarray] = []
        self._retina_weights: list[np.ndarray] = []
        for k in range(ne):
            lo, hi = self.retina_i.indptr[k], self.retina_i.indptr[k + 1]
            targets = np.concatenate([[k], self.retina_i.post[lo:hi]]).astype(np.int64)
            self._retina_targets.append(targets)
            w = np.full(len(targets), config.j_stim_inh)
            w[0] = config.j_stim
            self._retina_weights.append(w)
        self._x_targets: list[np.ndarray] = []
        self._x_weights: list[np.ndarray] = []

        self.scheduler = Scheduler()
        self.scheduler.spike_handler = self._handle_spike

    # ------------------------------------------------------------ bookkeeping

    @property
    def log(self) -> EventLog:
        return self.scheduler.log

    @property
    def now(self) -> float:
        return self.scheduler.now

    def add_source(self, targets: np.ndarray, weights: np.ndarray) -> int:
        """Register an external source; its spikes carry address ("X", id)."""
        self._x_targets.append(np.asarray(targets, dtype=np.int64))
        self._x_weights.append(np.asarray(weights, dtype=np.float64))
        return len(self._x_targets) - 1

    def sever_output(self, members: np.ndarray) -> None:
        """Suppress all recurrent output (E->E and E->I) of the given E neurons."""
        self._severed[np.asarray(members, dtype=int)] = True

    def edges_within(self, pre_members, post_members) -> np.ndarray:
        """Indices of E->E edges with pre in pre_members and post in post_members."""
        pre_mask = np.zeros(self.n_exc, dtype=bool)
        pre_mask[np.asarray(pre_members, dtype=int)] = True
        post_mask = np.zeros(self.n_exc, dtype=bool)
        post_mask[np.asarray(post_members, dtype=int)] = True
        return np.nonzero(pre_mask[self.ee.pre_of_edges()] & post_mask[self.ee.post])[0]

    def force_potentiated_fraction(self, members, fraction: float, rng) -> None:
        """Assign the within-group synaptic matrix a given potentiated fraction.

        Exactly round(fraction * n) edges, chosen uniformly, are set
        potentiated (X = 1); the rest are set depressed (X = 0).
        """
        edges = self.edges_within(members, members)
        n_pot = int(round(fraction * len(edges)))
        order = rng.permutation(len(edges))
        self.ee_x[edges] = 0.0
        self.ee_x[edges[order[:n_pot]]] = 1.0

    def potentiated_flags(self) -> np.ndarray:
        return self.ee_x > self.cfg.synapse.x_theta

    # --------------------------------------------------------------- dynamics

    def run_until(self, t_end: float) -> EventLog:
        return self.scheduler.run_until(t_end)

    def _handle_spike(self, pop: str, idx: int, t_us: int) -> None:
        if pop == "E":
            self._deliver_from_exc(idx, t_us)
        elif pop == "I":
            lo, hi = self.ie.indptr[idx], self.ie.indptr[idx + 1]
            self._inject(self.ie.post[lo:hi], -self.cfg.j_inh, t_us)
        elif pop == "R":
            self._inject(self._retina_targets[idx], self._retina_weights[idx], t_us)
        elif pop == "X":
            self._inject(self._x_targets[idx], self._x_weights[idx], t_us)
        else:
            raise ValueError(f"spike from unknown population {pop!r}")

    def _deliver_from_exc(self, i: int, t_us: int) -> None:
        if self._severed[i]:
            return
        sp = self.cfg.synapse
        lo, hi = self.ee.indptr[i], self.ee.indptr[i + 1]
        if hi > lo:
            sl = slice(lo, hi)
            posts = self.ee.post[sl]
            x = self.ee_x[sl]
            if self.plasticity_enabled:
                # bistability drift since the last synaptic event
                dt = (t_us - self.ee_last_us[sl]) * 1e-6
                up = x > sp.x_theta
                down = x < sp.x_theta
                x = np.where(up, np.minimum(1.0, x + self.syn_du[sl] * dt), x)
                x = np.where(down, np.maximum(0.0, x - self.syn_dd[sl] * dt), x)
                # gated jump against the post potential at spike time (pre-injection)
                dtp = (t_us - self.last_us[posts]) * 1e-6
                v_post = np.maximum(self.floor[posts], self.v[posts] - self.leak[posts] * dtp)
                gate = v_post > sp.v_gate
                x = np.where(
                    gate,
                    np.minimum(1.0, x + self.syn_a[sl]),
                    np.maximum(0.0, x - self.syn_b[sl]),
                )
                self.ee_x[sl] = x
                self.ee_last_us[sl] = t_us
            w = np.where(x > sp.x_theta, sp.j_pot, sp.j_dep)
            self._inject(posts, w, t_us)
        lo, hi = self.ei.indptr[i], self.ei.indptr[i + 1]
        if hi > lo:
            self._inject(self.ei.post[lo:hi], self.cfg.j_ei, t_us)

    def _inject(self, ids: np.ndarray, w, t_us: int) -> None:
        """Integrate targets to t, add efficacies, emit threshold crossings."""
        if len(ids) == 0:
            return
        dt = (t_us - self.last_us[ids]) * 1e-6
        v = np.maximum(self.floor[ids], self.v[ids] - self.leak[ids] * dt)
        ok = self.refr_us[ids] <= t_us  # inputs inside the refractory window are discarded
        v_in = v + np.where(ok, w, 0.0)
        spiked = ok & (v_in >= self.theta[ids])
        v_new = np.clip(v_in, self.floor[ids], self.theta[ids])
        v_new = np.where(spiked, self.v_reset[ids], v_new)
        self.v[ids] = v_new
        self.last_us[ids] = t_us
        if np.any(spiked):
            fired = ids[spiked]
            self.refr_us[fired] = t_us + self.tau_arp_us[fired]
            for gid in fired:
                at_us = t_us + int(self._delay_us[gid])
                if gid < self.n_exc:
                    self.scheduler.schedule_spike_us(("E", int(gid)), at_us)
                else:
                    self.scheduler.schedule_spike_us(("I", int(gid - self.n_exc)), at_us)

    def _draw_synapse_mismatch(self) -> None:
        """(Re)draw per-synapse jump/drift jitter from its own named stream.

        Uses a stream separate from the neuron-mismatch draws so that a
        loaded topology with the same wiring gets the identical jitter the
        original build produced.
        """
        sp = self.cfg.synapse
        scv = self.cfg.synapse_mismatch_cv
        m = self.ee.n_edges
        rng = self.cfg.rng("mismatch-syn")
        self.syn_a = _jitter(rng, sp.jump_up, scv, m)
        self.syn_b = _jitter(rng, sp.jump_down, scv, m)
        self.syn_du = _jitter(rng, sp.drift_up, scv, m)
        self.syn_dd = _jitter(rng, sp.drift_down, scv, m)

    # -------------------------------------------------------------- topology IO

    def export_topology(self, path) -> None:
        """Text export, one edge per line: projection,pre,post,plastic_flag,x0."""
        with open(path, "w") as fh:
            pre_ee = self.ee.pre_of_edges()
            for e in range(self.ee.n_edges):
                fh.write(f"EE,{pre_ee[e]},{self.ee.post[e]},1,{float(self.ee_x[e])!r}\n")
            for name, proj, off in (
                ("EI", self.ei, self.n_exc),
                ("IE", self.ie, 0),
                ("RI", self.retina_i, self.n_exc),
            ):
                pre = proj.pre_of_edges()
                for e in range(proj.n_edges):
                    fh.write(f"{name},{pre[e]},{proj.post[e] - off},0,0.0\n")

    def load_topology(self, path) -> None:
        """Replace the wiring and plastic state with an exported topology."""
        edges: dict[str, list[tuple[int, int, float]]] = {"EE": [], "EI": [], "IE": [], "RI": []}
        with open(path) as fh:
            for line in fh:
                name, pre, post, _plastic, x0 = line.strip().split(",")
                edges[name].append((int(pre), int(post), float(x0)))

        def rebuild(rows, n_pre, post_offset):
            rows = sorted(rows)
            counts = np.zeros(n_pre, dtype=np.int64)
            post = np.empty(len(rows), dtype=np.int32)
            vals = np.empty(len(rows))
            for e, (p, q, x0) in enumerate(rows):
                counts[p] += 1
                post[e] = q + post_offset
                vals[e] = x0
            indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
            return Projection(indptr, post), vals

        self.ee, self.ee_x = rebuild(edges["EE"], self.n_exc, 0)
        self.ei, _ = rebuild(edges["EI"], self.n_exc, self.n_exc)
        self.ie, _ = rebuild(edges["IE"], self.n_inh, 0)
        self.retina_i, _ = rebuild(edges["RI"], self.n_exc, self.n_exc)
        self.ee_last_us = np.zeros(self.ee.n_edges, dtype=np.int64)
        self._draw_synapse_mismatch()
        # retina source target lists follow the wiring
        self._retina_targets = []
        self._retina_weights = []
        for k in range(self.n_exc):
            lo, hi = self.retina_i.indptr[k], self.retina_i.indptr[k + 1]
            targets = np.concatenate([[k], self.retina_i.post[lo:hi]]).astype(np.int64)
            w = np.full(len(targets), self.cfg.j_stim_inh)
            w[0] = self.cfg.j_stim
            self._retina_targets.append(targets)
            self._retina_weights.append(w)


def build(config: NetworkConfig) -> Network:
    """Build the network from its configuration (see NetworkConfig defaults)."""
    return Network(config)


def population_rate(
    log: EventLog, pop: str, members, window: tuple[float, float]
) -> float:
    """Mean rate of the member neurons over [t0, t1): spikes / (n * duration)."""
    members = np.asarray(list(members) if not isinstance(members, np.ndarray) else members)
    t0, t1 = window
    if t1 <= t0:
        raise ValueError(f"window end {t1} must exceed start {t0}")
    if len(members) == 0:
        raise ValueError("member set must not be empty")
    from .events import POP_CODES

    t = log.times_us
    in_window = (t >= to_us(t0)) & (t < to_us(t1))
    of_pop = log.pop_codes == POP_CODES[pop]
    member_mask = np.isin(log.indices, members)
    count = int(np.sum(in_window & of_pop & member_mask))
    return count / (len(members) * (t1 - t0))


def per_neuron_rates(
    log: EventLog, pop: str, n: int, window: tuple[float, float]
) -> np.ndarray:
    """Rate of every neuron 0..n-1 of a population over [t0, t1)."""
    from .events import POP_CODES

    t0, t1 = window
    t = log.times_us
    sel = (t >= to_us(t0)) & (t < to_us(t1)) & (log.pop_codes == POP_CODES[pop])
    counts = np.bincount(log.indices[sel], minlength=n)[:n]
    return counts / (t1 - t0)
