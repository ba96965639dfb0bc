"""End-to-end autonomous learning experiments and their observables.

A learning run simply presents the scheduled stimuli with plasticity always
on; there is no separate training or retrieval mode.  Observables mirror the
standard analysis set: population rate traces, synaptic-matrix snapshots with
per-group potentiated fractions, Hamming distances between consecutive
snapshots, the network's delay-period output rendered back onto the
macro-pixel grid, and pattern-completion scores for degraded stimuli.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .events import EventLog
from .network import MacroPixelMap, Network, per_neuron_rates, population_rate
from .stimulus import PresentationSchedule, StimulusPattern, degrade, encode

BACKGROUND = -1


def population_assignment(patterns: list[StimulusPattern], n_exc: int) -> np.ndarray:
    """Label each E neuron with the index of the pattern that activates it.

    Background neurons get label -1.  Patterns must be disjoint.
    """
    labels = np.full(n_exc, BACKGROUND, dtype=int)
    for k, p in enumerate(patterns):
        idx = p.neuron_indices()
        if np.any(labels[idx] != BACKGROUND):
            raise ValueError("patterns overlap; assignment must be unambiguous")
        labels[idx] = k
    return labels


@dataclass
class SynapticSnapshot:
    time: float
    flags: np.ndarray  # potentiated flag per E->E edge, topology order

    def write(self, path, pre: np.ndarray, post: np.ndarray) -> None:
        with open(path, "w") as fh:
            fh.write(f"# t={self.time:g}\n")
            for e in range(len(self.flags)):
                fh.write(f"{pre[e]},{post[e]},{int(self.flags[e])}\n")


def group_fractions(
    flags: np.ndarray,
    pre_of_edges: np.ndarray,
    post_of_edges: np.ndarray,
    assignment: np.ndarray,
    pattern_names: list[str],
) -> dict[str, float]:
    """Potentiated fraction per synapse group.

    Groups partition the E->E edges: one within-pattern group per pattern,
    plus inter-selective, selective->bkg, bkg->selective and bkg->bkg.
    """
    if np.any(pre_of_edges >= len(assignment)) or np.any(post_of_edges >= len(assignment)):
        raise ValueError("edge endpoints outside the assignment")
    a = assignment[pre_of_edges]
    b = assignment[post_of_edges]
    groups = {}
    for k, name in enumerate(pattern_names):
        groups[f"{name}->{name}"] = (a == k) & (b == k)
    groups["inter-selective"] = (a != b) & (a != BACKGROUND) & (b != BACKGROUND)
    groups["selective->bkg"] = (a != BACKGROUND) & (b == BACKGROUND)
    groups["bkg->selective"] = (a == BACKGROUND) & (b != BACKGROUND)
    groups["bkg->bkg"] = (a == BACKGROUND) & (b == BACKGROUND)
    out = {}
    for name, mask in groups.items():
        out[name] = float(flags[mask].mean()) if np.any(mask) else float("nan")
    return out


def hamming_series(snapshots: list[SynapticSnapshot]) -> list[int]:
    """Number of edges whose binary state differs between consecutive snapshots."""
    if len(snapshots) < 2:
        raise ValueError("need at least two snapshots")
    n = len(snapshots[0].flags)
    for s in snapshots:
        if len(s.flags) != n:
            raise ValueError("snapshots cover different edge sets")
    return [int(np.sum(a.flags != b.flags)) for a, b in zip(snapshots, snapshots[1:])]


def rate_traces(
    log: EventLog,
    assignment: np.ndarray,
    pattern_names: list[str],
    n_inh: int,
    t_end: float,
    bin_width: float = 0.1,
) -> dict[str, np.ndarray]:
    """Population rate traces in fixed bins: one per pattern, background, inhibition."""
    from .events import POP_CODES, US_PER_S

    edges = np.arange(0.0, t_end + bin_width, bin_width)
    t = log.times_us / US_PER_S
    pops = log.pop_codes
    idxs = log.indices
    out = {"t": edges[:-1]}

    def trace(mask, n_members):
        counts, _ = np.histogram(t[mask], bins=edges)
        return counts / (n_members * bin_width)

    e_mask = pops == POP_CODES["E"]
    for k, name in enumerate(pattern_names):
        members = np.nonzero(assignment == k)[0]
        out[name] = trace(e_mask & np.isin(idxs, members), max(len(members), 1))
    bkg = np.nonzero(assignment == BACKGROUND)[0]
    out["bkg"] = trace(e_mask & np.isin(idxs, bkg), max(len(bkg), 1))
    out["inh"] = trace(pops == POP_CODES["I"], n_inh)
    return out


def write_traces_csv(traces: dict[str, np.ndarray], path) -> None:
    names = [k for k in traces if k != "t"]
    with open(path, "w") as fh:
        fh.write("t_bin_s," + ",".join(f"{n}_hz" for n in names) + "\n")
        for i in range(len(traces["t"])):
            row = ",".join(f"{traces[n][i]:.4f}" for n in names)
            fh.write(f"{traces['t'][i]:.1f},{row}\n")


def delay_output_image(
    log: EventLog,
    window: tuple[float, float],
    pixel_map: MacroPixelMap,
    rate_threshold: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Delay-period activity mapped back onto the macro-pixel grid.

    Returns (rates, binary): per-cell mean rate of the mapped E neuron over
    the window, and its thresholded binary version.
    """
    rates = per_neuron_rates(log, "E", pixel_map.n_cells, window)
    grid = rates.reshape(pixel_map.grid_side, pixel_map.grid_side)
    return grid, grid >= rate_threshold


def write_image(grid: np.ndarray, path, binary: bool = False) -> None:
    with open(path, "w") as fh:
        for row in grid:
            if binary:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")
            else:
                fh.write(" ".join(f"{v:.2f}" for v in row) + "\n")


# -------------------------------------------------------------- learning run


@dataclass
class LearningResult:
    log: EventLog
    snapshots: list[SynapticSnapshot]
    schedule: PresentationSchedule
    pre_of_edges: np.ndarray
    post_of_edges: np.ndarray
    assignment: np.ndarray
    pattern_names: list[str]
    n_inh: int
    truncated: bool = False

    def traces(self, bin_width: float = 0.1) -> dict[str, np.ndarray]:
        return rate_traces(self.log, self.assignment, self.pattern_names,
                           self.n_inh, self.schedule.end, bin_width)

    def fractions_at(self, snapshot: "SynapticSnapshot | int") -> dict[str, float]:
        if isinstance(snapshot, int):
            snapshot = self.snapshots[snapshot]
        return group_fractions(snapshot.flags, self.pre_of_edges, self.post_of_edges,
                               self.assignment, self.pattern_names)


def run_learning(
    network: Network,
    schedule: PresentationSchedule,
    snapshot_every: int = 2,
    rate_on: float = 500.0,
    rate_off: float = 0.0,
    rng: np.random.Generator | None = None,
    progress: "callable | None" = None,
) -> LearningResult:
    """Run the full presentation schedule with plasticity on.

    Synaptic snapshots are taken at the midpoint of the inter-stimulus
    interval after every ``snapshot_every`` presentations of each stimulus
    (so they never race stimulus-driven transients), plus once at t=0.
    ``progress`` is called as progress(t) after each snapshot; raising
    KeyboardInterrupt there truncates the run cleanly.
    """
    if rng is None:
        rng = network.cfg.rng("stimulus")
    patterns: list[StimulusPattern] = []
    for p in schedule.presentations:
        if all(q.name != p.pattern.name for q in patterns):
            patterns.append(p.pattern)
    names = [p.name for p in patterns]
    assignment = population_assignment(patterns, network.n_exc)

    for p in sorted(schedule.presentations, key=lambda p: p.onset):
        encode(network, p.pattern, (p.onset, p.onset + p.duration), rate_on, rate_off, rng)

    snapshots = [SynapticSnapshot(0.0, network.potentiated_flags().copy())]
    # snapshot times: mid-gap after every snapshot_every * n_patterns presentations
    stride = snapshot_every * len(patterns)
    ps = sorted(schedule.presentations, key=lambda p: p.onset)
    gaps = schedule.gaps()
    snap_times = []
    for j in range(stride - 1, len(ps), stride):
        if j < len(gaps):
            t0, t1 = gaps[j]
            snap_times.append(0.5 * (t0 + t1))
        else:
            last = ps[j]
            snap_times.append(last.onset + last.duration + 3.25)

    result = LearningResult(
        network.log, snapshots, schedule,
        network.ee.pre_of_edges(), network.ee.post.copy(),
        assignment, names, network.n_inh,
    )

    def take_snapshot(t: float) -> None:
        snapshots.append(SynapticSnapshot(t, network.potentiated_flags().copy()))
        if progress is not None:
            progress(t)

    for t in snap_times:
        network.scheduler.schedule_callback(take_snapshot, t)

    t_end = max(schedule.end, snap_times[-1] if snap_times else schedule.end) + 0.5
    try:
        network.run_until(t_end)
    except KeyboardInterrupt:
        result.truncated = True
    return result


# --------------------------------------------------------------- recall test


@dataclass
class CompletionScore:
    recall_coverage: float   # fraction of the pattern's neurons active in the delay
    intrusion: float         # fraction of the other E neurons active in the delay
    threshold_hz: float
    delay_rate_hz: float     # mean rate of the pattern population in the delay


def activity_threshold(background_rate: float, floor_hz: float = 5.0, factor: float = 5.0) -> float:
    """Delay-activity threshold: factor x background rate or floor, whichever is larger."""
    return max(floor_hz, factor * background_rate)


def recall_test(
    network: Network,
    pattern: StimulusPattern,
    removal_fraction: float,
    rng: np.random.Generator,
    all_patterns: list[StimulusPattern] | None = None,
    rate_on: float = 500.0,
    stim_duration: float = 1.0,
    delay_window: float = 3.0,
    freeze_plasticity: bool = False,
) -> CompletionScore:
    """Present one degraded stimulus and score the subsequent delay window.

    The network should carry a mature synaptic matrix.  Plasticity stays live
    by default (the system draws no line between learning and retrieval); a
    frozen mode exists for controlled analysis.
    """
    if not 0.0 <= removal_fraction <= 1.0:
        raise ValueError(f"removal fraction must lie in [0, 1], got {removal_fraction}")
    if freeze_plasticity:
        network.plasticity_enabled = False
    degraded = degrade(pattern, removal_fraction, rng)
    start = network.now
    encode(network, degraded, (start, start + stim_duration), rate_on, 0.0, rng)
    t0 = start + stim_duration + 0.5
    t1 = t0 + delay_window
    log = network.run_until(t1)

    rates = per_neuron_rates(log, "E", network.n_exc, (t0, t1))
    members = pattern.neuron_indices()
    selective = set(members.tolist())
    if all_patterns is not None:
        for p in all_patterns:
            selective |= set(p.neuron_indices().tolist())
    bkg = np.array([i for i in range(network.n_exc) if i not in selective])
    bkg_rate = float(rates[bkg].mean()) if len(bkg) else 0.0
    thr = activity_threshold(bkg_rate)
    non_members = np.setdiff1d(np.arange(network.n_exc), members)
    return CompletionScore(
        recall_coverage=float(np.mean(rates[members] >= thr)),
        intrusion=float(np.mean(rates[non_members] >= thr)),
        threshold_hz=thr,
        delay_rate_hz=float(rates[members].mean()),
    )
