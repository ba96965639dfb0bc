"""Binary visual patterns and their encoding into macro-pixel spike trains.

Patterns are 14x14 binary masks over the macro-pixel grid.  The two built-in
stimuli are a happy and a sad face, mutually orthogonal (zero overlapping
cells) with 65 active cells each, i.e. a coding level of about 1/3.  Encoding
replaces the screen-plus-retina front end: each active cell becomes one
Poisson source driving its mapped excitatory neuron (and the cell's sampled
inhibitory targets) for the duration of the presentation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import GRID_SIDE, Network

_HAPPY_ART = [
    "...########...",
    ".############.",
    "###...##...###",
    "######..######",
    "###..####..###",
    ".####....####.",
    "...###.####...",
    "..............",
    "..............",
    "..............",
    "..............",
    "..............",
    "..............",
    "..............",
]

_SAD_ART = [
    "..............",
    "..............",
    "..............",
    "..............",
    "..............",
    "..............",
    "..............",
    "...###.####...",
    ".############.",
    "###...##...###",
    "######..######",
    "#####....#####",
    ".##..####..##.",
    "...########...",
]


@dataclass
class StimulusPattern:
    name: str
    cells: np.ndarray  # 14x14 bool

    def __post_init__(self) -> None:
        self.cells = np.asarray(self.cells, dtype=bool)
        if self.cells.shape != (GRID_SIDE, GRID_SIDE):
            raise ValueError(f"pattern must be {GRID_SIDE}x{GRID_SIDE}")

    @property
    def coding_level(self) -> float:
        return float(self.cells.sum()) / self.cells.size

    @property
    def active_count(self) -> int:
        return int(self.cells.sum())

    def neuron_indices(self) -> np.ndarray:
        """Indices of excitatory neurons mapped from the active cells."""
        return np.nonzero(self.cells.ravel())[0]

    def overlap(self, other: "StimulusPattern") -> int:
        return int((self.cells & other.cells).sum())


def _from_art(name: str, art: list[str]) -> StimulusPattern:
    cells = np.array([[ch == "#" for ch in row] for row in art])
    return StimulusPattern(name, cells)


def builtin_patterns() -> list[StimulusPattern]:
    """The two orthogonal built-in stimuli: happy and sad faces, 65 cells each."""
    return [_from_art("happy", _HAPPY_ART), _from_art("sad", _SAD_ART)]


def disjoint_patterns(n: int, active_per_pattern: int | None = None) -> list[StimulusPattern]:
    """n mutually disjoint patterns for capacity experiments.

    The first two are the built-in faces when they fit the cell budget;
    further patterns fill the remaining cells in row-major order.  With 65
    cells per pattern at most 3 fit; 4 patterns force a lower coding level.
    """
    n_cells = GRID_SIDE * GRID_SIDE
    if active_per_pattern is None:
        active_per_pattern = n_cells // n if n * 65 > n_cells else 65
    if n * active_per_pattern > n_cells:
        raise ValueError(f"{n} patterns x {active_per_pattern} cells exceed the grid")
    patterns: list[StimulusPattern] = []
    if active_per_pattern == 65 and n >= 2:
        patterns = builtin_patterns()[: min(n, 2)]
    used = np.zeros(n_cells, dtype=bool)
    for p in patterns:
        used |= p.cells.ravel()
    k = len(patterns)
    free = np.nonzero(~used)[0]
    pos = 0
    while len(patterns) < n:
        take = free[pos : pos + active_per_pattern]
        cells = np.zeros(n_cells, dtype=bool)
        cells[take] = True
        patterns.append(StimulusPattern(f"pattern{k}", cells.reshape(GRID_SIDE, GRID_SIDE)))
        pos += active_per_pattern
        k += 1
    return patterns[:n]


def degrade(
    pattern: StimulusPattern, removal_fraction: float, rng: np.random.Generator
) -> StimulusPattern:
    """Deactivate round(fraction * active) uniformly chosen active cells."""
    if not 0.0 <= removal_fraction <= 1.0:
        raise ValueError(f"removal fraction must lie in [0, 1], got {removal_fraction}")
    active = np.nonzero(pattern.cells.ravel())[0]
    n_remove = int(round(removal_fraction * len(active)))
    cells = pattern.cells.copy().ravel()
    if n_remove:
        drop = rng.choice(active, size=n_remove, replace=False)
        cells[drop] = False
    return StimulusPattern(f"{pattern.name}~{removal_fraction:g}", cells.reshape(pattern.cells.shape))


def encode(
    network: Network,
    pattern: StimulusPattern,
    window: tuple[float, float],
    rate_on: float = 500.0,
    rate_off: float = 0.0,
    rng: np.random.Generator | None = None,
) -> int:
    """Schedule the pattern's Poisson drive onto the network for one window.

    Each active cell drives its macro-pixel source at ``rate_on``, inactive
    cells at ``rate_off``.  Returns the number of scheduled events.
    """
    if rate_on < 0 or rate_off < 0:
        raise ValueError("encoding rates must be non-negative")
    if rng is None:
        rng = network.cfg.rng("stimulus")
    n = 0
    flat = pattern.cells.ravel()
    for k in range(len(flat)):
        rate = rate_on if flat[k] else rate_off
        if rate > 0:
            n += network.scheduler.poisson_source(rate, ("R", k), window, rng)
    return n


# ----------------------------------------------------------------- schedules


@dataclass
class Presentation:
    pattern: StimulusPattern
    onset: float
    duration: float


@dataclass
class PresentationSchedule:
    presentations: list[Presentation]

    def __post_init__(self) -> None:
        prev_end = -np.inf
        for p in sorted(self.presentations, key=lambda p: p.onset):
            if p.duration <= 0:
                raise ValueError("presentation durations must be positive")
            if p.onset < prev_end:
                raise ValueError("presentations must not overlap in time")
            prev_end = p.onset + p.duration

    def __len__(self) -> int:
        return len(self.presentations)

    @property
    def end(self) -> float:
        return max(p.onset + p.duration for p in self.presentations)

    def gaps(self) -> list[tuple[float, float]]:
        """Inter-stimulus intervals, including the one after the last stimulus."""
        ps = sorted(self.presentations, key=lambda p: p.onset)
        out = []
        for a, b in zip(ps, ps[1:]):
            out.append((a.onset + a.duration, b.onset))
        return out


def alternating_schedule(
    patterns: list[StimulusPattern],
    n_rounds: int,
    duration: float = 1.0,
    period: float = 7.5,
    start: float = 0.0,
) -> PresentationSchedule:
    """Strictly alternating schedule: each round shows every pattern once.

    Default timing shows each stimulus for 1 s with a 6.5 s inter-stimulus
    interval (7.5 s period).
    """
    pres = []
    t = start
    for _ in range(n_rounds):
        for p in patterns:
            pres.append(Presentation(p, t, duration))
            t += period
    return PresentationSchedule(pres)


# ------------------------------------------------------------------ file I/O


def save_pattern(pattern: StimulusPattern, path) -> None:
    """Portable text grid: 14 lines of 14 chars, 1 = active, 0 = inactive."""
    with open(path, "w") as fh:
        for row in pattern.cells:
            fh.write("".join("1" if c else "0" for c in row) + "\n")


def load_pattern(path, name: str | None = None) -> StimulusPattern:
    with open(path) as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if len(rows) != GRID_SIDE or any(len(r) != GRID_SIDE for r in rows):
        raise ValueError(f"pattern file must be {GRID_SIDE} lines of {GRID_SIDE} chars")
    cells = np.array([[ch not in "0." for ch in row] for row in rows])
    import os

    return StimulusPattern(name or os.path.basename(str(path)), cells)


def load_schedule(path, patterns: dict[str, StimulusPattern]) -> PresentationSchedule:
    """Schedule file: one `pattern_name,onset_s,duration_s` per line."""
    pres = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, onset, duration = line.split(",")
            if name not in patterns:
                raise ValueError(f"unknown pattern {name!r} in schedule")
            pres.append(Presentation(patterns[name], float(onset), float(duration)))
    return PresentationSchedule(pres)


def save_schedule(schedule: PresentationSchedule, path) -> None:
    with open(path, "w") as fh:
        for p in schedule.presentations:
            fh.write(f"{p.pattern.name},{p.onset:g},{p.duration:g}\n")
