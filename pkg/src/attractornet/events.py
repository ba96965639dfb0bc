"""Time-ordered event scheduling, address-event spike records and seeded RNG streams.

Simulated time is kept internally as a 64-bit integer count of microseconds so
that event ordering, and therefore replay, is bit-exact.  Public APIs accept and
return seconds as floats; conversion always rounds to the nearest microsecond.

Ties in delivery time are broken by (address, insertion sequence): at equal
timestamps, events sort by (population, index) lexicographically, and among
equal addresses by scheduling order.  Callbacks carry the empty-string
population so they run before any spike scheduled at the same instant.
"""

from __future__ import annotations

import heapq
import struct
from array import array
from typing import Callable, Iterator

import numpy as np

US_PER_S = 1_000_000

# population codes used by the compact binary event-log format
POP_CODES = {"E": 0, "I": 1, "R": 2, "X": 3}
POP_NAMES = {v: k for k, v in POP_CODES.items()}

Address = tuple[str, int]


class SchedulingError(ValueError):
    """Raised when an event is scheduled in the simulated past."""


def to_us(t: float) -> int:
    """Convert seconds to the internal integer microsecond clock."""
    return int(round(t * US_PER_S))


def stream_rng(seed: int, name: str) -> np.random.Generator:
    """Return the named random stream for a master seed.

    Streams are derived by feeding the seed and the stream label into a
    SeedSequence, so identical (seed, name) pairs give identical draw
    sequences on any platform and distinct names give statistically
    independent streams.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *name.encode("utf-8")]
    return np.random.default_rng(np.random.SeedSequence(entropy))


class EventLog:
    """Append-only record of delivered spikes in delivery order."""

    def __init__(self) -> None:
        self._times = array("q")
        self._pops = array("b")
        self._idxs = array("i")

    def __len__(self) -> int:
        return len(self._times)

    def append(self, t_us: int, pop: str, idx: int) -> None:
        self._times.append(t_us)
        self._pops.append(POP_CODES[pop])
        self._idxs.append(idx)

    @property
    def times_us(self) -> np.ndarray:
        return np.frombuffer(self._times, dtype=np.int64) if self._times else np.empty(0, np.int64)

    @property
    def pop_codes(self) -> np.ndarray:
        return np.frombuffer(self._pops, dtype=np.int8) if self._pops else np.empty(0, np.int8)

    @property
    def indices(self) -> np.ndarray:
        return np.frombuffer(self._idxs, dtype=np.int32) if self._idxs else np.empty(0, np.int32)

    def __iter__(self) -> Iterator[tuple[int, str, int]]:
        for t, p, i in zip(self._times, self._pops, self._idxs):
            yield t, POP_NAMES[p], i

    def assert_monotone(self) -> None:
        t = self.times_us
        if len(t) > 1 and np.any(np.diff(t) < 0):
            raise AssertionError("event log timestamps are not monotone")

    # ------------------------------------------------------------------ I/O

    def write_text(self, path, truncated: bool = False) -> None:
        """One record per line: time_us<TAB>population<TAB>index."""
        with open(path, "w") as fh:
            for t, p, i in self:
                fh.write(f"{t}\t{p}\t{i}\n")
            if truncated:
                fh.write("# truncated\n")

    def write_binary(self, path) -> None:
        """Little-endian records: u64 time_us, u8 population code, u16 index."""
        rec = struct.Struct("<QBH")
        with open(path, "wb") as fh:
            for t, p, i in zip(self._times, self._pops, self._idxs):
                fh.write(rec.pack(t, p, i))

    def save(self, path) -> None:
        """Write text or binary form depending on the file extension (.bin = binary)."""
        if str(path).endswith(".bin"):
            self.write_binary(path)
        else:
            self.write_text(path)

    @classmethod
    def read_text(cls, path) -> "EventLog":
        log = cls()
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    continue
                t, p, i = line.split("\t")
                log.append(int(t), p, int(i))
        return log

    @classmethod
    def read_binary(cls, path) -> "EventLog":
        log = cls()
        rec = struct.Struct("<QBH")
        with open(path, "rb") as fh:
            data = fh.read()
        for t, p, i in rec.iter_unpack(data):
            log.append(t, POP_NAMES[p], i)
        return log


class Scheduler:
    """Single-threaded event queue driving one simulation instance.

    Spike events are logged on delivery and then handed to ``spike_handler``;
    callbacks are invoked with the current time in seconds.
    """

    def __init__(self) -> None:
        self._heap: list[tuple[int, str, int, int, Callable | None]] = []
        self._seq = 0
        self._now_us = 0
        self.log = EventLog()
        self.spike_handler: Callable[[str, int, int], None] | None = None

    @property
    def now(self) -> float:
        return self._now_us / US_PER_S

    @property
    def now_us(self) -> int:
        return self._now_us

    def _push(self, t_us: int, pop: str, idx: int, payload: Callable | None) -> None:
        if t_us < self._now_us:
            raise SchedulingError(
                f"cannot schedule at t={t_us / US_PER_S:.6f}s: "
                f"clock is already at {self._now_us / US_PER_S:.6f}s"
            )
        heapq.heappush(self._heap, (t_us, pop, idx, self._seq, payload))
        self._seq += 1

    def schedule_spike(self, address: Address, at: float) -> None:
        pop, idx = address
        self._push(to_us(at), pop, idx, None)

    def schedule_spike_us(self, address: Address, at_us: int) -> None:
        pop, idx = address
        self._push(at_us, pop, idx, None)

    def schedule_callback(self, fn: Callable[[float], None], at: float) -> None:
        self._push(to_us(at), "", -1, fn)

    def poisson_source(
        self,
        rate: float,
        target: Address,
        window: tuple[float, float],
        rng: np.random.Generator,
    ) -> int:
        """Schedule a Poisson spike train at ``rate`` Hz onto ``target``.

        Inter-arrival times are exponential with mean 1/rate; events fall in
        [t0, t1).  Returns the number of events scheduled.
        """
        t0, t1 = window
        if rate < 0:
            raise ValueError(f"poisson rate must be non-negative, got {rate}")
        if t1 < t0:
            raise ValueError(f"window end {t1} before start {t0}")
        if rate == 0 or t1 == t0:
            return 0
        n = 0
        t = t0
        while True:
            # draw in chunks; cumulative sums within each chunk
            chunk = t + np.cumsum(rng.exponential(1.0 / rate, size=256))
            stop = np.searchsorted(chunk, t1)
            for at in chunk[:stop]:
                self._push(to_us(at), target[0], target[1], None)
            n += int(stop)
            if stop < len(chunk):
                break
            t = chunk[-1]
        return n

    def run_until(self, t_end: float) -> EventLog:
        """Process all events with time <= t_end; the clock ends at t_end."""
        t_end_us = to_us(t_end)
        if t_end_us < self._now_us:
            raise SchedulingError(
                f"cannot run to t={t_end}s: clock is already at {self.now:.6f}s"
            )
        heap = self._heap
        while heap and heap[0][0] <= t_end_us:
            t_us, pop, idx, _seq, payload = heapq.heappop(heap)
            self._now_us = t_us
            if payload is not None:
                payload(t_us / US_PER_S)
            else:
                self.log.append(t_us, pop, idx)
                if self.spike_handler is not None:
                    self.spike_handler(pop, idx, t_us)
        self._now_us = t_end_us
        return self.log
