"""Scheduler, event log, random streams and Poisson sources."""

import numpy as np
import pytest

from attractornet.events import (
    EventLog,
    Scheduler,
    SchedulingError,
    stream_rng,
    to_us,
)


def test_to_us_rounds_to_nearest_microsecond():
    assert to_us(0.5) == 500_000
    assert to_us(1.4999996e-6) == 1
    assert to_us(0.0) == 0


def test_delivery_in_time_order():
    sched = Scheduler()
    sched.schedule_spike(("E", 0), 0.5)
    sched.schedule_spike(("E", 1), 0.2)
    sched.schedule_spike(("E", 2), 0.9)
    log = sched.run_until(1.0)
    assert [i for _, _, i in log] == [1, 0, 2]
    log.assert_monotone()


def test_tie_break_by_address_then_sequence():
    sched = Scheduler()
    sched.schedule_spike(("E", 7), 1.0)
    sched.schedule_spike(("E", 3), 1.0)
    sched.schedule_spike(("E", 3), 1.0)  # duplicate address: insertion order
    log = sched.run_until(1.0)
    assert [i for _, _, i in log] == [3, 3, 7]


def test_callbacks_run_before_spikes_at_same_instant():
    sched = Scheduler()
    order = []
    sched.spike_handler = lambda pop, idx, t_us: order.append("spike")
    sched.schedule_spike(("E", 0), 1.0)
    sched.schedule_callback(lambda t: order.append("callback"), 1.0)
    sched.run_until(1.0)
    assert order == ["callback", "spike"]


def test_scheduling_in_the_past_is_an_error():
    sched = Scheduler()
    sched.schedule_spike(("E", 0), 0.2)
    sched.run_until(0.2)
    with pytest.raises(SchedulingError) as exc:
        sched.schedule_spike(("E", 0), 0.1)
    assert "0.1" in str(exc.value) and "0.2" in str(exc.value)


def test_run_until_empty_queue_advances_clock():
    sched = Scheduler()
    log = sched.run_until(1.0)
    assert len(log) == 0
    assert sched.now == 1.0


def test_run_until_backwards_is_an_error():
    sched = Scheduler()
    sched.run_until(1.0)
    with pytest.raises(SchedulingError):
        sched.run_until(0.5)


# ------------------------------------------------------------------- poisson


def test_poisson_source_zero_rate_schedules_nothing():
    sched = Scheduler()
    n = sched.poisson_source(0.0, ("E", 0), (0.0, 10.0), np.random.default_rng(0))
    assert n == 0 and len(sched.run_until(10.0)) == 0


def test_poisson_source_negative_rate_is_an_error():
    sched = Scheduler()
    with pytest.raises(ValueError):
        sched.poisson_source(-1.0, ("E", 0), (0.0, 1.0), np.random.default_rng(0))


def test_poisson_source_count_within_3_sigma():
    sched = Scheduler()
    n = sched.poisson_source(50.0, ("E", 0), (0.0, 20.0), stream_rng(1, "poisson"))
    assert abs(n - 1000) <= 3 * np.sqrt(1000)
    log = sched.run_until(20.0)
    assert len(log) == n
    assert log.times_us.min() >= 0 and log.times_us.max() < 20_000_000


def test_poisson_source_replays_identically():
    def times():
        sched = Scheduler()
        sched.poisson_source(200.0, ("E", 0), (0.0, 5.0), stream_rng(42, "stimulus"))
        return sched.run_until(5.0).times_us

    assert np.array_equal(times(), times())


# --------------------------------------------------------------------- streams


def test_stream_rng_reproducible_and_independent():
    a = stream_rng(7, "topology").random(8)
    b = stream_rng(7, "topology").random(8)
    c = stream_rng(7, "stimulus").random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ------------------------------------------------------------------ event log


def _sample_log():
    log = EventLog()
    log.append(10, "E", 3)
    log.append(10, "I", 1)
    log.append(2_000_000, "R", 40)
    return log


def test_event_log_text_roundtrip(tmp_path):
    log = _sample_log()
    path = tmp_path / "events.tsv"
    log.write_text(path)
    back = EventLog.read_text(path)
    assert list(back) == list(log)


def test_event_log_binary_roundtrip(tmp_path):
    log = _sample_log()
    path = tmp_path / "events.bin"
    log.save(path)
    back = EventLog.read_binary(path)
    assert list(back) == list(log)


def test_truncation_marker_is_skipped_on_read(tmp_path):
    log = _sample_log()
    path = tmp_path / "events.tsv"
    log.write_text(path, truncated=True)
    assert path.read_text().endswith("# truncated\n")
    assert list(EventLog.read_text(path)) == list(log)


def test_monotonicity_assertion_fires():
    log = EventLog()
    log.append(5, "E", 0)
    log.append(3, "E", 0)
    with pytest.raises(AssertionError):
        log.assert_monotone()
