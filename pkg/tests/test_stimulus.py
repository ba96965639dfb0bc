"""Visual patterns, degradation, encoding, presentation schedules."""

import numpy as np
import pytest

from attractornet.network import MacroPixelMap, NetworkConfig, build
from attractornet.stimulus import (
    Presentation,
    PresentationSchedule,
    StimulusPattern,
    alternating_schedule,
    builtin_patterns,
    degrade,
    disjoint_patterns,
    encode,
    load_pattern,
    load_schedule,
    save_pattern,
    save_schedule,
)


def test_builtin_patterns_are_orthogonal_third_coding():
    happy, sad = builtin_patterns()
    assert happy.active_count == 65 and sad.active_count == 65
    assert happy.overlap(sad) == 0
    assert happy.coding_level == pytest.approx(65 / 196)


def test_implied_retina_pixel_count():
    # 65 macro-pixels cover about 65 * 128^2 / 196 ~ 5433 retina pixels
    happy, _ = builtin_patterns()
    pix = MacroPixelMap()
    total = sum(pix.pixels_in_cell(r, c) for r, c in zip(*np.nonzero(happy.cells)))
    assert 5300 <= total <= 5600


def test_disjoint_patterns_three_at_full_coding():
    pats = disjoint_patterns(3)
    assert [p.active_count for p in pats] == [65, 65, 65]
    for i, a in enumerate(pats):
        for b in pats[i + 1:]:
            assert a.overlap(b) == 0


def test_disjoint_patterns_four_reduce_coding_level():
    pats = disjoint_patterns(4)
    assert len(pats) == 4
    assert all(p.active_count == 196 // 4 for p in pats)
    for i, a in enumerate(pats):
        for b in pats[i + 1:]:
            assert a.overlap(b) == 0


# -------------------------------------------------------------------- degrade


def test_degrade_zero_is_identity():
    happy, _ = builtin_patterns()
    d = degrade(happy, 0.0, np.random.default_rng(0))
    assert np.array_equal(d.cells, happy.cells)


def test_degrade_removes_exact_count_and_never_adds():
    happy, _ = builtin_patterns()
    d = degrade(happy, 0.2, np.random.default_rng(0))
    assert d.active_count == 52  # 65 - round(0.2 * 65)
    assert not np.any(d.cells & ~happy.cells)


def test_degrade_full_removal_empties_pattern():
    happy, _ = builtin_patterns()
    d = degrade(happy, 1.0, np.random.default_rng(0))
    assert d.active_count == 0


def test_degrade_rejects_bad_fraction():
    happy, _ = builtin_patterns()
    with pytest.raises(ValueError):
        degrade(happy, 1.2, np.random.default_rng(0))


# --------------------------------------------------------------------- encode


def test_encode_zero_rate_schedules_nothing():
    net = build(NetworkConfig(seed=3))
    happy, _ = builtin_patterns()
    encode(net, happy, (0.0, 1.0), rate_on=0.0, rate_off=0.0,
           rng=np.random.default_rng(0))
    assert len(net.run_until(1.0)) == 0


def test_encode_rejects_negative_rate():
    net = build(NetworkConfig(seed=3))
    happy, _ = builtin_patterns()
    with pytest.raises(ValueError):
        encode(net, happy, (0.0, 1.0), rate_on=-5.0, rate_off=0.0,
               rng=np.random.default_rng(0))


def test_encode_event_count_and_targets():
    # Count retina events only, on a network that cannot fire back.
    cfg = NetworkConfig(seed=3, initial_potentiated_fraction=0.0, j_stim=0.0,
                        j_stim_inh=0.0)
    net = build(cfg)
    happy, _ = builtin_patterns()
    rate = 200.0
    encode(net, happy, (0.0, 1.0), rate_on=rate, rate_off=0.0,
           rng=np.random.default_rng(1))
    log = net.run_until(1.0)
    kinds = {p for _, p, _ in log}
    assert kinds == {"R"}
    expected = 65 * rate
    assert abs(len(log) - expected) <= 3 * np.sqrt(expected)
    members = set(happy.neuron_indices().tolist())
    assert {i for _, _, i in log} <= members


# ------------------------------------------------------------------- schedule


def test_overlapping_presentations_rejected():
    happy, sad = builtin_patterns()
    with pytest.raises(ValueError):
        PresentationSchedule([Presentation(happy, 0.0, 1.0),
                              Presentation(sad, 0.5, 1.0)])


def test_alternating_schedule_layout():
    happy, sad = builtin_patterns()
    sched = alternating_schedule([happy, sad], n_rounds=3, duration=1.0, period=7.5)
    assert len(sched) == 6
    assert sched.end == pytest.approx(38.5)
    names = [p.pattern.name for p in sched.presentations]
    assert names == ["happy", "sad"] * 3
    gaps = sched.gaps()
    assert all(t1 - t0 == pytest.approx(6.5) for t0, t1 in gaps)


# ------------------------------------------------------------------- file I/O


def test_pattern_file_roundtrip(tmp_path):
    happy, _ = builtin_patterns()
    path = tmp_path / "happy.txt"
    save_pattern(happy, path)
    back = load_pattern(path, name="happy")
    assert isinstance(back, StimulusPattern)
    assert np.array_equal(back.cells, happy.cells)


def test_schedule_file_roundtrip(tmp_path):
    happy, sad = builtin_patterns()
    sched = alternating_schedule([happy, sad], n_rounds=2)
    path = tmp_path / "schedule.csv"
    save_schedule(sched, path)
    back = load_schedule(path, {"happy": happy, "sad": sad})
    assert len(back) == len(sched)
    for a, b in zip(back.presentations, sched.presentations):
        assert (a.pattern.name, a.onset, a.duration) == (b.pattern.name, b.onset, b.duration)
