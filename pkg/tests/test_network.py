"""Network construction, macro-pixel map, event loop, determinism."""

import numpy as np
import pytest

from attractornet.network import (
    MacroPixelMap,
    NetworkConfig,
    _sample_projection,
    build,
    per_neuron_rates,
    population_rate,
)
from attractornet.events import EventLog, stream_rng
from attractornet.stimulus import builtin_patterns, encode


def test_config_validation():
    with pytest.raises(ValueError):
        NetworkConfig(p_ee=1.5)
    with pytest.raises(ValueError):
        NetworkConfig(n_exc=0)
    with pytest.raises(ValueError):
        NetworkConfig(delay=-0.001)


# ------------------------------------------------------------------- topology


def test_no_self_connections_and_binomial_counts():
    """Graph invariants over 100 random seeds."""
    n, p = 196, 0.25
    mean = n * (n - 1) * p
    sigma = np.sqrt(n * (n - 1) * p * (1 - p))
    for seed in range(100):
        proj = _sample_projection(stream_rng(seed, "topology"), n, n, p,
                                  ban_self=True)
        pre = proj.pre_of_edges()
        assert not np.any(pre == proj.post)
        assert abs(proj.n_edges - mean) <= 4 * sigma


def test_zero_probability_gives_no_edges():
    net = build(NetworkConfig(seed=1, p_ee=0.0))
    assert net.ee.n_edges == 0


def test_initial_potentiated_fraction_within_4_sigma():
    net = build(NetworkConfig(seed=11, initial_potentiated_fraction=0.05))
    m = net.ee.n_edges
    k = int(net.potentiated_flags().sum())
    sigma = np.sqrt(m * 0.05 * 0.95)
    assert abs(k - 0.05 * m) <= 4 * sigma


def test_build_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    build(NetworkConfig(seed=5)).export_topology(a)
    build(NetworkConfig(seed=5)).export_topology(b)
    assert a.read_bytes() == b.read_bytes()


def test_topology_export_load_roundtrip(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    net = build(NetworkConfig(seed=5))
    net.export_topology(a)
    other = build(NetworkConfig(seed=999))
    other.load_topology(a)
    other.export_topology(b)
    assert a.read_bytes() == b.read_bytes()


# ------------------------------------------------------------ macro-pixel map


def test_macro_pixel_map_partitions_retina():
    pix = MacroPixelMap()
    sizes = pix.stripe_sizes()
    assert sizes.sum() == 128
    assert sorted(np.unique(sizes)) == [9, 10]
    total = sum(pix.pixels_in_cell(r, c) for r in range(14) for c in range(14))
    assert total == 128 * 128


def test_macro_pixel_map_is_bijective():
    pix = MacroPixelMap()
    neurons = {pix.neuron_of_cell(r, c) for r in range(14) for c in range(14)}
    assert neurons == set(range(196))
    for idx in range(196):
        r, c = pix.cell_of_neuron(idx)
        assert pix.neuron_of_cell(r, c) == idx


# ------------------------------------------------------------------ event loop


def test_unstimulated_network_is_silent():
    net = build(NetworkConfig(seed=2, initial_potentiated_fraction=0.0))
    assert len(net.run_until(2.0)) == 0


def test_stimulated_population_suppresses_the_rest():
    cfg = NetworkConfig(seed=4)
    net = build(cfg)
    happy, _ = builtin_patterns()
    encode(net, happy, (0.0, 1.0), rate_on=500.0, rate_off=0.0,
           rng=cfg.rng("stimulus"))
    log = net.run_until(1.0)
    members = happy.neuron_indices()
    others = np.setdiff1d(np.arange(cfg.n_exc), members)
    stim = population_rate(log, "E", members, (0.2, 1.0))
    rest = population_rate(log, "E", others, (0.2, 1.0))
    assert stim > 20.0
    assert rest < 0.2 * stim


def test_full_run_replays_byte_identically(tmp_path):
    def run(path):
        cfg = NetworkConfig(seed=31)
        net = build(cfg)
        happy, sad = builtin_patterns()
        rng = cfg.rng("stimulus")
        encode(net, happy, (0.0, 1.0), 400.0, 0.0, rng)
        encode(net, sad, (2.0, 3.0), 400.0, 0.0, rng)
        net.run_until(4.0).write_text(path)

    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    run(a)
    run(b)
    assert a.read_bytes() == b.read_bytes()


# ------------------------------------------------------------------ rate math


def test_population_rate_arithmetic():
    log = EventLog()
    members = np.arange(65)
    for k in range(650):
        log.append(k * 1500, "E", int(k % 65))
    assert population_rate(log, "E", members, (0.0, 1.0)) == pytest.approx(10.0)


def test_population_rate_rejects_empty_members():
    with pytest.raises(ValueError):
        population_rate(EventLog(), "E", np.array([], dtype=int), (0.0, 1.0))


def test_per_neuron_rates_recount():
    log = EventLog()
    log.append(100, "E", 3)
    log.append(200, "E", 3)
    log.append(300, "E", 7)
    rates = per_neuron_rates(log, "E", 10, (0.0, 2.0))
    assert rates[3] == pytest.approx(1.0)
    assert rates[7] == pytest.approx(0.5)
    assert rates.sum() == pytest.approx(1.5)
