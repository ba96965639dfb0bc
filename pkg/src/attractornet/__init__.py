"""Event-driven recurrent spiking network with bistable Hebbian synapses.

Deterministic, seedable desk-scale simulator of an attractor-forming spiking
network: characterization experiments (single-neuron gain, LTP/LTD
probability maps, effective transfer functions), autonomous learning of
visual patterns, and attractor-based error correction.
"""

from .events import EventLog, Scheduler, SchedulingError, stream_rng
from .network import MacroPixelMap, Network, NetworkConfig, build, population_rate
from .neuron import Neuron, NeuronParams, transfer_function
from .stimulus import (
    PresentationSchedule,
    StimulusPattern,
    alternating_schedule,
    builtin_patterns,
    degrade,
    encode,
)
from .synapse import BistableSynapse, SynapseParams
from .characterization import (
    bifurcation_sweep,
    find_fixed_points,
    measure_etf,
    measure_plasticity_map,
)
from .config import ExperimentConfig, load_config, save_config
from .learning import recall_test, run_learning

__version__ = "0.1.0"

__all__ = [
    "BistableSynapse",
    "EventLog",
    "MacroPixelMap",
    "Network",
    "NetworkConfig",
    "Neuron",
    "NeuronParams",
    "PresentationSchedule",
    "Scheduler",
    "SchedulingError",
    "StimulusPattern",
    "SynapseParams",
    "alternating_schedule",
    "build",
    "builtin_patterns",
    "ExperimentConfig",
    "bifurcation_sweep",
    "degrade",
    "find_fixed_points",
    "load_config",
    "measure_etf",
    "measure_plasticity_map",
    "recall_test",
    "run_learning",
    "save_config",
    "encode",
    "population_rate",
    "stream_rng",
    "transfer_function",
]
