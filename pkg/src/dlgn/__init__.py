"""Differentiable logic gate networks with the original (softmax over 16 gates)
and the input-wise (4 corner estimates) neuron parametrizations."""

from . import checkpoint
from .circuit import DiscreteCircuit, eval_packed, export_netlist, import_netlist, pack, simplify
from .config import RunConfig, format_config, parse_config
from .data import ingest_dataset, load_dataset
from .gates import negation_of, surrogate_eval, surrogate_grad, truth_table
from .init import InitKind, InitScheme
from .network import (
    EncoderConfig,
    Network,
    NetworkConfig,
    Parametrization,
    build_network,
    discretize_network,
    forward,
    group_sum,
    thermometer_encode,
)
from .neuron import EstimatorKind
from .train import Dataset, TrainConfig, Trainer, train_loop

__version__ = "0.1.0"
