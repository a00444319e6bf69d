"""Dense logic gate networks: encoding, wiring, layers, GroupSum head and
the training-time regularizer hooks (random interventions, path dropout).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .circuit import DiscreteCircuit
from .gates import TRUTH, DomainError
from .init import InitScheme, init_iwp_logits, init_op_logits
from .neuron import EstimatorKind, estimator_value, softmax


class ConfigError(ValueError):
    pass


class Parametrization(str, enum.Enum):
    OP = "op"
    IWP = "iwp"

    @property
    def n_params(self) -> int:
        return 16 if self is Parametrization.OP else 4


PASS_THROUGH_CORNERS = np.array([0.0, 0.0, 1.0, 1.0])


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int
    thresholds: int = 1

    def __post_init__(self):
        if self.input_dim < 1 or self.thresholds < 1:
            raise ConfigError("input_dim and thresholds must be positive")

    @property
    def threshold_values(self) -> np.ndarray:
        k = self.thresholds
        return np.arange(1, k + 1) / (k + 1)

    @property
    def output_width(self) -> int:
        return self.input_dim * self.thresholds


def thermometer_encode(features, k: int) -> np.ndarray:
    """Bits ``x > i/(k+1)`` for i = 1..k, feature-major.

    Accepts one row or a 2-D batch; returns float64 0/1 values.
    """
    x = np.asarray(features, dtype=np.float64)
    if not np.all((x >= 0.0) & (x <= 1.0)):
        raise DomainError("features must lie in [0, 1]")
    t = np.arange(1, k + 1) / (k + 1)
    bits = (x[..., None] > t).astype(np.float64)
    return bits.reshape(*x.shape[:-1], x.shape[-1] * k)


@dataclass
class NetworkConfig:
    layer_width: int = 256
    base_layers: int = 4
    depth_scale: int = 1
    class_count: int = 2
    tau: float = 10.0
    parametrization: Parametrization = Parametrization.IWP
    estimator: EstimatorKind = EstimatorKind.SIN01
    init: InitScheme = field(default_factory=InitScheme.residual)
    residual_fraction: tuple[float, float] | None = None
    final_layer_width_multiplier: int = 1

    def __post_init__(self):
        self.parametrization = Parametrization(self.parametrization)
        self.estimator = EstimatorKind(self.estimator)

    @property
    def n_layers(self) -> int:
        return self.base_layers * self.depth_scale

    @property
    def widths(self) -> list[int]:
        w = [self.layer_width] * self.n_layers
        w[-1] *= self.final_layer_width_multiplier
        return w

    def validate(self) -> None:
        for name in ("layer_width", "base_layers", "depth_scale", "class_count",
                     "final_layer_width_multiplier"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.widths[-1] % self.class_count:
            raise ConfigError(
                f"final layer width {self.widths[-1]} not divisible by {self.class_count} classes")
        if self.residual_fraction is not None:
            lo, hi = self.residual_fraction
            if not (0.0 <= lo <= hi <= 1.0):
                raise ConfigError("residual fractions must satisfy 0 <= start <= end <= 1")


@dataclass
class Layer:
    ia: np.ndarray
    ib: np.ndarray
    logits: np.ndarray
    fixed: np.ndarray

    @property
    def width(self) -> int:
        return len(self.ia)


@dataclass
class Network:
    config: NetworkConfig
    encoder: EncoderConfig
    layers: list[Layer]
    version: int = 0

    @property
    def parametrization(self) -> Parametrization:
        return self.config.parametrization

    @property
    def estimator(self) -> EstimatorKind:
        return self.config.estimator

    @property
    def input_width(self) -> int:
        return self.encoder.output_width

    @property
    def class_count(self) -> int:
        return self.config.class_count

    @property
    def residual_map(self) -> list[np.ndarray]:
        return [np.flatnonzero(layer.fixed) for layer in self.layers]

    def corner_values(self, layer: Layer) -> np.ndarray:
        """Neuron outputs at the four binary corners, shape (W, 4)."""
        if self.parametrization is Parametrization.OP:
            V = softmax(layer.logits, axis=1) @ TRUTH.astype(np.float64)
        else:
            V = estimator_value(self.estimator, layer.logits)
        if layer.fixed.any():
            V = V.copy()
            V[layer.fixed] = PASS_THROUGH_CORNERS
        return V

    def encode(self, features) -> np.ndarray:
        return thermometer_encode(features, self.encoder.thresholds)

    def n_parameters(self) -> int:
        return sum(layer.logits.size for layer in self.layers)


def residual_schedule(widths: list[int], fractions, rng: np.random.Generator) -> list[np.ndarray]:
    """Boolean masks of pass-through neurons fixed by explicit residual connections.

    A growing, nested set of indices forwards its output from layer l to the
    same index in layer l+1, so streams continue to the last layer.
    """
    n = len(widths)
    masks = [np.zeros(w, dtype=bool) for w in widths]
    if fractions is None or n < 2:
        return masks
    lo, hi = fractions
    span = min(widths)
    order = rng.permutation(span)
    for l in range(n - 1):
        f = lo if n == 1 else lo + (hi - lo) * l / (n - 1)
        k = min(span, int(round(f * widths[l])))
        masks[l + 1][order[:k]] = True
    return masks


def build_network(config: NetworkConfig, encoder: EncoderConfig, seed: int) -> Network:
    config.validate()
    widths = config.widths
    children = np.random.SeedSequence(seed).spawn(len(widths) + 1)
    fixed = residual_schedule(widths, config.residual_fraction,
                              np.random.default_rng(children[-1]))
    layers = []
    prev = encoder.output_width
    for l, w in enumerate(widths):
        rng = np.random.default_rng(children[l])
        ia = rng.integers(0, prev, size=w).astype(np.int64)
        ib = rng.integers(0, prev, size=w).astype(np.int64)
        if config.parametrization is Parametrization.OP:
            logits = init_op_logits(config.init, w, rng)
        else:
            logits = init_iwp_logits(config.init, config.estimator, w, rng)
        f = fixed[l]
        if f.any():
            idx = np.flatnonzero(f)
            ia[idx] = idx
            ib[idx] = idx
        layers.append(Layer(ia, ib, logits, f))
        prev = w
    return Network(config, encoder, layers)


def group_sum(final, class_count: int, tau: float) -> np.ndarray:
    """Sum contiguous bins of the final layer and divide by ``tau``."""
    final = np.asarray(final, dtype=np.float64)
    w = final.shape[-1]
    if w % class_count:
        raise ConfigError(f"width {w} not divisible by {class_count} classes")
    return final.reshape(*final.shape[:-1], class_count, w // class_count).sum(-1) / tau


class InterventionStrategy(str, enum.Enum):
    CONSTANT = "constant"
    UNIFORM = "uniform"
    BERNOULLI_HALF = "bernoulli_half"


def apply_interventions(activations, p_intervene: float, strategy, rng: np.random.Generator,
                        value: float = 0.5):
    """Replace each gate output independently with probability ``p_intervene``.

    Returns ``(new_activations, replaced_mask)``; the mask is what backward
    uses to zero the gradient of replaced gates.
    """
    if not 0.0 <= p_intervene <= 1.0:
        raise ValueError("p_intervene must lie in [0, 1]")
    act = np.asarray(activations, dtype=np.float64)
    strategy = InterventionStrategy(strategy)
    mask = rng.random(act.shape) < p_intervene
    if not mask.any():
        return act, mask
    out = act.copy()
    n = int(mask.sum())
    if strategy is InterventionStrategy.CONSTANT:
        out[mask] = value
    elif strategy is InterventionStrategy.UNIFORM:
        out[mask] = rng.random(n)
    else:
        out[mask] = (rng.random(n) < 0.5).astype(np.float64)
    return out, mask


def reachable_final_gates(net: Network, channels) -> np.ndarray:
    """Boolean mask of final-layer gates with a wiring path from any of ``channels``.

    A channel is one original feature, i.e. all of its thermometer bits.
    """
    k = net.encoder.thresholds
    reach = np.zeros(net.input_width, dtype=bool)
    for c in np.asarray(channels, dtype=np.int64).ravel():
        reach[c * k:(c + 1) * k] = True
    for layer in net.layers:
        reach = reach[layer.ia] | reach[layer.ib]
    return reach


def dropout_mask(net: Network, p_dropout: float, rng: np.random.Generator) -> np.ndarray:
    """Indices of final-layer gates masked for this batch."""
    if not 0.0 <= p_dropout <= 1.0:
        raise ValueError("p_dropout must lie in [0, 1]")
    selected = np.flatnonzero(rng.random(net.encoder.input_dim) < p_dropout)
    return np.flatnonzero(reachable_final_gates(net, selected))


@dataclass
class Regularizers:
    intervention_p: float = 0.0
    intervention_strategy: InterventionStrategy = InterventionStrategy.CONSTANT
    intervention_value: float = 0.5
    dropout_p: float = 0.0

    @property
    def active(self) -> bool:
        return self.intervention_p > 0 or self.dropout_p > 0


@dataclass
class ForwardPass:
    inputs: np.ndarray
    activations: list[np.ndarray]
    corners: list[np.ndarray]
    logits: np.ndarray
    version: int
    replaced: list[np.ndarray | None]
    dropped: np.ndarray | None = None


def forward(net: Network, batch, regularizers: Regularizers | None = None,
            rng: np.random.Generator | None = None) -> ForwardPass:
    """Continuous forward pass over encoded rows (values in [0, 1])."""
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(batch, dtype=np.float64)))
    if x.shape[1] != net.input_width:
        raise ConfigError(f"row width {x.shape[1]} != encoded width {net.input_width}")
    use_reg = regularizers is not None and regularizers.active
    if use_reg and rng is None:
        raise ValueError("regularizers need an rng")
    acts, corners, replaced = [], [], []
    h = x
    for layer in net.layers:
        V = net.corner_values(layer)
        y = kernels.layer_forward(h, layer.ia, layer.ib, V)
        mask = None
        if use_reg and regularizers.intervention_p > 0:
            y, mask = apply_interventions(y, regularizers.intervention_p,
                                          regularizers.intervention_strategy, rng,
                                          regularizers.intervention_value)
        acts.append(y)
        corners.append(V)
        replaced.append(mask)
        h = y
    dropped = None
    final = h
    if use_reg and regularizers.dropout_p > 0:
        dropped = dropout_mask(net, regularizers.dropout_p, rng)
        if len(dropped):
            final = h.copy()
            final[:, dropped] = 0.0
    logits = group_sum(final, net.class_count, net.config.tau)
    return ForwardPass(x, acts, corners, logits, net.version, replaced, dropped)


def hard_gates(net: Network) -> list[np.ndarray]:
    """Per-layer gate ids after discretization (argmax for OP, 0.5 threshold for IWP)."""
    out = []
    for layer in net.layers:
        if net.parametrization is Parametrization.OP:
            g = np.argmax(softmax(layer.logits, axis=1), axis=1) + 1
        else:
            bits = (estimator_value(net.estimator, layer.logits) > 0.5).astype(np.int64)
            g = 1 + (bits[:, 0] << 3 | bits[:, 1] << 2 | bits[:, 2] << 1 | bits[:, 3])
        g = g.astype(np.int64)
        g[layer.fixed] = 4
        out.append(g)
    return out


def discretize_network(net: Network) -> DiscreteCircuit:
    n_in = net.input_width
    gate_parts, ra_parts, rb_parts = [], [], []
    offset = n_in  # unified ref of the previous layer's node 0
    prev_base = 0
    for l, (layer, g) in enumerate(zip(net.layers, hard_gates(net))):
        base = prev_base if l else 0
        gate_parts.append(g)
        ra_parts.append(layer.ia + base)
        rb_parts.append(layer.ib + base)
        prev_base = offset
        offset += layer.width
    outputs = np.arange(prev_base, offset, dtype=np.int64)
    per_bin = len(outputs) // net.class_count
    return DiscreteCircuit(
        input_width=n_in,
        gate=np.concatenate(gate_parts),
        ra=np.concatenate(ra_parts),
        rb=np.concatenate(rb_parts),
        outputs=outputs,
        bin_sizes=(per_bin,) * net.class_count,
    )
