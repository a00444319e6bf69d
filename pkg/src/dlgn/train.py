"""Loss, reverse-mode backward through the network, Adam, the training loop
and the gradient / activation diagnostics.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .circuit import eval_packed, pack
from .gates import TRUTH
from .network import (
    ConfigError,
    ForwardPass,
    InterventionStrategy,
    Network,
    Parametrization,
    Regularizers,
    discretize_network,
    forward,
)
from .neuron import estimator_grad, softmax

log = logging.getLogger(__name__)

METRICS_HEADER = (
    "step", "loss", "train_acc", "train_acc_disc", "test_acc", "test_acc_disc",
    "grad_norm_first", "grad_norm_last", "grad_norms",
)
HISTOGRAM_HEADER = ("step", "layer", "bin_lo", "bin_hi", "count")
HISTOGRAM_BINS = 50


class NumericAbort(FloatingPointError):
    """Non-finite loss or gradient; ``layer`` is the 1-based layer where it surfaced."""

    def __init__(self, message: str, layer: int):
        super().__init__(f"{message} (layer {layer})")
        self.layer = layer


class StaleActivations(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    steps: int = 1000
    batch_size: int = 100
    accumulation: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    eval_every: int = 1000
    seed: int = 0
    intervention_p: float = 0.0
    intervention_strategy: InterventionStrategy = InterventionStrategy.CONSTANT
    intervention_value: float = 0.5
    dropout_p: float = 0.0
    histogram_layers: tuple[int, ...] = ()

    def validate(self, parametrization: Parametrization) -> None:
        if self.batch_size < 1 or self.accumulation < 1:
            raise ConfigError("batch_size and accumulation must be >= 1")
        if self.steps < 0 or self.eval_every < 1:
            raise ConfigError("steps must be >= 0 and eval_every >= 1")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if Parametrization(parametrization) is Parametrization.IWP and self.weight_decay > 0:
            raise ConfigError("weight decay pulls IWP logits towards undecided outputs; "
                              "it must be 0 for the IWP parametrization")

    @property
    def regularizers(self) -> Regularizers:
        return Regularizers(self.intervention_p, InterventionStrategy(self.intervention_strategy),
                            self.intervention_value, self.dropout_p)


def softmax_cross_entropy(logits, labels):
    """Per-row loss and ``d loss / d logits`` (softmax minus one-hot).

    Works on one row (``labels`` an int) or a batch.
    """
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    y = np.atleast_1d(np.asarray(labels))
    if y.shape[0] != z.shape[0] or np.any((y < 0) | (y >= z.shape[1])):
        raise ValueError("label out of range")
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    loss = lse - z[np.arange(len(y)), y]
    d = softmax(z, axis=1)
    d[np.arange(len(y)), y] -= 1.0
    if single:
        return float(loss[0]), d[0]
    return loss, d


@dataclass
class Gradients:
    params: list[np.ndarray]
    input_norms: np.ndarray   # ||dL/d input of layer l||, l = 1..L
    output_norms: np.ndarray  # ||dL/d output of layer l||
    gate_gain: np.ndarray     # per-edge partial norm / output norm, before fan-in summation
    input_grad: np.ndarray    # dL/d encoded input


def backward(net: Network, fp: ForwardPass, d_logits) -> Gradients:
    """Reverse pass. ``d_logits`` already carries any batch averaging."""
    if fp.version != net.version:
        raise StaleActivations("activations were computed for older parameters")
    d_logits = np.atleast_2d(np.asarray(d_logits, dtype=np.float64))
    L = len(net.layers)
    final_w = net.layers[-1].width
    per_bin = final_w // net.class_count
    dy = np.repeat(d_logits, per_bin, axis=1) / net.config.tau
    if fp.dropped is not None and len(fp.dropped):
        dy[:, fp.dropped] = 0.0
    params: list[np.ndarray] = [None] * L
    in_norms = np.zeros(L)
    out_norms = np.zeros(L)
    gains = np.zeros(L)
    for l in range(L - 1, -1, -1):
        layer = net.layers[l]
        if fp.replaced[l] is not None:
            dy = np.where(fp.replaced[l], 0.0, dy)
        x = fp.inputs if l == 0 else fp.activations[l - 1]
        V = fp.corners[l]
        dx, M, edge_sq = kernels.layer_backward(x, layer.ia, layer.ib, V, np.ascontiguousarray(dy))
        out_norms[l] = np.sqrt(np.sum(dy * dy))
        in_norms[l] = np.sqrt(np.sum(dx * dx))
        gains[l] = np.sqrt(edge_sq) / out_norms[l] if out_norms[l] > 0 else 0.0
        params[l] = _param_grad(net, layer, M)
        if not np.all(np.isfinite(params[l])) or not np.all(np.isfinite(dx)):
            raise NumericAbort("non-finite gradient", l + 1)
        dy = dx
    return Gradients(params, in_norms, out_norms, gains, dy)


def _param_grad(net: Network, layer, M: np.ndarray) -> np.ndarray:
    if net.parametrization is Parametrization.OP:
        w = softmax(layer.logits, axis=1)
        d_w = M @ TRUTH.T.astype(np.float64)
        g = w * (d_w - np.sum(w * d_w, axis=1, keepdims=True))
    else:
        g = M * estimator_grad(net.estimator, layer.logits)
    if layer.fixed.any():
        g[layer.fixed] = 0.0
    return g


def loss_and_grads(net: Network, x, labels, scale: float | None = None,
                   regularizers: Regularizers | None = None, rng=None):
    """Mean (or ``scale``-weighted sum) cross-entropy and its gradients."""
    fp = forward(net, x, regularizers, rng)
    losses, d = softmax_cross_entropy(fp.logits, labels)
    if not np.all(np.isfinite(losses)):
        bad = [l + 1 for l, a in enumerate(fp.activations) if not np.all(np.isfinite(a))]
        raise NumericAbort("non-finite activations" if bad else "non-finite loss",
                           bad[0] if bad else len(net.layers))
    w = 1.0 / len(losses) if scale is None else scale
    return float(np.sum(losses) * w), backward(net, fp, d * w), fp


# --- optimizer --------------------------------------------------------------

@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, net: Network) -> "AdamState":
        return cls([np.zeros_like(l.logits) for l in net.layers],
                   [np.zeros_like(l.logits) for l in net.layers])


def adam_step(net: Network, grads: list[np.ndarray], state: AdamState, config: TrainConfig) -> None:
    """Bias-corrected Adam in place; decoupled weight decay only for OP."""
    for l, g in enumerate(grads):
        if g.shape != net.layers[l].logits.shape:
            raise ValueError(f"gradient shape mismatch at layer {l + 1}")
        if not np.all(np.isfinite(g)):
            raise NumericAbort("non-finite gradient at optimizer step", l + 1)
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    decay = config.weight_decay if net.parametrization is Parametrization.OP else 0.0
    for layer, g, m, v in zip(net.layers, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if decay:
            layer.logits -= config.learning_rate * decay * layer.logits
        layer.logits -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)
    net.version += 1


# --- diagnostics ------------------------------------------------------------

@dataclass
class GradProfile:
    input_norms: np.ndarray
    output_norms: np.ndarray
    gate_gain: np.ndarray

    @property
    def successive_ratios(self) -> np.ndarray:
        """``input_norms[l] / input_norms[l+1]``: shrinkage across one layer."""
        n = self.input_norms
        return n[:-1] / n[1:]

    @property
    def end_to_end(self) -> float:
        return float(self.input_norms[0] / self.input_norms[-1])


def grad_norm_profile(net: Network, x, labels) -> GradProfile:
    """One forward/backward on a batch; parameters are not touched."""
    _, g, _ = loss_and_grads(net, x, labels)
    return GradProfile(g.input_norms, g.output_norms, g.gate_gain)


def gate_output_histogram(net: Network, x, layer: int, bins: int = HISTOGRAM_BINS):
    """Counts of layer ``layer`` (1-based) activations in ``bins`` uniform bins on [0, 1]."""
    if not 1 <= layer <= len(net.layers):
        raise IndexError(f"layer {layer} outside 1..{len(net.layers)}")
    fp = forward(net, x)
    return np.histogram(fp.activations[layer - 1], bins=bins, range=(0.0, 1.0))


def activation_concentration(net: Network, x) -> np.ndarray:
    """Mean |activation - 0.5| per layer."""
    fp = forward(net, x)
    return np.array([np.mean(np.abs(a - 0.5)) for a in fp.activations])


def continuous_accuracy(net: Network, x, labels) -> float:
    if len(labels) == 0:
        raise ValueError("empty dataset")
    return float(np.mean(np.argmax(forward(net, x).logits, axis=1) == labels))


def discretized_accuracy(net: Network, x, labels, circuit=None) -> float:
    if len(labels) == 0:
        raise ValueError("empty dataset")
    c = circuit if circuit is not None else discretize_network(net)
    scores = eval_packed(pack(c), np.asarray(x) > 0.5)
    return float(np.mean(np.argmax(scores, axis=1) == labels))


def discretization_gap(net: Network, x, labels) -> tuple[float, float, float]:
    """(continuous accuracy, discretized accuracy, continuous - discretized)."""
    cont = continuous_accuracy(net, x, labels)
    disc = discretized_accuracy(net, x, labels)
    return cont, disc, cont - disc


# --- training loop ----------------------------------------------------------

class BatchStream:
    """Deterministic sample order: epoch ``e`` is a permutation seeded by (seed, e).

    Step ``t`` takes the positions ``t*size .. (t+1)*size-1`` of the
    concatenated epochs, so the order depends only on (seed, size) and a run
    can resume at any step without stored generator state.
    """

    def __init__(self, n: int, size: int, seed: int):
        if n < 1:
            raise ValueError("empty training set")
        self.n, self.size, self.seed = n, size, seed
        self._perms: dict[int, np.ndarray] = {}

    def _perm(self, epoch: int) -> np.ndarray:
        p = self._perms.get(epoch)
        if p is None:
            if len(self._perms) > 4:
                self._perms.clear()
            p = np.random.default_rng([self.seed, 7919, epoch]).permutation(self.n)
            self._perms[epoch] = p
        return p

    def indices(self, step: int) -> np.ndarray:
        pos = np.arange(step * self.size, (step + 1) * self.size)
        out = np.empty(self.size, dtype=np.int64)
        epochs = pos // self.n
        for e in np.unique(epochs):
            sel = epochs == e
            out[sel] = self._perm(int(e))[pos[sel] % self.n]
        return out


@dataclass
class EvalRecord:
    step: int
    loss: float
    train_acc: float
    train_acc_disc: float
    test_acc: float | None
    test_acc_disc: float | None
    grad_norms: np.ndarray

    def row(self) -> list[str]:
        def f(v):
            return "" if v is None else repr(float(v))
        return [str(self.step), f(self.loss), f(self.train_acc), f(self.train_acc_disc),
                f(self.test_acc), f(self.test_acc_disc), f(self.grad_norms[0]),
                f(self.grad_norms[-1]), ";".join(repr(float(v)) for v in self.grad_norms)]


@dataclass
class HistogramSnapshot:
    step: int
    layer: int
    counts: np.ndarray
    edges: np.ndarray


@dataclass
class RunMetrics:
    records: list[EvalRecord] = field(default_factory=list)
    histograms: list[HistogramSnapshot] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRICS_HEADER)
            for r in self.records:
                w.writerow(r.row())

    def write_histograms(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTOGRAM_HEADER)
            for h in self.histograms:
                for k, cnt in enumerate(h.counts):
                    w.writerow([h.step, h.layer, repr(float(h.edges[k])),
                                repr(float(h.edges[k + 1])), int(cnt)])

    @property
    def final(self) -> EvalRecord:
        return self.records[-1]


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (rows, width) with one label per row")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def width(self) -> int:
        return self.features.shape[1]


class Trainer:
    """Owns the optimizer state and step counter for one network."""

    def __init__(self, net: Network, train: Dataset, config: TrainConfig,
                 test: Dataset | None = None, state: AdamState | None = None, step: int = 0):
        config.validate(net.parametrization)
        self.net, self.config = net, config
        self.x_train = net.encode(train.features)
        self.y_train = train.labels
        self.x_test = net.encode(test.features) if test is not None and len(test) else None
        self.y_test = test.labels if self.x_test is not None else None
        self.state = state if state is not None else AdamState.zeros_like(net)
        self.step = step
        eff = config.batch_size * config.accumulation
        self.stream = BatchStream(len(self.y_train), eff, config.seed)
        self.metrics = RunMetrics()

    def train_step(self) -> float:
        cfg = self.config
        idx = self.stream.indices(self.step)
        n_eff = len(idx)
        regs = cfg.regularizers
        rng = np.random.default_rng([cfg.seed, 104729, self.step]) if regs.active else None
        total = None
        loss = 0.0
        for j in range(cfg.accumulation):
            mb = idx[j * cfg.batch_size:(j + 1) * cfg.batch_size]
            part, g, _ = loss_and_grads(self.net, self.x_train[mb], self.y_train[mb],
                                        scale=1.0 / n_eff, regularizers=regs, rng=rng)
            loss += part
            if total is None:
                total = [p.copy() for p in g.params]
            else:
                for t, p in zip(total, g.params):
                    t += p
        adam_step(self.net, total, self.state, cfg)
        self.step += 1
        return loss

    def evaluate(self) -> EvalRecord:
        net = self.net
        fp = forward(net, self.x_train)
        losses, _ = softmax_cross_entropy(fp.logits, self.y_train)
        train_acc = float(np.mean(np.argmax(fp.logits, axis=1) == self.y_train))
        circuit = discretize_network(net)
        train_disc = discretized_accuracy(net, self.x_train, self.y_train, circuit)
        test_acc = test_disc = None
        if self.x_test is not None:
            test_acc = continuous_accuracy(net, self.x_test, self.y_test)
            test_disc = discretized_accuracy(net, self.x_test, self.y_test, circuit)
        probe = slice(0, min(len(self.y_train), self.config.batch_size))
        prof = grad_norm_profile(net, self.x_train[probe], self.y_train[probe])
        rec = EvalRecord(self.step, float(np.mean(losses)), train_acc, train_disc,
                         test_acc, test_disc, prof.input_norms)
        self.metrics.records.append(rec)
        for layer in self.config.histogram_layers:
            counts, edges = np.histogram(fp.activations[layer - 1], bins=HISTOGRAM_BINS,
                                         range=(0.0, 1.0))
            self.metrics.histograms.append(HistogramSnapshot(self.step, layer, counts, edges))
        log.info("step %d loss %.5f train %.4f disc %.4f", rec.step, rec.loss,
                 rec.train_acc, rec.train_acc_disc)
        return rec

    def run(self, until: int | None = None, on_eval=None) -> RunMetrics:
        cfg = self.config
        end = cfg.steps if until is None else until
        if self.step == 0 and not self.metrics.records:
            self.evaluate()
            if on_eval:
                on_eval(self)
        while self.step < end:
            self.train_step()
            if self.step % cfg.eval_every == 0 or self.step == end:
                self.evaluate()
                if on_eval:
                    on_eval(self)
        return self.metrics


def train_loop(net: Network, data: Dataset, config: TrainConfig,
               test: Dataset | None = None) -> RunMetrics:
    return Trainer(net, data, config, test).run()
