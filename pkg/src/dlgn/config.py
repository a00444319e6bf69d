"""Flat ``key = value`` run configuration files."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .init import InitKind, InitScheme
from .network import ConfigError, NetworkConfig, Parametrization
from .neuron import EstimatorKind
from .train import TrainConfig


def _opt_float(s: str):
    return None if s in ("auto", "none", "") else float(s)


def _int_tuple(s: str):
    return tuple(int(v) for v in s.split(",") if v.strip())


def _str(s: str):
    return s


def _opt_str(s: str):
    return None if s in ("none", "") else s


@dataclass
class RunConfig:
    dataset: str = "parity:4"
    test_dataset: str | None = None
    train_fraction: float = 0.8
    thresholds: int = 1
    parametrization: str = "iwp"
    estimator: str = "sin01"
    layer_width: int = 256
    base_layers: int = 4
    depth_scale: int = 1
    final_width_multiplier: int = 1
    tau: float = 10.0
    init: str = "residual"
    init_sigma: float | None = None
    init_mu: float | None = None
    init_z: float = 5.0
    init_targets: tuple[int, ...] = ()
    residual_start: float = 0.0
    residual_end: float = 0.0
    learning_rate: float = 0.01
    steps: int = 5000
    batch_size: int = 100
    accumulation: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    eval_every: int = 1000
    seed: int = 0
    intervention_p: float = 0.0
    intervention_strategy: str = "constant"
    intervention_value: float = 0.5
    dropout_p: float = 0.0
    histogram_layers: tuple[int, ...] = ()
    out_dir: str = "runs/default"

    def init_scheme(self) -> InitScheme:
        if self.init == "and_or":
            return InitScheme.and_or(mu=self.init_mu, sigma=self.init_sigma)
        kind = InitKind(self.init)
        sigma = self.init_sigma
        if kind is InitKind.GAUSSIAN and sigma is None:
            sigma = 1.0
        return InitScheme(kind, sigma=sigma, mu=self.init_mu, z=self.init_z,
                          target_gates=self.init_targets)

    def network_config(self, class_count: int) -> NetworkConfig:
        frac = None
        if self.residual_start or self.residual_end:
            frac = (self.residual_start, self.residual_end)
        cfg = NetworkConfig(
            layer_width=self.layer_width, base_layers=self.base_layers,
            depth_scale=self.depth_scale, class_count=class_count, tau=self.tau,
            parametrization=Parametrization(self.parametrization),
            estimator=EstimatorKind(self.estimator), init=self.init_scheme(),
            residual_fraction=frac, final_layer_width_multiplier=self.final_width_multiplier,
        )
        cfg.validate()
        return cfg

    def train_config(self) -> TrainConfig:
        cfg = TrainConfig(
            learning_rate=self.learning_rate, steps=self.steps, batch_size=self.batch_size,
            accumulation=self.accumulation, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
            weight_decay=self.weight_decay, eval_every=self.eval_every, seed=self.seed,
            intervention_p=self.intervention_p,
            intervention_strategy=self.intervention_strategy,
            intervention_value=self.intervention_value, dropout_p=self.dropout_p,
            histogram_layers=self.histogram_layers,
        )
        cfg.validate(Parametrization(self.parametrization))
        return cfg


_PARSERS = {
    "test_dataset": _opt_str,
    "init_sigma": _opt_float,
    "init_mu": _opt_float,
    "init_targets": _int_tuple,
    "histogram_layers": _int_tuple,
}
_ENUMS = {
    "parametrization": Parametrization,
    "estimator": EstimatorKind,
}


def _parser_for(f):
    if f.name in _PARSERS:
        return _PARSERS[f.name]
    return {"int": int, "float": float, "str": _str}[f.type]


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    known = {f.name: f for f in fields(RunConfig)}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            parsed = _parser_for(known[key])(value)
            if key in _ENUMS:
                _ENUMS[key](parsed)
            if key == "init" and parsed != "and_or":
                InitKind(parsed)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        setattr(cfg, key, parsed)
    return cfg


def format_config(cfg: RunConfig) -> str:
    """Every key with its effective value, in declaration order."""
    return "".join(f"{f.name} = {_format_value(getattr(cfg, f.name))}\n" for f in fields(cfg))


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())
