"""Initialization schemes for OP and IWP neurons."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import gates
from .neuron import EstimatorKind, IwpParams, OpParams, estimator_center


class InitKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    RESIDUAL = "residual"
    HEAVY_TAIL_SET = "heavy_tail_set"
    UNIFORM16 = "uniform16"


# (mu, sigma) of the sign-shifted normal per estimator
IWP_DEFAULTS = {
    EstimatorKind.SIN01: (1.2, 0.25),
    EstimatorKind.SIGMOID: (3.0, 0.5),
    EstimatorKind.CAPPED_LINEAR_ST: (0.45, 0.05),
}

OP_BIAS = 5.0
AND_OR = (2, 8)


@dataclass(frozen=True)
class InitScheme:
    """An initialization scheme.

    ``sigma`` is the Gaussian spread (gaussian kind), the IWP spread around
    ``+-mu`` (other kinds), or the OP jitter on top of the biased logit.
    ``None`` for ``mu``/``sigma`` selects the estimator-dependent defaults for
    IWP and zero jitter for OP.
    """

    kind: InitKind = InitKind.RESIDUAL
    sigma: float | None = None
    mu: float | None = None
    z: float = OP_BIAS
    target_gates: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", InitKind(self.kind))
        if self.sigma is not None and self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.kind is InitKind.GAUSSIAN and self.sigma is None:
            object.__setattr__(self, "sigma", 1.0)
        targets = tuple(gates.check_gate(g) for g in self.target_gates)
        if self.kind is InitKind.HEAVY_TAIL_SET and not targets:
            raise ValueError("heavy_tail_set needs at least one target gate")
        object.__setattr__(self, "target_gates", targets)

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "InitScheme":
        return cls(InitKind.GAUSSIAN, sigma=sigma)

    @classmethod
    def residual(cls, z: float = OP_BIAS, mu=None, sigma=None) -> "InitScheme":
        return cls(InitKind.RESIDUAL, sigma=sigma, mu=mu, z=z)

    @classmethod
    def heavy_tail(cls, targets, mu=None, sigma=None, z: float = OP_BIAS) -> "InitScheme":
        return cls(InitKind.HEAVY_TAIL_SET, sigma=sigma, mu=mu, z=z, target_gates=tuple(targets))

    @classmethod
    def and_or(cls, mu=None, sigma=None) -> "InitScheme":
        return cls.heavy_tail(AND_OR, mu=mu, sigma=sigma)

    @classmethod
    def uniform16(cls, mu=None, sigma=None) -> "InitScheme":
        return cls(InitKind.UNIFORM16, sigma=sigma, mu=mu)

    @property
    def targets(self) -> tuple[int, ...]:
        if self.kind is InitKind.RESIDUAL:
            return (gates.PASS_A,)
        if self.kind is InitKind.UNIFORM16:
            return tuple(range(1, 17))
        return self.target_gates

    @property
    def negation_asymmetric(self) -> bool:
        if self.kind is InitKind.GAUSSIAN:
            return False
        t = set(self.targets)
        return not any(17 - g in t for g in t)

    def iwp_shift(self, estimator: EstimatorKind) -> tuple[float, float]:
        mu0, sigma0 = IWP_DEFAULTS[EstimatorKind(estimator)]
        return (mu0 if self.mu is None else self.mu,
                sigma0 if self.sigma is None else self.sigma)


def target_bits(gate: int) -> tuple[int, int, int, int]:
    return gates.truth_table(gate)


def _draw_targets(scheme: InitScheme, n: int, rng: np.random.Generator) -> np.ndarray:
    targets = np.asarray(scheme.targets, dtype=np.int64)
    if len(targets) == 1:
        return np.full(n, targets[0], dtype=np.int64)
    return targets[rng.integers(0, len(targets), size=n)]


def init_op_logits(scheme: InitScheme, n: int, rng: np.random.Generator) -> np.ndarray:
    """Logits for ``n`` OP neurons, shape (n, 16)."""
    if scheme.kind is InitKind.GAUSSIAN:
        return rng.normal(0.0, scheme.sigma, size=(n, 16))
    logits = np.zeros((n, 16))
    tg = _draw_targets(scheme, n, rng)
    logits[np.arange(n), tg - 1] = scheme.z
    jitter = scheme.sigma or 0.0
    if jitter > 0:
        logits += rng.normal(0.0, jitter, size=(n, 16))
    return logits


def init_iwp_logits(scheme: InitScheme, estimator: EstimatorKind, n: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Logits for ``n`` IWP neurons, shape (n, 4)."""
    center = estimator_center(estimator)
    if scheme.kind is InitKind.GAUSSIAN:
        return center + rng.normal(0.0, scheme.sigma, size=(n, 4))
    mu, sigma = scheme.iwp_shift(estimator)
    tg = _draw_targets(scheme, n, rng)
    sign = 2.0 * gates.TRUTH[tg - 1].astype(np.float64) - 1.0
    noise = rng.normal(0.0, sigma, size=(n, 4)) if sigma > 0 else np.zeros((n, 4))
    return center + sign * mu + noise


def init_op(scheme: InitScheme, rng: np.random.Generator) -> OpParams:
    return OpParams(init_op_logits(scheme, 1, rng)[0])


def init_iwp(scheme: InitScheme, estimator: EstimatorKind, rng: np.random.Generator) -> IwpParams:
    return IwpParams(init_iwp_logits(scheme, estimator, 1, rng)[0], estimator)
