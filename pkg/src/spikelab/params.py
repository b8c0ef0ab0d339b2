"""Core value types: labeled parameter vectors and optimizer configuration."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# === parameter vectors =====================================================

Blocks = tuple  # of (name, offset, length)


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Flat real vector with named block ranges for per-block norms.

    The same shape carries theta, gradients, and moment buffers. Blocks must
    partition [0, n) without overlap.
    """

    values: np.ndarray
    blocks: Blocks = ()

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", vals)
        if not self.blocks:
            object.__setattr__(self, "blocks", (("theta", 0, vals.size),))
        cover = 0
        for name, off, length in self.blocks:
            if off != cover or length < 0:
                raise ConfigError(f"blocks must tile [0, n): bad block {name!r}")
            cover += length
        if cover != vals.size:
            raise ConfigError("blocks do not cover the full vector")

    @property
    def dim(self) -> int:
        return self.values.size

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def block_norms(self) -> dict:
        out = {}
        for name, off, length in self.blocks:
            out[name] = float(np.linalg.norm(self.values[off : off + length]))
        return out

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values=values, blocks=self.blocks)


# === optimizer configuration ===============================================


@dataclass(frozen=True)
class AdamHyper:
    """Adam-family hyperparameters. epsilon sits outside the square root."""

    eta: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    bias_correction: bool = True

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError("eta must be > 0")
        if not 0.0 <= self.beta1 < 1.0:
            raise ConfigError("beta1 must lie in [0, 1)")
        if not 0.0 <= self.beta2 < 1.0:
            raise ConfigError("beta2 must lie in [0, 1)")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")


@dataclass(frozen=True)
class LrSchedule:
    """Constant or power-decay learning rate, eta_t = eta0 * (t+1)^(-alpha)."""

    kind: str = "constant"
    eta0: float = 0.1
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "power-decay"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not self.eta0 > 0:
            raise ConfigError("eta0 must be > 0")
        if self.kind == "power-decay" and not 0.0 < self.alpha < 1.0:
            raise ConfigError("power-decay needs alpha in (0, 1)")

    def eta_at(self, t: int) -> float:
        if self.kind == "constant":
            return self.eta0
        return self.eta0 * float(t + 1) ** (-self.alpha)


@dataclass(frozen=True)
class MitigationPlan:
    """Optional interventions: a one-time epsilon bump and a v floor."""

    epsilon_bump: tuple = None  # (at_step, new_epsilon)
    v_floor: float = None
    active: bool = True

    def __post_init__(self):
        if self.epsilon_bump is not None:
            at_step, new_eps = self.epsilon_bump
            if at_step < 0 or new_eps < 0:
                raise ConfigError("epsilon_bump needs at_step >= 0 and new_epsilon >= 0")
            object.__setattr__(self, "epsilon_bump", (int(at_step), float(new_eps)))
        if self.v_floor is not None and self.v_floor < 0:
            raise ConfigError("v_floor must be >= 0")

    def epsilon_at(self, t: int, default_epsilon: float) -> float:
        """Effective epsilon for the step taken at time t."""
        if self.active and self.epsilon_bump is not None and t >= self.epsilon_bump[0]:
            return self.epsilon_bump[1]
        return default_epsilon

    def floor_value(self):
        return self.v_floor if self.active else None


NO_MITIGATION = MitigationPlan()


@dataclass
class OptimizerState:
    """Moment buffers and step counter for one optimizer instance."""

    kind: str
    t: int
    m: np.ndarray
    v: np.ndarray
    extra: dict = field(default_factory=dict)

    @staticmethod
    def fresh(kind: str, dim: int, **extra) -> "OptimizerState":
        return OptimizerState(
            kind=kind,
            t=0,
            m=np.zeros(dim),
            v=np.zeros(dim),
            extra=dict(extra),
        )
