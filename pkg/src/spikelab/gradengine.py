"""Gradients, Hessian-vector products, and the dense test oracle.

Objectives carry exact closed-form derivatives; this module adds the
uniform entry points, a central finite-difference HVP backend for
cross-checking, and a dense Hessian assembler capped at small sizes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergedEvaluation, InvalidDirection, OracleSizeExceeded
from .params import ParamVector

DENSE_ORACLE_CAP = 200


def default_fd_step(theta: np.ndarray) -> float:
    """sqrt(machine eps) scaled by the point's magnitude."""
    return math.sqrt(np.finfo(float).eps) * (1.0 + float(np.linalg.norm(theta)))


@dataclass(frozen=True)
class HvpRequest:
    """One HVP evaluation: where, along what, and with which backend."""

    point: ParamVector
    direction: ParamVector
    backend: str = "exact"
    fd_step: float = None

    def __post_init__(self):
        if self.backend not in ("exact", "central-fd"):
            raise InvalidDirection(f"unknown hvp backend {self.backend!r}")
        if not np.any(self.direction.values):
            raise InvalidDirection("hvp direction must have a nonzero entry")
        if self.fd_step is not None and not self.fd_step > 0:
            raise InvalidDirection("fd_step must be > 0")


def gradient(obj, point: ParamVector) -> ParamVector:
    if not point.is_finite():
        raise DivergedEvaluation("gradient requested at a non-finite point")
    g = obj.gradient(point.values)
    return point.with_values(g)


def hvp(obj, req: HvpRequest) -> ParamVector:
    theta = req.point.values
    v = req.direction.values
    if req.backend == "exact":
        out = obj.hvp(theta, v)
    else:
        h = (req.fd_step or default_fd_step(theta)) / float(np.linalg.norm(v))
        gp = obj.gradient(theta + h * v)
        gm = obj.gradient(theta - h * v)
        out = (gp - gm) / (2.0 * h)
    if not np.all(np.isfinite(out)):
        raise DivergedEvaluation("hvp produced a non-finite value")
    return req.point.with_values(out)


def dense_hessian(obj, point: ParamVector) -> np.ndarray:
    """Assemble the full Hessian from unit-vector HVPs, then symmetrize.

    Test oracle only; refuses above DENSE_ORACLE_CAP parameters.
    """
    n = point.dim
    if n > DENSE_ORACLE_CAP:
        raise OracleSizeExceeded(f"dense hessian capped at n <= {DENSE_ORACLE_CAP}")
    cols = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        cols[:, j] = obj.hvp(point.values, e)
        e[j] = 0.0
    return 0.5 * (cols + cols.T)
