"""Loss surfaces: diagonal quadratics and two-layer tanh networks with MSE.

Both objective kinds expose the same surface: loss, gradient,
loss_and_gradient, and an exact Hessian-vector product. FNN derivatives are
closed form (reverse mode for the gradient, a forward-over-reverse sweep for
the HVP) and are cross-checked against finite differences in the test suite.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergedEvaluation
from .params import ParamVector
from .rngs import stream

# === specs ==================================================================


@dataclass(frozen=True)
class QuadraticSpec:
    """L(theta) = 1/2 sum_i lambda_i (theta_i - offset_i)^2."""

    eigenvalues: tuple
    offset: tuple = None

    def __post_init__(self):
        eig = tuple(float(x) for x in np.atleast_1d(self.eigenvalues))
        if len(eig) < 1 or not all(math.isfinite(x) for x in eig):
            raise ConfigError("eigenvalues must be a nonempty finite sequence")
        object.__setattr__(self, "eigenvalues", eig)
        if self.offset is None:
            object.__setattr__(self, "offset", tuple(0.0 for _ in eig))
        else:
            off = tuple(float(x) for x in np.atleast_1d(self.offset))
            if len(off) != len(eig):
                raise ConfigError("offset length must match eigenvalues")
            object.__setattr__(self, "offset", off)


@dataclass(frozen=True)
class FnnTaskSpec:
    """Two-layer regression task: dataset shape, width, target family, seed."""

    input_dim: int
    width: int
    n_samples: int
    target: str
    noise_std: float = 0.0
    init_variance_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.n_samples < 1 or self.input_dim < 1:
            raise ConfigError("width, n_samples, input_dim must all be >= 1")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.target not in ("sine-mix", "linear-plus-diag-quadratic"):
            raise ConfigError(f"unknown target {self.target!r}")


# === objectives =============================================================


class QuadraticObjective:
    """Diagonal quadratic with exact constant Hessian."""

    kind = "quadratic"

    def __init__(self, spec: QuadraticSpec):
        self.spec = spec
        self.lam = np.array(spec.eigenvalues, dtype=float)
        self.off = np.array(spec.offset, dtype=float)
        self.param_dim = self.lam.size
        self.blocks = (("theta", 0, self.param_dim),)
        self.dataset = None

    def loss(self, theta: np.ndarray) -> float:
        d = np.asarray(theta, dtype=float) - self.off
        val = 0.5 * float(self.lam @ (d * d))
        if not math.isfinite(val):
            raise DivergedEvaluation("quadratic loss is non-finite")
        return val

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        g = self.lam * (np.asarray(theta, dtype=float) - self.off)
        if not np.all(np.isfinite(g)):
            raise DivergedEvaluation("quadratic gradient is non-finite")
        return g

    def loss_and_gradient(self, theta):
        d = np.asarray(theta, dtype=float) - self.off
        g = self.lam * d
        val = 0.5 * float(d @ g)
        if not math.isfinite(val) or not np.all(np.isfinite(g)):
            raise DivergedEvaluation("quadratic evaluation is non-finite")
        return val, g

    def hvp(self, theta, vec) -> np.ndarray:
        return self.lam * np.asarray(vec, dtype=float)

    def lambda_max(self) -> float:
        return float(self.lam.max())

    def initial_point(self, theta0) -> ParamVector:
        arr = np.atleast_1d(np.asarray(theta0, dtype=float))
        if arr.size == 1 and self.param_dim > 1:
            arr = np.full(self.param_dim, arr[0])
        if arr.size != self.param_dim:
            raise ConfigError("theta0 length does not match objective dimension")
        return ParamVector(arr, self.blocks)


class FnnObjective:
    """One hidden tanh layer, f(x) = W2 tanh(W1 x + b1) + b2, MSE loss.

    Parameters are flattened [W1, b1, W2, b2]. The dataset is drawn once at
    construction from the spec seed and frozen.
    """

    kind = "fnn-mse"

    def __init__(self, spec: FnnTaskSpec):
        self.spec = spec
        d, m = spec.input_dim, spec.width
        self.param_dim = m * d + m + m + 1
        self.blocks = (
            ("W1", 0, m * d),
            ("b1", m * d, m),
            ("W2", m * d + m, m),
            ("b2", m * d + 2 * m, 1),
        )
        self.X, self.y = _make_dataset(spec)
        self.dataset = (self.X, self.y)

    # --- forward / derivatives ---

    def _unpack(self, th):
        d, m = self.spec.input_dim, self.spec.width
        W1 = th[: m * d].reshape(m, d)
        b1 = th[m * d : m * d + m]
        W2 = th[m * d + m : m * d + 2 * m]
        b2 = th[-1]
        return W1, b1, W2, b2

    def loss(self, theta) -> float:
        W1, b1, W2, b2 = self._unpack(np.asarray(theta, dtype=float))
        f = np.tanh(self.X @ W1.T + b1) @ W2 + b2
        e = f - self.y
        val = 0.5 * float(e @ e) / e.size
        if not math.isfinite(val):
            raise DivergedEvaluation("fnn loss is non-finite")
        return val

    def loss_and_gradient(self, theta):
        th = np.asarray(theta, dtype=float)
        W1, b1, W2, b2 = self._unpack(th)
        Z = self.X @ W1.T + b1
        H = np.tanh(Z)
        f = H @ W2 + b2
        e = f - self.y
        n = e.size
        r = e / n
        val = 0.5 * float(e @ e) / n
        dW2 = H.T @ r
        db2 = r.sum()
        dZ = (r[:, None] * W2[None, :]) * (1.0 - H * H)
        dW1 = dZ.T @ self.X
        db1 = dZ.sum(axis=0)
        g = np.concatenate([dW1.ravel(), db1, dW2, [db2]])
        if not math.isfinite(val) or not np.all(np.isfinite(g)):
            raise DivergedEvaluation("fnn evaluation is non-finite")
        return val, g

    def gradient(self, theta) -> np.ndarray:
        return self.loss_and_gradient(theta)[1]

    def hvp(self, theta, vec) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        W1, b1, W2, b2 = self._unpack(th)
        V1, c1, V2, c2 = self._unpack(np.asarray(vec, dtype=float))
        n = self.y.size
        Z = self.X @ W1.T + b1
        H = np.tanh(Z)
        T = 1.0 - H * H
        f = H @ W2 + b2
        r = (f - self.y) / n
        RZ = self.X @ V1.T + c1
        RH = T * RZ
        Rf = RH @ W2 + H @ V2 + c2
        Rr = Rf / n
        RdW2 = H.T @ Rr + RH.T @ r
        Rdb2 = Rr.sum()
        RdZ = (Rr[:, None] * W2[None, :] + r[:, None] * V2[None, :]) * T \
            - 2.0 * (r[:, None] * W2[None, :]) * H * RH
        RdW1 = RdZ.T @ self.X
        Rdb1 = RdZ.sum(axis=0)
        out = np.concatenate([RdW1.ravel(), Rdb1, RdW2, [Rdb2]])
        if not np.all(np.isfinite(out)):
            raise DivergedEvaluation("fnn hvp is non-finite")
        return out

    def initial_point(self, theta0=None) -> ParamVector:
        """Gaussian init, every block N(0, scale/width)."""
        if theta0 is not None:
            arr = np.asarray(theta0, dtype=float).ravel()
            if arr.size != self.param_dim:
                raise ConfigError("theta0 length does not match parameter count")
            return ParamVector(arr, self.blocks)
        rng = stream(self.spec.seed, "init")
        sc = math.sqrt(self.spec.init_variance_scale / self.spec.width)
        vals = rng.normal(0.0, sc, size=self.param_dim)
        return ParamVector(vals, self.blocks)


def _make_dataset(spec: FnnTaskSpec):
    rng = stream(spec.seed, "dataset")
    if spec.target == "sine-mix":
        if spec.input_dim != 1:
            raise ConfigError("sine-mix target needs input_dim=1")
        X = rng.uniform(-np.pi, np.pi, size=(spec.n_samples, 1))
        y = np.sin(X[:, 0]) + np.sin(4.0 * X[:, 0])
    else:
        X = rng.standard_normal((spec.n_samples, spec.input_dim))
        wstar = rng.standard_normal(spec.input_dim)
        vstar = rng.standard_normal(spec.input_dim)
        y = X @ wstar + (X * X) @ vstar
    if spec.noise_std > 0:
        y = y + spec.noise_std * rng.standard_normal(spec.n_samples)
    return X, y


# === constructors and functional surface ====================================


def make_quadratic(spec: QuadraticSpec) -> QuadraticObjective:
    return QuadraticObjective(spec)


def make_fnn_task(spec: FnnTaskSpec) -> FnnObjective:
    return FnnObjective(spec)


def loss(obj, point) -> float:
    vals = point.values if isinstance(point, ParamVector) else point
    return obj.loss(vals)


def export_dataset_rows(obj):
    """Yield header + rows for dataset CSV exchange (x_0..x_{d-1}, y)."""
    if obj.dataset is None:
        raise ConfigError("objective has no dataset to export")
    X, y = obj.dataset
    yield [f"x_{j}" for j in range(X.shape[1])] + ["y"]
    for i in range(X.shape[0]):
        yield [repr(float(v)) for v in X[i]] + [repr(float(y[i]))]
