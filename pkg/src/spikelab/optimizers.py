"""Optimizer steppers (GD, heavy-ball, Adam, RMSProp, Adagrad, Adafactor)
and the instrumented run loop that produces RunTraces.

Update-rule conventions: epsilon is added after the square root; the v floor
clips raw v before bias correction; the epsilon bump replaces epsilon from
its activation step onward; bias exponents are 1-based (the step taken at
time t uses beta^(t+1)).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergedEvaluation, DivergedRun
from .params import NO_MITIGATION, AdamHyper, LrSchedule, MitigationPlan, OptimizerState, ParamVector
from .probes import Preconditioner, ProbeWarmStart, compute_probe
from .trace import RunTrace, StepRecord

DIVERGE_LIMIT = 1e150

OPTIMIZER_KINDS = ("gd", "heavy-ball", "adam", "rmsprop", "adagrad", "adafactor")

ADAFACTOR_EPS1 = 1e-30
ADAFACTOR_EPS2 = 1e-3
ADAFACTOR_CLIP = 1.0


@dataclass(slots=True)
class StepAux:
    """Loop-internal byproducts of one step, enough to probe and record."""

    g: np.ndarray
    eta_t: float
    eps_t: float
    vhat: np.ndarray  # the adaptive denominator's square, None for gd/heavy-ball
    update_vec: np.ndarray


def _rms(x: np.ndarray) -> float:
    return float(np.linalg.norm(x)) / math.sqrt(x.size)


# === single-step updates ====================================================


def _advance(theta, state, hyper, sched, plan, g):
    """Apply one update of state.kind at time state.t. Returns (theta', aux).

    Mutates state in place (moments and step counter).
    """
    t = state.t
    eta_t = sched.eta_at(t)
    eps_t = plan.epsilon_at(t, hyper.epsilon)
    kind = state.kind

    if kind == "gd":
        upd = eta_t * g
        theta_new = theta - upd
        vhat = None
    elif kind == "heavy-ball":
        state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g
        upd = eta_t * state.m
        theta_new = theta - upd
        vhat = None
    elif kind == "adam":
        state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g
        state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * g * g
        floor = plan.floor_value()
        if floor is not None:
            state.v = np.maximum(state.v, floor)
        if hyper.bias_correction:
            mhat = state.m / (1.0 - hyper.beta1 ** (t + 1))
            vhat = state.v / (1.0 - hyper.beta2 ** (t + 1))
        else:
            mhat = state.m
            vhat = state.v
        upd = eta_t * mhat / (np.sqrt(vhat) + eps_t)
        theta_new = theta - upd
    elif kind == "rmsprop":
        state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * g * g
        floor = plan.floor_value()
        if floor is not None:
            state.v = np.maximum(state.v, floor)
        vhat = state.v
        upd = eta_t * g / (np.sqrt(vhat) + eps_t)
        theta_new = theta - upd
    elif kind == "adagrad":
        state.v = state.v + g * g
        floor = plan.floor_value()
        if floor is not None:
            state.v = np.maximum(state.v, floor)
        vhat = state.v
        upd = eta_t * g / (np.sqrt(vhat) + eps_t)
        theta_new = theta - upd
    elif kind == "adafactor":
        eps1 = state.extra.get("eps1", ADAFACTOR_EPS1)
        eps2 = state.extra.get("eps2", ADAFACTOR_EPS2)
        clip_d = state.extra.get("clip_d", ADAFACTOR_CLIP)
        state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * g * g
        floor = plan.floor_value()
        if floor is not None:
            state.v = np.maximum(state.v, floor)
        vhat = state.v
        u = g / (np.sqrt(vhat) + eps1)
        u = u / max(1.0, _rms(u) / clip_d)
        rho_t = max(eps2, _rms(theta))
        upd = (eta_t * rho_t) * u
        theta_new = theta - upd
    else:
        raise ConfigError(f"unknown optimizer kind {kind!r}")

    state.t = t + 1
    return theta_new, StepAux(g=g, eta_t=eta_t, eps_t=eps_t, vhat=vhat, update_vec=upd)


def _probe_preconditioner(kind, hyper, state, aux, theta) -> Preconditioner:
    """Preconditioner snapshot for probes, taken after the moment update."""
    t_exp = state.t  # already incremented: equals the 1-based step count
    if kind == "adam":
        return Preconditioner.for_adam(hyper.beta1, hyper.beta2, t_exp, aux.vhat,
                                       aux.eps_t, hyper.bias_correction)
    if kind in ("rmsprop", "adagrad"):
        return Preconditioner(0.0, hyper.beta2, t_exp, aux.vhat, aux.eps_t, 1.0)
    if kind == "adafactor":
        eps1 = state.extra.get("eps1", ADAFACTOR_EPS1)
        eps2 = state.extra.get("eps2", ADAFACTOR_EPS2)
        rho_t = max(eps2, _rms(theta))
        return Preconditioner(0.0, hyper.beta2, t_exp, aux.vhat, eps1, rho_t)
    ones = np.ones_like(theta)
    if kind == "heavy-ball":
        scale = (1.0 - hyper.beta1) / (1.0 + hyper.beta1)
        return Preconditioner(hyper.beta1, hyper.beta2, t_exp, ones, 0.0, scale)
    return Preconditioner(0.0, hyper.beta2, t_exp, ones, 0.0, 1.0)  # gd


def _vhat_norms(aux, blocks):
    if aux.vhat is None:
        return None, ()
    root = np.sqrt(aux.vhat)
    total = float(np.linalg.norm(root))
    per = tuple(float(np.linalg.norm(root[off:off + length]))
                for _, off, length in blocks)
    return total, per


def _step_public(kind, obj, theta: ParamVector, state, hyper, sched, plan):
    if state.kind != kind:
        raise ConfigError(f"state.kind {state.kind!r} does not match {kind!r}")
    if state.m.size != theta.dim or state.v.size != theta.dim:
        raise ConfigError("state buffers do not match theta dimension")
    loss_before, g = obj.loss_and_gradient(theta.values)
    step_index = state.t
    theta_new, aux = _advance(theta.values, state, hyper, sched, plan, g)
    if not np.all(np.isfinite(theta_new)):
        raise DivergedRun(f"non-finite parameter after step {step_index}")
    total, per = _vhat_norms(aux, theta.blocks)
    record = StepRecord(
        step=step_index,
        loss=obj.loss(theta_new),
        grad_norm=float(np.linalg.norm(g)),
        vhat_norm_total=total,
        vhat_norm_blocks=per,
        eta_t=aux.eta_t,
    )
    return theta.with_values(theta_new), state, record


def step_adam(obj, theta, state, hyper, sched=None, plan=NO_MITIGATION):
    """One Adam step; returns (theta', state', StepRecord)."""
    sched = sched or LrSchedule(eta0=hyper.eta)
    return _step_public("adam", obj, theta, state, hyper, sched, plan)


def step_gd(obj, theta, state, hyper, sched=None, plan=NO_MITIGATION):
    sched = sched or LrSchedule(eta0=hyper.eta)
    return _step_public("gd", obj, theta, state, hyper, sched, plan)


def step_heavy_ball(obj, theta, state, hyper, sched=None, plan=NO_MITIGATION):
    sched = sched or LrSchedule(eta0=hyper.eta)
    return _step_public("heavy-ball", obj, theta, state, hyper, sched, plan)


def step_rmsprop(obj, theta, state, hyper, sched=None, plan=NO_MITIGATION):
    sched = sched or LrSchedule(eta0=hyper.eta)
    return _step_public("rmsprop", obj, theta, state, hyper, sched, plan)


def step_adagrad(obj, theta, state, hyper, sched=None, plan=NO_MITIGATION):
    sched = sched or LrSchedule(eta0=hyper.eta)
    return _step_public("adagrad", obj, theta, state, hyper, sched, plan)


def step_adafactor(obj, theta, state, hyper, sched=None, plan=NO_MITIGATION):
    sched = sched or LrSchedule(eta0=hyper.eta)
    return _step_public("adafactor", obj, theta, state, hyper, sched, plan)


# === run loop ===============================================================


@dataclass(frozen=True)
class ProbePlan:
    """Which spectral probes to take and how often (every=0 disables)."""

    every: int = 0
    update_direction: bool = False
    max_iters: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.every < 0 or self.max_iters < 1 or not self.tol > 0:
            raise ConfigError("bad probe plan")


def run(obj, theta0: ParamVector, kind: str, hyper: AdamHyper,
        sched: LrSchedule = None, plan: MitigationPlan = NO_MITIGATION,
        n_steps: int = 1, probes: ProbePlan = ProbePlan(), seed: int = 0,
        config_echo: dict = None) -> RunTrace:
    """Run n_steps of the chosen optimizer, probing on the configured cadence.

    Divergence (non-finite or enormous parameters, or an evaluation overflow)
    is recorded as status=diverged with the last record flagged; it is never
    raised past the trace.
    """
    if n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    if kind not in OPTIMIZER_KINDS:
        raise ConfigError(f"unknown optimizer kind {kind!r}")
    if not theta0.is_finite():
        raise ConfigError("theta0 must be finite")
    sched = sched or LrSchedule(eta0=hyper.eta)
    state = OptimizerState.fresh(kind, theta0.dim)
    theta = theta0.values.copy()
    blocks = theta0.blocks
    warm = ProbeWarmStart()

    config = dict(config_echo or {})
    config.setdefault("optimizer.kind", kind)
    config.setdefault("objective.kind", obj.kind)
    trace = RunTrace(
        config=config,
        seed=seed,
        status="completed",
        block_names=tuple(name for name, _, _ in blocks),
        initial_loss=obj.loss(theta),
        records=[],
    )
    pending = None
    for i in range(n_steps):
        try:
            loss_here, g = obj.loss_and_gradient(theta)
        except DivergedEvaluation:
            if pending is not None:
                pending.loss = math.inf
                pending.diverged = True
            trace.status = "diverged"
            return trace.validate()
        if pending is not None:
            pending.loss = loss_here

        theta_new, aux = _advance(theta, state, hyper, sched, plan, g)
        total, per = _vhat_norms(aux, blocks)
        rec = StepRecord(
            step=i,
            loss=math.nan,  # backfilled from the next evaluation
            grad_norm=float(np.linalg.norm(g)),
            vhat_norm_total=total,
            vhat_norm_blocks=per,
            eta_t=aux.eta_t,
        )
        if probes.every and i % probes.every == 0:
            pre = _probe_preconditioner(kind, hyper, state, aux, theta)
            upd = aux.update_vec if probes.update_direction else None
            rec.probe = compute_probe(
                obj, theta, pre, g, aux.eta_t, i, seed, warm,
                max_iters=probes.max_iters, tol=probes.tol,
                update_direction=upd,
            )
        trace.records.append(rec)
        pending = rec

        if not np.all(np.isfinite(theta_new)) or np.max(np.abs(theta_new)) > DIVERGE_LIMIT:
            rec.loss = math.inf
            rec.diverged = True
            trace.status = "diverged"
            return trace.validate()
        theta = theta_new

    try:
        pending.loss = obj.loss(theta)
    except DivergedEvaluation:
        pending.loss = math.inf
        pending.diverged = True
        trace.status = "diverged"
    return trace.validate()
