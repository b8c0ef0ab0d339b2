"""Scenario registry: named presets, flat-key configs, and the builder.

Configs are flat dotted-key maps (optimizer.beta2=0.99). Presets return
fully explicit maps; build_scenario turns a map into runnable pieces. A run
is a pure function of its config, including the seed.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .objectives import FnnTaskSpec, QuadraticSpec, make_fnn_task, make_quadratic
from .optimizers import OPTIMIZER_KINDS, ProbePlan
from .params import AdamHyper, LrSchedule, MitigationPlan

# === flat-key parsing =======================================================


def parse_scalar(text: str):
    """Parse one config value: bool, int, float, or string (in that order)."""
    t = text.strip()
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        pass
    return t


def load_config_file(path) -> dict:
    """Flat dotted-key config: 'key = value' lines, '#' comments."""
    flat = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = body.partition("=")
            flat[key.strip()] = parse_scalar(value)
    return flat


def apply_overrides(flat: dict, pairs) -> dict:
    out = dict(flat)
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} must look like key=value")
        key, _, value = pair.partition("=")
        out[key.strip()] = parse_scalar(value)
    return out


def _floats(value):
    if isinstance(value, str):
        return tuple(float(p) for p in value.split(",") if p.strip())
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(v) for v in value)


# === analysis plan ==========================================================


@dataclass(frozen=True)
class AnalysisPlan:
    rho: float = 3.0
    window: int = 50
    segment: bool = False

    def __post_init__(self):
        if self.rho <= 1 or self.window < 1:
            raise ConfigError("analysis needs rho > 1 and window >= 1")


# === built scenario =========================================================


@dataclass
class Scenario:
    """Runnable pieces of one configuration, plus the flat echo."""

    scenario_id: str
    mode: str  # run | five-stage | lr-decay
    seed: int
    n_steps: int
    objective: object
    theta0: object  # ParamVector, None in theorem modes without a trace
    kind: str
    hyper: AdamHyper
    sched: LrSchedule
    plan: MitigationPlan
    probes: ProbePlan
    analysis: AnalysisPlan
    flat: dict


def build_scenario(flat: dict) -> Scenario:
    """Validate a flat config and construct the runnable scenario."""
    flat = dict(flat)
    scenario_id = str(flat.get("scenario", "custom"))
    mode = str(flat.get("mode", "run"))
    if mode not in ("run", "five-stage", "lr-decay"):
        raise ConfigError(f"unknown mode {mode!r}")
    seed = int(flat.get("seed", 0))
    n_steps = int(flat.get("n_steps", 1))

    kind = str(flat.get("optimizer.kind", "adam"))
    if kind not in OPTIMIZER_KINDS:
        raise ConfigError(f"unknown optimizer kind {kind!r}")
    hyper = AdamHyper(
        eta=float(flat.get("optimizer.eta", 0.01)),
        beta1=float(flat.get("optimizer.beta1", 0.9)),
        beta2=float(flat.get("optimizer.beta2", 0.999)),
        epsilon=float(flat.get("optimizer.epsilon", 1e-8)),
        bias_correction=bool(flat.get("optimizer.bias_correction", True)),
    )
    sched = LrSchedule(
        kind=str(flat.get("schedule.kind", "constant")),
        eta0=hyper.eta,
        alpha=float(flat.get("schedule.alpha", 0.0)),
    )
    bump = None
    if "plan.epsilon_bump_step" in flat:
        bump = (int(flat["plan.epsilon_bump_step"]),
                float(flat.get("plan.epsilon_bump_value", 0.1)))
    plan = MitigationPlan(
        epsilon_bump=bump,
        v_floor=float(flat["plan.v_floor"]) if "plan.v_floor" in flat else None,
    )
    probes = ProbePlan(
        every=int(flat.get("probes.every", 0)),
        update_direction=bool(flat.get("probes.update_direction", False)),
        max_iters=int(flat.get("probes.max_iters", 100)),
        tol=float(flat.get("probes.tol", 1e-6)),
    )
    analysis = AnalysisPlan(
        rho=float(flat.get("analysis.rho", 3.0)),
        window=int(flat.get("analysis.window", 50)),
        segment=bool(flat.get("analysis.segment", False)),
    )

    objective = None
    theta0 = None
    if mode == "run":
        obj_kind = str(flat.get("objective.kind", "quadratic"))
        if obj_kind == "quadratic":
            eig = _floats(flat.get("objective.eigenvalues", "1.0"))
            offset = _floats(flat["objective.offset"]) if "objective.offset" in flat else None
            objective = make_quadratic(QuadraticSpec(eigenvalues=eig, offset=offset))
            theta0 = objective.initial_point(_floats(flat.get("theta0", "1.0")))
        elif obj_kind == "fnn":
            spec = FnnTaskSpec(
                input_dim=int(flat.get("objective.input_dim", 1)),
                width=int(flat.get("objective.width", 20)),
                n_samples=int(flat.get("objective.n_samples", 200)),
                target=str(flat.get("objective.target", "sine-mix")),
                noise_std=float(flat.get("objective.noise_std", 0.0)),
                init_variance_scale=float(flat.get("objective.init_scale", 1.0)),
                seed=int(flat.get("objective.seed", seed)),
            )
            objective = make_fnn_task(spec)
            theta0 = objective.initial_point()
        else:
            raise ConfigError(f"unknown objective kind {obj_kind!r}")
        if n_steps < 1:
            raise ConfigError("n_steps must be >= 1")

    return Scenario(
        scenario_id=scenario_id, mode=mode, seed=seed, n_steps=n_steps,
        objective=objective, theta0=theta0, kind=kind, hyper=hyper,
        sched=sched, plan=plan, probes=probes, analysis=analysis, flat=flat,
    )


# === presets ================================================================

ETA_SWEEP_7 = ",".join(repr(float(v)) for v in np.logspace(-3, -1, 7))
BETA2_SWEEP = "0.999,0.99,0.9,0.5,0.1"

_D12_EIGS = ",".join(
    [repr(float(v)) for v in np.linspace(1.0, 99.0, 90)]
    + [repr(float(v)) for v in np.linspace(101.0, 110.0, 10)])


def _quadratic_adam(scenario, eta, beta1, beta2, theta0, n_steps, segment=False):
    return {
        "scenario": scenario, "mode": "run", "seed": 0,
        "n_steps": n_steps, "theta0": theta0,
        "objective.kind": "quadratic", "objective.eigenvalues": "1.0",
        "optimizer.kind": "adam", "optimizer.eta": eta,
        "optimizer.beta1": beta1, "optimizer.beta2": beta2,
        "optimizer.epsilon": 1e-8, "optimizer.bias_correction": True,
        "probes.every": 1,
        "analysis.rho": 3.0, "analysis.window": 50,
        "analysis.segment": segment,
    }


def _fnn_sine(scenario, kind, eta, n_steps, beta2=0.999, probes_every=5):
    cfg = {
        "scenario": scenario, "mode": "run", "seed": 0,
        "n_steps": n_steps,
        "objective.kind": "fnn", "objective.target": "sine-mix",
        "objective.input_dim": 1, "objective.width": 20,
        "objective.n_samples": 200, "objective.noise_std": 0.0,
        "objective.seed": 0,
        "optimizer.kind": kind, "optimizer.eta": eta,
        "optimizer.beta1": 0.9, "optimizer.beta2": beta2,
        "optimizer.epsilon": 1e-8,
        "probes.every": probes_every,
        "analysis.rho": 3.0, "analysis.window": 50,
    }
    return cfg


def _fnn_50d(scenario, n_steps, probes_every):
    return {
        "scenario": scenario, "mode": "run", "seed": 0,
        "n_steps": n_steps,
        "objective.kind": "fnn", "objective.target": "linear-plus-diag-quadratic",
        "objective.input_dim": 50, "objective.width": 1000,
        "objective.n_samples": 200, "objective.noise_std": 0.1,
        "objective.seed": 0,
        "optimizer.kind": "adam", "optimizer.eta": 0.02,
        "optimizer.beta1": 0.9, "optimizer.beta2": 0.999,
        "optimizer.epsilon": 1e-8,
        "probes.every": probes_every,
        "analysis.rho": 3.0, "analysis.window": 50,
    }


def _presets() -> dict:
    p = {}
    p["fig2a"] = _quadratic_adam("fig2a", 0.01, 0.9, 0.99, 1.0, 4000)
    base = _quadratic_adam("fig2bc-sweep", 0.01, 0.9, 0.99, 1.0, 4000)
    base["sweep.param"] = "optimizer.eta"
    base["sweep.values"] = ETA_SWEEP_7
    p["fig2bc-sweep"] = base
    p["fig3-spike"] = _quadratic_adam("fig3-spike", 0.15, 0.9, 0.99, 10.0, 2000,
                                      segment=True)
    p["fig3-oscillation"] = _quadratic_adam("fig3-oscillation", 0.15, 0.6, 0.5,
                                            10.0, 5000, segment=True)
    p["fig5-gd"] = _fnn_sine("fig5-gd", "gd", 0.08, 3000)
    p["fig5-adam"] = _fnn_sine("fig5-adam", "adam", 0.01, 6000)
    p["fig6-fnn50d"] = _fnn_50d("fig6-fnn50d", 2800, 5)

    mit = _fnn_50d("figD8-mitigations", 2800, 0)
    mit["plan.v_floor"] = 0.01
    p["figD8-mitigations"] = mit

    p["figD9-adagrad"] = {
        "scenario": "figD9-adagrad", "mode": "run", "seed": 0,
        "n_steps": 100000, "theta0": 1.0,
        "objective.kind": "quadratic", "objective.eigenvalues": "1.0",
        "optimizer.kind": "adagrad", "optimizer.eta": 0.1,
        "optimizer.beta1": 0.0, "optimizer.beta2": 0.999,
        "optimizer.epsilon": 1e-8,
        "probes.every": 0,
        "analysis.rho": 3.0, "analysis.window": 50,
    }
    p["figD10-rmsprop"] = {
        "scenario": "figD10-rmsprop", "mode": "run", "seed": 0,
        "n_steps": 3000, "theta0": 1.0,
        "objective.kind": "quadratic", "objective.eigenvalues": "1.0",
        "optimizer.kind": "rmsprop", "optimizer.eta": 0.1,
        "optimizer.beta1": 0.0, "optimizer.beta2": 0.99,
        "optimizer.epsilon": 1e-8,
        "probes.every": 1,
        "analysis.rho": 3.0, "analysis.window": 50,
    }
    p["figD11-adafactor"] = {
        "scenario": "figD11-adafactor", "mode": "run", "seed": 0,
        "n_steps": 5000, "theta0": 1.0,
        "objective.kind": "quadratic", "objective.eigenvalues": "1.0",
        "optimizer.kind": "adafactor", "optimizer.eta": 0.01,
        "optimizer.beta1": 0.0, "optimizer.beta2": 0.999,
        "optimizer.epsilon": 1e-8,
        "probes.every": 1,
        "analysis.rho": 3.0, "analysis.window": 50,
    }
    p["figD12-gd-delay"] = {
        "scenario": "figD12-gd-delay", "mode": "run", "seed": 0,
        "n_steps": 300, "theta0": 1.0,
        "objective.kind": "quadratic", "objective.eigenvalues": _D12_EIGS,
        "optimizer.kind": "gd", "optimizer.eta": 0.02,
        "probes.every": 1,
        "analysis.rho": 3.0, "analysis.window": 50,
    }
    p["thmD4"] = {
        "scenario": "thmD4", "mode": "five-stage", "seed": 0,
        "theta0": 10.0, "optimizer.eta": 0.15, "optimizer.beta2": 0.99,
        "optimizer.beta1": 0.0, "optimizer.epsilon": 0.0,
        "optimizer.bias_correction": False,
        "n_steps": 0,  # 0 lets the certificate choose 10 * t1
        "analysis.segment": True,
    }
    p["thmD6"] = {
        "scenario": "thmD6", "mode": "lr-decay", "seed": 0,
        "theta0": 1.0, "optimizer.eta": 0.1, "optimizer.beta2": 0.9999,
        "optimizer.beta1": 0.0,
        "schedule.kind": "power-decay", "schedule.alpha": 0.5,
        "n_steps": 1000000,
    }
    return p


PRESETS = _presets()


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(sorted(PRESETS))}")
    return dict(PRESETS[name])
