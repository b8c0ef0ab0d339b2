"""Config parsing, presets, and scenario construction."""

import numpy as np
import pytest

from spikelab import PRESETS, build_scenario, load_config_file, preset_config
from spikelab.errors import ConfigError
from spikelab.scenarios import AnalysisPlan, apply_overrides, parse_scalar

# === scalar and file parsing ================================================


@pytest.mark.parametrize("text,expected", [
    ("true", True), ("False", False), ("42", 42), ("-3", -3),
    ("0.15", 0.15), ("1e-8", 1e-8), ("adam", "adam"),
    ("  0.5 ", 0.5), ("1.0,2.0", "1.0,2.0"),
])
def test_parse_scalar(text, expected):
    value = parse_scalar(text)
    assert value == expected
    assert type(value) is type(expected)


def test_load_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# comment\n"
        "optimizer.kind = adam   # trailing comment\n"
        "\n"
        "optimizer.eta = 0.15\n"
        "n_steps = 2000\n")
    flat = load_config_file(path)
    assert flat == {"optimizer.kind": "adam", "optimizer.eta": 0.15,
                    "n_steps": 2000}


def test_load_config_file_reports_bad_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("n_steps = 5\njust words\n")
    with pytest.raises(ConfigError, match="2"):
        load_config_file(path)


def test_apply_overrides():
    out = apply_overrides({"a": 1}, ["a=2", "optimizer.eta=0.5"])
    assert out == {"a": 2, "optimizer.eta": 0.5}
    with pytest.raises(ConfigError):
        apply_overrides({}, ["no-equals-sign"])


def test_analysis_plan_validation():
    with pytest.raises(ConfigError):
        AnalysisPlan(rho=1.0)
    with pytest.raises(ConfigError):
        AnalysisPlan(window=0)


# === presets ================================================================


def test_all_presets_build():
    for name in sorted(PRESETS):
        sc = build_scenario(preset_config(name))
        assert sc.scenario_id == name


def test_preset_config_returns_a_copy():
    cfg = preset_config("fig2a")
    cfg["optimizer.eta"] = 99.0
    assert preset_config("fig2a")["optimizer.eta"] == 0.01


def test_unknown_preset_lists_known_names():
    with pytest.raises(ConfigError, match="fig2a"):
        preset_config("fig999")


def test_fig2a_fields():
    sc = build_scenario(preset_config("fig2a"))
    assert sc.mode == "run"
    assert sc.kind == "adam"
    assert sc.hyper.eta == 0.01
    assert sc.hyper.beta1 == 0.9
    assert sc.hyper.beta2 == 0.99
    assert sc.n_steps == 4000
    assert sc.probes.every == 1
    assert sc.analysis.rho == 3.0 and sc.analysis.window == 50
    assert not sc.analysis.segment
    assert sc.objective.kind == "quadratic"
    assert sc.theta0.values.tolist() == [1.0]


def test_sweep_preset_has_seven_log_spaced_etas():
    cfg = preset_config("fig2bc-sweep")
    assert cfg["sweep.param"] == "optimizer.eta"
    values = [float(v) for v in cfg["sweep.values"].split(",")]
    assert len(values) == 7
    assert values[0] == pytest.approx(1e-3)
    assert values[-1] == pytest.approx(1e-1)
    ratios = np.diff(np.log(values))
    assert np.allclose(ratios, ratios[0])


def test_mitigation_preset_builds_plan():
    sc = build_scenario(preset_config("figD8-mitigations"))
    assert sc.plan.active
    assert sc.plan.v_floor == 0.01
    assert sc.probes.every == 0


def test_epsilon_bump_defaults_to_point_one():
    cfg = preset_config("fig6-fnn50d")
    cfg["plan.epsilon_bump_step"] = 500
    sc = build_scenario(cfg)
    assert sc.plan.epsilon_bump == (500, 0.1)
    assert sc.plan.epsilon_at(499, 1e-8) == 1e-8
    assert sc.plan.epsilon_at(500, 1e-8) == 0.1


def test_theorem_presets_have_no_objective():
    d4 = build_scenario(preset_config("thmD4"))
    assert d4.mode == "five-stage"
    assert d4.objective is None and d4.theta0 is None
    assert d4.hyper.beta2 == 0.99
    d6 = build_scenario(preset_config("thmD6"))
    assert d6.mode == "lr-decay"
    assert d6.sched.kind == "power-decay"
    assert d6.sched.alpha == 0.5
    assert d6.hyper.beta2 == 0.9999


def test_gd_delay_spectrum_shape():
    sc = build_scenario(preset_config("figD12-gd-delay"))
    assert sc.objective.initial_point(1.0).dim == 100
    assert sc.objective.lambda_max() == pytest.approx(110.0)
    assert sc.kind == "gd"


# === build_scenario validation ==============================================


def test_theta0_broadcasts_over_quadratic():
    sc = build_scenario({"objective.eigenvalues": "1.0,2.0", "theta0": 3.0,
                         "n_steps": 5})
    assert sc.theta0.values.tolist() == [3.0, 3.0]


def test_build_rejects_bad_fields():
    with pytest.raises(ConfigError):
        build_scenario({"mode": "dance"})
    with pytest.raises(ConfigError):
        build_scenario({"optimizer.kind": "sgd"})
    with pytest.raises(ConfigError):
        build_scenario({"optimizer.beta2": 1.5})
    with pytest.raises(ConfigError):
        build_scenario({"objective.kind": "cubic"})
    with pytest.raises(ConfigError):
        build_scenario({"n_steps": 0})


def test_flat_echo_round_trip():
    cfg = preset_config("fig3-spike")
    sc = build_scenario(cfg)
    assert sc.flat["optimizer.eta"] == 0.15
    assert sc.flat is not cfg  # defensive copy
