import pytest

from superradiance.config import (
    dump_config,
    load_config,
    params_to_config,
    parse_config,
    system_params,
    validate_config,
)
from superradiance.ensemble import SystemParams
from superradiance.errors import ConfigError


def errors(issues):
    return [i for i in issues if i.level == "error"]


def test_minimal_config_valid():
    cfg, issues = parse_config("kind: transmission_sweep\n")
    assert errors(issues) == []
    assert cfg["seed"] == 0
    assert cfg["transmission_sweep"]["inversions"] == [-1.0, 0.0]


def test_defaults_are_device_parameters():
    cfg, _ = parse_config("kind: transmission_sweep\n")
    p = system_params(cfg)
    ref = SystemParams.device_defaults()
    for name in ("cavity_frequency", "cavity_halfwidth", "collective_coupling", "spin_halfwidth", "total_spins"):
        assert getattr(p, name) == pytest.approx(getattr(ref, name), rel=1e-12)
    assert p.distribution.shape_q == ref.distribution.shape_q


def test_params_round_trip():
    ref = SystemParams.device_defaults()
    cfg, _ = parse_config("kind: transmission_sweep\n")
    cfg["system"] = params_to_config(ref)
    p = system_params(cfg)
    assert p.distribution.fwhm_gamma_q == pytest.approx(ref.distribution.fwhm_gamma_q, rel=1e-12)


def test_threshold_info_line():
    _, issues = parse_config("kind: triggered_sr\ntriggered_sr:\n  p: 0.34\n")
    info = [i for i in issues if i.level == "info"]
    assert len(info) == 1
    assert "above threshold" in info[0].message
    assert "p*C = 4.1" in info[0].message


def test_below_threshold_info():
    _, issues = parse_config("kind: pulse_train\n")
    assert any("below threshold" in i.message for i in issues)


def test_unknown_key_reports_line():
    text = "kind: self_decay\nself_decay:\n  inversions: [0.3]\n  bogus: 1\n"
    issues = errors(parse_config(text)[1])
    assert len(issues) == 1
    assert issues[0].field == "self_decay.bogus"
    assert issues[0].line == 4


def test_zero_kappa_is_named_violation():
    text = "kind: transmission_sweep\nsystem:\n  cavity_halfwidth_hz: 0\n"
    issues = errors(parse_config(text)[1])
    assert [i.field for i in issues] == ["system.cavity_halfwidth_hz"]
    assert issues[0].line == 3


def test_kappa_above_cavity_frequency():
    text = "kind: transmission_sweep\nsystem:\n  cavity_halfwidth_hz: 1.0e12\n"
    assert errors(parse_config(text)[1])[0].field == "system.cavity_halfwidth_hz"


@pytest.mark.parametrize("text, field", [
    ("kind: nope\n", "kind"),
    ("kind: transmission_sweep\nseed: abc\n", "seed"),
    ("kind: transmission_sweep\nensemble: {n_bins: 2.5}\n", "ensemble.n_bins"),
    ("kind: triggered_sr\ntriggered_sr: {path: slow}\n", "triggered_sr.path"),
    ("kind: transmission_sweep\nsystem: {distribution: {shape_q: 3.5}}\n", "system.distribution.shape_q"),
    ("kind: calibration\ncalibration: {pulses: [{power_w: 1.0, port: 1}]}\n", "calibration.pulses[0]"),
    ("kind: calibration\ncalibration: {pulses: [{power_w: 1.0, port: 3, attenuation_db: 0}]}\n",
     "calibration.pulses[0].port"),
])
def test_field_errors(text, field):
    assert field in [i.field for i in errors(parse_config(text)[1])]


def test_yaml_syntax_error_has_line():
    issues = parse_config("kind: transmission_sweep\nsystem: [1, 2\n")[1]
    assert issues[0].field == "<yaml>" and issues[0].line is not None


def test_non_mapping_root():
    assert errors(parse_config("- 1\n- 2\n")[1])


def test_dump_parse_idempotent():
    cfg, _ = parse_config("kind: triggered_sr\nseed: 4\ntriggered_sr: {n_shots: 10}\n")
    once = dump_config(cfg)
    cfg2, issues = parse_config(once)
    assert errors(issues) == []
    assert dump_config(cfg2) == once


def test_load_and_validate(tmp_path):
    good = tmp_path / "good.yaml"
    good.write_text("kind: transmission_sweep\n")
    assert load_config(good)["kind"] == "transmission_sweep"
    assert errors(validate_config(good)) == []
    bad = tmp_path / "bad.yaml"
    bad.write_text("kind: transmission_sweep\nsystem:\n  cavity_halfwidth_hz: 0\n")
    with pytest.raises(ConfigError) as info:
        load_config(bad)
    assert info.value.field == "system.cavity_halfwidth_hz"
    assert info.value.line == 3
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    assert errors(validate_config(tmp_path / "missing.yaml"))
