"""Scenario configuration files (YAML).

Frequencies and rates are given in Hz in the file and converted to rad/s when
objects are built.  :func:`load_config` returns a normalized nested dict with
every default filled in; ``dump_config(load_config(x))`` is a fixed point.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, ParameterError
from .ensemble import QGaussianSpec, SystemParams, cooperativity, effective_linewidth, hz_to_rad

KINDS = ("self_decay", "triggered_sr", "pulse_train", "transmission_sweep", "inversion_scan", "calibration")

_REQ = object()


def _f(default=_REQ):
    return ("float", default)


def _i(default=_REQ):
    return ("int", default)


def _s(default=_REQ):
    return ("str", default)


def _b(default=_REQ):
    return ("bool", default)


def _l(default=_REQ, item="float"):
    return ("list:" + item, default)


def _opt(kind, default=None):
    return ("opt:" + kind, default)


SYSTEM = {
    "cavity_frequency_hz": _f(3.105e9),
    "cavity_halfwidth_hz": _f(0.51e6),
    "collective_coupling_hz": _f(5.17e6),
    "spin_halfwidth_hz": _f(208.0e3),
    "total_spins": _f(6.4e12),
    "distribution": {
        "center_offset_hz": _f(0.0),
        "fwhm_hz": _f(11.0e6),
        "shape_q": _f(1.39),
    },
}

SCHEMA = {
    "kind": _s(),
    "seed": _i(0),
    "cooldown": _s("II"),
    "system": SYSTEM,
    "ensemble": {"n_bins": _i(500), "span": _f(4.0)},
    "integrator": {"rtol": _f(1e-6), "atol": _f(1e-8), "output_dt": _f(2e-9), "t_end": _f(3e-6)},
    "outputs": {"format": _s("csv"), "binary": _b(False)},
}

SECTIONS = {
    "self_decay": {
        "inversions": _opt("list"),
        "hold_times": _opt("list"),
        "inversion_model": {"p0": _f(0.34), "tau": _f(1.0e-3), "exponent": _f(0.5)},
        "theta": _f(5.85e-4),
        "phi": _f(0.0),
    },
    "triggered_sr": {
        "p": _f(0.34),
        "n_shots": _i(200),
        "width": _f(5.85e-4),
        "n_trig_max": _f(1.5e9),
        "attenuations_db": _l([0.0, -5.0, -10.0, -15.0, -20.0, -25.0, -30.0, -35.0, -40.0, -45.0]),
        "include_untriggered": _b(True),
        "kappa_cal": _opt("float"),
        "path": _s("fast"),
        "trigger_phase": _f(0.0),
        "p_jitter": _f(0.0),
        "reference_amp": _opt("float"),
        "outlier_band": _f(2.5),
        "rescale": _b(True),
        "phase_correction": _b(False),
        "bootstrap": _i(1000),
    },
    "pulse_train": {
        "threshold_product": _f(0.8),
        "pulse_duration": _f(100e-9),
        "pulse_photons": _f(1.0e12),
        "period": _f(5e-6),
        "count": _i(5),
        "phase": _f(0.0),
        "dt": _f(1e-9),
    },
    "transmission_sweep": {
        "inversions": _l([-1.0, 0.0]),
        "span_hz": _f(30e6),
        "points": _i(2001),
        "spin_detuning_hz": _f(0.0),
    },
    "inversion_scan": {
        "duration": _f(400e-9),
        "sweep_span_hz": _f(176e6),
        "envelope_fwhm": _f(200e-9),
        "amplitudes": _l([3e6, 4e6, 5e6]),
        "switch_times": _l([80e-9, 100e-9, 120e-9]),
        "hold_detuning_hz": _f(-26e6),
        "dt": _f(0.1e-9),
        "t_end": _f(600e-9),
    },
    "calibration": {
        "pulses": _l([], item="dict"),
        "ladder": {
            "temperatures": _l([296.0, 42.0, 4.0, 0.9, 0.12, 0.025]),
            "lines_db": _opt("dict", {
                "pump": [None, None, None, -1.5, -2.0],
                "probe": [-1.5, -21.5, -1.5, -11.5, -13.5],
                "out": [-1.5, -1.5, -1.5, -1.5, -30.0],
            }),
        },
        "traces": _opt("dict"),
        "couplings": {"kappa_1_hz": _f(182e3), "kappa_2_hz": _f(59e3), "kappa_tot_hz": _opt("float")},
        "cold_correction_db": _f(5.0),
    },
}

PULSE_KEYS = {"name": "str", "power_w": "float", "attenuation_db": "float", "port": "int", "duration": "float",
              "cold_correction": "bool", "cooldown": "str", "kappa_tot_hz": "float"}


@dataclass(frozen=True)
class Issue:
    level: str
    field: str
    message: str
    line: int | None = None

    def __str__(self):
        where = f" (line {self.line})" if self.line else ""
        return f"{self.level}: {self.field}: {self.message}{where}"


def _line_map(text: str) -> dict:
    """Map dotted key paths to 1-based line numbers."""
    out = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                out[path] = k.start_mark.line + 1
                walk(v, path)

    if root is not None:
        walk(root, "")
    return out


def _coerce(kind: str, value, path: str):
    if kind.startswith("opt:"):
        if value is None:
            return None
        kind = kind[4:]
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError("expected a number", path)
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"expected a number, got {value!r}", path) from None
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError("expected an integer", path)
        return int(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError("expected a string", path)
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError("expected true/false", path)
        return value
    if kind == "dict":
        if not isinstance(value, dict):
            raise ConfigError("expected a mapping", path)
        return value
    if kind == "list":
        kind = "list:float"
    if kind.startswith("list:"):
        if not isinstance(value, (list, tuple)):
            raise ConfigError("expected a list", path)
        item = kind[5:]
        if item == "dict":
            return [dict(v) if isinstance(v, dict) else _coerce("dict", v, path) for v in value]
        return [_coerce(item, v, f"{path}[{k}]") for k, v in enumerate(value)]
    raise AssertionError(kind)


def _apply(schema: dict, data, prefix: str, issues: list, lines: dict):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        issues.append(Issue("error", prefix or "<root>", "expected a mapping", lines.get(prefix)))
        data = {}
    out = {}
    for key in data:
        if key not in schema:
            path = f"{prefix}.{key}" if prefix else str(key)
            issues.append(Issue("error", path, "unknown key", lines.get(path)))
    for key, spec in schema.items():
        path = f"{prefix}.{key}" if prefix else key
        if isinstance(spec, dict):
            out[key] = _apply(spec, data.get(key), path, issues, lines)
            continue
        kind, default = spec
        if key not in data:
            if default is _REQ:
                issues.append(Issue("error", path, "missing required field", lines.get(prefix)))
                continue
            out[key] = copy.deepcopy(default)
            continue
        try:
            out[key] = _coerce(kind, data[key], path)
        except ConfigError as exc:
            issues.append(Issue("error", path, str(exc).split(" [field")[0], lines.get(path)))
    return out


def parse_config(text: str) -> tuple[dict, list]:
    """Normalize a config string; returns ``(config, issues)``."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        return {}, [Issue("error", "<yaml>", f"parse error: {getattr(exc, 'problem', exc)}", line)]
    lines = _line_map(text)
    issues: list = []
    if not isinstance(raw, dict):
        return {}, [Issue("error", "<root>", "config must be a mapping")]
    kind = raw.get("kind")
    schema = dict(SCHEMA)
    if kind in SECTIONS:
        schema[kind] = SECTIONS[kind]
    elif kind is not None:
        issues.append(Issue("error", "kind", f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}",
                            lines.get("kind")))
    cfg = _apply(schema, raw, "", issues, lines)
    if not any(i.level == "error" for i in issues):
        issues.extend(_semantic_checks(cfg, lines))
    return cfg, issues


def _semantic_checks(cfg: dict, lines: dict) -> list:
    issues = []
    sys_ = cfg["system"]

    def err(path, msg):
        issues.append(Issue("error", path, msg, lines.get(path)))

    for key in ("cavity_frequency_hz", "cavity_halfwidth_hz", "collective_coupling_hz", "spin_halfwidth_hz"):
        if not sys_[key] > 0:
            err(f"system.{key}", "must be strictly positive")
    if sys_["cavity_halfwidth_hz"] >= sys_["cavity_frequency_hz"]:
        err("system.cavity_halfwidth_hz", "must be smaller than the cavity frequency")
    if sys_["total_spins"] < 1:
        err("system.total_spins", "must be >= 1")
    dist = sys_["distribution"]
    if not dist["fwhm_hz"] > 0:
        err("system.distribution.fwhm_hz", "must be strictly positive")
    if not 1 < dist["shape_q"] < 3:
        err("system.distribution.shape_q", "must lie in (1, 3)")
    if cfg["ensemble"]["n_bins"] < 3:
        err("ensemble.n_bins", "must be >= 3")
    integ = cfg["integrator"]
    for key in ("rtol", "atol", "output_dt", "t_end"):
        if not integ[key] > 0:
            err(f"integrator.{key}", "must be positive")
    if cfg["outputs"]["format"] not in ("csv", "json"):
        err("outputs.format", "must be csv or json")
    if cfg.get("cooldown") not in ("I", "II"):
        err("cooldown", "must be I or II")

    kind = cfg["kind"]
    sec = cfg.get(kind, {})
    if kind == "self_decay" and sec["inversions"] is None and sec["hold_times"] is None:
        err("self_decay.inversions", "give inversions or hold_times")
    if kind == "triggered_sr":
        if sec["path"] not in ("fast", "physical"):
            err("triggered_sr.path", "must be fast or physical")
        if sec["n_shots"] < 2:
            err("triggered_sr.n_shots", "need at least 2 shots")
    if kind == "calibration":
        for k, pulse in enumerate(sec["pulses"]):
            for key in pulse:
                if key not in PULSE_KEYS:
                    err(f"calibration.pulses[{k}].{key}", "unknown key")
                else:
                    try:
                        pulse[key] = _coerce(PULSE_KEYS[key], pulse[key], f"calibration.pulses[{k}].{key}")
                    except ConfigError as exc:
                        err(f"calibration.pulses[{k}].{key}", str(exc).split(" [field")[0])
            if pulse.get("port", 1) not in (1, 2):
                err(f"calibration.pulses[{k}].port", "must be 1 or 2")
            for key in ("power_w", "attenuation_db", "port"):
                if key not in pulse:
                    err(f"calibration.pulses[{k}]", f"missing {key}")
    if issues:
        return issues

    # threshold pre-check
    try:
        params = system_params(cfg)
        gamma = effective_linewidth(params.distribution, params.spin_halfwidth)
        c = cooperativity(params, gamma)
    except ParameterError as exc:
        return [Issue("error", "system", str(exc))]
    p = None
    if kind == "triggered_sr":
        p = sec["p"]
    elif kind == "self_decay":
        p = max(sec["inversions"]) if sec["inversions"] else sec["inversion_model"]["p0"]
    if kind == "pulse_train":
        pc = sec["threshold_product"]
        state = "above threshold" if pc > 1 else "below threshold"
        issues.append(Issue("info", "pulse_train.threshold_product", f"C = {c:.3g}, p*C = {pc:.3g} ({state})"))
    elif p is not None:
        pc = p * c
        state = "above threshold" if pc > 1 else "below threshold"
        issues.append(Issue("info", kind, f"C = {c:.3g}, p*C = {pc:.3g} ({state})"))
    return issues


def load_config(path) -> dict:
    """Parse and validate; raises :class:`ConfigError` on the first error."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cfg, issues = parse_config(path.read_text())
    for issue in issues:
        if issue.level == "error":
            raise ConfigError(issue.message, issue.field, issue.line)
    return cfg


def validate_config(path) -> list:
    path = Path(path)
    if not path.is_file():
        return [Issue("error", "<file>", f"not found: {path}")]
    return parse_config(path.read_text())[1]


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def system_params(cfg: dict) -> SystemParams:
    s = cfg["system"]
    d = s["distribution"]
    wc = hz_to_rad(s["cavity_frequency_hz"])
    spec = QGaussianSpec(wc + hz_to_rad(d["center_offset_hz"]), hz_to_rad(d["fwhm_hz"]), d["shape_q"])
    return SystemParams(
        cavity_frequency=wc,
        cavity_halfwidth=hz_to_rad(s["cavity_halfwidth_hz"]),
        collective_coupling=hz_to_rad(s["collective_coupling_hz"]),
        spin_halfwidth=hz_to_rad(s["spin_halfwidth_hz"]),
        distribution=spec,
        total_spins=s["total_spins"],
    )


def params_to_config(params: SystemParams) -> dict:
    """Inverse of :func:`system_params` (rates back to Hz)."""
    two_pi = 2 * np.pi
    return {
        "cavity_frequency_hz": params.cavity_frequency / two_pi,
        "cavity_halfwidth_hz": params.cavity_halfwidth / two_pi,
        "collective_coupling_hz": params.collective_coupling / two_pi,
        "spin_halfwidth_hz": params.spin_halfwidth / two_pi,
        "total_spins": float(params.total_spins),
        "distribution": {
            "center_offset_hz": (params.distribution.center_frequency - params.cavity_frequency) / two_pi,
            "fwhm_hz": params.distribution.fwhm_gamma_q / two_pi,
            "shape_q": params.distribution.shape_q,
        },
    }
