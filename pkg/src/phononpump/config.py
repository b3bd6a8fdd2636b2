"""Experiment configuration: YAML loading, overrides, defaulting and validation.

A config is a nested mapping with the sections ``experiment``, ``units``,
``params``, ``dissipation``, ``numerics``, ``sweep`` and ``output``. The
packaged presets in ``presets/`` are complete annotated examples.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, InvalidArgumentError
from .models import (FREQUENCY_FIELDS, DissipationParams, SystemParams,
                     nth_from_temperature)
from .steadystate import SWEEP_AXES

EXPERIMENTS = ("pressure", "evolve_full", "evolve_effective", "steady_sweep",
               "device_prediction", "crt_scan")
UNITS = ("angular", "Hz")
FORMATS = ("csv", "json")
RATE_FIELDS = ("gamma_b", "gamma_D", "gamma_a", "gamma_sigma")
FREQUENCY_AXES = ("drive_frequency", "detuning", "gamma_b", "lambda")

NUMERICS_DEFAULTS = {
    "K": 8,
    "M": 256,
    "periods": 10.0,            # run length in drive periods, unless t_final is set
    "t_final": None,
    "dt_max": None,             # default: 1/40 of the fastest bare period
    "records_per_period": 16,
    "steps_per_period": None,   # RK4 steps of the phonon master equation
    "model": "moments",         # evolve_effective: moments | lindblad
    "methods": ["analytic", "floquet"],
    "converge": True,
    "convergence_tol": 1e-3,
    "max_doublings": 3,
    "max_phonon_cutoff": 240,
}

SWEEP_DEFAULTS = {"axis": None, "values": []}
OUTPUT_DEFAULTS = {"directory": "out", "formats": ["csv", "json"]}
DISSIPATION_EXTRA = ("temperature",)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully defaulted experiment description in angular units.

    ``raw`` holds the effective config (after defaulting, before unit
    conversion) exactly as it is embedded in the outputs.
    """

    experiment: str
    units: str
    params: SystemParams
    dissipation: DissipationParams
    numerics: dict
    sweep_axis: str | None
    sweep_values: tuple
    output_dir: str
    formats: tuple
    raw: dict

    @property
    def t_final(self) -> float:
        if self.numerics["t_final"] is not None:
            return float(self.numerics["t_final"])
        return float(self.numerics["periods"]) * self.params.drive_period


def load_yaml(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"cannot parse {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    return data


def preset_names() -> list[str]:
    root = resources.files("phononpump") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> dict:
    if name not in preset_names():
        raise ConfigError("preset", f"unknown preset {name!r}; available: {preset_names()}")
    text = (resources.files("phononpump") / "presets" / f"{name}.yaml").read_text("utf-8")
    return yaml.safe_load(text)


def preset_summary(name: str) -> str:
    text = (resources.files("phononpump") / "presets" / f"{name}.yaml").read_text("utf-8")
    first = text.splitlines()[0] if text else ""
    return first.lstrip("# ").strip()


def apply_override(config: dict, assignment: str) -> dict:
    """Apply ``section.key=value``; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key=value")
    key, value = assignment.split("=", 1)
    path = [part for part in key.strip().split(".") if part]
    if not path:
        raise ConfigError(assignment, "empty key")
    out = copy.deepcopy(config)
    node = out
    for part in path[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(key, f"{part!r} is not a section")
        node = child
    try:
        node[path[-1]] = yaml.safe_load(value)
    except yaml.YAMLError as exc:
        raise ConfigError(key, f"cannot parse value {value!r}") from exc
    return out


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(name, "must be a mapping")
    return dict(value)


def _check_keys(section: str, given: dict, allowed):
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(f"{section}.{unknown[0]}", f"unknown key; allowed: {sorted(allowed)}")


def _expand_values(values, field_name="sweep.values") -> list:
    if isinstance(values, dict):
        _check_keys(field_name, values, ("start", "stop", "num"))
        try:
            grid = np.linspace(float(values["start"]), float(values["stop"]),
                               int(values["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(field_name, "linspace form needs start, stop, num") from exc
        return [float(v) for v in grid]
    if not isinstance(values, (list, tuple)):
        raise ConfigError(field_name, "must be a list or {start, stop, num}")
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ConfigError(field_name, "values must be numbers") from exc


def _coerce_float(section: str, mapping: dict, names):
    """YAML 1.1 reads ``1e9`` as a string; accept it as a number."""
    for name in names:
        value = mapping.get(name)
        if isinstance(value, str):
            try:
                mapping[name] = float(value)
            except ValueError:
                raise ConfigError(f"{section}.{name}", f"not a number: {value!r}") from None


def normalize(data: dict) -> dict:
    """Fill defaults and check structure; returns the effective raw config."""
    _check_keys("<root>", data, ("experiment", "units", "params", "dissipation", "numerics",
                                 "sweep", "output"))
    experiment = data.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}, got {experiment!r}")
    units = data.get("units", "angular")
    if units not in UNITS:
        raise ConfigError("units", f"must be one of {UNITS}, got {units!r}")

    params = _section(data, "params")
    param_names = [f.name for f in fields(SystemParams)]
    _check_keys("params", params, param_names)
    merged_params = asdict(SystemParams())
    merged_params.update(params)
    _coerce_float("params", merged_params, FREQUENCY_FIELDS + ("xi",))
    for key in ("matter_kind", "modulation_shape"):
        merged_params[key] = str(getattr(merged_params[key], "value", merged_params[key]))

    diss = _section(data, "dissipation")
    _check_keys("dissipation", diss, [f.name for f in fields(DissipationParams)]
                + list(DISSIPATION_EXTRA))
    merged_diss = asdict(DissipationParams())
    merged_diss["temperature"] = None
    merged_diss.update(diss)
    _coerce_float("dissipation", merged_diss, RATE_FIELDS + ("n_th", "temperature"))

    numerics = _section(data, "numerics")
    _check_keys("numerics", numerics, NUMERICS_DEFAULTS)
    merged_num = copy.deepcopy(NUMERICS_DEFAULTS)
    merged_num.update(numerics)
    _coerce_float("numerics", merged_num, ("periods", "t_final", "dt_max", "convergence_tol"))

    sweep = _section(data, "sweep")
    _check_keys("sweep", sweep, SWEEP_DEFAULTS)
    merged_sweep = dict(SWEEP_DEFAULTS)
    merged_sweep.update(sweep)
    merged_sweep["values"] = _expand_values(merged_sweep["values"])

    output = _section(data, "output")
    _check_keys("output", output, OUTPUT_DEFAULTS)
    merged_out = copy.deepcopy(OUTPUT_DEFAULTS)
    merged_out.update(output)
    formats = merged_out["formats"]
    if isinstance(formats, str):
        formats = [f.strip() for f in formats.split(",") if f.strip()]
    bad = [f for f in formats if f not in FORMATS]
    if bad or not formats:
        raise ConfigError("output.formats", f"must be a non-empty subset of {FORMATS}")
    merged_out["formats"] = list(formats)

    return {"experiment": experiment, "units": units, "params": merged_params,
            "dissipation": merged_diss, "numerics": merged_num, "sweep": merged_sweep,
            "output": merged_out}


def _check_numerics(num: dict):
    def positive_int(name, minimum=1):
        value = num[name]
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise ConfigError(f"numerics.{name}", f"must be an integer >= {minimum}")

    positive_int("K", 0)
    positive_int("M", 2)
    positive_int("records_per_period", 1)
    positive_int("max_doublings", 0)
    positive_int("max_phonon_cutoff", 2)
    for name in ("periods", "convergence_tol"):
        value = num[name]
        if not isinstance(value, (int, float)) or not value > 0:
            raise ConfigError(f"numerics.{name}", "must be a positive number")
    for name in ("t_final", "dt_max"):
        value = num[name]
        if value is not None and (not isinstance(value, (int, float)) or not value > 0):
            raise ConfigError(f"numerics.{name}", "must be a positive number or null")
    if num["steps_per_period"] is not None:
        positive_int("steps_per_period", 8)
    if num["model"] not in ("moments", "lindblad"):
        raise ConfigError("numerics.model", "must be 'moments' or 'lindblad'")
    methods = num["methods"]
    if not isinstance(methods, list) or not methods or \
            set(methods) - {"analytic", "moments", "floquet"}:
        raise ConfigError("numerics.methods", "must be a non-empty subset of "
                          "[analytic, moments, floquet]")
    if not isinstance(num["converge"], bool):
        raise ConfigError("numerics.converge", "must be true or false")


def to_angular(raw: dict) -> tuple[dict, dict, list]:
    """Params, dissipation and sweep values in angular units (x 2 pi once for Hz)."""
    factor = 2 * math.pi if raw["units"] == "Hz" else 1.0
    params = dict(raw["params"])
    for name in FREQUENCY_FIELDS:
        params[name] = params[name] * factor if isinstance(params[name], (int, float)) \
            else params[name]
    diss = dict(raw["dissipation"])
    for name in RATE_FIELDS:
        diss[name] = diss[name] * factor if isinstance(diss[name], (int, float)) \
            else diss[name]
    values = list(raw["sweep"]["values"])
    if raw["sweep"]["axis"] in FREQUENCY_AXES:
        values = [v * factor for v in values]
    return params, diss, values


def build(data: dict) -> ExperimentConfig:
    """Validate a raw mapping into an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        Naming the offending field.
    """
    raw = normalize(data)
    _check_numerics(raw["numerics"])
    params, diss, values = to_angular(raw)
    temperature = diss.pop("temperature")
    try:
        p = SystemParams(**params)
    except (InvalidArgumentError, TypeError, ValueError) as exc:
        raise ConfigError("params", str(exc)) from exc
    if temperature is not None:
        if raw["units"] != "Hz":
            raise ConfigError("dissipation.temperature",
                              "needs units: Hz so that omega_b is in rad/s")
        if diss["n_th"]:
            raise ConfigError("dissipation.temperature", "give either n_th or temperature")
        try:
            diss["n_th"] = nth_from_temperature(p.omega_b, float(temperature))
        except (InvalidArgumentError, TypeError, ValueError) as exc:
            raise ConfigError("dissipation.temperature", str(exc)) from exc
    try:
        d = DissipationParams(**diss)
    except (InvalidArgumentError, TypeError) as exc:
        raise ConfigError("dissipation", str(exc)) from exc

    experiment = raw["experiment"]
    axis = raw["sweep"]["axis"]
    if experiment == "steady_sweep":
        if axis not in SWEEP_AXES:
            raise ConfigError("sweep.axis", f"must be one of {SWEEP_AXES}, got {axis!r}")
    if experiment == "crt_scan":
        if axis not in (None, "xi"):
            raise ConfigError("sweep.axis", "crt_scan scans xi")
        if not values:
            values = [0.0, 0.5, 1.0]
            raw["sweep"]["values"] = values
        raw["sweep"]["axis"] = "xi"
        axis = "xi"
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ConfigError("sweep.values", "xi values must lie in [0, 1]")
    needs_drive = experiment in ("pressure", "evolve_full", "evolve_effective",
                                 "steady_sweep", "device_prediction", "crt_scan")
    if needs_drive and p.omega_d <= 0:
        raise ConfigError("params.omega_d", "must be > 0")
    if experiment in ("steady_sweep", "device_prediction") and d.gamma_b <= 0 \
            and axis != "gamma_b":
        raise ConfigError("dissipation.gamma_b", "must be > 0 for a steady state")
    return ExperimentConfig(
        experiment=experiment, units=raw["units"], params=p, dissipation=d,
        numerics=raw["numerics"], sweep_axis=axis, sweep_values=tuple(values),
        output_dir=str(raw["output"]["directory"]), formats=tuple(raw["output"]["formats"]),
        raw=raw)


def load_config(path=None, preset: str | None = None, overrides=()) -> ExperimentConfig:
    """Preset (optional) then file (optional) then ``key=value`` overrides."""
    data: dict = {}
    if preset:
        data = load_preset(preset)
    if path is not None:
        data = _deep_merge(data, load_yaml(Path(path)))
    for item in overrides:
        data = apply_override(data, item)
    return build(data)


def _deep_merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in top.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out
