import csv
import json
import math
import os
import stat

import numpy as np
import pytest
import yaml

from phononpump import cli
from phononpump.config import (apply_override, build, load_config, load_preset,
                               preset_names)
from phononpump.errors import ConfigError
from phononpump.experiments import RunRecord, run
from phononpump.export import export, to_csv, to_json

PRESETS = ("device", "fig2", "fig3a", "fig3b", "fig3c", "fig4", "fig6")


def pressure_config(**params):
    base = {"omega_a": 1.0, "omega_sigma": 1.0, "lambda0": 0.5, "delta_omega": 1.0,
            "omega_b": 1e-3, "omega_d": 1e-3, "cavity_cutoff": 8}
    base.update(params)
    return {"experiment": "pressure", "units": "angular", "params": base,
            "numerics": {"K": 3, "M": 32, "max_doublings": 1}}


def sweep_config(values=(0.0, 1.0, 2.0)):
    return {"experiment": "steady_sweep",
            "params": {"omega_a": 1.0, "omega_sigma": 1.0, "lambda0": 0.5,
                       "delta_omega": 1.0, "omega_b": 0.01, "omega_d": 0.01, "g": 0.001,
                       "cavity_cutoff": 8},
            "dissipation": {"gamma_b": 1e-4, "gamma_D": 5e-5},
            "numerics": {"K": 2, "M": 32, "methods": ["analytic", "moments"],
                         "converge": False},
            "sweep": {"axis": "n_th", "values": list(values)}}


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_presets_are_packaged_and_valid():
    assert tuple(preset_names()) == PRESETS
    for name in PRESETS:
        cfg = build(load_preset(name))
        assert cfg.experiment


@pytest.mark.parametrize("mutate, field", [
    (lambda c: c.update(experiment="fly"), "experiment"),
    (lambda c: c.update(units="rpm"), "units"),
    (lambda c: c["params"].update(bogus=1), "params.bogus"),
    (lambda c: c["params"].update(omega_a="fast"), "params.omega_a"),
    (lambda c: c["params"].update(xi=2.0), "params"),
    (lambda c: c.setdefault("numerics", {}).update(K=-1), "numerics.K"),
    (lambda c: c.setdefault("numerics", {}).update(model="exact"), "numerics.model"),
    (lambda c: c.setdefault("output", {}).update(formats=["xml"]), "output.formats"),
    (lambda c: c.setdefault("dissipation", {}).update(temperature=0.01),
     "dissipation.temperature"),
])
def test_validation_names_the_field(mutate, field):
    data = pressure_config()
    mutate(data)
    with pytest.raises(ConfigError) as info:
        build(data)
    assert info.value.field == field


def test_sweep_needs_axis_and_loss():
    data = sweep_config()
    data["sweep"]["axis"] = "colour"
    with pytest.raises(ConfigError, match="sweep.axis"):
        build(data)
    data = sweep_config()
    data["dissipation"]["gamma_b"] = 0.0
    with pytest.raises(ConfigError):
        build(data)


def test_overrides_parse_yaml_values():
    data = apply_override(pressure_config(), "params.g=2.5e-3")
    assert data["params"]["g"] == pytest.approx(2.5e-3)
    data = apply_override(data, "numerics.methods=[analytic]")
    assert data["numerics"]["methods"] == ["analytic"]
    with pytest.raises(ConfigError):
        apply_override(data, "params.g")
    with pytest.raises(ConfigError):
        apply_override(data, "params.g.x=1")


def test_exponent_strings_are_numbers():
    data = pressure_config(omega_a="9.2e9", omega_sigma="9.2e9", lambda0="4.6e9",
                           omega_b="1e6", omega_d="1e6", delta_omega="1e9")
    assert build(data).params.omega_a == 9.2e9


def test_linspace_sweep_values():
    data = sweep_config()
    data["sweep"]["values"] = {"start": 0, "stop": 1, "num": 5}
    assert list(build(data).sweep_values) == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_hz_and_angular_configs_agree(tmp_path):
    hz = sweep_config()
    hz["units"] = "Hz"
    angular = sweep_config()
    factor = 2 * math.pi
    for key in ("omega_a", "omega_sigma", "lambda0", "delta_omega", "omega_b", "omega_d",
                "g"):
        angular["params"][key] = hz["params"][key] * factor
    for key in ("gamma_b", "gamma_D"):
        angular["dissipation"][key] = hz["dissipation"][key] * factor
    a, b = run(build(hz)), run(build(angular))
    for name in ("n_ss_analytic", "n_ss_moments"):
        np.testing.assert_allclose(a.payload[name], b.payload[name], rtol=1e-12)
    np.testing.assert_allclose(a.payload["omega_d"], b.payload["omega_d"], rtol=1e-15)


def test_temperature_sets_thermal_occupation():
    cfg = build({"experiment": "device_prediction", "units": "Hz",
                 "params": {"omega_b": 1e6, "omega_d": 1e6},
                 "dissipation": {"gamma_b": 0.4, "temperature": 0.01}})
    assert 190 <= cfg.dissipation.n_th <= 220


def test_config_merge_order(tmp_path):
    path = write_yaml(tmp_path / "c.yaml", {"params": {"g": 0.004}})
    cfg = load_config(path, preset="fig3a", overrides=["params.g=0.005"])
    assert cfg.params.g == 0.005
    cfg = load_config(path, preset="fig3a")
    assert cfg.params.g == 0.004
    assert cfg.params.omega_a == 400.0


def test_csv_contract_three_points():
    record = RunRecord(config={"experiment": "evolve_full"}, version="x", walltime_s=0.0,
                       convergence=[], payload={"t": np.array([0.0, 0.5, 1.0]),
                                                "b_mean": np.array([0, 1j, 2 + 1j]),
                                                "N_of_t": np.array([1.0, 2.0, 3.0]) + 0j})
    text = to_csv(record)
    lines = text.split("\n")
    assert lines[-1] == "" and "\r" not in text
    rows = list(csv.reader(lines[:-1]))
    assert len(rows) == 4
    assert rows[0] == ["t", "b_mean_re", "b_mean_im", "N_of_t_re", "N_of_t_im"]
    assert all(len(r) == 5 for r in rows)
    assert rows[2][2] == "1"


def test_empty_sweep_exports_header_only(tmp_path):
    record = run(build(sweep_config(values=())))
    paths = export(record, tmp_path)
    csv_text = (tmp_path / "steady_sweep.csv").read_text()
    assert csv_text.count("\n") == 1 and csv_text.startswith("value,")
    doc = json.loads((tmp_path / "steady_sweep.json").read_text())
    assert all(v == [] for v in doc["data"].values())
    assert {p.name for p in paths} == {"steady_sweep.config.yaml", "steady_sweep.csv",
                                       "steady_sweep.json"}


def test_json_round_trip_is_bit_exact():
    record = run(build(sweep_config()))
    doc = json.loads(to_json(record))
    for name, column in record.payload.items():
        arr = np.asarray(column)
        if arr.dtype.kind == "c":
            assert doc["data"][f"{name}_re"] == [float(v) for v in arr.real]
            assert doc["data"][f"{name}_im"] == [float(v) for v in arr.imag]
        elif arr.dtype.kind == "f":
            assert [v if v is not None else math.nan for v in doc["data"][name]] == \
                pytest.approx(list(arr), nan_ok=True, rel=0, abs=0)
    assert doc["meta"]["config"]["experiment"] == "steady_sweep"
    assert set(doc["meta"]) >= {"config", "version", "walltime_s", "convergence"}


def test_csv_floats_round_trip():
    record = run(build(sweep_config()))
    rows = list(csv.DictReader(to_csv(record).splitlines()))
    assert [float(r["n_ss_moments"]) for r in rows] == list(record.payload["n_ss_moments"])


def test_identical_configs_give_identical_payloads():
    docs = [json.loads(to_json(run(build(sweep_config())))) for _ in range(2)]
    assert docs[0]["data"] == docs[1]["data"]


def test_pressure_without_coupling_is_zero():
    record = run(build(pressure_config(lambda0=0.0)))
    assert np.max(record.payload["abs_N_k"]) < 1e-12


def test_export_embeds_effective_config(tmp_path):
    record = run(build(pressure_config()))
    export(record, tmp_path, ("json",))
    sidecar = yaml.safe_load((tmp_path / "pressure.config.yaml").read_text())
    assert sidecar["numerics"]["K"] == 3
    assert sidecar["numerics"]["records_per_period"] == 16
    mode = stat.S_IMODE(os.stat(tmp_path / "pressure.json").st_mode)
    assert mode & stat.S_IRUSR
    assert not list(tmp_path.glob(".*"))


def test_cli_run_and_outputs(tmp_path, capsys):
    path = write_yaml(tmp_path / "p.yaml", pressure_config())
    out = tmp_path / "out"
    code = cli.main(["run", path, "--out", str(out), "--format", "csv"])
    assert code == 0
    assert (out / "pressure.csv").exists()
    assert not (out / "pressure.json").exists()
    assert str(out / "pressure.csv") in capsys.readouterr().out


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = write_yaml(tmp_path / "p.yaml", pressure_config())
    assert cli.main(["run", path, "--set", "params.xi=3"]) == cli.EXIT_CONFIG
    assert "params" in capsys.readouterr().err
    assert cli.main(["run"]) == cli.EXIT_CONFIG


def test_cli_numerical_error_exit_code(tmp_path):
    data = pressure_config(omega_sigma=0.0, lambda0=0.0, delta_omega=0.0)
    path = write_yaml(tmp_path / "p.yaml", data)
    assert cli.main(["run", path, "--out", str(tmp_path)]) == cli.EXIT_NUMERIC


def test_cli_io_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    path = write_yaml(tmp_path / "p.yaml", pressure_config())
    assert cli.main(["run", path, "--out", str(blocker / "sub")]) == cli.EXIT_IO


def test_cli_validate_and_presets(tmp_path, capsys):
    path = write_yaml(tmp_path / "p.yaml", pressure_config())
    assert cli.main(["validate", path]) == 0
    assert "ok: pressure" in capsys.readouterr().out
    assert cli.main(["presets", "list"]) == 0
    listing = capsys.readouterr().out
    assert all(name in listing for name in PRESETS)
    assert cli.main(["presets", "show", "fig3b"]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["sweep"]["axis"] == "detuning"
    assert cli.main(["presets", "show", "nope"]) == cli.EXIT_CONFIG


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    assert cli._workers(None) == 3
    assert cli._workers(2) == 2
    monkeypatch.setenv(cli.WORKERS_ENV, "many")
    with pytest.raises(ConfigError):
        cli._workers(None)
    monkeypatch.delenv(cli.WORKERS_ENV)
    assert cli._workers(None) == (os.cpu_count() or 1)
