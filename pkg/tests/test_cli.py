import copy
import hashlib
import json
import os

import numpy as np
import pytest

from eitnoise import compute_spectra
from eitnoise.cli import (
    PRESETS,
    ConfigError,
    format_spectrum_csv,
    load_config,
    main,
    model_from_config,
    parse_values,
    read_spectrum_csv,
)
from eitnoise.model import rad_to_mhz


def base_config():
    cfg, _ = load_config("fig5a")
    cfg = copy.deepcopy(cfg)
    cfg.pop("sweep")
    cfg["analysis"]["freqs_mhz"] = [0.1, 0.5, 1.0]
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


@pytest.mark.parametrize("name", PRESETS)
def test_presets_build_valid_models(name):
    cfg, origin = load_config(name)
    model = model_from_config(cfg)
    assert origin == f"preset:{name}"
    assert model.atom.gamma_exc > 0


def test_fig5a_preset_parameters():
    m = model_from_config(load_config("fig5a")[0])
    g = m.atom.gamma_exc
    assert m.laser1.rabi == pytest.approx(0.1 * g)
    assert m.laser2.rabi == pytest.approx(1.12 * m.laser1.rabi)
    assert m.laser1.linewidth_b == pytest.approx(0.08 * g)
    assert m.atom.gamma_ground == pytest.approx(0.02 * g)
    assert not m.doppler.enabled


def test_fig3b_preset_parameters():
    m = model_from_config(load_config("fig3b")[0])
    assert m.atom.n_levels == 4 and m.doppler.enabled
    assert rad_to_mhz(m.laser1.detuning) == pytest.approx(28.6)
    assert rad_to_mhz(m.grid.omega[0]) == pytest.approx(3.5)


@pytest.mark.parametrize(
    "mutate,match",
    [
        (lambda c: c["analysis"].update(freqs_mhz=[]), "freqs_mhz"),
        (lambda c: c["analysis"].update(freqs_mhz=[1.0, "a"]), "numbers"),
        (lambda c: c["atom"].update(gamma_exc_mhz=0.0), "non-positive decay rate"),
        (lambda c: c["atom"].update(gamma_exc_gamma=1.0), "units of gamma"),
        (lambda c: c["laser1"].update(rabi_mhz=1.0), "more than one unit"),
        (lambda c: c["laser1"].update(rabi="fast"), "unknown field"),
        (lambda c: c["laser1"].pop("rabi_gamma"), "laser1.rabi: missing"),
        (lambda c: c["atom"].update(n_levels=5), "n_levels"),
        (lambda c: c.update(extra=1), "top-level"),
        (lambda c: c["laser2"].update(linewidth_b_gamma="x"), "expected a number"),
    ],
)
def test_config_errors_name_the_field(mutate, match):
    cfg = base_config()
    mutate(cfg)
    with pytest.raises(ConfigError, match=match):
        model_from_config(cfg)


def test_json_syntax_error_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "atom": {\n    "n_levels": 3,,\n  }\n}\n')
    with pytest.raises(ConfigError, match="line 3 column"):
        load_config(str(p))
    with pytest.raises(ConfigError, match="no such file or preset"):
        load_config(str(tmp_path / "missing.json"))


def test_parse_values():
    assert parse_values("0.5, 1,2.2") == [0.5, 1.0, 2.2]
    with pytest.raises(ConfigError):
        parse_values("1,x")


def test_exit_codes(tmp_path, capsys):
    cfg = base_config()
    cfg["analysis"]["freqs_mhz"] = []
    assert main(["spectrum", write(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    assert "freqs_mhz" in capsys.readouterr().err
    degenerate = base_config()
    for k in ("laser1", "laser2"):
        degenerate[k]["linewidth_b_gamma"] = 0.0
    degenerate["atom"]["gamma_ground_gamma"] = 0.0
    assert main(["spectrum", write(tmp_path, degenerate), "--out", str(tmp_path)]) == 3
    assert "computation failed" in capsys.readouterr().err
    assert main(["oracle", write(tmp_path, base_config() | {"oracle": None}), "--out", str(tmp_path)]) == 2
    assert main(["sweep", write(tmp_path, base_config()), "--axis", "rabi", "--values", "-1",
                 "--out", str(tmp_path)]) == 2


def test_missing_oracle_block(tmp_path, capsys):
    cfg = base_config()
    cfg.pop("oracle")
    assert main(["oracle", write(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    assert "oracle: missing section" in capsys.readouterr().err


def test_spectrum_csv_and_manifest(tmp_path):
    cfg = base_config()
    out = tmp_path / "out"
    assert main(["spectrum", write(tmp_path, cfg), "--out", str(out)]) == 0
    data = read_spectrum_csv(str(out / "fig5a.csv"))
    assert list(data) == ["omega_mhz", "S11", "S22", "S12", "Ss", "Sd", "C"]
    res = compute_spectra(model_from_config(cfg))
    for key in ("S11", "S22", "S12", "Ss", "Sd", "C"):
        np.testing.assert_array_equal(data[key], getattr(res, key))
    np.testing.assert_allclose(data["omega_mhz"], [0.1, 0.5, 1.0], rtol=1e-15)
    manifest = json.loads((out / "fig5a_manifest.json").read_text())
    assert manifest["config"] == cfg and manifest["version"]
    listed = {f["path"]: f["sha256"] for f in manifest["files"]}
    data_files = sorted(p for p in os.listdir(out) if p.endswith(".csv"))
    assert sorted(listed) == data_files
    for name, digest in listed.items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest


def test_missing_c_is_an_empty_field(tmp_path):
    cfg = base_config()
    for k in ("laser1", "laser2"):
        cfg[k]["linewidth_b_gamma"] = 0.0
    res = compute_spectra(model_from_config(cfg))
    text = format_spectrum_csv(res)
    assert all(line.endswith(",") for line in text.splitlines()[1:])
    p = tmp_path / "x.csv"
    p.write_text(text)
    assert np.all(np.isnan(read_spectrum_csv(str(p))["C"]))


def test_single_value_sweep_matches_spectrum_bytes(tmp_path):
    cfg = base_config()
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["spectrum", write(tmp_path, cfg), "--out", str(a)]) == 0
    assert main(["sweep", write(tmp_path, cfg), "--axis", "rabi", "--values", "0.1", "--out", str(b)]) == 0
    assert (a / "fig5a.csv").read_bytes() == (b / "fig5a_rabi_00.csv").read_bytes()
    summary = read_spectrum_csv(str(b / "fig5a_rabi_summary.csv"))
    assert list(summary)[:2] == ["rabi_gamma", "probe_mhz"]
    assert summary["probe_mhz"][0] == pytest.approx(0.1)


def test_sweep_block_in_config(tmp_path):
    cfg = base_config()
    cfg["sweep"] = {"axis": "detuning", "values": [0.0, 1.0], "unit": "gamma"}
    out = tmp_path / "o"
    assert main(["spectrum", write(tmp_path, cfg), "--out", str(out)]) == 0
    s = read_spectrum_csv(str(out / "fig5a_detuning_summary.csv"))
    np.testing.assert_array_equal(s["detuning_gamma"], [0.0, 1.0])
    assert (out / "fig5a_detuning_01.csv").exists()
    cfg["sweep"]["axis"] = "temperature"
    assert main(["spectrum", write(tmp_path, cfg), "--out", str(out)]) == 2


def test_rerun_is_reproducible(tmp_path):
    cfg = base_config()
    hashes = []
    for d in ("r1", "r2"):
        assert main(["spectrum", write(tmp_path, cfg), "--out", str(tmp_path / d)]) == 0
        hashes.append({f["path"]: f["sha256"] for f in
                       json.loads((tmp_path / d / "fig5a_manifest.json").read_text())["files"]})
    assert hashes[0] == hashes[1]


def test_oracle_command_is_reproducible(tmp_path):
    cfg = base_config()
    cfg["oracle"].update(total_time_gamma=0.2 * 2048, n_trajectories=2, segment_length=256,
                         burn_in_gamma=60.0, probe_mhz=[0.5, 1.0])
    outs = []
    for d in ("o1", "o2"):
        assert main(["oracle", write(tmp_path, cfg), "--out", str(tmp_path / d), "--seed", "5"]) == 0
        outs.append((tmp_path / d / "fig5a_comparison.csv").read_text())
        m = json.loads((tmp_path / d / "fig5a_manifest.json").read_text())
        assert m["seed"] == 5 and "PCG64" in m["rng"]
    assert outs[0] == outs[1]
    header = outs[0].splitlines()[0]
    assert header == "omega_mhz,C_deterministic,C_oracle,se_C,z,within_tolerance"
    oracle_csv = read_spectrum_csv(str(tmp_path / "o1" / "fig5a_oracle.csv"))
    assert "se_C" in oracle_csv


def test_presets_command(capsys):
    assert main(["presets"]) == 0
    assert capsys.readouterr().out.split() == list(PRESETS)
