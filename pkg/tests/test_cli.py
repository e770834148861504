import json
import shutil
import subprocess

import numpy as np
import pytest

from moltweezer.angular import enumerate_internal
from moltweezer.cli import run
from moltweezer.config import RunConfig, parse_override, parse_time
from moltweezer.errors import ValidationError
from moltweezer.output import read_numeric, read_table

SMALL = ["--n-max", "20", "--set", "grids.a=[6.0, 8.0, 5]", "--set", "numerics.k=6"]


def call(argv, capsys):
    code = run(argv)
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# configuration


@pytest.mark.parametrize(
    "text, seconds",
    [("150ns", 150e-9), ("2us", 2e-6), ("2µs", 2e-6), ("1.5ms", 1.5e-3), ("3e-7", 3e-7), ("1 s", 1.0)],
)
def test_time_suffixes(text, seconds):
    assert parse_time(text) == pytest.approx(seconds, rel=1e-15)


@pytest.mark.parametrize("text", ["5parsecs", "ns", "-3ns", ""])
def test_bad_times_rejected(text):
    with pytest.raises(ValidationError):
        parse_time(text)


def test_override_parsing():
    assert parse_override("grids.a=[1.0, 2.0, 3]") == ("grids", "a", [1.0, 2.0, 3])
    assert parse_override("molecule.preset=nacs") == ("molecule", "preset", "nacs")
    with pytest.raises(ValidationError):
        parse_override("n_max=3")


def test_strict_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[trap]\nseparation = 8.0\n[numerics]\nn_max = 40\n")
    cfg = RunConfig.load(path)
    assert cfg.params().a_over_aho == 8.0 and cfg["numerics"]["n_max"] == 40
    assert cfg["pulse"]["tau"] == pytest.approx(150e-9)
    path.write_text("[trap]\nspacing = 8.0\n")
    with pytest.raises(ValidationError, match="spacing"):
        RunConfig.load(path)
    path.write_text("[traps]\nseparation = 8.0\n")
    with pytest.raises(ValidationError):
        RunConfig.load(path)


# ---------------------------------------------------------------------------
# validate


def test_validate_default_dimensions(capsys):
    code, out, _ = call(["validate"], capsys)
    assert code == 0
    report = json.loads(out)
    M1 = enumerate_internal(2, 1)
    assert report["unsymmetrised_dim"] == 121 * len(M1)
    for name, block in report["blocks"].items():
        assert block["dim"] == 121 * block["internal_dim"], name
        assert block["memory_bytes"] == 4 * block["dim"] ** 2 * 8
    # the two exchange blocks split the M = 1 states
    assert report["blocks"]["gate[+]"]["internal_dim"] + report["blocks"]["gate[-]"]["internal_dim"] == len(M1)
    assert report["blocks"]["gate[00]"]["dim"] == 1331


def test_validate_rejects_eta(capsys):
    code, _, err = call(["validate", "--set", "trap.eta=0.5"], capsys)
    assert code == 1 and "TrapSpec.eta" in err


def test_validate_suggests_cap(capsys):
    code, _, err = call(["validate", "--n-max", "3000"], capsys)
    assert code == 1
    # the first block checked is the M = 1 spectrum block with 8 internal states
    dim = 3001 * 8
    assert f"--set numerics.dim_cap={dim}" in err


@pytest.mark.parametrize(
    "argv",
    [["validate", "--set", "numerics.bogus=1"], ["validate", "--tau", "5parsecs"], ["frobnicate"], ["quench", "--M"]],
)
def test_usage_errors_exit_1(argv, capsys):
    assert call(argv, capsys)[0] == 1


def test_missing_config_is_io_error(tmp_path, capsys):
    out = tmp_path / "out"
    code, _, err = call(["quench", "-c", str(tmp_path / "nope.toml"), "-o", str(out)], capsys)
    assert code == 3 and "nope.toml" in err
    assert not out.exists()


def test_unwritable_output_is_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, _ = call(["quench", "--n-max", "8", "--tau", "10ns", "-o", str(blocker / "sub")], capsys)
    assert code == 3
    assert blocker.read_text() == "x"


def test_numerical_failure_writes_diagnostics(tmp_path, capsys):
    out = tmp_path / "out"
    argv = ["quench", "--n-max", "6", "--set", "numerics.quadrature_tolerance=1e-30", "-o", str(out)]
    code, _, err = call(argv, capsys)
    assert code == 2 and "numerical failure" in err
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["type"] == "QuadratureError" and diag["diagnostics"]["achieved"] > 1e-30
    assert sorted(p.name for p in out.iterdir()) == ["diagnostics.json"]


# ---------------------------------------------------------------------------
# workflows on small bases


def test_spectrum_separation_outputs(tmp_path, capsys):
    code, out, _ = call(["spectrum-separation", "--M", "1", "--beta", "0", *SMALL, "-o", str(tmp_path)], capsys)
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    stem = "spectrum_separation_M1"
    assert names == sorted(f"{stem}{s}" for s in (".tsv", "_tracked.tsv", "_anticrossings.tsv", ".meta.json"))
    assert sorted(out.split()) == [str(tmp_path / n) for n in names]
    cols, rows = read_table(tmp_path / f"{stem}.tsv")
    assert cols[0] == "a[a_ho]" and cols[1].startswith("E1") and "char6" in cols and cols[-3] == "trap_index"
    assert len(rows) == 5
    meta = json.loads((tmp_path / f"{stem}.meta.json").read_text())
    assert meta["command"] == "spectrum-separation" and meta["config"]["numerics"]["n_max"] == 20
    assert meta["results"]["parity"] == -1 and set(meta["files"]) == set(names)


def test_spectrum_field_outputs(tmp_path, capsys):
    argv = ["spectrum-field", "--M", "0", "--n-max", "16", "--set", "grids.beta=[0.0, 0.05, 0.1]", "-o", str(tmp_path)]
    assert call(argv, capsys)[0] == 0
    cols, rows = read_table(tmp_path / "spectrum_field_M0.tsv")
    assert cols[0] == "beta[1]"
    assert np.allclose([float(r[0]) for r in rows], [0.0, 0.05, 0.1])
    assert all(r[cols.index("char1")] in ("trap", "bound", "mixed") for r in rows)


def test_tables_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert call(["spectrum-separation", *SMALL, "-o", str(tmp_path / d)], capsys)[0] == 0
    for f in (tmp_path / "a").glob("*.tsv"):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_quench_table(tmp_path, capsys):
    argv = ["quench", "--M", "1", "--beta", "0.16", "--tau", "20ns", "--n-max", "16", "-o", str(tmp_path)]
    assert call(argv, capsys)[0] == 0
    cols, data = read_numeric(tmp_path / "quench_M1.tsv")
    assert cols[:5] == ["t[s]", "P_initial[1]", "P_bound[1]", "P_higher_branch[1]", "norm[1]"]
    assert data.shape == (500, 5 + 2 * 6)
    assert data[-1, 0] == pytest.approx(20e-9) and data[0, 1] == 1.0
    assert np.abs(data[:, 4] - 1).max() < 1e-8
    meta = json.loads((tmp_path / "quench_M1.meta.json").read_text())
    assert meta["results"]["beta0"] == 0.16 and meta["results"]["parity"] == 1
    assert meta["results"]["reported_states"][0] == meta["results"]["initial_index"]


def test_pulse_and_gate(tmp_path, capsys):
    common = ["--n-max", "8", "--tau", "5ns", "--set", "numerics.samples=11", "--set", "gate.n_fourier=1"]
    assert call(["pulse", *common, "-o", str(tmp_path / "p")], capsys)[0] == 0
    names = {p.name for p in (tmp_path / "p").iterdir()}
    assert {"pulse_00.tsv", "pulse_plus.tsv", "pulse_minus.tsv", "pulse_11.tsv", "pulse_waveform.tsv"} <= names
    _, wave = read_numeric(tmp_path / "p" / "pulse_waveform.tsv")
    assert wave.shape == (6, 2)
    assert np.allclose(wave[:, 1], 0.16 * np.sin(np.pi * wave[:, 0] / 5e-9), rtol=0, atol=1e-12)
    meta = json.loads((tmp_path / "p" / "pulse.meta.json").read_text())
    assert 0 <= meta["results"]["full_fidelity"] <= 1

    assert call(["gate-optimize", *common, "--max-iters", "1", "--seed", "3", "-o", str(tmp_path / "g")], capsys)[0] == 0
    report = json.loads((tmp_path / "g" / "gate_report.json").read_text())
    assert report["target_phases"][3] == 0.0 and len(report["trace"]) <= 2
    _, trace = read_numeric(tmp_path / "g" / "gate_trace.tsv")
    assert np.all(np.diff(trace[:, 2]) >= 0)


def test_output_directory_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MOLTWEEZER_OUTPUT", str(tmp_path / "env"))
    monkeypatch.setenv("MOLTWEEZER_CACHE", str(tmp_path / "cache"))
    assert call(["quench", "--n-max", "8", "--tau", "10ns"], capsys)[0] == 0
    assert (tmp_path / "env" / "quench_M1.tsv").is_file()
    assert list((tmp_path / "cache").glob("spatial-8-*.bin"))


@pytest.mark.skipif(shutil.which("moltweezer") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["moltweezer", "--version"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("moltweezer ")
