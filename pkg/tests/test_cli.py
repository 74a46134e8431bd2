import json
import shutil
import subprocess
from pathlib import Path

import pytest

from tfimmse.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def load(path):
    return json.loads(Path(path).read_text())


def data_files(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "manifest.json"}


# -- wd ------------------------------------------------------------------------

def test_wd_chirp(tmp_path):
    code, out = run(tmp_path, "wd", "--config", str(CONFIGS / "wd_chirp.toml"))
    assert code == 0
    assert {"wd.csv", "wd.json", "wd.svg", "summary.json", "manifest.json"} <= {p.name for p in out.iterdir()}
    s = load(out / "summary.json")
    assert s["passed"] and max(s["residuals"].values()) <= 1e-9


def test_wd_zero(tmp_path):
    code, out = run(tmp_path, "wd", "--config", str(CONFIGS / "wd_zero.toml"))
    assert code == 0
    s = load(out / "summary.json")
    assert all(v == 0 for v in s["residuals"].values())
    w = load(out / "wd.json")
    assert all(v == 0 for row in w["re"] for v in row)


def test_wd_tone(tmp_path):
    code, out = run(tmp_path, "wd", "--config", str(CONFIGS / "wd_tone.toml"))
    assert code == 0
    assert load(out / "summary.json")["residuals"]["marginal"] <= 1e-9


def test_wd_no_analytic_flag(tmp_path):
    code, out = run(tmp_path, "wd", "--no-analytic")
    assert code == 0
    assert load(out / "manifest.json")["config"]["analytic"] is False


def test_format_filter(tmp_path):
    code, out = run(tmp_path, "wd", "--format", "csv")
    assert code == 0
    assert {p.name for p in out.iterdir()} == {"wd.csv", "manifest.json"}


# -- sampling ------------------------------------------------------------------

def test_sampling_sweep(tmp_path):
    code, out = run(tmp_path, "sampling", "--config", str(CONFIGS / "sampling_triangle.toml"))
    assert code == 0
    rows = load(out / "sampling.json")["rows"]
    m = [r["mmse"] for r in sorted(rows, key=lambda r: r["fs_sub"])]
    assert m[0] >= m[1] >= m[2]
    assert (out / "sampling.csv").read_text().splitlines()[0] == "fs_sub,mmse,recon_energy,total_power"


def test_sampling_nyquist_and_zero_filter_rows(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"fs_sub": [1.0, {"fs_sub": 0.5, "kind": "flat", "gain": 0.0}]}))
    code, out = run(tmp_path, "sampling", "--config", str(cfg))
    assert code == 0
    rows = load(out / "sampling.json")["rows"]
    assert abs(rows[0]["mmse"]) <= 1e-9
    assert rows[1]["mmse"] == pytest.approx(rows[1]["total_power"], abs=1e-15)


# -- immse ---------------------------------------------------------------------

def test_immse_gaussian_pair_acceptance(tmp_path):
    code, out = run(tmp_path, "immse", "--config", str(CONFIGS / "immse_gaussian_pair.toml"))
    assert code == 0
    st = load(out / "manifest.json")["status"]
    assert st["passed"]


def test_immse_bpsk(tmp_path):
    code, out = run(tmp_path, "immse", "--config", str(CONFIGS / "immse_bpsk.toml"))
    assert code == 0


def test_immse_two_point_grid(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("snr_grid = [0.5, 1.0]\n")
    code, _ = run(tmp_path, "immse", "--config", str(cfg))
    assert code == 2
    assert "snr_grid" in capsys.readouterr().err


def test_immse_violation_exit_codes(tmp_path):
    # a zero tolerance with closed-form mmse leaves only the O(delta^2) residual, above 0
    cfg = tmp_path / "c.toml"
    cfg.write_text('tolerance = 0.0\nmmse_method = "closed_form"\ndelta = 0.4\n')
    code, _ = run(tmp_path, "immse", "--config", str(cfg), name="a")
    assert code == 3
    code, out = run(tmp_path, "immse", "--config", str(cfg), "--mode", "explore", name="b")
    assert code == 0
    assert load(out / "manifest.json")["status"]["passed"] is False


# -- tfimmse -------------------------------------------------------------------

def test_tfimmse_x2_off(tmp_path):
    code, out = run(tmp_path, "tfimmse", "--config", str(CONFIGS / "tfimmse_x2_off.json"))
    assert code == 0
    d = load(out / "tfimmse.json")
    nz = [t["index"] for t in d["terms"] if t["re"] != 0 or t["im"] != 0]
    assert nz == [1, 2]
    assert d["comparison"]["available"]
    assert (out / "comparison.csv").read_text().splitlines()[0] == "tf_value,scalar_dmi_dsnr,gap"


def test_tfimmse_real_reduce(tmp_path):
    code, out = run(tmp_path, "tfimmse", "--config", str(CONFIGS / "tfimmse_chirps_real.toml"))
    assert code == 0
    st = load(out / "manifest.json")["status"]
    assert st["reduction"] == "real" and st["regrouping_rel"] <= 1e-9


def test_tfimmse_reduce_flag_overrides(tmp_path):
    code, out = run(tmp_path, "tfimmse", "--config", str(CONFIGS / "tfimmse_x2_off.json"), "--reduce", "real",
                    "--variant", "literal")
    assert code == 0
    m = load(out / "manifest.json")
    assert m["config"]["reduce"] == "real" and m["config"]["variant"] == "literal"
    assert load(out / "tfimmse.json")["variant"] == "literal"


def test_tfimmse_independent(tmp_path):
    code, out = run(tmp_path, "tfimmse", "--config", str(CONFIGS / "tfimmse_independent.toml"))
    assert code == 0
    st = load(out / "manifest.json")["status"]
    assert st["passed"] and st["independent_gap"] <= st["bound"]


# -- validate / usage ----------------------------------------------------------

def test_validate(tmp_path, capsys):
    code, _ = run(tmp_path, "validate")
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 6 and all(l.startswith("PASS") for l in lines)


@pytest.mark.parametrize("text", ["bogus_key = 1\n", "n = \n", 'seed = -1\n'])
def test_bad_config_exit_2(tmp_path, text):
    cfg = tmp_path / "c.toml"
    cfg.write_text(text)
    code, _ = run(tmp_path, "wd", "--config", str(cfg))
    assert code == 2


def test_missing_config_file(tmp_path):
    code, _ = run(tmp_path, "wd", "--config", str(tmp_path / "nope.toml"))
    assert code == 2


def test_bad_model_kind(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"signal": {"kind": "laplace"}}))
    code, _ = run(tmp_path, "wd", "--config", str(cfg))
    assert code == 2


def test_argparse_rejects_unknown_choice():
    with pytest.raises(SystemExit) as e:
        main(["wd", "--format", "png"])
    assert e.value.code == 2


# -- reproducibility -----------------------------------------------------------

@pytest.mark.parametrize("command,config", [
    ("wd", "wd_chirp.toml"), ("sampling", "sampling_triangle.toml"), ("immse", "immse_bpsk.toml"),
    ("tfimmse", "tfimmse_x2_off.json")])
def test_rerun_from_manifest_is_byte_identical(tmp_path, command, config):
    code, first = run(tmp_path, command, "--config", str(CONFIGS / config), name="first")
    assert code == 0
    code, second = run(tmp_path, command, "--config", str(first / "manifest.json"), name="second")
    assert code == 0
    assert data_files(first) == data_files(second)
    m = load(second / "manifest.json")
    assert m["command"] == command and "version" in m and sorted(m["outputs"]) == m["outputs"]


def test_console_script(tmp_path):
    exe = shutil.which("tfimmse")
    if exe is None:
        pytest.skip("console script not installed")
    res = subprocess.run([exe, "wd", "--config", str(CONFIGS / "wd_zero.toml"), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
