import csv
import json

import pytest

from levyeuler.cli import main
from levyeuler.runner import REPORT_COLUMNS

TINY = """\
[experiment]
name = tiny
kind = {kind}
claim = smoke test
{extra}
[driver]
alpha = 1.5
density = isotropic
epsilon = {eps}
small_jump_mode = {mode}
base_log2 = 10

[coefficients]
family = {family}

[ladder]
n_log2 = 4..7

[statistics]
p = 1
paths = 64
seed = 3
"""


def write_cfg(tmp_path, kind="strong", family="lipschitz", eps=0.05, mode="gaussian_surrogate", extra=""):
    f = tmp_path / "exp.cfg"
    f.write_text(TINY.format(kind=kind, family=family, eps=eps, mode=mode, extra=extra), encoding="utf-8")
    return str(f)


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_constant_config_is_exact(tmp_path, capsys):
    cfg = write_cfg(tmp_path, family="constant:0.5:1.0")
    code, out, _ = run(["run", cfg, "--out", str(tmp_path / "o"), "--workers", "1"], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["fits"][0]["verdict"] == "exact"
    with open(tmp_path / "o" / "report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert all(float(r["estimate"]) <= 1e-12 for r in rows)


def test_artifacts_format(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    run(["run", cfg, "--out", str(tmp_path / "o"), "--workers", "1"], capsys)
    o = tmp_path / "o"
    raw = (o / "report.csv").read_bytes()
    assert b"\r" not in raw
    header, *rows = raw.decode("utf-8").splitlines()
    assert tuple(header.split(",")) == REPORT_COLUMNS
    assert len(rows) == 4
    manifest = json.loads((o / "manifest.json").read_text())
    assert all(r.split(",")[0] == manifest["config_hash"] for r in rows)
    assert manifest["seed"] == 3 and manifest["version"]
    text = (o / "summary.json").read_text()
    assert text == json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n"
    assert "wall_time" not in text
    plot = (o / "plot.csv").read_text().splitlines()
    assert plot[0] == "series,p,log2_x,log2_estimate,log2_fit"
    assert (o / "rate.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_runs_are_byte_identical(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    run(["run", cfg, "--out", str(tmp_path / "a"), "--workers", "1"], capsys)
    run(["run", cfg, "--out", str(tmp_path / "b"), "--workers", "3"], capsys)
    for name in ("report.csv", "summary.json", "plot.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_failed_verdict_exit_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path, extra="predicted = -5\ntolerance = 0.01\n")
    code, out, _ = run(["run", cfg, "--out", str(tmp_path / "o"), "--workers", "1"], capsys)
    assert code == 1
    assert "FAIL" in out
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["verdict"] == "fail"


def test_symmetry_violation_exit_2(tmp_path, capsys):
    f = tmp_path / "bad.cfg"
    f.write_text(TINY.format(kind="strong", family="lipschitz", eps=0.05, mode="drop", extra="")
                 .replace("alpha = 1.5", "alpha = 1.0").replace("density = isotropic", "density = two-sided:2:1")
                 .replace("p = 1\n", "p = 0.5\n"))
    code, _, err = run(["run", str(f)], capsys)
    assert code == 2
    assert "(sym)" in err
    assert f"{f}:8:" in err


def test_validate_command(tmp_path, capsys):
    code, out, _ = run(["validate", write_cfg(tmp_path)], capsys)
    assert code == 0 and "ok: tiny" in out
    code, _, err = run(["validate", str(tmp_path / "missing.cfg")], capsys)
    assert code == 2


def test_presets_command(capsys):
    code, out, _ = run(["presets"], capsys)
    assert code == 0
    assert len(out.splitlines()) >= 10
    assert "prop-pro3-lipschitz" in out


def test_validate_accepts_preset_name(capsys):
    assert run(["validate", "lemma-c1-sub-alpha"], capsys)[0] == 0


def test_dump_skeleton(tmp_path, capsys):
    code, out, _ = run(["dump-skeleton", write_cfg(tmp_path, eps=0.5), "2"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert rec["path_index"] == 2 and rec["seed"] == 3


def test_env_overrides(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LEVYEULER_OUT", str(tmp_path / "envout"))
    monkeypatch.setenv("LEVYEULER_WORKERS", "2")
    code, _, _ = run(["run", write_cfg(tmp_path, family="constant:0:1")], capsys)
    assert code == 0
    manifest = json.loads((tmp_path / "envout" / "tiny" / "manifest.json").read_text())
    assert manifest["workers"] == 2


def test_weak_and_oracle_kinds(tmp_path, capsys):
    code, _, _ = run(["run", write_cfg(tmp_path, kind="weak", extra="\n"), "--out", str(tmp_path / "w"),
                      "--workers", "1"], capsys)
    summary = json.loads((tmp_path / "w" / "summary.json").read_text())
    assert [c["name"] for c in summary["checks"]][0].startswith("weak <=")
    assert code in (0, 1)
    code, _, _ = run(["run", write_cfg(tmp_path, kind="oracle", eps=0.5, mode="drop"), "--out",
                      str(tmp_path / "x"), "--workers", "1"], capsys)
    summary = json.loads((tmp_path / "x" / "summary.json").read_text())
    assert {f["series"] for f in summary["fits"]} == {"vs-euler", "vs-exact"}


@pytest.mark.parametrize("cmd", [[], ["bogus"]])
def test_bad_usage(cmd):
    with pytest.raises(SystemExit):
        main(cmd)
