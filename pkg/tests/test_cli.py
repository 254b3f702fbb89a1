import json
import subprocess
import sys

from aimarket import cli
from aimarket.config import bundled_path


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_default(capsys):
    code, out, _ = run(["validate", str(bundled_path("default"))], capsys)
    assert code == 0 and out.startswith("OK")


def test_validate_m_above_c(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[coordinator]\nm = 31\nc = 30\n")
    code, _, err = run(["validate", str(bad)], capsys)
    assert code == 2
    assert "coordinator.m" in err and "CoordinatorSet" in err


def test_validate_missing(tmp_path, capsys):
    code, _, _ = run(["validate", str(tmp_path / "missing.toml")], capsys)
    assert code == 3


def test_run_writes_report_and_leaves_config_alone(tmp_path, capsys):
    cfg = tmp_path / "s.toml"
    text = bundled_path("tiny").read_text()
    cfg.write_text(text)
    out = tmp_path / "nested" / "report.jsonl"
    code, _, _ = run(["run", str(cfg), "--out", str(out)], capsys)
    assert code == 0
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert lines[0]["record"] == "meta"
    assert cfg.read_text() == text
    assert [p.name for p in out.parent.iterdir()] == ["report.jsonl"]


def test_seed_flag_overrides(tmp_path, capsys):
    out = tmp_path / "r.jsonl"
    run(["run", "tiny", "--seed", "99", "--out", str(out)], capsys)
    assert json.loads(out.read_text().splitlines()[0])["seed"] == 99


def test_adversarial_run_populates_metrics(tmp_path, capsys):
    out = tmp_path / "r.jsonl"
    code, _, _ = run(["run", "flooder", "--out", str(out)], capsys)
    adv = next(json.loads(x) for x in out.read_text().splitlines() if '"record":"adversary"' in x)
    assert code == 0 and adv["flooder_groups"]["flooder"]["accepted"] > 0


def test_run_invalid_and_missing(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("ticks = -1\n")
    assert run(["run", str(bad)], capsys)[0] == 2
    assert run(["run", str(tmp_path / "nope.toml")], capsys)[0] == 3


def test_invariant_violation_exit_code(monkeypatch, capsys):
    from aimarket import errors

    def explode(cfg):
        raise errors.InvariantViolation("boom", [(1, "put", 1)])

    monkeypatch.setattr(cli, "run_scenario", explode)
    code, _, err = run(["run", "tiny"], capsys)
    assert code == 4 and "boom" in err and "put" in err


def test_bench_tiny(capsys):
    code, out, _ = run(["bench", "tiny"], capsys)
    assert code == 0 and "cycles/sec" in out


def test_bench_invalid(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[coordinator]\nm = 0\n")
    assert run(["bench", str(bad)], capsys)[0] == 2


def test_compare(tmp_path, capsys):
    out = tmp_path / "cmp.json"
    code, _, _ = run(["compare", "dos", "--out", str(out)], capsys)
    rec = json.loads(out.read_text())
    assert code == 0 and rec["adversary_share_delta"]["dos"] < 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "aimarket.cli", "validate", "tiny"], capture_output=True, text=True)
    assert proc.returncode == 0 and "OK" in proc.stdout
