import subprocess
import sys

import pytest

from cusign.cli import main


def test_validate_ok(capsys):
    assert main(["validate"]) == 0
    assert '"passed": true' in capsys.readouterr().out


def test_usage_errors():
    assert main([]) == 2
    assert main(["nonsense"]) == 2
    assert main(["--samples", "0", "table2"]) == 2
    assert main(["table2", "--taus", "a,b"]) == 2


def test_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[scenario]\nseed = 1\nspeedy = 2\n")
    assert main(["scenario", str(bad)]) == 2
    assert "bad.cfg:3:" in capsys.readouterr().err


def test_scenario_exit_codes(tmp_path):
    cfg = tmp_path / "attacked.cfg"
    cfg.write_text("[scenario]\nduration = 30\n[attack]\nkind = stealthy_persistent\nonset = 1000\nmagnitude = 0.2\n")
    assert main(["--out", str(tmp_path / "r.json"), "scenario", str(cfg), "--trace", str(tmp_path / "t.csv")]) == 0
    # without warmup the estimates start at zero, below the band, so the quiet-fraction check fails
    nominal_like = tmp_path / "n.cfg"
    nominal_like.write_text("[scenario]\nduration = 30\nwarmup = 0\n[cusign]\nz_ref = 0.5\n")
    assert main(["--out", str(tmp_path / "n.json"), "scenario", str(nominal_like), "--trace",
                 str(tmp_path / "n.csv")]) == 1  # fmt: skip


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_outputs_byte_identical(tmp_path, fmt):
    outs = []
    for i in range(2):
        out, hist = tmp_path / f"o{i}.{fmt}", tmp_path / f"h{i}.csv"
        main(["--seed", "3", "--samples", "20000", "--format", fmt, "--out", str(out), "theta", "--taus", "1,2",
              "--histogram", str(hist)])  # fmt: skip
        outs.append((out.read_bytes(), hist.read_bytes()))
    assert outs[0] == outs[1]
    traces = []
    for i in range(2):
        t = tmp_path / f"t{i}.csv"
        main(["--out", str(tmp_path / f"s{i}.json"), "scenario", "nominal", "--trace", str(t)])
        traces.append((t.read_bytes(), (tmp_path / f"s{i}.json").read_bytes()))
    assert traces[0] == traces[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cusign", "validate"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "validate: PASS" in proc.stderr
